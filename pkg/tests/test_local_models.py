import math

import numpy as np
import pytest

from steinbias.exceptions import (
    DimensionException,
    NotEnumerableException,
    SupportTooLargeException,
    ValidationException,
)
from steinbias.local_models import (
    LOCAL_MODELS,
    HypercubeMax,
    PermPattern,
    SubgraphCount,
    TorusPattern,
    Window,
    build_local_model,
    circular_distance,
)
from tests.conftest import test_pair

HALF = [0.5, 0.5]


def test_window_cells_wrap_around():
    model = Window(5, 3)
    assert model.cells.shape == (5, 3)
    np.testing.assert_array_equal(model.cells[4], [4, 0, 1])


test_args_window_payoff = [
    test_pair(input=("increasing", [0.1, 0.5, 0.9]), expected=1.0),
    test_pair(input=("increasing", [0.1, 0.9, 0.5]), expected=0.0),
    test_pair(input=("mean", [0.3, 0.6, 0.9]), expected=0.6),
]


@pytest.mark.parametrize("test", test_args_window_payoff)
def test_window_payoff(test: test_pair):
    payoff, values = test.input
    assert Window(5, 3, payoff).payoff(np.asarray(values)) == pytest.approx(test.expected)


test_args_expected_value = [
    test_pair(input=Window(10, 3), expected=1 / 6),
    test_pair(input=Window(10, 3, "mean"), expected=0.5),
    test_pair(input=PermPattern(6, 3, [2, 0, 1]), expected=1 / 6),
    test_pair(input=TorusPattern(3, 2, [0.25, 0.75], [0, 1, 1, 0]), expected=0.25**2 * 0.75**2),
    test_pair(input=SubgraphCount(5, 2, 0.6), expected=0.6**6),
    test_pair(input=HypercubeMax(3), expected=0.25),
]


@pytest.mark.parametrize("test", test_args_expected_value)
def test_expected_value_matches_simulation(test: test_pair, rng):
    model = test.input
    assert model.expected_value() == pytest.approx(test.expected)
    x = model.evaluate(model.sample_state(rng, 20_000))
    assert x.mean() == pytest.approx(test.expected, abs=4 * math.sqrt(test.expected / 20_000) + 1e-3)


test_exception_args_models = [
    test_pair(input=(Window, dict(n=3, m=4)), expected=DimensionException),
    test_pair(input=(Window, dict(n=3, m=2, payoff="max")), expected=ValidationException),
    test_pair(input=(PermPattern, dict(n=5, m=2, pattern=[1, 1])), expected=ValidationException),
    test_pair(input=(PermPattern, dict(n=2, m=3)), expected=DimensionException),
    test_pair(input=(TorusPattern, dict(n=3, p=2, colors=[0.5, 0.6], target=[0] * 4)), expected=ValidationException),
    test_pair(input=(TorusPattern, dict(n=3, p=2, colors=HALF, target=[0, 2, 0, 0])), expected=ValidationException),
    test_pair(input=(TorusPattern, dict(n=3, p=2, colors=HALF, target=[0, 1])), expected=ValidationException),
    test_pair(input=(TorusPattern, dict(n=1, p=2, colors=[1.0], target=[0] * 4)), expected=DimensionException),
    test_pair(input=(SubgraphCount, dict(n=2, p=2, edge_probability=0.5)), expected=DimensionException),
    test_pair(input=(SubgraphCount, dict(n=4, p=2, edge_probability=1.5)), expected=ValidationException),
    test_pair(input=(HypercubeMax, dict(p=0)), expected=DimensionException),
]


@pytest.mark.parametrize("test", test_exception_args_models)
def test_model_validation(test: test_pair):
    cls, params = test.input
    with pytest.raises(test.expected):
        cls(**params)


def test_build_local_model():
    assert set(LOCAL_MODELS) == {"window", "perm-pattern", "torus-pattern", "subgraph-count", "hypercube-max"}
    assert isinstance(build_local_model("window", n=10, m=2), Window)
    with pytest.raises(ValidationException):
        build_local_model("triangle", n=10)


def test_perm_pattern_payoff_uses_ranks():
    model = PermPattern(5, 3, [2, 0, 1])
    # ranks of (9, 1, 5) are (2, 0, 1)
    assert model.payoff(np.array([9, 1, 5]))
    assert not model.payoff(np.array([1, 5, 9]))


def test_identity_pattern_counts_increasing_runs(rng):
    model = PermPattern(7, 3)
    states = model.sample_state(rng, 300)
    runs = [
        sum(all(row[(i + k) % 7] < row[(i + k + 1) % 7] for k in range(2)) for i in range(7)) for row in states.tolist()
    ]
    np.testing.assert_array_equal(model.total(states), runs)


def test_regenerate_touches_only_the_cell(rng):
    model = PermPattern(6, 3, [1, 2, 0])
    state = model.sample_state(rng, 50)
    regenerated = model.regenerate(state, np.full(50, 2), rng)
    assert np.all(model.evaluate(regenerated, np.array([2]))[:, 0] == 1.0)
    outside = np.setdiff1d(np.arange(6), model.cells[2])
    np.testing.assert_array_equal(regenerated[:, outside], state[:, outside])
    # still permutations
    np.testing.assert_array_equal(np.sort(regenerated, axis=1), np.tile(np.arange(6), (50, 1)))


def test_window_biased_values(rng):
    model = Window(8, 3, "mean")
    values = model.biased_values(np.zeros((40_000, 3)), rng)
    # the mean-weighted law of a uniform cell has E mean = (1/12 / 3 + 1/4) / (1/2)
    assert values.mean() == pytest.approx((1 / 36 + 1 / 4) / 0.5, abs=0.01)


def test_torus_cells():
    model = TorusPattern(3, 2, [0.5, 0.5], [0, 1, 1, 0])
    assert model.state_size == 9
    assert model.cells.shape == (9, 4)
    # the cube at (2, 2) wraps to (2, 2), (2, 0), (0, 2), (0, 0)
    np.testing.assert_array_equal(model.cells[8], [8, 6, 2, 0])


def test_subgraph_cells_are_distinct_edges():
    model = SubgraphCount(5, 2, 0.6)
    assert model.state_size == 25 * 4
    assert model.cells.shape == (25, 6)
    assert all(len(set(row)) == 6 for row in model.cells.tolist())
    edge_use = np.bincount(model.cells.ravel(), minlength=model.state_size)
    # axis edges lie in two unit squares, diagonals in one
    assert sorted(set(edge_use.tolist())) == [1, 2]


test_args_subgraph_certain_edges = [
    test_pair(input=SubgraphCount(4, 2, 1.0), expected=(16, 16)),
    test_pair(input=SubgraphCount(3, 3, 1.0), expected=(27, 27)),
    test_pair(input=SubgraphCount(4, 2, 0.0), expected=(16, 0)),
]


@pytest.mark.parametrize("test", test_args_subgraph_certain_edges)
def test_subgraph_count_with_certain_edges(test: test_pair, rng):
    model = test.input
    cubes, total = test.expected
    assert model.index_count == cubes
    np.testing.assert_array_equal(model.total(model.sample_state(rng, 5)), total)
    assert model.expected_value() == total / cubes


def test_hypercube_cells_and_distance():
    model = HypercubeMax(3)
    np.testing.assert_array_equal(model.cells[0], [0, 1, 2, 4])
    assert model.index_distance(np.array([0]), np.array([7]))[0] == 3
    assert model.payoff(np.array([0.9, 0.1, 0.5, 0.3]))


test_args_hamming = [
    test_pair(input=(HypercubeMax(10), 0, 1023), expected=10),
    test_pair(input=(HypercubeMax(12), 2048, 1), expected=2),
    test_pair(input=(HypercubeMax(9), np.array([0, 256, 511]), np.array([256, 256, 0])), expected=[1, 0, 9]),
    test_pair(input=(HypercubeMax(12), np.array([[5], [3]]), np.array([[2**11 + 5], [0]])), expected=[[1], [2]]),
]


@pytest.mark.parametrize("test", test_args_hamming)
def test_hypercube_hamming_distance(test: test_pair):
    model, alpha, beta = test.input
    np.testing.assert_array_equal(model.index_distance(alpha, beta), test.expected)


test_args_enumerate_states = [
    test_pair(input=PermPattern(4, 2), expected=24),
    test_pair(input=TorusPattern(2, 1, [0.3, 0.7], [0, 1]), expected=4),
]


@pytest.mark.parametrize("test", test_args_enumerate_states)
def test_enumerate_states(test: test_pair):
    states, probabilities = test.input.enumerate_states(cap=1000)
    assert states.shape[0] == test.expected
    assert probabilities.sum() == pytest.approx(1.0)


def test_enumerate_states_limits():
    with pytest.raises(SupportTooLargeException):
        PermPattern(9, 2).enumerate_states(cap=1000)
    with pytest.raises(NotEnumerableException):
        Window(4, 2).enumerate_states(cap=1000)


def test_circular_distance():
    np.testing.assert_array_equal(circular_distance(np.array([0, 0, 1]), np.array([9, 5, 3]), 10), [1, 5, 2])
