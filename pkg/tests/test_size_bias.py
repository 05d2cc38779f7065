from fractions import Fraction

import numpy as np
import pytest

from steinbias.exceptions import DegenerateException, NotEnumerableException, ValidationException
from steinbias.local_models import HypercubeMax, PermPattern, TorusPattern, Window
from steinbias.size_bias import (
    P_METHOD_EXACT,
    P_METHOD_MC,
    SIZE_RECORD_FIELDS,
    LocalSizeBiasSampler,
    build_dependency_structure,
    delta_proxy_estimate,
    directional_draw,
    exact_delta,
    size_bias_discrete_oracle,
    size_bias_sum_draw,
)
from steinbias.utils import tally
from steinbias.verify import (
    characterizing_check_size,
    chi_square_check,
    directional_check,
    gap_audit,
    variance_identity_check,
)
from tests.conftest import test_pair


@pytest.fixture
def circular_ascent():
    model = PermPattern(3, 2, [0, 1])
    return model, build_dependency_structure(model)


test_args_dependency_structure = [
    test_pair(input=Window(100, 2), expected=dict(b=3, rho=1, V_rho=3, V_3rho=7)),
    test_pair(input=Window(20, 3), expected=dict(b=5, rho=2, V_rho=5, V_3rho=13)),
    test_pair(input=TorusPattern(8, 2, [0.5, 0.5], [0, 1, 1, 0]), expected=dict(b=9, rho=1, V_rho=9, V_3rho=49)),
    test_pair(input=HypercubeMax(3), expected=dict(b=7, rho=2, V_rho=7, V_3rho=8)),
]


@pytest.mark.parametrize("test", test_args_dependency_structure)
def test_dependency_structure(test: test_pair):
    structure = build_dependency_structure(test.input)
    described = structure.describe()
    for key, value in test.expected.items():
        assert described[key] == value
    assert structure.regular
    assert structure.p_method == P_METHOD_EXACT
    np.testing.assert_allclose(structure.p, 1 / test.input.index_count)
    assert structure.gap_bound == test.expected["b"]


def test_dependency_structure_prepass(rng):
    structure = build_dependency_structure(Window(20, 3, "mean"), prepass=5000, rng=rng)
    assert structure.p_method == P_METHOD_MC
    assert structure.p_stderr.shape == (20,)
    np.testing.assert_allclose(structure.p, 1 / 20, atol=4 * structure.p_stderr.max() + 1e-4)
    with pytest.raises(ValidationException):
        build_dependency_structure(Window(20, 3, "mean"), prepass=1, rng=rng)


def test_dependency_structure_degenerate():
    with pytest.raises(DegenerateException):
        build_dependency_structure(TorusPattern(3, 1, [1.0, 0.0], [1, 1]))


def test_circular_ascent_size_bias_law(circular_ascent, rng):
    model, structure = circular_ascent
    batch = LocalSizeBiasSampler(model, structure).sample(rng, 100_000)
    oracle = size_bias_discrete_oracle({1: Fraction(1, 2), 2: Fraction(1, 2)})
    assert oracle == {1: Fraction(1, 3), 2: Fraction(2, 3)}
    assert chi_square_check(tally(batch.y_s), {(k,): p for k, p in oracle.items()}, name="oracle").passed
    assert batch.outside_unchanged.all()
    assert gap_audit(batch.gap, structure.gap_bound).passed


def test_window_size_bias_identities(rng):
    model = Window(30, 3)
    structure = build_dependency_structure(model)
    sampler = LocalSizeBiasSampler(model, structure)
    batch = sampler.sample(rng, 200_000)
    mu = 30 / 6
    assert characterizing_check_size(batch.y, batch.y_s, mu).passed
    assert variance_identity_check(batch.y, batch.y_s, mu).passed
    assert gap_audit(batch.gap, sampler.gap_bound).passed
    assert np.all(batch.y_s - batch.y <= structure.b)


def test_broken_coupling_fails_characterizing_check(rng):
    model = Window(30, 3)
    y = model.total(model.sample_state(rng, 100_000))
    assert not characterizing_check_size(y, y, 30 / 6).passed


def test_batch_records_and_draws(circular_ascent, rng):
    model, structure = circular_ascent
    batch = LocalSizeBiasSampler(model, structure).sample(rng, 8)
    assert batch.records().shape == (8, len(SIZE_RECORD_FIELDS))
    draw = batch.draw(0)
    assert draw.y_s == batch.y_s[0]
    assert len(draw.regenerated) == 2
    assert size_bias_sum_draw(model, structure, rng).y_s in (1.0, 2.0)


def test_sampler_rejects_foreign_structure(circular_ascent):
    model, _ = circular_ascent
    with pytest.raises(ValidationException):
        LocalSizeBiasSampler(model, build_dependency_structure(Window(10, 2)))


def test_directional_draw(rng):
    model = PermPattern(6, 3)
    state, regenerated = directional_draw(model, 4, rng)
    assert model.evaluate(regenerated[None, :], np.array([4]))[0, 0] == 1.0
    outside = np.setdiff1d(np.arange(6), model.cells[4])
    np.testing.assert_array_equal(state[outside], regenerated[outside])
    with pytest.raises(ValidationException):
        directional_draw(model, 6, rng)


@pytest.mark.parametrize("alpha", [0, 2])
def test_directional_check(alpha, rng):
    assert directional_check(PermPattern(4, 2, [1, 0]), alpha, 20_000, rng).passed


def test_exact_delta(circular_ascent):
    model, structure = circular_ascent
    exact = exact_delta(model, structure)
    assert exact.states == 6
    assert 0.0 <= exact.delta <= exact.proxy + 1e-12
    with pytest.raises(NotEnumerableException):
        exact_delta(Window(5, 2), build_dependency_structure(Window(5, 2)))


def test_delta_proxy_estimate_matches_exact(rng):
    model = PermPattern(5, 2)
    structure = build_dependency_structure(model)
    exact = exact_delta(model, structure, cap=200)
    estimate = delta_proxy_estimate(model, structure, outer=4000, inner=1, seed=rng)
    assert abs(estimate.value - exact.proxy) <= 5 * estimate.stderr + 0.01


def test_delta_proxy_estimate_validation(rng):
    structure = build_dependency_structure(Window(10, 2))
    with pytest.raises(ValidationException):
        delta_proxy_estimate(Window(10, 2), structure, outer=2, inner=5, seed=rng)
    with pytest.raises(ValidationException):
        delta_proxy_estimate(Window(10, 2), structure, outer=10, inner=1, seed=rng)
    estimate = delta_proxy_estimate(Window(10, 2), structure, outer=50, inner=5, seed=rng)
    assert estimate.value >= 0.0
    assert (estimate.outer, estimate.inner) == (50, 5)
