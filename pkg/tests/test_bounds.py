import math

import numpy as np
import pytest

from steinbias.arrays import ScoreArray, center_for_cycle_type, random_entries
from steinbias.bounds import (
    CUSTOM,
    HALF_LINES,
    INTERVALS,
    BoundReport,
    SmoothnessClass,
    combinatorial_bound,
    independent_sum_bound,
    local_bound,
    local_bound_inputs,
    size_bias_bound,
    zero_bias_bound,
)
from steinbias.exceptions import ValidationException
from steinbias.local_models import HypercubeMax, TorusPattern, Window
from steinbias.permutations import CycleType, FixedCycleType, Uniform
from steinbias.size_bias import build_dependency_structure
from tests.conftest import test_pair

A_HALF = math.sqrt(2 / math.pi)

test_args_zero_bias_bound = [
    test_pair(input=(1.0, 1 / 24, "half-line"), expected=128 / 12),
    test_pair(input=(1.0, 1 / 24, "interval"), expected=217 / 12),
    test_pair(input=(1.0, 1 / 24, "main"), expected=(38 + 112 * A_HALF) / 12),
    test_pair(input=(2.0, 1 / 24, "alt"), expected=(1 / 24) * (145 * A_HALF + 7.5 / 24 + 25)),
]


@pytest.mark.parametrize("test", test_args_zero_bias_bound)
def test_zero_bias_bound(test: test_pair):
    sigma, B, variant = test.input
    report = zero_bias_bound(sigma, B, SmoothnessClass.half_lines(), variant)
    assert report.delta_bound == pytest.approx(test.expected)
    assert report.A == pytest.approx(2 * B / sigma)
    assert report.formula == f"zero-bias/{variant}"
    assert report.precondition_ok
    assert report.vacuous


def test_zero_bias_main_regression():
    report = zero_bias_bound(1.0, 1 / 24, SmoothnessClass.half_lines())
    assert report.delta_bound == pytest.approx(10.61358, abs=1e-5)


def test_zero_bias_bound_small_and_unclamped():
    small = zero_bias_bound(1000.0, 0.05, SmoothnessClass.half_lines(), "half-line")
    assert small.delta_bound == pytest.approx(1e-4 * (127 + 12e-4))
    assert not small.vacuous

    large = zero_bias_bound(1.0, 1.0, SmoothnessClass.intervals(), "interval")
    assert not large.precondition_ok
    assert large.delta_bound == pytest.approx(2 * (216 + 24))
    assert "sigma/24" in large.precondition_text


test_args_size_bias_bound = [
    test_pair(input=(0.0, "half-line"), expected=0.1 + 4 + 0.0625),
    test_pair(input=(0.1, "half-line"), expected=0.1 + 4 + 0.0625 + 2.3),
    test_pair(input=(0.0, "interval"), expected=0.2 + 109 / 16 + 0.0625),
]


@pytest.mark.parametrize("test", test_args_size_bias_bound)
def test_size_bias_bound(test: test_pair):
    Delta, variant = test.input
    report = size_bias_bound(1.0, 1.0, 0.25, Delta, SmoothnessClass.half_lines(), variant)
    assert report.delta_bound == pytest.approx(test.expected)
    assert report.precondition_ok
    assert report.mu == 1.0 and report.Delta == Delta


def test_size_bias_precondition():
    report = size_bias_bound(100.0, 1.0, 0.5, 0.0, SmoothnessClass.half_lines())
    assert not report.precondition_ok
    assert report.delta_bound > 1


VARIANTS = ("half-line", "interval", "main", "alt")


@pytest.mark.parametrize("variant", VARIANTS)
def test_zero_bias_bound_grows_with_gap(variant):
    smoothness = SmoothnessClass.half_lines()
    values = [zero_bias_bound(1.0, B, smoothness, variant).delta_bound for B in (1e-4, 1e-2, 0.05, 0.5)]
    assert np.all(np.diff(values) > 0)


@pytest.mark.parametrize("c", [0.01, 3.0, 250.0])
def test_zero_bias_bound_is_scale_free(c):
    for variant in VARIANTS:
        base = zero_bias_bound(2.0, 0.05, SmoothnessClass.intervals(), variant)
        scaled = zero_bias_bound(2.0 * c, 0.05 * c, SmoothnessClass.intervals(), variant)
        assert scaled.delta_bound == pytest.approx(base.delta_bound, rel=1e-12)
        assert scaled.precondition_ok == base.precondition_ok


@pytest.mark.parametrize("variant", VARIANTS)
def test_size_bias_bound_grows_with_gap_and_delta(variant):
    smoothness = SmoothnessClass.half_lines()
    by_gap = [size_bias_bound(4.0, 2.0, B, 0.1, smoothness, variant).delta_bound for B in (1e-3, 0.01, 0.1, 1.0)]
    by_delta = [size_bias_bound(4.0, 2.0, 0.1, Delta, smoothness, variant).delta_bound for Delta in (0.0, 0.01, 0.1)]
    assert np.all(np.diff(by_gap) > 0)
    assert np.all(np.diff(by_delta) > 0)


test_args_vacuous = [
    test_pair(input=0.999, expected=False),
    test_pair(input=1.0, expected=False),
    test_pair(input=1.001, expected=True),
]


@pytest.mark.parametrize("test", test_args_vacuous)
def test_vacuous_only_above_one(test: test_pair):
    report = BoundReport(
        delta_bound=test.input,
        A=0.1,
        B=0.1,
        a=A_HALF,
        formula="zero-bias/main",
        precondition_ok=True,
        precondition_text="",
        sigma=2.0,
    )
    assert report.vacuous is test.expected
    assert report.to_dict()["vacuous"] is test.expected


test_exception_args_bounds = [
    test_pair(input=lambda: zero_bias_bound(0.0, 1.0, SmoothnessClass.half_lines()), expected=ValidationException),
    test_pair(input=lambda: zero_bias_bound(1.0, -1.0, SmoothnessClass.half_lines()), expected=ValidationException),
    test_pair(
        input=lambda: zero_bias_bound(1.0, 1.0, SmoothnessClass.half_lines(), "best"), expected=ValidationException
    ),
    test_pair(
        input=lambda: size_bias_bound(1.0, 1.0, 1.0, -0.1, SmoothnessClass.half_lines()), expected=ValidationException
    ),
    test_pair(
        input=lambda: size_bias_bound(0.0, 1.0, 1.0, 0.0, SmoothnessClass.half_lines()), expected=ValidationException
    ),
    test_pair(input=lambda: SmoothnessClass.from_name(CUSTOM), expected=ValidationException),
    test_pair(input=lambda: SmoothnessClass.custom(0.0), expected=ValidationException),
    test_pair(input=lambda: SmoothnessClass.from_name("lipschitz"), expected=ValidationException),
]


@pytest.mark.parametrize("test", test_exception_args_bounds)
def test_bound_validation(test: test_pair):
    with pytest.raises(test.expected):
        test.input()


def test_smoothness_classes():
    assert SmoothnessClass.from_name(HALF_LINES).a == pytest.approx(A_HALF)
    assert SmoothnessClass.from_name(INTERVALS).a == pytest.approx(2 * A_HALF)
    assert SmoothnessClass.from_name(CUSTOM, 3.0).default_variant == "main"
    assert SmoothnessClass.half_lines().default_variant == "half-line"


def test_combinatorial_bound_uniform():
    score = ScoreArray.from_entries([[1.0, -1.0, 0.0], [-1.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
    report = combinatorial_bound(score, Uniform(3), math.sqrt(2), SmoothnessClass.half_lines())
    assert report.A == pytest.approx(8 / math.sqrt(2))
    assert report.formula == "combinatorial/uniform/zero-bias/half-line"


def test_combinatorial_bound_cycle_type():
    score = center_for_cycle_type(random_entries("normal", 8, np.random.default_rng(2)))
    model = FixedCycleType(CycleType.from_pairs([[2, 2], [4, 1]]))
    report = combinatorial_bound(score, model, 2.0, SmoothnessClass.intervals())
    assert report.A == pytest.approx(40 * score.c_sup / 2.0)
    assert report.formula.startswith("combinatorial/fixed-cycle-type/")
    with pytest.raises(ValidationException):
        combinatorial_bound(score, Uniform(8), 2.0, SmoothnessClass.intervals())


def test_independent_sum_bound():
    report = independent_sum_bound(1000.0, 2.0, SmoothnessClass.half_lines())
    assert report.A == pytest.approx(2 / 1000)
    assert report.delta_bound == pytest.approx(0.002 * (127 + 0.024))


test_args_local_bound_inputs = [
    test_pair(input=Window(100, 2), expected=(3, 3 * math.sqrt(7) / 10)),
    test_pair(input=Window(100, 3), expected=(5, 5 * math.sqrt(13) / 10)),
    test_pair(input=TorusPattern(8, 2, [0.5, 0.5], [0, 1, 1, 0]), expected=(9, 63 / 8)),
    test_pair(input=TorusPattern(8, 1, [0.5, 0.5], [0, 1]), expected=(3, math.sqrt(63 / 8))),
]


@pytest.mark.parametrize("test", test_args_local_bound_inputs)
def test_local_bound_inputs(test: test_pair):
    inputs = local_bound_inputs(build_dependency_structure(test.input))
    B, delta_bound = test.expected
    assert inputs.B == B
    assert inputs.delta_bound == pytest.approx(delta_bound)
    assert inputs.B_regular == B
    assert inputs.delta_bound_regular == pytest.approx(delta_bound)
    assert inputs.delta_bound_coarse >= inputs.delta_bound - 1e-12


def test_hypercube_inputs():
    inputs = local_bound_inputs(build_dependency_structure(HypercubeMax(3)))
    assert inputs.B == 7


def test_local_bound_uses_structural_delta():
    inputs = local_bound_inputs(build_dependency_structure(Window(100, 2)))
    report = local_bound(50.0, 5.0, inputs, SmoothnessClass.half_lines())
    expected = size_bias_bound(50.0, 5.0, 3.0, inputs.delta_bound, SmoothnessClass.half_lines(), "half-line")
    assert report.delta_bound == pytest.approx(expected.delta_bound)
    assert local_bound(50.0, 5.0, inputs, SmoothnessClass.half_lines(), Delta=0.0).Delta == 0.0
