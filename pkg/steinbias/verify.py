"""
Checks run against draw streams and exact oracles. Every check returns a ``CheckReport``; none of
them raise on failure.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import ndtr
from scipy.stats import chisquare

from steinbias.arrays import MomentSummary, ScoreArray
from steinbias.bounds import BoundReport
from steinbias.exceptions import ValidationException
from steinbias.laws import IndependentSum
from steinbias.permutations import DEFAULT_ENUMERATION_CAP, FixedCycleType, PermutationModel, support_array
from steinbias.utils import atom_key, tally
from steinbias.zero_bias import cycle_type_pair_images, enumerate_pair_law, pair_average, uniform_pair_images

logger = logging.getLogger(__name__)

DEFAULT_Z_THRESHOLD = 4.0
DKW_LEVEL = 0.01
CHI_SQUARE_LEVEL = 0.001
LINEARITY_TOLERANCE = 1e-10
SYMMETRY_TOLERANCE = 1e-12
MIN_EXPECTED_COUNT = 5.0

HALF_LINE = "half-line"
INTERVAL = "interval"

ZERO_BIAS_TESTS: Dict[str, Tuple[Callable, Callable]] = {
    "x": (lambda x: x, lambda x: np.ones_like(x)),
    "x^2": (lambda x: x**2, lambda x: 2 * x),
    "x^3": (lambda x: x**3, lambda x: 3 * x**2),
    "cos": (np.cos, lambda x: -np.sin(x)),
}
SIZE_BIAS_TESTS: Dict[str, Callable] = {"x": lambda x: x, "x^2": lambda x: x**2, "cos": np.cos}


@dataclass(frozen=True)
class DistanceEstimate:
    metric: str
    value: float
    sample_count: int
    dkw_band: float


@dataclass(frozen=True)
class CheckReport:
    name: str
    passed: bool
    observed: float
    threshold: float
    details: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return asdict(self)


def _checked(report: CheckReport) -> CheckReport:
    if report.passed:
        logger.info(f"check {report.name} passed: {report.observed:.6g} within {report.threshold:.6g}")
    else:
        logger.error(f"check {report.name} FAILED: {report.observed:.6g} vs threshold {report.threshold:.6g}")
    return report


def dkw_band(count: int, level: float = DKW_LEVEL) -> float:
    return math.sqrt(math.log(2 / level) / (2 * count))


def _one_sided(sample, mu: float, sigma: float) -> Tuple[np.ndarray, np.ndarray]:
    """Right and left limits of ``F_N - Phi`` at the sorted sample points."""
    if sigma is None or not sigma > 0:
        raise ValidationException(f"sigma must be > 0, got {sigma}")
    w = np.sort((np.asarray(sample, dtype=float).ravel() - mu) / sigma)
    if w.size == 0:
        raise ValidationException("distance needs a nonempty sample")
    phi = ndtr(w)
    steps = np.arange(1, w.size + 1) / w.size
    return steps - phi, steps - 1 / w.size - phi


def kolmogorov_distance(sample, mu: float = 0.0, sigma: float = 1.0) -> DistanceEstimate:
    right, left = _one_sided(sample, mu, sigma)
    value = float(max(np.abs(right).max(), np.abs(left).max()))
    return DistanceEstimate(metric=HALF_LINE, value=value, sample_count=right.size, dkw_band=dkw_band(right.size))


def interval_distance(sample, mu: float = 0.0, sigma: float = 1.0) -> DistanceEstimate:
    """
    Sup over intervals of ``|P_N(I) - Phi(I)|``. The interval deviation is a difference of two
    half-line deviations, so the sup is the largest excess of ``F_N - Phi`` plus the largest deficit.
    """
    right, left = _one_sided(sample, mu, sigma)
    excess = max(float(right.max()), float(left.max()), 0.0)
    deficit = max(-float(right.min()), -float(left.min()), 0.0)
    value = min(excess + deficit, 1.0)
    return DistanceEstimate(metric=INTERVAL, value=value, sample_count=right.size, dkw_band=dkw_band(right.size))


def _z(differences: np.ndarray) -> Tuple[float, float, float]:
    """Mean, its standard error and the z statistic of per-draw differences."""
    mean = float(differences.mean())
    stderr = float(differences.std(ddof=1) / math.sqrt(differences.size))
    if stderr == 0:
        return mean, stderr, 0.0 if mean == 0 else math.inf
    return mean, stderr, mean / stderr


def _paired(name: str, columns: Sequence[np.ndarray]) -> Sequence[np.ndarray]:
    columns = [np.asarray(c, dtype=float).ravel() for c in columns]
    if columns[0].size < 2 or any(c.size != columns[0].size for c in columns):
        raise ValidationException(f"{name} needs two or more paired draws")
    return columns


def _z_family(name: str, terms: Dict[str, np.ndarray], threshold: float) -> CheckReport:
    details = {}
    worst = 0.0
    for label, differences in terms.items():
        mean, stderr, z = _z(differences)
        details[label] = {"difference": mean, "stderr": stderr, "z": z}
        worst = max(worst, abs(z))
    report = CheckReport(name=name, passed=worst <= threshold, observed=worst, threshold=threshold, details=details)
    return _checked(report)


def characterizing_check_zero(y, y_star, sigma2: float, threshold: float = DEFAULT_Z_THRESHOLD) -> CheckReport:
    """``E Y f(Y) = sigma^2 E f'(Y*)`` for ``f`` in x, x^2, x^3, cos."""
    y, y_star = _paired("zero-bias characterizing check", (y, y_star))
    terms = {label: y * f(y) - sigma2 * df(y_star) for label, (f, df) in ZERO_BIAS_TESTS.items()}
    return _z_family("characterizing-zero", terms, threshold)


def characterizing_check_size(y, y_s, mu: float, threshold: float = DEFAULT_Z_THRESHOLD) -> CheckReport:
    """``E Y f(Y) = mu E f(Ys)`` for ``f`` in x, x^2, cos."""
    y, y_s = _paired("size-bias characterizing check", (y, y_s))
    terms = {label: y * f(y) - mu * f(y_s) for label, f in SIZE_BIAS_TESTS.items()}
    return _z_family("characterizing-size", terms, threshold)


def variance_identity_check(y, y_s, mu: float, threshold: float = DEFAULT_Z_THRESHOLD) -> CheckReport:
    """``Var Y = mu E(Ys - Y)``."""
    y, y_s = _paired("variance identity check", (y, y_s))
    return _z_family("variance-identity", {"var": mu * (y_s - y) - (y - mu) ** 2}, threshold)


def linearity_check(
    model: PermutationModel,
    score: ScoreArray,
    rng: np.random.Generator,
    reps: int,
    lam: Optional[float] = None,
) -> CheckReport:
    """
    ``E(Y'' | pi) = (1 - lambda) Y'`` on ``reps`` sampled permutations, averaging the pair over every
    ordered index pair exactly. The score array is used as given, flags unchecked.
    """
    lam = model.lam if lam is None else lam
    images_of = cycle_type_pair_images if isinstance(model, FixedCycleType) else uniform_pair_images
    scale = max(score.c_sup, 1e-300)
    worst = 0.0
    for mapping in model.sample(rng, reps):
        y = float(score.evaluate(mapping))
        target = (1 - lam) * y
        error = abs(pair_average(images_of(score.entries, mapping)) - target) / max(abs(target), scale)
        worst = max(worst, error)
    return _checked(
        CheckReport(
            name=f"linearity-{model.kind}",
            passed=worst <= LINEARITY_TOLERANCE,
            observed=worst,
            threshold=LINEARITY_TOLERANCE,
            details={"lambda": lam, "reps": reps},
        )
    )


def linearity_check_independent(independent_sum: IndependentSum, rng: np.random.Generator, reps: int) -> CheckReport:
    x = independent_sum.sample_summands(rng, reps)
    y = x.sum(axis=1)
    target = (1 - independent_sum.lam) * y
    scale = max(independent_sum.zero_bias_gap_bound(), 1e-300)
    worst = float(np.max(np.abs(independent_sum.pair_average(x) - target) / np.maximum(np.abs(target), scale)))
    return _checked(
        CheckReport(
            name="linearity-independent",
            passed=worst <= LINEARITY_TOLERANCE,
            observed=worst,
            threshold=LINEARITY_TOLERANCE,
            details={"lambda": independent_sum.lam, "reps": reps},
        )
    )


PartnerFn = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


def exchangeability_check(
    model: PermutationModel,
    score: ScoreArray,
    partner: PartnerFn,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> CheckReport:
    """
    Exact symmetry of the joint law of ``(Y', Y'')`` and closure of the support under ``partner``,
    which maps a batch of permutations and their index pairs to the second member of the pair.
    """
    support = support_array(model, cap)
    n = model.n
    i, j = np.nonzero(~np.eye(n, dtype=bool))
    first = np.repeat(support, i.size, axis=0)
    second = partner(first, np.tile(i, support.shape[0]), np.tile(j, support.shape[0]))
    escaped = int((~model.contains(second)).sum())
    law = {k: c / first.shape[0] for k, c in tally(score.evaluate(first), score.evaluate(second)).items()}
    asymmetry = max((abs(p - law.get((k[1], k[0]), 0.0)) for k, p in law.items()), default=0.0)
    observed = 1.0 if escaped else asymmetry
    return _checked(
        CheckReport(
            name=f"exchangeability-{model.kind}",
            passed=observed <= SYMMETRY_TOLERANCE,
            observed=observed,
            threshold=SYMMETRY_TOLERANCE,
            details={"asymmetry": asymmetry, "outside_support": escaped, "states": int(first.shape[0])},
        )
    )


def pair_moment_check(spec, sigma2: float, cap: int = DEFAULT_ENUMERATION_CAP) -> CheckReport:
    """``E(Y' - Y'')^2 = 2 lambda sigma^2`` on the exact pair law."""
    law = enumerate_pair_law(spec, cap)
    second_moment = sum((y1 - y2) ** 2 * float(p) for (y1, y2), p in law.items())
    target = 2 * spec.lam * sigma2
    error = abs(second_moment - target) / max(abs(target), 1e-300)
    return _checked(
        CheckReport(
            name="pair-moment",
            passed=error <= LINEARITY_TOLERANCE,
            observed=error,
            threshold=LINEARITY_TOLERANCE,
            details={"second_moment": second_moment, "target": target},
        )
    )


def gap_audit(gaps, bound: float, name: str = "gap-audit") -> CheckReport:
    gaps = np.asarray(gaps, dtype=float).ravel()
    if gaps.size == 0:
        raise ValidationException("gap audit needs a nonempty stream")
    slack = 1e-9 * max(bound, 1.0)
    violations = int((gaps > bound + slack).sum())
    return _checked(
        CheckReport(
            name=name,
            passed=violations == 0,
            observed=float(gaps.max()),
            threshold=bound,
            details={"violations": violations, "draws": int(gaps.size)},
        )
    )


def delta_vs_bound(distance: DistanceEstimate, bound: BoundReport) -> CheckReport:
    ceiling = min(bound.delta_bound, 1.0)
    observed = distance.value - distance.dkw_band
    return _checked(
        CheckReport(
            name=f"delta-vs-bound-{distance.metric}",
            passed=observed <= ceiling,
            observed=observed,
            threshold=ceiling,
            details={
                "distance": distance.value,
                "dkw_band": distance.dkw_band,
                "formula": bound.formula,
                "precondition_ok": bound.precondition_ok,
                "vacuous": bound.vacuous,
            },
        )
    )


def chi_square_check(
    observed_keys: Iterable[Tuple], oracle: Mapping[Tuple, float], name: str, level: float = CHI_SQUARE_LEVEL
) -> CheckReport:
    """
    Goodness of fit of observed atoms against an exact pmf. Atoms with small expected counts are
    pooled into one cell; an observed atom outside the oracle's support fails outright.
    """
    counts = tally(*zip(*observed_keys)) if not isinstance(observed_keys, Mapping) else observed_keys
    oracle = {atom_key(*k): float(p) for k, p in oracle.items()}
    total = sum(counts.values())
    stray = sum(c for k, c in counts.items() if k not in oracle)
    if stray:
        return _checked(
            CheckReport(name=name, passed=False, observed=0.0, threshold=level, details={"stray_draws": stray})
        )
    keys = sorted(oracle)
    expected = np.array([oracle[k] * total for k in keys])
    seen = np.array([counts.get(k, 0) for k in keys], dtype=float)
    small = expected < MIN_EXPECTED_COUNT
    if small.any():
        expected = np.append(expected[~small], expected[small].sum())
        seen = np.append(seen[~small], seen[small].sum())
    if expected.size < 2:
        p_value = 1.0
    else:
        p_value = float(chisquare(seen, expected * seen.sum() / expected.sum()).pvalue)
    return _checked(
        CheckReport(
            name=name,
            passed=p_value >= level,
            observed=p_value,
            threshold=level,
            details={"cells": int(expected.size), "draws": int(total)},
        )
    )


def directional_check(
    model, alpha: int, reps: int, rng: np.random.Generator, cap: int = 1 << 16, level: float = CHI_SQUARE_LEVEL
) -> CheckReport:
    """Law of the state regenerated in direction ``alpha`` against ``x_alpha dP / E X_alpha``."""
    states, probabilities = model.enumerate_states(cap)
    weights = probabilities * model.evaluate(states, np.array([alpha]))[:, 0]
    oracle = {tuple(float(v) for v in s): w / weights.sum() for s, w in zip(states, weights) if w > 0}
    regenerated = model.regenerate(model.sample_state(rng, reps), alpha, rng)
    return chi_square_check(
        [tuple(row) for row in regenerated.astype(float)], oracle, name=f"directional-{model.kind}-{alpha}", level=level
    )


def moment_agreement_check(
    exact: MomentSummary, estimate: MomentSummary, threshold: float = DEFAULT_Z_THRESHOLD
) -> CheckReport:
    """Monte Carlo moments against their exact values."""
    z_mean = abs(estimate.mean - exact.mean) / estimate.mean_stderr if estimate.mean_stderr else 0.0
    z_var = abs(estimate.variance - exact.variance) / estimate.stderr if estimate.stderr else 0.0
    worst = max(z_mean, z_var)
    return _checked(
        CheckReport(
            name="moment-agreement",
            passed=worst <= threshold,
            observed=worst,
            threshold=threshold,
            details={"z_mean": z_mean, "z_variance": z_var},
        )
    )


def estimate_agreement_check(
    estimate: float, stderr: float, exact: float, name: str, threshold: float = DEFAULT_Z_THRESHOLD
) -> CheckReport:
    z = abs(estimate - exact) / stderr if stderr > 0 else (0.0 if math.isclose(estimate, exact) else math.inf)
    return _checked(
        CheckReport(
            name=name,
            passed=z <= threshold,
            observed=z,
            threshold=threshold,
            details={"estimate": estimate, "stderr": stderr, "exact": exact},
        )
    )


def upper_bound_check(estimate: float, stderr: float, bound: float, name: str, threshold: float = DEFAULT_Z_THRESHOLD):
    return _checked(
        CheckReport(
            name=name,
            passed=estimate <= bound + threshold * stderr,
            observed=estimate,
            threshold=bound + threshold * stderr,
            details={"stderr": stderr, "bound": bound},
        )
    )


def two_sample_check(
    first: Dict[str, np.ndarray], second: Dict[str, np.ndarray], name: str, threshold: float = DEFAULT_Z_THRESHOLD
) -> CheckReport:
    """Means of matching statistics from two independent samplers of the same law."""
    details = {}
    worst = 0.0
    for label in first:
        a, b = np.asarray(first[label], dtype=float), np.asarray(second[label], dtype=float)
        spread = math.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
        difference = float(a.mean() - b.mean())
        z = difference / spread if spread > 0 else (0.0 if difference == 0 else math.inf)
        details[label] = {"difference": difference, "z": z}
        worst = max(worst, abs(z))
    report = CheckReport(name=name, passed=worst <= threshold, observed=worst, threshold=threshold, details=details)
    return _checked(report)
