"""
Berry-Esseen bounds for zero-bias and size-bias couplings.

Every bound is a plain function of the coupling gap, the standard deviation and, for size
biasing, the mean and ``Delta``. Bounds are never clamped: a value above one is reported as is
with ``vacuous = True``.
"""
import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, Optional

import numpy as np

from steinbias.arrays import ScoreArray
from steinbias.exceptions import ValidationException
from steinbias.permutations import FixedCycleType, PermutationModel, Uniform

logger = logging.getLogger(__name__)

HALF_LINES = "half-lines"
INTERVALS = "intervals"
CUSTOM = "custom"

VARIANT_MAIN = "main"
VARIANT_HALF_LINE = "half-line"
VARIANT_INTERVAL = "interval"
VARIANT_ALT = "alt"
VARIANTS = (VARIANT_MAIN, VARIANT_HALF_LINE, VARIANT_INTERVAL, VARIANT_ALT)

# gap |Y* - Y| <= factor * C of the two permutation constructions
COMBINATORIAL_GAP_FACTORS = {Uniform.kind: 8, FixedCycleType.kind: 40}


@dataclass(frozen=True)
class SmoothnessClass:
    kind: str
    a: float

    def __post_init__(self):
        if self.kind not in (HALF_LINES, INTERVALS, CUSTOM):
            raise ValidationException(f"unknown smoothness class {self.kind!r}")
        if not self.a > 0:
            raise ValidationException(f"smoothness constant a must be > 0, got {self.a}")

    @classmethod
    def half_lines(cls) -> "SmoothnessClass":
        return cls(kind=HALF_LINES, a=math.sqrt(2 / math.pi))

    @classmethod
    def intervals(cls) -> "SmoothnessClass":
        return cls(kind=INTERVALS, a=2 * math.sqrt(2 / math.pi))

    @classmethod
    def custom(cls, a: float) -> "SmoothnessClass":
        return cls(kind=CUSTOM, a=a)

    @classmethod
    def from_name(cls, name: str, a: Optional[float] = None) -> "SmoothnessClass":
        if name == HALF_LINES:
            return cls.half_lines()
        if name == INTERVALS:
            return cls.intervals()
        if name == CUSTOM and a is not None:
            return cls.custom(a)
        raise ValidationException(f"smoothness class {name!r} needs to be half-lines, intervals or custom with a")

    @property
    def default_variant(self) -> str:
        return {HALF_LINES: VARIANT_HALF_LINE, INTERVALS: VARIANT_INTERVAL}.get(self.kind, VARIANT_MAIN)


@dataclass(frozen=True)
class BoundReport:
    delta_bound: float
    A: float
    B: float
    a: float
    formula: str
    precondition_ok: bool
    precondition_text: str
    sigma: float
    mu: Optional[float] = None
    Delta: Optional[float] = None

    @property
    def vacuous(self) -> bool:
        return self.delta_bound > 1.0

    def to_dict(self) -> Dict:
        return {**asdict(self), "vacuous": self.vacuous}


def _positive(**values):
    for name, value in values.items():
        if value is None or not value > 0 or not math.isfinite(value):
            raise ValidationException(f"{name} must be a positive finite number, got {value}")


def _check_variant(variant: str):
    if variant not in VARIANTS:
        raise ValidationException(f"unknown bound variant {variant!r}, expected one of {VARIANTS}")


def _report(report: BoundReport) -> BoundReport:
    if not report.precondition_ok:
        logger.warning(f"{report.formula}: precondition fails ({report.precondition_text}), bound reported anyway")
    elif report.vacuous:
        logger.info(f"{report.formula}: bound {report.delta_bound:.6g} is vacuous")
    return report


def zero_bias_bound(
    sigma: float, B: float, smoothness: SmoothnessClass, variant: str = VARIANT_MAIN
) -> BoundReport:
    """
    Bound on the distance of ``Y / sigma`` to the normal given ``|Y* - Y| <= 2B``.

    Args:
        sigma: standard deviation of Y
        B: half the coupling gap bound
        smoothness: test function class; supplies ``a`` for the main and alt variants
        variant: main, half-line, interval or alt

    Returns:
        BoundReport with ``A = 2B / sigma``
    """
    _positive(sigma=sigma, B=B)
    _check_variant(variant)
    A = 2 * B / sigma
    a = smoothness.a
    if variant == VARIANT_ALT:
        limit, limit_text = sigma / 48, "sigma/48"
        value = A * (145 * a + 7.5 * A + 25)
    else:
        limit, limit_text = sigma / 24, "sigma/24"
        if variant == VARIANT_HALF_LINE:
            value = A * (127 + 12 * A)
        elif variant == VARIANT_INTERVAL:
            value = A * (216 + 12 * A)
        else:
            value = A * (37 + 12 * A + 112 * a)
    ok = B <= limit
    return _report(
        BoundReport(
            delta_bound=value,
            A=A,
            B=B,
            a=a,
            formula=f"zero-bias/{variant}",
            precondition_ok=ok,
            precondition_text=f"B <= {limit_text}: {B:.6g} {'<=' if ok else '>'} {limit:.6g}",
            sigma=sigma,
        )
    )


def size_bias_bound(
    mu: float, sigma: float, B: float, Delta: float, smoothness: SmoothnessClass, variant: str = VARIANT_MAIN
) -> BoundReport:
    """Bound on the distance of ``(Y - mu) / sigma`` to the normal given ``|Ys - Y| <= B``."""
    _positive(mu=mu, sigma=sigma, B=B)
    if Delta is None or Delta < 0 or not math.isfinite(Delta):
        raise ValidationException(f"Delta must be >= 0, got {Delta}")
    _check_variant(variant)
    A = B / sigma
    a = smoothness.a
    ratio = mu / sigma
    if variant == VARIANT_ALT:
        limit, limit_text = sigma**1.5 / math.sqrt(12 * mu), "sigma^1.5/sqrt(12 mu)"
        value = a * A / 6 + ratio * ((13 + 73 * a) * A**2 + 2.5 * A**3) + 15 * mu * Delta / sigma**2
    else:
        limit, limit_text = sigma**1.5 / math.sqrt(6 * mu), "sigma^1.5/sqrt(6 mu)"
        tail = 23 * mu * Delta / sigma**2
        if variant == VARIANT_HALF_LINE:
            value = 0.4 * A + ratio * (64 * A**2 + 4 * A**3) + tail
        elif variant == VARIANT_INTERVAL:
            value = 0.8 * A + ratio * (109 * A**2 + 4 * A**3) + tail
        else:
            value = a * A / 2 + ratio * ((19 + 56 * a) * A**2 + 4 * A**3) + tail
    ok = B <= limit
    return _report(
        BoundReport(
            delta_bound=value,
            A=A,
            B=B,
            a=a,
            formula=f"size-bias/{variant}",
            precondition_ok=ok,
            precondition_text=f"B <= {limit_text}: {B:.6g} {'<=' if ok else '>'} {limit:.6g}",
            sigma=sigma,
            mu=mu,
            Delta=Delta,
        )
    )


def combinatorial_bound(
    score: ScoreArray,
    model: PermutationModel,
    sigma: float,
    smoothness: SmoothnessClass,
    variant: Optional[str] = None,
) -> BoundReport:
    """``A = 8C/sigma`` for the uniform law, ``40C/sigma`` for a fixed cycle type, precondition ``A <= 1/12``."""
    if model.kind not in COMBINATORIAL_GAP_FACTORS:
        raise ValidationException(f"no combinatorial bound for permutation model {model.kind!r}")
    if model.kind == Uniform.kind and not score.row_centered:
        raise ValidationException("the uniform combinatorial bound needs a row centered score array")
    if model.kind == FixedCycleType.kind and not (score.symmetric and score.zero_diagonal):
        raise ValidationException("the cycle type combinatorial bound needs a symmetric zero diagonal score array")
    _positive(sigma=sigma)
    factor = COMBINATORIAL_GAP_FACTORS[model.kind]
    report = zero_bias_bound(sigma, factor * score.c_sup / 2, smoothness, variant or smoothness.default_variant)
    return BoundReport(**{**asdict(report), "formula": f"combinatorial/{model.kind}/{report.formula}"})


def independent_sum_bound(
    sigma: float, gap_bound: float, smoothness: SmoothnessClass, variant: Optional[str] = None
) -> BoundReport:
    return zero_bias_bound(sigma, gap_bound / 2, smoothness, variant or smoothness.default_variant)


@dataclass(frozen=True)
class LocalBoundInputs:
    B: float
    delta_bound: float
    delta_bound_coarse: float
    B_regular: Optional[float] = None
    delta_bound_regular: Optional[float] = None


def local_bound_inputs(structure, M: Optional[float] = None) -> LocalBoundInputs:
    """
    ``B`` and the bound on ``Delta`` for a sum of local statistics, in the general form and, when
    every ball has the same size, the distance-regular form.
    """
    M = structure.value_cap if M is None else M
    _positive(M=M)
    weighted = structure.p * structure.neighborhood_sizes
    pairs = structure.pairs
    if not pairs.any():
        delta_bound = coarse = 0.0
    else:
        delta_bound = M * math.sqrt(float(weighted @ pairs.astype(float) @ weighted))
        coarse = float(np.max(structure.p)) * structure.b * M * math.sqrt(structure.pair_count)
    B_regular = delta_bound_regular = None
    if structure.regular:
        v_rho, v_3rho = structure.V(structure.rho), structure.V(3 * structure.rho)
        B_regular = v_rho * M
        delta_bound_regular = M * v_rho * math.sqrt(v_3rho) / math.sqrt(structure.index_count)
    return LocalBoundInputs(
        B=structure.b * M,
        delta_bound=delta_bound,
        delta_bound_coarse=coarse,
        B_regular=B_regular,
        delta_bound_regular=delta_bound_regular,
    )


def local_bound(
    mu: float,
    sigma: float,
    inputs: LocalBoundInputs,
    smoothness: SmoothnessClass,
    variant: Optional[str] = None,
    Delta: Optional[float] = None,
) -> BoundReport:
    """Size-bias bound fed by ``local_bound_inputs``; ``Delta`` defaults to the structural bound on it."""
    return size_bias_bound(
        mu,
        sigma,
        inputs.B,
        inputs.delta_bound if Delta is None else Delta,
        smoothness,
        variant or smoothness.default_variant,
    )
