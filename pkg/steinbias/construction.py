"""
Base classes of the pluggable constructions. A construction turns one ``[experiment.<id>]`` table
into exact or estimated moments, a sampler of coupled draws, bound reports and checks.

Builtin constructions live in ``steinbias.contrib.construction``; a third party construction is
any subclass loaded through ``load_module = "module.path::ClassName"``.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from steinbias.arrays import (
    MomentSummary,
    ScoreArray,
    center_for_uniform,
    exact_moments,
    mc_moments,
    moments_from_sample,
    random_entries,
)
from steinbias.bounds import CUSTOM, HALF_LINES, INTERVALS, BoundReport, SmoothnessClass, combinatorial_bound
from steinbias.config import SBConfig, SBConfigExperiment
from steinbias.exceptions import (
    ConstructionException,
    SteinBiasException,
    SupportTooLargeException,
    ValidationException,
)
from steinbias.permutations import PermutationModel
from steinbias.utils import tally
from steinbias.verify import (
    CheckReport,
    DistanceEstimate,
    characterizing_check_size,
    characterizing_check_zero,
    chi_square_check,
    delta_vs_bound,
    exchangeability_check,
    gap_audit,
    interval_distance,
    kolmogorov_distance,
    linearity_check,
    moment_agreement_check,
    pair_moment_check,
    variance_identity_check,
)
from steinbias.zero_bias import RECORD_FIELDS, ExchangeablePairSpec, enumerate_pair_law, square_bias_oracle

logger = logging.getLogger(__name__)

ZERO = "zero"
SIZE = "size"


@dataclass(frozen=True)
class Draws:
    """The columns every check reads, plus the construction's own batch."""

    y: np.ndarray
    biased: np.ndarray
    gap: np.ndarray
    batch: object


class BaseConstruction(ABC):
    config = SBConfigExperiment
    kind: str = ZERO
    available_checks: Tuple[str, ...] = ()
    record_fields: Tuple[str, ...] = ()

    def __init__(self, name: str, config: SBConfigExperiment, suite: SBConfig):
        self.name: str = name
        self.construction_config = config
        self.suite: SBConfig = suite
        unknown = sorted(set(config.checks) - set(self.available_checks))
        if unknown:
            raise ConstructionException(
                f"experiment.{name}.checks: {unknown} not available, expected some of {list(self.available_checks)}"
            )

    @abstractmethod
    def prepare(self, rng: np.random.Generator):
        """Build everything the draws need; called once, before any other method."""
        ...

    @abstractmethod
    def moments(self, rng: np.random.Generator) -> MomentSummary: ...

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int):
        """One block of coupled draws."""
        ...

    @abstractmethod
    def draws(self, batch) -> Draws: ...

    @property
    @abstractmethod
    def gap_bound(self) -> float: ...

    @abstractmethod
    def bound(self, moments: MomentSummary, smoothness: SmoothnessClass, variant: str) -> BoundReport: ...

    def describe(self) -> Dict:
        """Construction specific facts for the report."""
        return {}

    def records(self, batch) -> np.ndarray:
        return batch.records()

    def smoothness_classes(self) -> List[SmoothnessClass]:
        custom_a = getattr(self.construction_config, "custom_a", None)
        return [
            SmoothnessClass.from_name(name, custom_a if name == CUSTOM else None)
            for name in self.construction_config.smoothness
        ]

    def bounds(self, moments: MomentSummary) -> List[Tuple[SmoothnessClass, BoundReport]]:
        reports = []
        for smoothness in self.smoothness_classes():
            for variant in self.construction_config.bound_variants or [smoothness.default_variant]:
                reports.append((smoothness, self.bound(moments, smoothness, variant)))
        return reports

    def distances(self, draws: Draws, moments: MomentSummary) -> Dict[str, DistanceEstimate]:
        """Empirical distances of the standardized draws ``(Y - mu) / sigma``, keyed by test function class."""
        return {
            HALF_LINES: kolmogorov_distance(draws.y, moments.mean, moments.sigma),
            INTERVALS: interval_distance(draws.y, moments.mean, moments.sigma),
        }

    def check(self, name: str, draws: Draws, moments: MomentSummary, rng: np.random.Generator) -> CheckReport:
        handler = getattr(self, "check_" + name.replace("-", "_"))
        try:
            return handler(draws, moments, rng)
        except SteinBiasException as e:
            logger.error(f"experiment.{self.name}: check {name} could not run: {e}")
            return CheckReport(
                name=name,
                passed=False,
                observed=float("nan"),
                threshold=float("nan"),
                details={"error": f"{type(e).__name__}: {e}"},
            )

    def check_delta_vs_bound(self, draws: Draws, moments: MomentSummary, rng) -> CheckReport:
        distances = self.distances(draws, moments)
        reports = [
            delta_vs_bound(distances[smoothness.kind], bound)
            for smoothness, bound in self.bounds(moments)
            if smoothness.kind in distances
        ]
        if not reports:
            raise ValidationException("delta-vs-bound needs a half-lines or intervals bound")
        return CheckReport(
            name="delta-vs-bound",
            passed=all(r.passed for r in reports),
            observed=max(r.observed - r.threshold for r in reports),
            threshold=0.0,
            details={f"{r.name}:{r.details['formula']}": r.observed for r in reports},
        )

    def check_gap(self, draws: Draws, moments: MomentSummary, rng) -> CheckReport:
        return gap_audit(draws.gap, self.gap_bound, name=f"gap-{self.kind}")

    def check_characterizing(self, draws: Draws, moments: MomentSummary, rng) -> CheckReport:
        threshold = self.suite.z_threshold
        if self.kind == ZERO:
            return characterizing_check_zero(draws.y, draws.biased, moments.variance, threshold)
        return characterizing_check_size(draws.y, draws.biased, moments.mean, threshold)

    def check_variance_identity(self, draws: Draws, moments: MomentSummary, rng) -> CheckReport:
        return variance_identity_check(draws.y, draws.biased, moments.mean, self.suite.z_threshold)


@dataclass
class ScoreArrayConfig(SBConfigExperiment):
    """Experiments on ``Y = sum_i a[i, pi(i)]``; the array is generated, read from csv or written inline."""

    n: int = None
    scores: str = "normal"
    entries: List[List[float]] = None
    score_file: str = None
    score_seed: int = 0
    low: float = -1.0
    high: float = 1.0
    scale: float = 1.0
    center: bool = True
    linearity_reps: int = 10
    custom_a: Optional[float] = None

    def validate(self) -> Tuple[bool, Optional[str]]:
        is_valid, reason = super().validate()
        if not is_valid:
            return is_valid, reason
        if self.scores == "explicit" and not self.entries:
            return False, "entries: explicit scores need an inline array"
        if self.scores == "file" and not self.score_file:
            return False, "score_file: file scores need a csv path"
        if self.scores not in ("explicit", "file", "normal", "uniform", "integer"):
            return False, f"scores: unknown score source {self.scores!r}"
        if self.scores not in ("explicit", "file") and (not isinstance(self.n, int) or self.n < 2):
            return False, f"n: generated scores need an integer n >= 2, got {self.n!r}"
        return True, None


class PermutationConstruction(BaseConstruction):
    """Shared plumbing of the two combinatorial zero-bias constructions."""

    config = ScoreArrayConfig
    kind = ZERO
    available_checks = (
        "characterizing",
        "gap",
        "linearity",
        "exchangeability",
        "pair-moment",
        "oracle",
        "moments",
        "delta-vs-bound",
    )
    centering = staticmethod(center_for_uniform)
    record_fields = RECORD_FIELDS

    def __init__(self, name: str, config: ScoreArrayConfig, suite: SBConfig):
        super().__init__(name, config, suite)
        self.score: Optional[ScoreArray] = None
        self.model: Optional[PermutationModel] = None
        self.sampler = None
        self._exact: Optional[MomentSummary] = None

    def raw_scores(self) -> np.ndarray:
        config = self.construction_config
        if config.scores == "explicit":
            raw = np.asarray(config.entries, dtype=float)
        elif config.scores == "file":
            raw = ScoreArray.from_csv(Path(config.score_file)).entries
        else:
            rng = np.random.default_rng(config.score_seed)
            raw = random_entries(config.scores, config.n, rng, config.low, config.high)
        return raw * config.scale

    def build_score(self) -> ScoreArray:
        raw = self.raw_scores()
        if self.construction_config.center:
            return self.centering(raw)
        return ScoreArray.from_entries(raw)

    @abstractmethod
    def build_model(self, n: int) -> PermutationModel: ...

    @abstractmethod
    def build_sampler(self, rng: np.random.Generator): ...

    def prepare(self, rng: np.random.Generator):
        self.score = self.build_score()
        self.model = self.build_model(self.score.n)
        self.spec = ExchangeablePairSpec.for_model(self.model, self.score)
        self.sampler = self.build_sampler(rng)
        logger.info(f"experiment.{self.name}: {self.model.kind} on n={self.score.n}, C={self.score.c_sup:.6g}")

    def exact(self) -> Optional[MomentSummary]:
        if self._exact is None:
            try:
                self._exact = exact_moments(self.score, self.model, self.suite.enumeration_cap)
            except SupportTooLargeException:
                logger.debug(f"experiment.{self.name}: support above the enumeration cap, moments by Monte Carlo")
        return self._exact

    def moments(self, rng: np.random.Generator) -> MomentSummary:
        exact = self.exact()
        if exact is not None:
            return exact
        return mc_moments(self.score, self.model, max(self.construction_config.replicates, 2), rng)

    def sample(self, rng: np.random.Generator, size: int):
        return self.sampler.sample(rng, size)

    def draws(self, batch) -> Draws:
        return Draws(y=batch.y, biased=batch.y_star, gap=batch.gap, batch=batch)

    @property
    def gap_bound(self) -> float:
        return self.sampler.gap_bound

    def bound(self, moments: MomentSummary, smoothness: SmoothnessClass, variant: str) -> BoundReport:
        return combinatorial_bound(self.score, self.model, moments.sigma, smoothness, variant)

    def describe(self) -> Dict:
        return {"n": self.score.n, "C": self.score.c_sup, "lambda": self.model.lam, "centering": self.score.centering}

    def check_linearity(self, draws: Draws, moments: MomentSummary, rng) -> CheckReport:
        return linearity_check(self.model, self.score, rng, self.construction_config.linearity_reps)

    def check_exchangeability(self, draws: Draws, moments: MomentSummary, rng) -> CheckReport:
        return exchangeability_check(self.model, self.score, self.spec.partner_batch, self.suite.enumeration_cap)

    def check_pair_moment(self, draws: Draws, moments: MomentSummary, rng) -> CheckReport:
        exact = self.exact()
        if exact is None:
            raise SupportTooLargeException("pair moment check needs the support within the enumeration cap")
        return pair_moment_check(self.spec, exact.variance, self.suite.enumeration_cap)

    def check_oracle(self, draws: Draws, moments: MomentSummary, rng) -> CheckReport:
        oracle = square_bias_oracle(enumerate_pair_law(self.spec, self.suite.enumeration_cap))
        batch = draws.batch
        return chi_square_check(tally(batch.y_dagger, batch.y_ddagger), oracle, name=f"oracle-{self.model.kind}")

    def check_moments(self, draws: Draws, moments: MomentSummary, rng) -> CheckReport:
        exact = self.exact()
        if exact is None:
            raise SupportTooLargeException("moment check needs the support within the enumeration cap")
        return moment_agreement_check(exact, moments_from_sample(draws.y), self.suite.z_threshold)
