"""Size-bias coupling of sums of local statistics through directional regeneration."""
import logging
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from steinbias.arrays import METHOD_EXACT, MomentSummary, moments_from_sample
from steinbias.bounds import BoundReport, LocalBoundInputs, SmoothnessClass, local_bound, local_bound_inputs
from steinbias.config import SBConfigExperiment
from steinbias.construction import SIZE, BaseConstruction, Draws
from steinbias.exceptions import ConstructionException, NotEnumerableException, SupportTooLargeException
from steinbias.local_models import LOCAL_MODELS, BaseLocalModel, build_local_model
from steinbias.size_bias import (
    DEFAULT_PREPASS,
    DEFAULT_STATE_CAP,
    SIZE_RECORD_FIELDS,
    DependencyStructure,
    LocalSizeBiasSampler,
    build_dependency_structure,
    delta_proxy_estimate,
    exact_delta,
    size_bias_discrete_oracle,
)
from steinbias.utils import tally
from steinbias.verify import (
    CheckReport,
    chi_square_check,
    directional_check,
    estimate_agreement_check,
    upper_bound_check,
)

logger = logging.getLogger(__name__)

MODEL_PARAMETERS = {
    "window": ("n", "m", "payoff"),
    "perm-pattern": ("n", "m", "pattern"),
    "torus-pattern": ("n", "p", "colors", "target"),
    "subgraph-count": ("n", "p", "edge_probability"),
    "hypercube-max": ("p",),
}


@dataclass
class LocalConfig(SBConfigExperiment):
    model: str = None
    n: Optional[int] = None
    m: Optional[int] = None
    p: Optional[int] = None
    payoff: str = "increasing"
    # relative order as a 1-based permutation literal, e.g. [2, 3, 1]
    pattern: Optional[List[int]] = None
    colors: Optional[List[float]] = None
    target: Optional[List[int]] = None
    edge_probability: Optional[float] = None
    prepass: int = DEFAULT_PREPASS
    state_cap: int = DEFAULT_STATE_CAP
    delta_outer: int = 200
    delta_inner: int = 20
    directional_draws: int = 100_000
    custom_a: Optional[float] = None

    def validate(self) -> Tuple[bool, Optional[str]]:
        is_valid, reason = super().validate()
        if not is_valid:
            return is_valid, reason
        if self.model not in LOCAL_MODELS:
            return False, f"model: unknown local model {self.model!r}, expected one of {sorted(LOCAL_MODELS)}"
        for name in MODEL_PARAMETERS[self.model]:
            if getattr(self, name) is None and name != "pattern":
                return False, f"{name}: required by the {self.model} model"
        return True, None

    def model_parameters(self) -> Dict:
        params = {name: getattr(self, name) for name in MODEL_PARAMETERS[self.model]}
        if self.model == "perm-pattern" and self.pattern is not None:
            params["pattern"] = [x - 1 for x in self.pattern]
        return params


class LocalConstruction(BaseConstruction):
    config = LocalConfig
    kind = SIZE
    record_fields = SIZE_RECORD_FIELDS
    available_checks = (
        "characterizing",
        "gap",
        "variance-identity",
        "independence",
        "oracle",
        "directional",
        "delta-proxy",
        "delta-vs-bound",
    )

    def __init__(self, name: str, config: LocalConfig, suite):
        super().__init__(name, config, suite)
        self.model: Optional[BaseLocalModel] = None
        self.structure: Optional[DependencyStructure] = None
        self.inputs: Optional[LocalBoundInputs] = None
        self.sampler: Optional[LocalSizeBiasSampler] = None

    def prepare(self, rng: np.random.Generator):
        config = self.construction_config
        try:
            self.model = build_local_model(config.model, **config.model_parameters())
        except TypeError as e:
            raise ConstructionException(f"experiment.{self.name}: {e}")
        self.structure = build_dependency_structure(self.model, config.prepass, rng)
        self.inputs = local_bound_inputs(self.structure)
        self.sampler = LocalSizeBiasSampler(self.model, self.structure)
        logger.info(
            f"experiment.{self.name}: {self.model.kind} with {self.model.index_count} indices, b={self.structure.b}"
        )

    def _enumerated(self):
        try:
            return self.model.enumerate_states(self.construction_config.state_cap)
        except (NotEnumerableException, SupportTooLargeException):
            return None

    def moments(self, rng: np.random.Generator) -> MomentSummary:
        enumerated = self._enumerated()
        if enumerated is not None:
            states, probabilities = enumerated
            y = self.model.total(states)
            mean = float(probabilities @ y)
            return MomentSummary(
                mean=mean,
                variance=float(probabilities @ (y - mean) ** 2),
                method=METHOD_EXACT,
                sample_count=len(states),
            )
        reps = max(self.construction_config.replicates, 2)
        chunks = []
        for start in range(0, reps, self.suite.block_size):
            size = min(self.suite.block_size, reps - start)
            chunks.append(self.model.total(self.model.sample_state(rng, size)))
        return moments_from_sample(np.concatenate(chunks))

    def sample(self, rng: np.random.Generator, size: int):
        return self.sampler.sample(rng, size)

    def draws(self, batch) -> Draws:
        return Draws(y=batch.y, biased=batch.y_s, gap=batch.gap, batch=batch)

    @property
    def gap_bound(self) -> float:
        return self.sampler.gap_bound

    def bound(self, moments: MomentSummary, smoothness: SmoothnessClass, variant: str) -> BoundReport:
        return local_bound(moments.mean, moments.sigma, self.inputs, smoothness, variant)

    def describe(self) -> Dict:
        return {"model": self.model.describe(), "structure": self.structure.describe(), "inputs": asdict(self.inputs)}

    def check_independence(self, draws: Draws, moments: MomentSummary, rng) -> CheckReport:
        violations = int((~draws.batch.outside_unchanged).sum())
        return CheckReport(
            name="independence",
            passed=violations == 0,
            observed=float(violations),
            threshold=0.0,
            details={"draws": len(draws.batch)},
        )

    def check_oracle(self, draws: Draws, moments: MomentSummary, rng) -> CheckReport:
        states, probabilities = self.model.enumerate_states(self.construction_config.state_cap)
        pmf = {}
        for value, mass in zip(self.model.total(states), probabilities):
            pmf[float(value)] = pmf.get(float(value), 0.0) + float(mass)
        oracle = {(value,): mass for value, mass in size_bias_discrete_oracle(pmf).items()}
        return chi_square_check(tally(draws.biased), oracle, name=f"oracle-{self.model.kind}")

    def check_directional(self, draws: Draws, moments: MomentSummary, rng) -> CheckReport:
        config = self.construction_config
        reports = [
            directional_check(self.model, alpha, config.directional_draws, rng, config.state_cap)
            for alpha in range(self.model.index_count)
        ]
        return CheckReport(
            name=f"directional-{self.model.kind}",
            passed=all(r.passed for r in reports),
            observed=min(r.observed for r in reports),
            threshold=reports[0].threshold,
            details={"p_values": [r.observed for r in reports]},
        )

    def check_delta_proxy(self, draws: Draws, moments: MomentSummary, rng) -> CheckReport:
        config = self.construction_config
        estimate = delta_proxy_estimate(self.model, self.structure, config.delta_outer, config.delta_inner, rng)
        reports = [
            upper_bound_check(
                estimate.value, estimate.stderr, self.inputs.delta_bound, "delta-proxy-bound", self.suite.z_threshold
            )
        ]
        details = {"estimate": estimate.value, "stderr": estimate.stderr, "bound": self.inputs.delta_bound}
        if self.model.deterministic_regeneration and self._enumerated() is not None:
            exact = exact_delta(self.model, self.structure, config.state_cap)
            details.update(exact_proxy=exact.proxy, exact_delta=exact.delta)
            reports.append(
                estimate_agreement_check(
                    estimate.value, estimate.stderr, exact.proxy, "delta-proxy-exact", self.suite.z_threshold
                )
            )
        return CheckReport(
            name="delta-proxy",
            passed=all(r.passed for r in reports),
            observed=estimate.value,
            threshold=self.inputs.delta_bound,
            details=details,
        )
