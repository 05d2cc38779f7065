"""Zero-bias and size-bias couplings of sums of independent finitely supported summands."""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from steinbias.arrays import METHOD_EXACT, MomentSummary
from steinbias.bounds import BoundReport, SmoothnessClass, independent_sum_bound, size_bias_bound
from steinbias.config import SBConfigExperiment
from steinbias.construction import SIZE, ZERO, BaseConstruction, Draws
from steinbias.exceptions import ConstructionException
from steinbias.laws import DEFAULT_SUM_ATOMS, DiscreteLaw, IndependentSum, SummandGroup, size_bias_discrete_oracle
from steinbias.utils import tally
from steinbias.verify import CheckReport, chi_square_check, linearity_check_independent

logger = logging.getLogger(__name__)


@dataclass
class IndependentConfig(SBConfigExperiment):
    # each entry: {law = "rademacher", c = 1.0} | {law = "bernoulli", p = 0.3} | {values = [...], probabilities = [...]}
    # plus count = number of i.i.d. copies
    summands: List[Dict] = field(default_factory=list)
    linearity_reps: int = 10
    sum_atom_cap: int = DEFAULT_SUM_ATOMS
    custom_a: Optional[float] = None

    def validate(self) -> Tuple[bool, Optional[str]]:
        is_valid, reason = super().validate()
        if not is_valid:
            return is_valid, reason
        if not self.summands:
            return False, "summands: at least one summand group is required"
        for k, summand in enumerate(self.summands):
            if summand.get("law") not in (None, "rademacher", "bernoulli"):
                return False, f"summands[{k}].law: unknown law {summand.get('law')!r}"
            if summand.get("law") is None and not summand.get("values"):
                return False, f"summands[{k}]: needs a named law or values and probabilities"
            count = summand.get("count", 1)
            if not isinstance(count, int) or count < 1:
                return False, f"summands[{k}].count: must be an integer >= 1, got {count!r}"
        return True, None


def build_groups(summands: List[Dict]) -> List[SummandGroup]:
    groups = []
    for summand in summands:
        law_name = summand.get("law")
        if law_name == "rademacher":
            law = DiscreteLaw.rademacher(summand.get("c", 1.0))
        elif law_name == "bernoulli":
            law = DiscreteLaw.bernoulli(summand["p"])
        else:
            law = DiscreteLaw(values=summand["values"], probabilities=summand["probabilities"])
        groups.append(SummandGroup(law=law, count=summand.get("count", 1)))
    return groups


class IndependentConstruction(BaseConstruction):
    config = IndependentConfig
    record_fields = ("y", "y_biased", "chosen", "gap")

    def __init__(self, name: str, config: IndependentConfig, suite):
        super().__init__(name, config, suite)
        self.independent_sum: Optional[IndependentSum] = None

    def prepare(self, rng: np.random.Generator):
        try:
            self.independent_sum = IndependentSum(build_groups(self.construction_config.summands))
        except (KeyError, TypeError) as e:
            raise ConstructionException(f"experiment.{self.name}.summands: {e}")
        groups = len(self.independent_sum.groups)
        logger.info(f"experiment.{self.name}: {self.independent_sum.n} summands in {groups} groups")

    def moments(self, rng: np.random.Generator) -> MomentSummary:
        independent_sum = self.independent_sum
        return MomentSummary(mean=independent_sum.mean, variance=independent_sum.variance, method=METHOD_EXACT)

    def draws(self, batch) -> Draws:
        return Draws(y=batch.y, biased=batch.y_biased, gap=batch.gap, batch=batch)

    def records(self, batch) -> np.ndarray:
        return np.column_stack([batch.y, batch.y_biased, batch.chosen, batch.gap]).astype("<f8")

    def describe(self) -> Dict:
        return {"n": self.independent_sum.n, "groups": [g.law.pmf() for g in self.independent_sum.groups]}


class ZeroIndependentConstruction(IndependentConstruction):
    kind = ZERO
    available_checks = ("characterizing", "gap", "linearity", "delta-vs-bound")

    def sample(self, rng: np.random.Generator, size: int):
        return self.independent_sum.zero_bias_draw(rng, size)

    @property
    def gap_bound(self) -> float:
        return self.independent_sum.zero_bias_gap_bound()

    def bound(self, moments: MomentSummary, smoothness: SmoothnessClass, variant: str) -> BoundReport:
        return independent_sum_bound(moments.sigma, self.gap_bound, smoothness, variant)

    def check_linearity(self, draws: Draws, moments: MomentSummary, rng) -> CheckReport:
        return linearity_check_independent(self.independent_sum, rng, self.construction_config.linearity_reps)


class SizeIndependentConstruction(IndependentConstruction):
    kind = SIZE
    available_checks = ("characterizing", "gap", "variance-identity", "oracle", "delta-vs-bound")

    def sample(self, rng: np.random.Generator, size: int):
        return self.independent_sum.size_bias_draw(rng, size)

    @property
    def gap_bound(self) -> float:
        return self.independent_sum.size_bias_gap_bound()

    def bound(self, moments: MomentSummary, smoothness: SmoothnessClass, variant: str) -> BoundReport:
        return size_bias_bound(
            moments.mean, moments.sigma, self.gap_bound, self.independent_sum.size_delta_proxy(), smoothness, variant
        )

    def check_oracle(self, draws: Draws, moments: MomentSummary, rng) -> CheckReport:
        pmf = self.independent_sum.sum_pmf(self.construction_config.sum_atom_cap)
        oracle = {(value,): mass for value, mass in size_bias_discrete_oracle(pmf).items()}
        return chi_square_check(tally(draws.biased), oracle, name="oracle-size-independent")
