import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from steinbias.arrays import MomentSummary, center_for_cycle_type
from steinbias.construction import Draws, PermutationConstruction, ScoreArrayConfig
from steinbias.permutations import CycleType, FixedCycleType
from steinbias.verify import CheckReport, two_sample_check
from steinbias.zero_bias import DEFAULT_PREPASS, CycleTypeZeroBiasSampler, rejection_square_bias

logger = logging.getLogger(__name__)


@dataclass
class CycleTypeConfig(ScoreArrayConfig):
    # [[cycle length, count], ...], no 1-cycles
    cycle_type: List[List[int]] = field(default_factory=list)
    prepass: int = DEFAULT_PREPASS
    cross_check_draws: int = 20_000

    def validate(self) -> Tuple[bool, Optional[str]]:
        if not self.cycle_type:
            return False, "cycle_type: a list of [length, count] pairs is required"
        if self.n is None:
            self.n = sum(q * c for q, c in self.cycle_type)
        return super().validate()


class CycleTypeConstruction(PermutationConstruction):
    """Zero-bias coupling of ``sum_i a[i, pi(i)]`` with ``pi`` uniform on one fixed-point free cycle type."""

    config = CycleTypeConfig
    centering = staticmethod(center_for_cycle_type)
    available_checks = PermutationConstruction.available_checks + ("cross-check",)

    def build_model(self, n: int) -> FixedCycleType:
        return FixedCycleType(CycleType.from_pairs(self.construction_config.cycle_type, n))

    def build_sampler(self, rng: np.random.Generator) -> CycleTypeZeroBiasSampler:
        return CycleTypeZeroBiasSampler(
            self.score,
            self.model,
            tuple_table_cap=self.suite.tuple_table_cap,
            prepass=self.construction_config.prepass,
            rng=rng,
        )

    def describe(self) -> Dict:
        return {
            **super().describe(),
            "cycle_type": [list(pair) for pair in self.model.cycle_type.counts],
            "case_masses": self.sampler.case_masses(),
            "total_mass": self.sampler.total_mass,
        }

    def check_cross_check(self, draws: Draws, moments: MomentSummary, rng) -> CheckReport:
        y_dagger, y_ddagger = rejection_square_bias(self.spec, rng, self.construction_config.cross_check_draws)
        batch = draws.batch

        def statistics(first, second):
            return {"y_dagger": first, "y_ddagger": second, "square": (first - second) ** 2, "product": first * second}

        return two_sample_check(
            statistics(batch.y_dagger, batch.y_ddagger),
            statistics(y_dagger, y_ddagger),
            name="cross-check-rejection",
            threshold=self.suite.z_threshold,
        )
