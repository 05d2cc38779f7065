import logging

import numpy as np

from steinbias.construction import PermutationConstruction
from steinbias.permutations import Uniform
from steinbias.zero_bias import UniformZeroBiasSampler

logger = logging.getLogger(__name__)


class UniformConstruction(PermutationConstruction):
    """Zero-bias coupling of ``sum_i a[i, pi(i)]`` with ``pi`` uniform on all permutations."""

    def build_model(self, n: int) -> Uniform:
        return Uniform(n)

    def build_sampler(self, rng: np.random.Generator) -> UniformZeroBiasSampler:
        return UniformZeroBiasSampler(self.score, tuple_table_cap=self.suite.tuple_table_cap)
