"""
Finite discrete summand laws, their zero-bias and size-bias transforms, and the independent-sum
couplings built on them.

An independent sum is declared as a list of ``SummandGroup``: ``count`` i.i.d. copies of one law.
Draws never materialize the individual summands; each group contributes a multinomial tally of
its atoms, so a sum of a million +-1 summands costs the same as a sum of ten.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np

from steinbias.exceptions import DegenerateException, SupportTooLargeException, ValidationException
from steinbias.utils import AliasTable, atom_key

logger = logging.getLogger(__name__)

MEAN_ZERO_TOLERANCE = 1e-12
DEFAULT_SUM_ATOMS = 10_000

PmfLike = Union[Mapping, Sequence[Tuple]]


def _pairs(pmf: PmfLike) -> List[Tuple]:
    return list(pmf.items()) if isinstance(pmf, Mapping) else [tuple(p) for p in pmf]


@dataclass(frozen=True, eq=False)
class DiscreteLaw:
    values: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        probabilities = np.asarray(self.probabilities, dtype=float).ravel()
        if values.size == 0 or values.size != probabilities.size:
            raise ValidationException(
                f"law needs matching nonempty values and probabilities, got {values.size} and {probabilities.size}"
            )
        if np.any(probabilities < 0) or abs(probabilities.sum() - 1.0) > 1e-9:
            raise ValidationException(f"probabilities must be nonnegative and sum to 1, got {probabilities.tolist()}")
        keep = probabilities > 0
        merged_values, inverse = np.unique(values[keep], return_inverse=True)
        merged = np.zeros(merged_values.size)
        np.add.at(merged, inverse, probabilities[keep])
        object.__setattr__(self, "values", merged_values)
        object.__setattr__(self, "probabilities", merged / merged.sum())

    @classmethod
    def from_pmf(cls, pmf: PmfLike) -> "DiscreteLaw":
        pairs = _pairs(pmf)
        return cls(values=[float(v) for v, _ in pairs], probabilities=[float(p) for _, p in pairs])

    @classmethod
    def bernoulli(cls, p: float) -> "DiscreteLaw":
        return cls(values=[0.0, 1.0], probabilities=[1.0 - p, p])

    @classmethod
    def rademacher(cls, c: float = 1.0) -> "DiscreteLaw":
        return cls(values=[-c, c], probabilities=[0.5, 0.5])

    @property
    def mean(self) -> float:
        return float(self.values @ self.probabilities)

    @property
    def variance(self) -> float:
        return float(((self.values - self.mean) ** 2) @ self.probabilities)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(self.values, size=size, p=self.probabilities)

    def _zero_bias_knots(self) -> np.ndarray:
        if abs(self.mean) > MEAN_ZERO_TOLERANCE:
            raise ValidationException(f"zero biasing needs a mean zero law, mean is {self.mean}")
        variance = self.variance
        if variance <= 0:
            raise DegenerateException("zero biasing needs a positive variance")
        # density E[X 1(X > t)] / var is constant between consecutive atoms
        upper_tail = np.cumsum((self.values * self.probabilities)[::-1])[::-1]
        density = upper_tail[1:] / variance
        masses = np.clip(density * np.diff(self.values), 0.0, None)
        cdf = np.concatenate([[0.0], np.cumsum(masses)])
        return cdf / cdf[-1]

    def zero_bias_cdf(self, t) -> np.ndarray:
        """CDF of the zero-biased law; piecewise linear with knots at the atoms."""
        return np.interp(t, self.values, self._zero_bias_knots())

    def zero_bias_sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # inverse transform of the piecewise linear cdf
        return np.interp(rng.random(size), self._zero_bias_knots(), self.values)

    def size_biased(self) -> "DiscreteLaw":
        if np.any(self.values < 0):
            raise ValidationException("size biasing needs a nonnegative law")
        if self.mean <= 0:
            raise DegenerateException("size biasing needs a positive mean")
        return DiscreteLaw(values=self.values, probabilities=self.values * self.probabilities / self.mean)

    def pmf(self) -> Dict[float, float]:
        return {float(v): float(p) for v, p in zip(self.values, self.probabilities)}


def size_bias_discrete_oracle(pmf: PmfLike) -> Dict:
    """
    Exact pmf of the size-biased law: ``P(Ys = y) = y P(Y = y) / mu``.

    Arithmetic follows the inputs, so Fraction masses give an exact Fraction result.
    """
    pairs = _pairs(pmf)
    if any(value < 0 for value, _ in pairs):
        raise ValidationException("size biasing needs a nonnegative law")
    mu = sum(value * mass for value, mass in pairs)
    if mu <= 0:
        raise DegenerateException(f"size biasing needs a positive mean, got {mu}")
    out = {}
    for value, mass in pairs:
        if value * mass != 0:
            out[value] = out.get(value, 0) + value * mass / mu
    return out


@dataclass(frozen=True)
class SummandGroup:
    law: DiscreteLaw
    count: int = 1


@dataclass(frozen=True, eq=False)
class IndependentSumBatch:
    y: np.ndarray
    y_biased: np.ndarray
    chosen: np.ndarray
    x_chosen: np.ndarray
    x_biased: np.ndarray
    gap: np.ndarray


class IndependentSum:
    def __init__(self, groups: Sequence[SummandGroup]):
        if not groups:
            raise ValidationException("an independent sum needs at least one summand group")
        for group in groups:
            if group.count < 1:
                raise ValidationException(f"summand group count must be >= 1, got {group.count}")
        self.groups = list(groups)
        self.counts = np.array([g.count for g in self.groups], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(self.counts)[:-1]])

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def mean(self) -> float:
        return float(sum(g.count * g.law.mean for g in self.groups))

    @property
    def variance(self) -> float:
        return float(sum(g.count * g.law.variance for g in self.groups))

    def zero_bias_gap_bound(self) -> float:
        """``|X* - X|`` never exceeds the span of the summand's support."""
        return max(float(g.law.values[-1] - g.law.values[0]) for g in self.groups)

    def size_bias_gap_bound(self) -> float:
        return max(float(g.law.values[-1]) for g in self.groups)

    def group_of(self, index: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.offsets, index, side="right") - 1

    def summand_means(self) -> np.ndarray:
        return np.repeat([g.law.mean for g in self.groups], self.counts)

    def sample_summands(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Every summand explicitly, ``(size, n)``; only for small sums."""
        return np.hstack([g.law.sample(rng, (size, g.count)) for g in self.groups])

    def _tallies(self, rng: np.random.Generator, size: int) -> List[np.ndarray]:
        return [rng.multinomial(g.count, g.law.probabilities, size=size) for g in self.groups]

    def _biased_draw(self, rng: np.random.Generator, size: int, weights: np.ndarray, transform: str):
        tallies = self._tallies(rng, size)
        y = sum(t @ g.law.values for t, g in zip(tallies, self.groups))
        table = AliasTable(weights)
        logger.debug(f"{transform} biasing picks among {table.atoms.size} summand groups")
        chosen_group = table.sample(rng, size)
        chosen = np.empty(size, dtype=np.int64)
        x_chosen = np.empty(size)
        x_biased = np.empty(size)
        for g, group in enumerate(self.groups):
            rows = np.flatnonzero(chosen_group == g)
            if rows.size == 0:
                continue
            # summands of a group are exchangeable: place the tallied atoms in value order and pick a position
            position = rng.integers(0, group.count, size=rows.size)
            atom = (position[:, None] < np.cumsum(tallies[g][rows], axis=1)).argmax(axis=1)
            chosen[rows] = self.offsets[g] + position
            x_chosen[rows] = group.law.values[atom]
            if transform == "zero":
                x_biased[rows] = group.law.zero_bias_sample(rng, rows.size)
            else:
                x_biased[rows] = group.law.size_biased().sample(rng, rows.size)
        return IndependentSumBatch(
            y=y,
            y_biased=y - x_chosen + x_biased,
            chosen=chosen,
            x_chosen=x_chosen,
            x_biased=x_biased,
            gap=np.abs(x_biased - x_chosen),
        )

    def zero_bias_draw(self, rng: np.random.Generator, size: int) -> IndependentSumBatch:
        """``Y* = Y - X_I + X_I*`` with ``P(I = alpha)`` proportional to ``Var X_alpha``."""
        for group in self.groups:
            if abs(group.law.mean) > MEAN_ZERO_TOLERANCE:
                raise ValidationException(f"zero biasing needs mean zero summands, got mean {group.law.mean}")
        weights = self.counts * np.array([g.law.variance for g in self.groups])
        if not np.any(weights > 0):
            raise DegenerateException("every summand has zero variance")
        return self._biased_draw(rng, size, weights, "zero")

    def size_bias_draw(self, rng: np.random.Generator, size: int) -> IndependentSumBatch:
        """``Ys = Y - X_I + X_I^s`` with ``P(I = alpha)`` proportional to ``E X_alpha``."""
        for group in self.groups:
            if np.any(group.law.values < 0):
                raise ValidationException("size biasing needs nonnegative summands")
        weights = self.counts * np.array([g.law.mean for g in self.groups])
        if not np.any(weights > 0):
            raise DegenerateException("every summand has mean zero")
        return self._biased_draw(rng, size, weights, "size")

    def sum_pmf(self, cap: int = DEFAULT_SUM_ATOMS) -> Dict[float, float]:
        """Exact pmf of the sum by convolution; ``cap`` limits both the summand count and the atoms."""
        if self.n > cap:
            raise SupportTooLargeException(f"exact sum law needs n <= {cap}, got {self.n}")
        pmf = {0.0: 1.0}
        for group in self.groups:
            for _ in range(group.count):
                convolved = {}
                for total, mass in pmf.items():
                    for value, p in zip(group.law.values, group.law.probabilities):
                        key = atom_key(total + value)[0]
                        convolved[key] = convolved.get(key, 0.0) + mass * p
                pmf = convolved
                if len(pmf) > cap:
                    raise SupportTooLargeException(f"exact sum law has more than {cap} atoms")
        return pmf

    def size_delta_proxy(self) -> float:
        """``sqrt(Var(E(Ys - Y | X)))`` for the size-bias draw: ``sum_alpha p_alpha^2 Var X_alpha``."""
        mean = self.mean
        if mean <= 0:
            raise DegenerateException("size biasing needs a positive mean")
        return float(np.sqrt(sum(g.count * (g.law.mean / mean) ** 2 * g.law.variance for g in self.groups)))

    def pair_average(self, x: np.ndarray) -> np.ndarray:
        """``E(Y'' | X)`` for the resample-one-summand pair, averaged exactly over the uniform index."""
        x = np.atleast_2d(x)
        return x.sum(axis=1) - x.mean(axis=1) + self.summand_means().mean()

    @property
    def lam(self) -> float:
        return 1.0 / self.n


def zero_bias_independent_sum(
    groups: Sequence[SummandGroup], rng: np.random.Generator, size: int
) -> Tuple[np.ndarray, np.ndarray]:
    batch = IndependentSum(groups).zero_bias_draw(rng, size)
    return batch.y, batch.y_biased


def size_bias_independent_sum(
    groups: Sequence[SummandGroup], rng: np.random.Generator, size: int
) -> Tuple[np.ndarray, np.ndarray]:
    batch = IndependentSum(groups).size_bias_draw(rng, size)
    return batch.y, batch.y_biased


def exchangeable_pair_independent_sum(
    independent_sum: IndependentSum, x: np.ndarray, rng: np.random.Generator
) -> Tuple[float, float, int]:
    """
    One step of the resample-one-summand pair: ``Y'' = Y' - X_I + X_I''`` with ``I`` uniform and
    ``X_I''`` a fresh copy of summand ``I``. Linear with ``lambda = 1/n`` for mean zero summands.

    Returns:
        (y', y'', I)
    """
    x = np.asarray(x, dtype=float)
    index = int(rng.integers(0, independent_sum.n))
    group = independent_sum.groups[int(independent_sum.group_of(index))]
    replacement = float(group.law.sample(rng, 1)[0])
    y_prime = float(x.sum())
    return y_prime, y_prime - x[index] + replacement, index
