"""
Zero-bias couplings for combinatorial sums ``Y = sum_i a[i, pi(i)]``.

Both constructions start from an exchangeable pair ``(Y', Y'')`` satisfying the linearity
condition ``E(Y'' | Y') = (1 - lambda) Y'``, draw ``(Y_dagger, Y_ddagger)`` from the square-biased
pair law ``(y' - y'')^2 dP / E(Y' - Y'')^2`` by surgery on the permutation behind ``Y'``, and
interpolate ``Y* = U Y_dagger + (1 - U) Y_ddagger``. Every draw records the index set its surgery
touched, so ``|Y* - Y|`` is certified against ``2 |touched| C``.
"""
import logging
from collections import Counter
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import Dict, FrozenSet, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from steinbias.arrays import ScoreArray
from steinbias.exceptions import DegenerateException, DimensionException, ValidationException
from steinbias.permutations import (
    DEFAULT_ENUMERATION_CAP,
    FixedCycleType,
    Permutation,
    PermutationModel,
    Uniform,
    apply_transposition,
    conjugate,
    conjugate_batch,
    inverse_batch,
    support_array,
    transposition,
)
from steinbias.utils import (
    AliasTable,
    as_generator,
    distinct_tuples,
    falling_factorial,
    random_distinct_tuples,
    rejection_sample,
    tally,
)

logger = logging.getLogger(__name__)

DEFAULT_TUPLE_TABLE_CAP = 10**7
DEFAULT_PREPASS = 100_000
CHUNK = 1 << 18

LOCAL_COORDINATES = ("p_i", "i", "n_i", "p_j", "j", "n_j")
CASE_LABELS = ("A", "B_IJ", "B_JI", "F(2,2)", "F(3+,2)", "F(2,3+)", "F(3+,3+)", "S2")


@dataclass(frozen=True)
class ExchangeablePairSpec:
    model: PermutationModel
    score: ScoreArray
    lam: float

    def __post_init__(self):
        if self.score.n != self.model.n:
            raise DimensionException(f"score array has n={self.score.n}, model has n={self.model.n}")
        if self.lam != self.model.lam:
            raise ValidationException(f"lambda for {self.model.kind} is {self.model.lam}, got {self.lam}")
        if isinstance(self.model, Uniform) and not self.score.row_centered:
            raise ValidationException("the uniform pair needs a row centered score array")
        if isinstance(self.model, FixedCycleType) and not (self.score.symmetric and self.score.zero_diagonal):
            raise ValidationException("the cycle type pair needs a symmetric zero diagonal score array")

    @classmethod
    def for_model(cls, model: PermutationModel, score: ScoreArray) -> "ExchangeablePairSpec":
        return cls(model=model, score=score, lam=model.lam)

    @property
    def n(self) -> int:
        return self.score.n

    def pair_images(self, mapping: np.ndarray) -> np.ndarray:
        if isinstance(self.model, FixedCycleType):
            return cycle_type_pair_images(self.score.entries, mapping)
        return uniform_pair_images(self.score.entries, mapping)

    def partner_batch(self, mappings: np.ndarray, i: np.ndarray, j: np.ndarray) -> np.ndarray:
        """``pi''`` for every row of a batch, given that row's index pair."""
        rows = np.arange(mappings.shape[0])
        if isinstance(self.model, FixedCycleType):
            tau = np.tile(np.arange(self.n), (rows.size, 1))
            tau[rows, i], tau[rows, j] = j, i
            return conjugate_batch(mappings, tau)
        partner = mappings.copy()
        partner[rows, i], partner[rows, j] = mappings[rows, j], mappings[rows, i]
        return partner

    @property
    def difference_bound(self) -> float:
        """Largest possible ``|Y' - Y''|``."""
        factor = 8 if isinstance(self.model, FixedCycleType) else 4
        return factor * self.score.c_sup


def uniform_pair_images(a: np.ndarray, mapping: np.ndarray) -> np.ndarray:
    """``Y''`` of ``pi o tau_IJ`` for every (I, J) at once, as an n x n matrix."""
    m = a[:, mapping]
    d = np.diag(m)
    return d.sum() - d[:, None] - d[None, :] + m + m.T


def cycle_type_pair_images(a: np.ndarray, mapping: np.ndarray) -> np.ndarray:
    """``Y''`` of ``tau_IJ pi tau_IJ`` for every (I, J) at once, as an n x n matrix."""
    labels = np.arange(a.shape[0])
    i = labels[:, None, None]
    j = labels[None, :, None]
    x = labels[None, None, :]

    def swap(z):
        return np.where(z == i, j, np.where(z == j, i, z))

    image = swap(np.asarray(mapping)[swap(x)])
    return a[x, image].sum(axis=-1)


def pair_average(images: np.ndarray) -> float:
    off = ~np.eye(images.shape[0], dtype=bool)
    return float(images[off].mean())


def exchangeable_pair_uniform(
    score: ScoreArray, pi: Permutation, rng: np.random.Generator
) -> Tuple[Permutation, Permutation, int, int]:
    if not score.row_centered:
        raise ValidationException("the uniform pair needs a row centered score array")
    if score.n < 3 or pi.n != score.n:
        raise DimensionException(f"uniform pair needs n >= 3 and matching sizes, got {score.n} and {pi.n}")
    i, j = (int(v) for v in rng.choice(score.n, size=2, replace=False))
    return pi, apply_transposition(pi, i, j), i, j


def exchangeable_pair_cycle_type(
    score: ScoreArray, pi: Permutation, rng: np.random.Generator
) -> Tuple[Permutation, Permutation, int, int]:
    if not (score.symmetric and score.zero_diagonal):
        raise ValidationException("the cycle type pair needs a symmetric zero diagonal score array")
    if score.n < 4 or pi.n != score.n:
        raise DimensionException(f"cycle type pair needs n >= 4 and matching sizes, got {score.n} and {pi.n}")
    i, j = (int(v) for v in rng.choice(score.n, size=2, replace=False))
    return pi, conjugate(pi, transposition(score.n, i, j)), i, j


def enumerate_pair_law(spec: ExchangeablePairSpec, cap: int = DEFAULT_ENUMERATION_CAP) -> Dict[Tuple, Fraction]:
    """Exact joint law of ``(Y', Y'')`` over the model's support and every ordered index pair."""
    support = support_array(spec.model, cap)
    off = ~np.eye(spec.n, dtype=bool)
    counts = Counter()
    for mapping in support:
        images = spec.pair_images(mapping)[off]
        counts.update(tally(np.full(images.size, spec.score.evaluate(mapping)), images))
    total = support.shape[0] * spec.n * (spec.n - 1)
    logger.debug(f"pair law over {total} states has {len(counts)} atoms")
    return {key: Fraction(count, total) for key, count in counts.items()}


def square_bias_oracle(pairs: Union[Mapping, Sequence]) -> Dict[Tuple, object]:
    """
    Exact law of ``(Y_dagger, Y_ddagger)``: the pair law reweighted by ``(y' - y'')^2``.

    Args:
        pairs: ``{(y', y''): probability}`` or a list of ``((y', y''), probability)``

    Returns:
        ``{(y_dagger, y_ddagger): probability}`` over the atoms with positive weight
    """
    items = list(pairs.items()) if isinstance(pairs, Mapping) else list(pairs)
    total = sum((y1 - y2) ** 2 * p for (y1, y2), p in items)
    if total == 0:
        raise DegenerateException("E(Y' - Y'')^2 is zero, the square-biased law does not exist")
    out = {}
    for (y1, y2), p in items:
        weight = (y1 - y2) ** 2 * p
        if weight:
            out[(y1, y2)] = out.get((y1, y2), 0) + weight / total
    return out


def assemble_y_star(y_dagger, y_ddagger, u):
    u = np.asarray(u, dtype=float)
    if np.any(np.isnan(u)) or np.any(u < 0) or np.any(u > 1):
        raise ValidationException(f"interpolation weight must lie in [0, 1], got {u}")
    out = u * np.asarray(y_dagger, dtype=float) + (1.0 - u) * np.asarray(y_ddagger, dtype=float)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class IndexSurgery:
    """The labels a draw's surgery moved (``i``) and where it moved them (``i_dagger``)."""

    i: Tuple[int, ...]
    i_dagger: Tuple[int, ...]

    def __post_init__(self):
        if len(self.i) != len(self.i_dagger):
            raise ValidationException(f"surgery vectors differ in length: {self.i} and {self.i_dagger}")
        if len(set(self.i)) != len(self.i) or len(set(self.i_dagger)) != len(self.i_dagger):
            raise ValidationException(f"surgery vectors must have distinct entries: {self.i}, {self.i_dagger}")

    @property
    def kappa(self) -> int:
        return len(self.i)


@dataclass(frozen=True)
class ZeroBiasDraw:
    y: float
    y_dagger: float
    y_ddagger: float
    y_star: float
    u: float
    s: float
    t_prime: float
    t_dagger: float
    t_ddagger: float
    touched: FrozenSet[int]
    gap: float
    surgery: Optional[IndexSurgery] = None


RECORD_FIELDS = tuple(f.name for f in fields(ZeroBiasDraw) if f.name != "surgery")


@dataclass(frozen=True, eq=False)
class ZeroBiasBatch:
    y: np.ndarray
    y_dagger: np.ndarray
    y_ddagger: np.ndarray
    y_star: np.ndarray
    u: np.ndarray
    s: np.ndarray
    t_prime: np.ndarray
    t_dagger: np.ndarray
    t_ddagger: np.ndarray
    touched: np.ndarray
    gap: np.ndarray
    source: np.ndarray
    target: np.ndarray
    pi: np.ndarray
    pi_dagger: np.ndarray
    pi_ddagger: np.ndarray
    gap_bound: float

    def __len__(self) -> int:
        return self.y.shape[0]

    def draw(self, k: int) -> ZeroBiasDraw:
        seen = {}
        for source, target in zip(self.source[k].tolist(), self.target[k].tolist()):
            seen.setdefault(source, target)
        return ZeroBiasDraw(
            y=float(self.y[k]),
            y_dagger=float(self.y_dagger[k]),
            y_ddagger=float(self.y_ddagger[k]),
            y_star=float(self.y_star[k]),
            u=float(self.u[k]),
            s=float(self.s[k]),
            t_prime=float(self.t_prime[k]),
            t_dagger=float(self.t_dagger[k]),
            t_ddagger=float(self.t_ddagger[k]),
            touched=frozenset(np.flatnonzero(self.touched[k]).tolist()),
            gap=float(self.gap[k]),
            surgery=IndexSurgery(i=tuple(seen), i_dagger=tuple(seen.values())),
        )

    def __iter__(self) -> Iterator[ZeroBiasDraw]:
        return (self.draw(k) for k in range(len(self)))

    def records(self) -> np.ndarray:
        """One float64 row per draw, columns in ``RECORD_FIELDS`` order, ``touched`` as its size."""
        columns = [
            self.touched.sum(axis=1).astype(float) if name == "touched" else getattr(self, name)
            for name in RECORD_FIELDS
        ]
        return np.column_stack(columns).astype("<f8")


def _assemble(
    score: ScoreArray,
    pi: np.ndarray,
    pi_dagger: np.ndarray,
    pi_ddagger: np.ndarray,
    touched: np.ndarray,
    u: np.ndarray,
    gap_bound: float,
    source: np.ndarray,
    target: np.ndarray,
) -> ZeroBiasBatch:
    cols = np.arange(score.n)[None, :]
    a = score.entries
    terms = a[cols, pi]
    s = np.where(touched, 0.0, terms).sum(axis=1)
    t_prime = np.where(touched, terms, 0.0).sum(axis=1)
    t_dagger = np.where(touched, a[cols, pi_dagger], 0.0).sum(axis=1)
    t_ddagger = np.where(touched, a[cols, pi_ddagger], 0.0).sum(axis=1)
    y = s + t_prime
    y_dagger = s + t_dagger
    y_ddagger = s + t_ddagger
    y_star = assemble_y_star(y_dagger, y_ddagger, u)
    return ZeroBiasBatch(
        y=y,
        y_dagger=y_dagger,
        y_ddagger=y_ddagger,
        y_star=y_star,
        u=u,
        s=s,
        t_prime=t_prime,
        t_dagger=t_dagger,
        t_ddagger=t_ddagger,
        touched=touched,
        gap=np.abs(y_star - y),
        source=source,
        target=target,
        pi=pi,
        pi_dagger=pi_dagger,
        pi_ddagger=pi_ddagger,
        gap_bound=gap_bound,
    )


class UniformZeroBiasSampler:
    """
    Zero-bias draws for ``pi`` uniform on S_n.

    ``(I, K, J, L)`` is drawn with weight ``[(a_ik + a_jl) - (a_il + a_jk)]^2``, the square-biased
    law of ``(I, pi(I), J, pi(J))``; ``pi_dagger`` moves ``K`` to position ``I`` and then ``L`` to
    position ``J`` by two swaps, so at most four positions change.
    """

    gap_factor = 8
    name = "zero-uniform"

    def __init__(self, score: ScoreArray, tuple_table_cap: int = DEFAULT_TUPLE_TABLE_CAP):
        if not score.row_centered:
            raise ValidationException("the uniform construction needs a row centered score array")
        self.score = score
        self.model = Uniform(score.n)
        self.n = score.n
        self.envelope = (4 * score.c_sup) ** 2
        self._table = None
        if self.n**4 <= tuple_table_cap:
            weights = self.tuple_weights(score.entries).ravel()
            if not np.any(weights > 0):
                raise DegenerateException("every square weight is zero")
            self._table = AliasTable(weights)
            logger.debug(f"uniform tuple table holds {self._table.atoms.size} of {weights.size} tuples")
        elif self.envelope == 0:
            raise DegenerateException("every square weight is zero")

    @property
    def gap_bound(self) -> float:
        return self.gap_factor * self.score.c_sup

    @staticmethod
    def tuple_weights(a: np.ndarray) -> np.ndarray:
        """Square weights indexed ``[i, k, j, l]``."""
        return ((a[:, :, None, None] + a[None, None, :, :]) - (a[:, None, None, :] + a.T[None, :, :, None])) ** 2

    def _weigh(self, tuples: np.ndarray) -> np.ndarray:
        a = self.score.entries
        i, k, j, l = tuples.T
        return ((a[i, k] + a[j, l]) - (a[i, l] + a[j, k])) ** 2

    def sample_tuples(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self._table is not None:
            flat = self._table.sample(rng, size)
            return np.column_stack(np.unravel_index(flat, (self.n,) * 4))
        return rejection_sample(
            rng, size, lambda r, m: r.integers(0, self.n, size=(m, 4)), self._weigh, self.envelope
        )

    def sample(self, rng: np.random.Generator, size: int) -> ZeroBiasBatch:
        pi = self.model.sample(rng, size)
        i, k, j, l = self.sample_tuples(rng, size).T
        u = rng.random(size)

        rows = np.arange(size)
        inv = inverse_batch(pi)
        p = inv[rows, k]
        sigma = pi.copy()
        sigma[rows, i], sigma[rows, p] = pi[rows, p], pi[rows, i]
        q = np.where(inv[rows, l] == i, p, inv[rows, l])
        pi_dagger = sigma.copy()
        pi_dagger[rows, j], pi_dagger[rows, q] = sigma[rows, q], sigma[rows, j]
        pi_ddagger = pi_dagger.copy()
        pi_ddagger[rows, i], pi_ddagger[rows, j] = pi_dagger[rows, j], pi_dagger[rows, i]

        touched = np.zeros(pi.shape, dtype=bool)
        for column in (i, p, j, inv[rows, l]):
            touched[rows, column] = True
        return _assemble(
            self.score,
            pi,
            pi_dagger,
            pi_ddagger,
            touched,
            u,
            self.gap_bound,
            np.column_stack([i, j]),
            np.column_stack([k, l]),
        )


def local_vectors(mapping: np.ndarray, inv: np.ndarray, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Rows ``(pi^-1(I), I, pi(I), pi^-1(J), J, pi(J))``."""
    return np.column_stack([inv[i], i, mapping[i], inv[j], j, mapping[j]])


def local_difference(a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``Y' - Y''`` for ``pi'' = tau_IJ pi tau_IJ``, from the local vectors alone."""
    p_i, i, n_i, p_j, j, n_j = v.T

    def swap(z):
        return np.where(z == i, j, np.where(z == j, i, z))

    d = (a[i, n_i] - a[i, swap(n_j)]) + (a[j, n_j] - a[j, swap(n_i)])
    first = (p_i != i) & (p_i != j)
    second = (p_j != i) & (p_j != j) & (p_j != p_i)
    d = d + np.where(first, a[p_i, i] - a[p_i, j], 0.0)
    d = d + np.where(second, a[p_j, j] - a[p_j, i], 0.0)
    return d


def coincidence_pattern(v: np.ndarray) -> np.ndarray:
    """For every coordinate, the first coordinate holding the same label."""
    return (v[:, :, None] == v[:, None, :]).argmax(axis=2)


def case_label(v: Sequence[int]) -> str:
    p_i, i, n_i, p_j, j, n_j = (int(x) for x in v)
    if p_i == i or p_j == j:
        return "A"
    if n_i == j and n_j == i:
        return "S2"
    if n_i == j:
        return "B_IJ"
    if n_j == i:
        return "B_JI"
    size_i = "2" if n_i == p_i else "3+"
    size_j = "2" if n_j == p_j else "3+"
    return f"F({size_i},{size_j})"


@dataclass(frozen=True)
class ShapeRecord:
    pattern: Tuple[int, ...]
    label: str
    kappa: int
    locations: int
    probability: float
    mean_square: float
    mass: float
    method: str
    stderr: Optional[float] = None


class _Shape:
    def __init__(self, pattern: np.ndarray, locations: np.ndarray):
        self.pattern = pattern
        self.locations = locations
        self.distinct = np.flatnonzero(pattern == np.arange(pattern.size))
        self.expand = np.searchsorted(self.distinct, pattern)
        self.kappa = self.distinct.size
        self.table: Optional[AliasTable] = None
        self.tuples: Optional[np.ndarray] = None
        self.record: Optional[ShapeRecord] = None


class CycleTypeZeroBiasSampler:
    """
    Zero-bias draws for ``pi`` uniform on one fixed-point-free conjugacy class.

    ``Y' - Y''`` depends only on the local vector ``(pi^-1(I), I, pi(I), pi^-1(J), J, pi(J))``.
    Its coincidence pattern (shape) has a law computed once from a class representative; given the
    shape the distinct labels are uniform over injective tuples. A draw picks a shape and labels
    with square-biased weight, takes the same shape at a uniform location of ``pi``, and relabels
    ``pi`` by the permutation carrying one local vector onto the other.
    """

    gap_factor = 40
    name = "zero-cycle-type"

    def __init__(
        self,
        score: ScoreArray,
        model: FixedCycleType,
        tuple_table_cap: int = DEFAULT_TUPLE_TABLE_CAP,
        prepass: int = DEFAULT_PREPASS,
        rng: Optional[np.random.Generator] = None,
    ):
        if not isinstance(model, FixedCycleType):
            raise ValidationException(f"cycle type construction needs a fixed cycle type model, got {model.kind}")
        if not (score.symmetric and score.zero_diagonal):
            raise ValidationException("the cycle type construction needs a symmetric zero diagonal score array")
        if score.n != model.n:
            raise DimensionException(f"score array has n={score.n}, model has n={model.n}")
        self.score = score
        self.model = model
        self.n = model.n
        self.envelope = (8 * score.c_sup) ** 2
        self.pi0 = model.representative()
        rng = rng or as_generator(0)

        inv0 = np.argsort(self.pi0)
        ii, jj = np.nonzero(~np.eye(self.n, dtype=bool))
        v = local_vectors(self.pi0, inv0, ii, jj)
        patterns, which, counts = np.unique(coincidence_pattern(v), axis=0, return_inverse=True, return_counts=True)
        which = np.asarray(which).ravel()
        pairs = self.n * (self.n - 1)

        tuple_cache = {}
        self._shapes: List[_Shape] = []
        for s, pattern in enumerate(patterns):
            shape = _Shape(pattern, v[which == s])
            probability = counts[s] / pairs
            orbit = falling_factorial(self.n, shape.kappa)
            if orbit <= tuple_table_cap:
                if shape.kappa not in tuple_cache:
                    tuple_cache[shape.kappa] = distinct_tuples(self.n, shape.kappa)
                shape.tuples = tuple_cache[shape.kappa]
                weights = self._squares(shape.tuples[:, shape.expand])
                mean_square, stderr, method = float(weights.mean()), None, "exact-enumeration"
                if np.any(weights > 0):
                    shape.table = AliasTable(weights)
            else:
                weights = self._squares(random_distinct_tuples(rng, self.n, shape.kappa, prepass)[:, shape.expand])
                mean_square = float(weights.mean())
                stderr = float(probability * weights.std(ddof=1) / np.sqrt(prepass))
                method = "monte-carlo"
            shape.record = ShapeRecord(
                pattern=tuple(int(x) for x in pattern),
                label=case_label(shape.locations[0]),
                kappa=int(shape.kappa),
                locations=int(counts[s]),
                probability=float(probability),
                mean_square=mean_square,
                mass=float(probability * mean_square),
                method=method,
                stderr=stderr,
            )
            self._shapes.append(shape)

        masses = np.array([shape.record.mass for shape in self._shapes])
        if not np.any(masses > 0):
            raise DegenerateException("every square weight is zero")
        self._shape_table = AliasTable(masses)
        logger.debug(f"cycle type construction: {len(self._shapes)} shapes, total mass {masses.sum()}")

    @property
    def gap_bound(self) -> float:
        return self.gap_factor * self.score.c_sup

    def _squares(self, v: np.ndarray) -> np.ndarray:
        tol = 1e-12 * 8 * self.score.c_sup
        out = np.empty(v.shape[0])
        for start in range(0, v.shape[0], CHUNK):
            d = local_difference(self.score.entries, v[start : start + CHUNK])
            d[np.abs(d) <= tol] = 0.0
            out[start : start + CHUNK] = d * d
        return out

    @property
    def shape_table(self) -> List[ShapeRecord]:
        return [shape.record for shape in self._shapes]

    @property
    def total_mass(self) -> float:
        """``E(Y' - Y'')^2`` under the base law."""
        return float(sum(record.mass for record in self.shape_table))

    def case_masses(self) -> Dict[str, float]:
        """Share of the square-biased law falling in each case of the construction."""
        total = self.total_mass
        out = {label: 0.0 for label in CASE_LABELS}
        for record in self.shape_table:
            out[record.label] += record.mass / total
        return out

    def _sample_labels(self, shape: _Shape, rng: np.random.Generator, size: int) -> np.ndarray:
        if shape.table is not None:
            return shape.tuples[shape.table.sample(rng, size)]
        return rejection_sample(
            rng,
            size,
            lambda r, m: random_distinct_tuples(r, self.n, shape.kappa, m),
            lambda labels: self._squares(labels[:, shape.expand]),
            self.envelope,
        )

    def sample(self, rng: np.random.Generator, size: int) -> ZeroBiasBatch:
        n = self.n
        rows = np.arange(size)
        gamma = rng.permuted(np.tile(np.arange(n), (size, 1)), axis=1)
        pi = conjugate_batch(np.tile(self.pi0, (size, 1)), gamma)
        chosen = self._shape_table.sample(rng, size)
        u = rng.random(size)

        v0 = np.empty((size, 6), dtype=np.int64)
        v = np.empty((size, 6), dtype=np.int64)
        for s in np.unique(chosen):
            shape = self._shapes[s]
            hit = np.flatnonzero(chosen == s)
            location = shape.locations[rng.integers(0, shape.locations.shape[0], size=hit.size)]
            v0[hit] = np.take_along_axis(gamma[hit], location, axis=1)
            v[hit] = self._sample_labels(shape, rng, hit.size)[:, shape.expand]

        # rho carries v0 onto v coordinatewise; equal patterns make it well defined
        rho = np.tile(np.arange(n), (size, 1))
        rho_inv = rho.copy()
        for c in range(6):
            x, y = v0[:, c], v[:, c]
            current, z = rho[rows, x], rho_inv[rows, y]
            rho[rows, x] = y
            rho[rows, z] = current
            rho_inv[rows, y] = x
            rho_inv[rows, current] = z

        pi_dagger = conjugate_batch(pi, rho)
        tau = np.tile(np.arange(n), (size, 1))
        tau[rows, v[:, 1]], tau[rows, v[:, 4]] = v[:, 4], v[:, 1]
        pi_ddagger = conjugate_batch(pi_dagger, tau)

        moved = np.hstack([v0, v])
        touched = np.zeros((size, n), dtype=bool)
        np.put_along_axis(touched, moved, True, axis=1)
        np.put_along_axis(touched, np.take_along_axis(inverse_batch(pi), moved, axis=1), True, axis=1)
        return _assemble(self.score, pi, pi_dagger, pi_ddagger, touched, u, self.gap_bound, v0, v)


def zero_bias_draw_uniform(
    score: ScoreArray, rng: np.random.Generator, tuple_table_cap: int = DEFAULT_TUPLE_TABLE_CAP
) -> ZeroBiasDraw:
    return UniformZeroBiasSampler(score, tuple_table_cap).sample(rng, 1).draw(0)


def zero_bias_draw_cycle_type(
    score: ScoreArray,
    model: FixedCycleType,
    rng: np.random.Generator,
    tuple_table_cap: int = DEFAULT_TUPLE_TABLE_CAP,
) -> ZeroBiasDraw:
    return CycleTypeZeroBiasSampler(score, model, tuple_table_cap, rng=rng).sample(rng, 1).draw(0)


def rejection_square_bias(
    spec: ExchangeablePairSpec, rng: np.random.Generator, size: int
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Independent path to the square-biased pair: propose ``(pi, I, J)`` from the base law and
    accept with probability ``(Y' - Y'')^2 / max (Y' - Y'')^2``.

    Returns:
        (y_dagger, y_ddagger)
    """
    n = spec.n

    def propose(r: np.random.Generator, m: int) -> np.ndarray:
        return np.hstack([spec.model.sample(r, m), random_distinct_tuples(r, n, 2, m)])

    def weigh(candidates: np.ndarray) -> np.ndarray:
        mappings = candidates[:, :n]
        partner = spec.partner_batch(mappings, candidates[:, n], candidates[:, n + 1])
        return (spec.score.evaluate(mappings) - spec.score.evaluate(partner)) ** 2

    accepted = rejection_sample(rng, size, propose, weigh, spec.difference_bound**2)
    mappings = accepted[:, :n]
    partner = spec.partner_batch(mappings, accepted[:, n], accepted[:, n + 1])
    return spec.score.evaluate(mappings), spec.score.evaluate(partner)
