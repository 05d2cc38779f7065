import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from steinbias.exceptions import DimensionException, ValidationException
from steinbias.permutations import DEFAULT_ENUMERATION_CAP, PermutationModel, support_array
from steinbias.utils import SeedLike, as_generator

logger = logging.getLogger(__name__)

METHOD_EXACT = "exact-enumeration"
METHOD_MC = "monte-carlo"
MC_CHUNK = 1 << 16


def centering_tolerance(n: int, c_sup: float) -> float:
    return 1e-12 * n * max(c_sup, 1.0)


@dataclass(frozen=True, eq=False)
class ScoreArray:
    """
    The fixed n x n array {a_ij} of a combinatorial sum ``Y = sum_i a[i, pi(i)]``.

    ``entries`` is stored read-only; the three flags are properties the array has been
    checked to satisfy, not requests.
    """

    entries: np.ndarray
    row_centered: bool = False
    symmetric: bool = False
    zero_diagonal: bool = False
    centering: str = "none"

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionException(f"score array must be square, got shape {entries.shape}")
        if entries.shape[0] < 2:
            raise DimensionException(f"score array needs n >= 2, got {entries.shape[0]}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def from_entries(cls, raw, centering: str = "none") -> "ScoreArray":
        """Wrap raw entries and detect which of the structural flags they already satisfy."""
        entries = np.array(raw, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise DimensionException(f"score array must be square, got shape {entries.shape}")
        n = entries.shape[0]
        tol = centering_tolerance(n, float(np.max(np.abs(entries))) if entries.size else 0.0)
        return cls(
            entries=entries,
            row_centered=bool(np.all(np.abs(entries.sum(axis=1)) <= tol)),
            symmetric=bool(np.array_equal(entries, entries.T)),
            zero_diagonal=bool(np.all(np.diag(entries) == 0)),
            centering=centering,
        )

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "ScoreArray":
        entries = np.loadtxt(path, delimiter=",", ndmin=2)
        logger.debug(f"loaded {entries.shape} score array from {path}")
        return cls.from_entries(entries)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def c_sup(self) -> float:
        return float(np.max(np.abs(self.entries)))

    def scale(self, c: float) -> "ScoreArray":
        return ScoreArray(
            entries=self.entries * c,
            row_centered=self.row_centered,
            symmetric=self.symmetric,
            zero_diagonal=self.zero_diagonal,
            centering=self.centering,
        )

    def evaluate(self, mappings: np.ndarray) -> np.ndarray:
        """Y for one mapping (scalar result) or for each row of a ``(size, n)`` batch."""
        mappings = np.asarray(mappings)
        return self.entries[np.arange(self.n), mappings].sum(axis=-1)


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    variance: float
    method: str
    stderr: Optional[float] = None
    sample_count: Optional[int] = None
    mean_stderr: Optional[float] = None

    def __post_init__(self):
        if self.variance < 0:
            raise ValidationException(f"variance must be >= 0, got {self.variance}")
        if self.stderr is not None and self.stderr < 0:
            raise ValidationException(f"stderr must be >= 0, got {self.stderr}")

    @property
    def sigma(self) -> float:
        return float(np.sqrt(self.variance))


def random_entries(kind: str, n: int, rng: np.random.Generator, low: float = -1.0, high: float = 1.0) -> np.ndarray:
    if kind == "normal":
        return rng.standard_normal((n, n))
    if kind == "uniform":
        return rng.uniform(low, high, (n, n))
    if kind == "integer":
        return rng.integers(int(low), int(high), size=(n, n), endpoint=True).astype(float)
    raise ValidationException(f"unknown score generator {kind!r}, expected normal, uniform or integer")


def center_for_uniform(raw) -> ScoreArray:
    entries = np.array(raw, dtype=float)
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] < 2:
        raise DimensionException(f"uniform centering needs a square array with n >= 2, got {entries.shape}")
    centered = entries - entries.mean(axis=1, keepdims=True)
    return ScoreArray(
        entries=centered,
        row_centered=True,
        symmetric=bool(np.array_equal(centered, centered.T)),
        zero_diagonal=bool(np.all(np.diag(centered) == 0)),
        centering="row-mean",
    )


def center_for_cycle_type(raw) -> ScoreArray:
    """
    Enforce the standing assumptions of the cycle-type construction: symmetric, zero diagonal and
    global sum zero. A symmetric array cannot in general be centered row by row, so the global
    off-diagonal mean is subtracted instead and ``row_centered`` stays False.
    """
    entries = np.array(raw, dtype=float)
    if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.shape[0] < 4:
        raise DimensionException(f"cycle type centering needs a square array with n >= 4, got {entries.shape}")
    n = entries.shape[0]
    sym = (entries + entries.T) / 2
    off = ~np.eye(n, dtype=bool)
    sym[off] -= sym[off].mean()
    np.fill_diagonal(sym, 0.0)
    return ScoreArray(
        entries=sym, row_centered=False, symmetric=True, zero_diagonal=True, centering="global-off-diagonal"
    )


def sup_norm(a: ScoreArray) -> float:
    return a.c_sup


def _check_sizes(a: ScoreArray, model: PermutationModel):
    if a.n != model.n:
        raise DimensionException(f"score array has n={a.n} but the permutation model has n={model.n}")


def exact_moments(a: ScoreArray, model: PermutationModel, cap: int = DEFAULT_ENUMERATION_CAP) -> MomentSummary:
    _check_sizes(a, model)
    y = a.evaluate(support_array(model, cap))
    mean = float(y.mean())
    variance = float(np.mean((y - mean) ** 2))
    logger.debug(f"exact moments over {y.size} permutations: mean={mean}, variance={variance}")
    return MomentSummary(mean=mean, variance=variance, method=METHOD_EXACT, sample_count=int(y.size))


def moments_from_sample(y: np.ndarray) -> MomentSummary:
    """Unbiased mean and variance of an i.i.d. sample, with the usual large-sample standard errors."""
    y = np.asarray(y, dtype=float)
    count = y.size
    if count < 2:
        raise ValidationException(f"need at least 2 samples to estimate a variance, got {count}")
    mean = float(y.mean())
    centered = y - mean
    variance = float(centered @ centered / (count - 1))
    fourth = float(np.mean(centered**4))
    return MomentSummary(
        mean=mean,
        variance=variance,
        method=METHOD_MC,
        stderr=float(np.sqrt(max(fourth - variance**2, 0.0) / count)),
        sample_count=count,
        mean_stderr=float(np.sqrt(variance / count)),
    )


def mc_moments(a: ScoreArray, model: PermutationModel, reps: int, seed: SeedLike) -> MomentSummary:
    if reps < 2:
        raise ValidationException(f"reps must be >= 2, got {reps}")
    _check_sizes(a, model)
    rng = as_generator(seed)
    chunks = []
    remaining = reps
    while remaining:
        size = min(remaining, MC_CHUNK)
        chunks.append(a.evaluate(model.sample(rng, size)))
        remaining -= size
    return moments_from_sample(np.concatenate(chunks))
