import importlib
import logging
from collections import Counter
from dataclasses import asdict, fields, is_dataclass
from datetime import date, datetime
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence, Tuple, Type, TypeVar, Union

import numpy as np

from steinbias.exceptions import DegenerateException, RejectionLimitException

logger = logging.getLogger(__name__)

SeedLike = Union[None, int, np.random.Generator, np.random.SeedSequence]
KEY_DECIMALS = 9
REJECTION_LIMIT = 10**6
# substream indices reserved for the stages around the replicate blocks
PREPASS_STREAM = 2**32 - 1
MOMENT_STREAM = 2**32 - 2
CHECK_STREAM = 2**32 - 3

T = TypeVar("T")


def encoder_factory(
    date_fmt: str = "%Y-%m-%d",
    dt_fmt: str = "%Y-%m-%d %H:%M:%S",
    fraction_factory: Callable = float,
    path_factory: Callable = str,
    dataclass_factory: Callable = asdict,
    *,
    raise_error: bool = True,
):
    """Serialize additional types."""

    def encoder(obj):
        if isinstance(obj, datetime):
            return obj.strftime(dt_fmt)
        elif isinstance(obj, date):
            return obj.strftime(date_fmt)
        elif isinstance(obj, Fraction):
            return fraction_factory(obj)
        elif isinstance(obj, Path):
            return path_factory(obj)
        elif isinstance(obj, np.ndarray):
            return obj.tolist()
        elif isinstance(obj, np.bool_):
            return bool(obj)
        elif isinstance(obj, np.integer):
            return int(obj)
        elif isinstance(obj, np.floating):
            return float(obj)
        elif is_dataclass(obj):
            return dataclass_factory(obj)
        elif not raise_error:
            return obj
        raise TypeError("%r is not JSON serializable" % obj)

    return encoder


def confirm_dc_type(value: Any, should_be: Type):
    """
    confirm that the value is of the correct type during dataclass conversion, try converting it if it is not

    Args:
        value: the value that we want to check
        should_be: the value type we expect or convert to

    Returns:
        value: the value that was passed in, converted if needed
    """
    if isinstance(value, should_be):
        return value
    elif isinstance(value, dict):
        known = {f.name for f in fields(should_be)}
        unknown = sorted(set(value) - known)
        if unknown:
            logger.warning(f"{should_be.__name__} ignores unknown keys: {unknown}")
        return should_be(**{k: v for k, v in value.items() if k in known})
    logger.error(f"{should_be.__name__} unable to confirm type of {value}, type: {type(value)}")
    return value


def import_class(cls_path: str = ""):
    source = cls_path.split("::")
    if len(source) != 2:
        return
    module_path, cls_name = source
    module = importlib.import_module(module_path)
    return getattr(module, cls_name, None)


def substream(seed: int, index: int) -> np.random.Generator:
    """
    The split function for parallel replication: block ``index`` of a run seeded with ``seed``
    draws from ``SeedSequence(seed, spawn_key=(index,))``, which is exactly the ``index``-th child
    ``SeedSequence(seed).spawn`` would hand out. Distinct indices never share a stream.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def as_generator(seed: SeedLike) -> np.random.Generator:
    return np.random.default_rng(seed)


class AliasTable:
    """
    Vose alias table over a finite set of nonnegative weights, O(1) per draw.

    Zero-weight atoms are left out of the table entirely, so they can never be drawn.
    """

    def __init__(self, weights: Sequence[float]):
        weights = np.asarray(weights, dtype=float).ravel()
        if weights.size == 0 or np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise DegenerateException("alias table needs finite nonnegative weights")
        total = weights.sum()
        if total <= 0:
            raise DegenerateException("bad weights: total probability is zero")

        self.size = weights.size
        self.atoms = np.flatnonzero(weights > 0)
        self.probabilities = weights / total

        k = self.atoms.size
        scaled = (weights[self.atoms] * k / total).tolist()
        small = [idx for idx, w in enumerate(scaled) if w < 1.0]
        large = [idx for idx, w in enumerate(scaled) if w >= 1.0]
        alias = list(range(k))
        prob = [1.0] * k
        while small and large:
            s = small.pop()
            g = large.pop()
            alias[s] = g
            prob[s] = scaled[s]
            scaled[g] -= 1.0 - scaled[s]
            if scaled[g] < 1.0:
                small.append(g)
            else:
                large.append(g)
        # leftovers are 1 up to rounding
        self._prob = np.asarray(prob)
        self._alias = np.asarray(alias, dtype=np.int64)
        logger.debug(f"alias table built over {k} of {self.size} atoms")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        column = rng.integers(0, self._alias.size, size=size)
        coin = rng.random(size)
        picked = np.where(coin < self._prob[column], column, self._alias[column])
        return self.atoms[picked]


def distinct_tuples(n: int, k: int) -> np.ndarray:
    """All ordered k-tuples of distinct labels from range(n), built column by column."""
    table = np.zeros((1, 0), dtype=np.int32)
    for _ in range(k):
        free = np.ones((table.shape[0], n), dtype=bool)
        if table.shape[1]:
            np.put_along_axis(free, table.astype(np.intp), False, axis=1)
        parent, label = np.nonzero(free)
        table = np.hstack([table[parent], label.astype(np.int32).reshape(-1, 1)])
    return table


def falling_factorial(n: int, k: int) -> int:
    out = 1
    for j in range(k):
        out *= n - j
    return out


def random_distinct_tuples(rng: np.random.Generator, n: int, k: int, size: int) -> np.ndarray:
    """``size`` uniform ordered k-tuples of distinct labels from range(n)."""
    if k == 0:
        return np.zeros((size, 0), dtype=np.int64)
    keys = rng.random((size, n))
    return np.argsort(keys, axis=1)[:, :k]


def atom_key(*values: float) -> Tuple[float, ...]:
    """Hashable key for a float atom; rounding absorbs summation-order noise, -0.0 folds into 0.0."""
    return tuple(round(float(v), KEY_DECIMALS) + 0.0 for v in values)


def tally(*columns: Iterable[float]) -> Counter:
    return Counter(atom_key(*row) for row in zip(*columns))


def concat_batches(batches: Sequence[T]) -> T:
    """Concatenate a list of dataclasses of equally-shaped numpy arrays, field by field, in list order."""
    first = batches[0]
    merged = {}
    for f in fields(first):
        value = getattr(first, f.name)
        if isinstance(value, np.ndarray):
            merged[f.name] = np.concatenate([getattr(b, f.name) for b in batches])
        else:
            merged[f.name] = value
    return type(first)(**merged)


def rejection_sample(
    rng: np.random.Generator,
    size: int,
    propose: Callable[[np.random.Generator, int], np.ndarray],
    weigh: Callable[[np.ndarray], np.ndarray],
    envelope: float,
    limit: int = REJECTION_LIMIT,
) -> np.ndarray:
    """
    Draw ``size`` candidates with density proportional to ``weigh`` relative to the proposal law.

    Args:
        propose: returns ``m`` proposals stacked on the first axis
        weigh: nonnegative weights, never above ``envelope``
        limit: proposals allowed in a row without a single acceptance

    Returns:
        the accepted proposals, in the order they were accepted
    """
    if envelope <= 0:
        raise DegenerateException("rejection envelope must be positive")
    accepted = []
    remaining = size
    proposed = taken = dry = 0
    while remaining > 0:
        rate = taken / proposed if taken else 0.0
        batch = int(min(max(remaining / max(rate, 1e-3) * 1.2, 1024), 1 << 20))
        candidates = propose(rng, batch)
        keep = rng.random(batch) * envelope < weigh(candidates)
        hits = candidates[keep][:remaining]
        proposed += batch
        taken += int(keep.sum())
        if hits.shape[0] == 0:
            dry += batch
            if dry >= limit:
                raise RejectionLimitException(f"no acceptance in {dry} proposals, envelope {envelope}")
            continue
        dry = 0
        accepted.append(hits)
        remaining -= hits.shape[0]
    logger.debug(f"rejection sampler accepted {taken} of {proposed} proposals")
    return np.concatenate(accepted) if accepted else propose(rng, 0)
