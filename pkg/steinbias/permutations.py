"""
The two permutation laws the combinatorial couplings run on: uniform over S_n and uniform over one
conjugacy class without fixed points. Labels are 0-based; a permutation is stored as its mapping
``mapping[i] = pi(i)``. Batches of permutations are ``(size, n)`` integer arrays.
"""
import itertools
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from steinbias.exceptions import DimensionException, SupportTooLargeException, ValidationException

logger = logging.getLogger(__name__)

DEFAULT_ENUMERATION_CAP = math.factorial(8)


@dataclass(frozen=True)
class Permutation:
    mapping: Tuple[int, ...]

    def __post_init__(self):
        if sorted(self.mapping) != list(range(len(self.mapping))):
            raise ValidationException(f"not a bijection of 0..{len(self.mapping) - 1}: {self.mapping}")

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def from_array(cls, array: Sequence[int]) -> "Permutation":
        return cls(tuple(int(x) for x in array))

    @classmethod
    def from_cycles(cls, cycles: Sequence[Sequence[int]], n: int) -> "Permutation":
        mapping = list(range(n))
        for cycle in cycles:
            for position, label in enumerate(cycle):
                mapping[label] = cycle[(position + 1) % len(cycle)]
        return cls(tuple(mapping))

    @property
    def n(self) -> int:
        return len(self.mapping)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.mapping, dtype=np.int64)

    def __call__(self, i: int) -> int:
        return self.mapping[i]

    def cycles(self) -> List[Tuple[int, ...]]:
        """Cycle form, each cycle starting at its smallest label, cycles ordered by that label."""
        seen = [False] * self.n
        out = []
        for start in range(self.n):
            if seen[start]:
                continue
            cycle = []
            x = start
            while not seen[x]:
                seen[x] = True
                cycle.append(x)
                x = self.mapping[x]
            out.append(tuple(cycle))
        return out


@dataclass(frozen=True)
class CycleType:
    n: int
    counts: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        if any(q < 1 or c < 0 for q, c in self.counts):
            raise ValidationException(f"cycle lengths must be >= 1 and counts >= 0: {self.counts}")
        if sum(q * c for q, c in self.counts) != self.n:
            raise ValidationException(f"cycle type {self.counts} does not partition n={self.n}")

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence[int]], n: int = None) -> "CycleType":
        merged = {}
        for q, c in pairs:
            merged[int(q)] = merged.get(int(q), 0) + int(c)
        counts = tuple(sorted((q, c) for q, c in merged.items() if c > 0))
        total = sum(q * c for q, c in counts)
        return cls(n=total if n is None else n, counts=counts)

    def count(self, q: int) -> int:
        return dict(self.counts).get(q, 0)

    def lengths(self) -> List[int]:
        """Cycle lengths in slot order: all cycles of the smallest length first."""
        return [q for q, c in self.counts for _ in range(c)]

    def class_size(self) -> int:
        denominator = 1
        for q, c in self.counts:
            denominator *= q**c * math.factorial(c)
        return math.factorial(self.n) // denominator


class PermutationModel(ABC):
    kind: str = None
    n: int

    @abstractmethod
    def sample(self, rng: np.random.Generator, size: int = None) -> np.ndarray:
        """A single mapping when ``size`` is None, else a ``(size, n)`` batch."""
        ...

    @abstractmethod
    def support_size(self) -> int: ...

    @abstractmethod
    def iter_support(self) -> Iterator[Tuple[int, ...]]: ...

    @abstractmethod
    def contains(self, mappings: np.ndarray) -> np.ndarray:
        """Boolean mask of batch rows that lie in the support."""
        ...

    @property
    @abstractmethod
    def lam(self) -> float:
        """The linearity constant of the pair construction this law is paired with."""
        ...


@dataclass(frozen=True)
class Uniform(PermutationModel):
    n: int
    kind: str = "uniform"

    def __post_init__(self):
        if self.n < 3:
            raise DimensionException(f"uniform permutation model needs n >= 3, got {self.n}")

    def sample(self, rng: np.random.Generator, size: int = None) -> np.ndarray:
        if size is None:
            return rng.permutation(self.n)
        return rng.permuted(np.tile(np.arange(self.n), (size, 1)), axis=1)

    def support_size(self) -> int:
        return math.factorial(self.n)

    def iter_support(self) -> Iterator[Tuple[int, ...]]:
        return itertools.permutations(range(self.n))

    def contains(self, mappings: np.ndarray) -> np.ndarray:
        return np.ones(np.atleast_2d(mappings).shape[0], dtype=bool)

    @property
    def lam(self) -> float:
        return 2.0 / (self.n - 1)


@dataclass(frozen=True)
class FixedCycleType(PermutationModel):
    cycle_type: CycleType
    kind: str = "fixed-cycle-type"

    def __post_init__(self):
        if self.cycle_type.count(1) != 0:
            raise ValidationException(f"fixed cycle type model must not have 1-cycles: {self.cycle_type.counts}")
        if self.n < 4:
            raise DimensionException(f"fixed cycle type model needs n >= 4, got {self.n}")

    @property
    def n(self) -> int:
        return self.cycle_type.n

    def _successor_slots(self) -> np.ndarray:
        succ = np.empty(self.n, dtype=np.int64)
        start = 0
        for q in self.cycle_type.lengths():
            for k in range(q):
                succ[start + k] = start + (k + 1) % q
            start += q
        return succ

    def sample(self, rng: np.random.Generator, size: int = None) -> np.ndarray:
        # a uniform arrangement of the labels into the cycle-slot template; every class member comes
        # from the same number of arrangements, so the result is uniform on the class
        succ = self._successor_slots()
        if size is None:
            arrangement = rng.permutation(self.n)
            mapping = np.empty(self.n, dtype=np.int64)
            mapping[arrangement] = arrangement[succ]
            return mapping
        arrangement = rng.permuted(np.tile(np.arange(self.n), (size, 1)), axis=1)
        mapping = np.empty_like(arrangement)
        np.put_along_axis(mapping, arrangement, arrangement[:, succ], axis=1)
        return mapping

    def representative(self) -> np.ndarray:
        mapping = np.empty(self.n, dtype=np.int64)
        mapping[np.arange(self.n)] = self._successor_slots()
        return mapping

    def support_size(self) -> int:
        return self.cycle_type.class_size()

    def iter_support(self) -> Iterator[Tuple[int, ...]]:
        remaining_lengths = dict(self.cycle_type.counts)
        mapping = [-1] * self.n

        def build(free: Tuple[int, ...]):
            if not free:
                yield tuple(mapping)
                return
            head, rest = free[0], free[1:]
            for q in sorted(remaining_lengths):
                if remaining_lengths[q] == 0:
                    continue
                remaining_lengths[q] -= 1
                for tail in itertools.permutations(rest, q - 1):
                    cycle = (head,) + tail
                    for position, label in enumerate(cycle):
                        mapping[label] = cycle[(position + 1) % q]
                    used = set(tail)
                    yield from build(tuple(x for x in rest if x not in used))
                remaining_lengths[q] += 1

        return build(tuple(range(self.n)))

    def contains(self, mappings: np.ndarray) -> np.ndarray:
        batch = np.atleast_2d(mappings)
        return np.array([cycle_type_of(Permutation.from_array(row)) == self.cycle_type for row in batch])

    @property
    def lam(self) -> float:
        return 4.0 / self.n


def sample(model: PermutationModel, rng: np.random.Generator) -> Permutation:
    return Permutation.from_array(model.sample(rng))


def cycle_type_of(pi: Permutation) -> CycleType:
    lengths = {}
    for cycle in pi.cycles():
        lengths[len(cycle)] = lengths.get(len(cycle), 0) + 1
    return CycleType(n=pi.n, counts=tuple(sorted(lengths.items())))


def apply_transposition(pi: Permutation, i: int, j: int) -> Permutation:
    """``pi o tau_ij``: the images at positions i and j trade places."""
    if i == j:
        raise ValidationException(f"transposition needs two distinct labels, got {i} twice")
    mapping = list(pi.mapping)
    mapping[i], mapping[j] = mapping[j], mapping[i]
    return Permutation(tuple(mapping))


def transposition(n: int, i: int, j: int) -> Permutation:
    return apply_transposition(Permutation.identity(n), i, j)


def compose(pi: Permutation, rho: Permutation) -> Permutation:
    """``(pi o rho)(i) = pi(rho(i))``."""
    return Permutation(tuple(pi.mapping[x] for x in rho.mapping))


def inverse(pi: Permutation) -> Permutation:
    out = [0] * pi.n
    for i, x in enumerate(pi.mapping):
        out[x] = i
    return Permutation(tuple(out))


def conjugate(pi: Permutation, rho: Permutation) -> Permutation:
    """``rho^-1 pi rho``."""
    return compose(inverse(rho), compose(pi, rho))


def cycle_length_at(pi: Permutation, i: int) -> int:
    length, x = 1, pi.mapping[i]
    while x != i:
        x = pi.mapping[x]
        length += 1
    return length


def inverse_batch(mappings: np.ndarray) -> np.ndarray:
    inv = np.empty_like(mappings)
    positions = np.broadcast_to(np.arange(mappings.shape[1]), mappings.shape)
    np.put_along_axis(inv, mappings, positions, axis=1)
    return inv


def conjugate_batch(mappings: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Row-wise ``rho pi rho^-1``: relabel every x as rho(x)."""
    out = np.empty_like(mappings)
    np.put_along_axis(out, rho, np.take_along_axis(rho, mappings, axis=1), axis=1)
    return out


def enumerate_support(
    model: PermutationModel, cap: int = DEFAULT_ENUMERATION_CAP
) -> List[Tuple[Permutation, Fraction]]:
    size = model.support_size()
    if size > cap:
        raise SupportTooLargeException(f"{model.kind} support has {size} members, cap is {cap}")
    probability = Fraction(1, size)
    support = [(Permutation(mapping), probability) for mapping in model.iter_support()]
    logger.debug(f"enumerated {len(support)} members of {model.kind} support on n={model.n}")
    return support


def support_array(model: PermutationModel, cap: int = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    """The whole support as a ``(size, n)`` array; all members are equally likely."""
    size = model.support_size()
    if size > cap:
        raise SupportTooLargeException(f"{model.kind} support has {size} members, cap is {cap}")
    return np.array(list(model.iter_support()), dtype=np.int64).reshape(size, model.n)
