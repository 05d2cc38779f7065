"""
Sums of local statistics ``Y = sum_alpha X_alpha`` where ``X_alpha`` reads only the underlying
variables in its cell ``G_alpha``.

A model stores its underlying variables as one flat state row per replicate; ``cells[alpha]``
lists the state coordinates ``X_alpha`` reads. Regenerating direction ``alpha`` rewrites exactly
those coordinates with a draw from the ``X_alpha``-weighted law.
"""
import itertools
import logging
import math
from abc import ABC, abstractmethod
from typing import Dict, Optional, Sequence, Tuple, Type

import numpy as np

from steinbias.exceptions import (
    DimensionException,
    NotEnumerableException,
    SupportTooLargeException,
    ValidationException,
)
from steinbias.utils import rejection_sample

logger = logging.getLogger(__name__)


class BaseLocalModel(ABC):
    kind: str = None
    value_cap: float = 1.0
    indicator: bool = True
    deterministic_regeneration: bool = False

    def __init__(self):
        self.cells = np.asarray(self._build_cells(), dtype=np.int64)
        if self.cells.ndim != 2 or self.cells.shape[0] == 0:
            raise DimensionException(f"{self.kind} has no indices")
        logger.debug(f"{self.kind}: {self.index_count} indices, {self.state_size} underlying variables")

    @property
    def index_count(self) -> int:
        return self.cells.shape[0]

    @property
    @abstractmethod
    def state_size(self) -> int: ...

    @abstractmethod
    def _build_cells(self) -> np.ndarray: ...

    @abstractmethod
    def sample_state(self, rng: np.random.Generator, size: int) -> np.ndarray: ...

    @abstractmethod
    def payoff(self, values: np.ndarray) -> np.ndarray:
        """``X`` applied along the last axis of cell values."""
        ...

    @abstractmethod
    def biased_values(self, current: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Fresh cell values from the ``X``-weighted law, one row per row of ``current``."""
        ...

    @abstractmethod
    def expected_value(self) -> float:
        """``E X_alpha``; every shipped model is translation invariant."""
        ...

    @abstractmethod
    def index_distance(self, alpha: np.ndarray, beta: np.ndarray) -> np.ndarray: ...

    def expected_values(self) -> np.ndarray:
        return np.full(self.index_count, self.expected_value())

    def evaluate(self, state: np.ndarray, indices: Optional[np.ndarray] = None) -> np.ndarray:
        """``X_beta`` for every state row, over all indices or the given ones."""
        cells = self.cells if indices is None else self.cells[indices]
        return self.payoff(np.asarray(state)[..., cells]).astype(float)

    def total(self, state: np.ndarray) -> np.ndarray:
        return self.evaluate(state).sum(axis=-1)

    def regenerate(self, state: np.ndarray, alpha: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Copy of ``state`` with row ``r`` regenerated in direction ``alpha[r]``."""
        state = np.array(state, copy=True)
        cells = self.cells[np.broadcast_to(alpha, state.shape[:1])]
        current = np.take_along_axis(state, cells, axis=1)
        np.put_along_axis(state, cells, self.biased_values(current, rng).astype(state.dtype), axis=1)
        return state

    def enumerate_states(self, cap: int) -> Tuple[np.ndarray, np.ndarray]:
        raise NotEnumerableException(f"{self.kind} has a continuous state")

    def distance_matrix(self) -> np.ndarray:
        alpha = np.arange(self.index_count)
        return self.index_distance(alpha[:, None], alpha[None, :])

    def describe(self) -> Dict:
        return {"kind": self.kind, "indices": self.index_count, "value_cap": self.value_cap}


def circular_distance(alpha: np.ndarray, beta: np.ndarray, n: int) -> np.ndarray:
    d = np.abs(np.asarray(alpha) - np.asarray(beta)) % n
    return np.minimum(d, n - d)


class Window(BaseLocalModel):
    """``X_alpha = X(C_alpha, ..., C_{alpha+m-1})`` on i.i.d. uniform(0, 1) inputs around a circle."""

    kind = "window"
    payoffs = ("increasing", "mean")

    def __init__(self, n: int, m: int, payoff: str = "increasing"):
        if not 1 <= m <= n:
            raise DimensionException(f"window needs n >= m >= 1, got n={n}, m={m}")
        if payoff not in self.payoffs:
            raise ValidationException(f"unknown window payoff {payoff!r}, expected one of {self.payoffs}")
        self.n, self.m, self.payoff_name = n, m, payoff
        self.indicator = payoff == "increasing"
        super().__init__()

    @property
    def state_size(self) -> int:
        return self.n

    def _build_cells(self) -> np.ndarray:
        return (np.arange(self.n)[:, None] + np.arange(self.m)[None, :]) % self.n

    def sample_state(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.random((size, self.n))

    def payoff(self, values: np.ndarray) -> np.ndarray:
        if self.payoff_name == "increasing":
            return np.all(np.diff(values, axis=-1) > 0, axis=-1)
        return values.mean(axis=-1)

    def biased_values(self, current: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        size = current.shape[0]
        if self.payoff_name == "increasing":
            return np.sort(rng.random((size, self.m)), axis=1)
        return rejection_sample(
            rng, size, lambda r, k: r.random((k, self.m)), lambda v: v.mean(axis=1), self.value_cap
        )

    def expected_value(self) -> float:
        return 1.0 / math.factorial(self.m) if self.payoff_name == "increasing" else 0.5

    def index_distance(self, alpha, beta):
        return circular_distance(alpha, beta, self.n)

    def describe(self) -> Dict:
        return {**super().describe(), "n": self.n, "m": self.m, "payoff": self.payoff_name}


class PermPattern(BaseLocalModel):
    """
    Occurrences of the relative order ``pattern`` in the circular m-windows of a uniform random
    permutation. ``pattern[k]`` is the rank (0-based) of window position ``k``.
    """

    kind = "perm-pattern"
    deterministic_regeneration = True

    def __init__(self, n: int, m: int, pattern: Optional[Sequence[int]] = None):
        pattern = list(range(m)) if pattern is None else [int(x) for x in pattern]
        if sorted(pattern) != list(range(m)):
            raise ValidationException(f"pattern must be a permutation of 0..{m - 1}, got {pattern}")
        if not 1 <= m <= n:
            raise DimensionException(f"pattern model needs n >= m >= 1, got n={n}, m={m}")
        self.n, self.m = n, m
        self.pattern = np.asarray(pattern, dtype=np.int64)
        self.by_rank = np.argsort(self.pattern)
        super().__init__()

    @property
    def state_size(self) -> int:
        return self.n

    def _build_cells(self) -> np.ndarray:
        return (np.arange(self.n)[:, None] + np.arange(self.m)[None, :]) % self.n

    def sample_state(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.permuted(np.tile(np.arange(self.n), (size, 1)), axis=1)

    def payoff(self, values: np.ndarray) -> np.ndarray:
        return np.all(np.diff(values[..., self.by_rank], axis=-1) > 0, axis=-1)

    def biased_values(self, current: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        # same values, reordered into the pattern
        return np.sort(current, axis=1)[:, self.pattern]

    def expected_value(self) -> float:
        return 1.0 / math.factorial(self.m)

    def index_distance(self, alpha, beta):
        return circular_distance(alpha, beta, self.n)

    def enumerate_states(self, cap: int) -> Tuple[np.ndarray, np.ndarray]:
        size = math.factorial(self.n)
        if size > cap:
            raise SupportTooLargeException(f"{self.kind} has {size} states, cap is {cap}")
        states = np.array(list(itertools.permutations(range(self.n))), dtype=np.int64)
        return states, np.full(size, 1.0 / size)

    def describe(self) -> Dict:
        return {**super().describe(), "n": self.n, "m": self.m, "pattern": self.pattern.tolist()}


class _TorusGeometry:
    def __init__(self, n: int, p: int):
        if n < 2 or p < 1:
            raise DimensionException(f"torus needs n >= 2 and p >= 1, got n={n}, p={p}")
        self.n, self.p = n, p
        self.shape = (n,) * p
        self.vertices = n**p
        self.coords = np.column_stack(np.unravel_index(np.arange(self.vertices), self.shape))
        self.cube = np.array(list(itertools.product((0, 1), repeat=p)), dtype=np.int64)

    def cube_vertices(self) -> np.ndarray:
        shifted = (self.coords[:, None, :] + self.cube[None, :, :]) % self.n
        return np.ravel_multi_index(tuple(np.moveaxis(shifted, -1, 0)), self.shape)

    def distance(self, alpha, beta) -> np.ndarray:
        d = np.abs(self.coords[np.asarray(alpha)] - self.coords[np.asarray(beta)]) % self.n
        return np.minimum(d, self.n - d).max(axis=-1)


class TorusPattern(BaseLocalModel):
    """
    Color pattern occurrences on the torus ``{0..n-1}^p``: vertices carry i.i.d. colors and
    ``X_alpha`` is one when the cube ``alpha + {0,1}^p`` (lexicographic order) shows ``target``.
    """

    kind = "torus-pattern"
    deterministic_regeneration = True

    def __init__(self, n: int, p: int, colors: Sequence[float], target: Sequence[int]):
        self.geometry = _TorusGeometry(n, p)
        self.colors = np.asarray(colors, dtype=float)
        if self.colors.ndim != 1 or np.any(self.colors < 0) or abs(self.colors.sum() - 1.0) > 1e-9:
            raise ValidationException(f"color probabilities must be a probability vector, got {colors}")
        self.target = np.asarray(target, dtype=np.int64)
        if self.target.shape != (2**p,) or np.any(self.target < 0) or np.any(self.target >= self.colors.size):
            raise ValidationException(f"target needs {2 ** p} colors from 0..{self.colors.size - 1}, got {target}")
        self.n, self.p = n, p
        super().__init__()

    @property
    def state_size(self) -> int:
        return self.geometry.vertices

    def _build_cells(self) -> np.ndarray:
        return self.geometry.cube_vertices()

    def sample_state(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(self.colors.size, size=(size, self.state_size), p=self.colors)

    def payoff(self, values: np.ndarray) -> np.ndarray:
        return np.all(values == self.target, axis=-1)

    def biased_values(self, current: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return np.broadcast_to(self.target, current.shape).copy()

    def expected_value(self) -> float:
        return float(np.prod(self.colors[self.target]))

    def index_distance(self, alpha, beta):
        return self.geometry.distance(alpha, beta)

    def enumerate_states(self, cap: int) -> Tuple[np.ndarray, np.ndarray]:
        size = self.colors.size**self.state_size
        if size > cap:
            raise SupportTooLargeException(f"{self.kind} has {size} states, cap is {cap}")
        states = np.array(list(itertools.product(range(self.colors.size), repeat=self.state_size)), dtype=np.int64)
        return states, np.prod(self.colors[states], axis=1)

    def describe(self) -> Dict:
        return {
            **super().describe(),
            "n": self.n,
            "p": self.p,
            "colors": self.colors.tolist(),
            "target": self.target.tolist(),
        }


class SubgraphCount(BaseLocalModel):
    """
    Copies of the complete graph on a unit cube in the random graph on the torus ``{0..n-1}^p``
    whose edges join vertices at sup distance one, each present independently.
    """

    kind = "subgraph-count"
    deterministic_regeneration = True

    def __init__(self, n: int, p: int, edge_probability: float):
        if n < 3:
            raise DimensionException(f"subgraph count needs n >= 3, got {n}")
        if not 0 <= edge_probability <= 1:
            raise ValidationException(f"edge probability must lie in [0, 1], got {edge_probability}")
        self.geometry = _TorusGeometry(n, p)
        self.n, self.p, self.edge_probability = n, p, edge_probability
        offsets = [o for o in itertools.product((-1, 0, 1), repeat=p) if any(o)]
        # each edge is stored once, from the endpoint whose offset to the other starts positive
        self.offsets = [o for o in offsets if next(x for x in o if x) > 0]
        self._offset_index = {o: h for h, o in enumerate(self.offsets)}
        super().__init__()

    @property
    def state_size(self) -> int:
        return self.geometry.vertices * len(self.offsets)

    def _edge(self, u: int, w: int) -> int:
        n = self.n
        diff = tuple(((int(b) - int(a) + 1) % n) - 1 for a, b in zip(self.geometry.coords[u], self.geometry.coords[w]))
        if diff in self._offset_index:
            return u * len(self.offsets) + self._offset_index[diff]
        return w * len(self.offsets) + self._offset_index[tuple(-x for x in diff)]

    def _build_cells(self) -> np.ndarray:
        cubes = self.geometry.cube_vertices()
        pairs = list(itertools.combinations(range(cubes.shape[1]), 2))
        return np.array([[self._edge(cube[a], cube[b]) for a, b in pairs] for cube in cubes])

    def sample_state(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return (rng.random((size, self.state_size)) < self.edge_probability).astype(np.int8)

    def payoff(self, values: np.ndarray) -> np.ndarray:
        return np.all(values == 1, axis=-1)

    def biased_values(self, current: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return np.ones_like(current)

    def expected_value(self) -> float:
        return float(self.edge_probability ** self.cells.shape[1])

    def index_distance(self, alpha, beta):
        return self.geometry.distance(alpha, beta)

    def enumerate_states(self, cap: int) -> Tuple[np.ndarray, np.ndarray]:
        size = 2**self.state_size
        if size > cap:
            raise SupportTooLargeException(f"{self.kind} has {size} states, cap is {cap}")
        states = np.array(list(itertools.product((0, 1), repeat=self.state_size)), dtype=np.int8)
        present = states.sum(axis=1)
        q = self.edge_probability
        return states, q**present * (1 - q) ** (self.state_size - present)

    def describe(self) -> Dict:
        return {**super().describe(), "n": self.n, "p": self.p, "edge_probability": self.edge_probability}


class HypercubeMax(BaseLocalModel):
    """Local maxima of i.i.d. uniform(0, 1) vertex values over Hamming balls of radius one on ``{0,1}^p``."""

    kind = "hypercube-max"
    deterministic_regeneration = True

    def __init__(self, p: int):
        if p < 1:
            raise DimensionException(f"hypercube needs p >= 1, got {p}")
        self.p = p
        super().__init__()

    @property
    def state_size(self) -> int:
        return 2**self.p

    def _build_cells(self) -> np.ndarray:
        alpha = np.arange(2**self.p)
        return np.column_stack([alpha] + [alpha ^ (1 << k) for k in range(self.p)])

    def sample_state(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.random((size, self.state_size))

    def payoff(self, values: np.ndarray) -> np.ndarray:
        return values[..., 0] >= values[..., 1:].max(axis=-1)

    def biased_values(self, current: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        # move the largest value to the center
        out = current.copy()
        rows = np.arange(out.shape[0])
        top = out.argmax(axis=1)
        out[rows, top], out[rows, 0] = current[rows, 0], current[rows, top]
        return out

    def expected_value(self) -> float:
        return 1.0 / (self.p + 1)

    def index_distance(self, alpha, beta):
        x = np.bitwise_xor(np.asarray(alpha, dtype=np.int64), np.asarray(beta, dtype=np.int64))
        raw = np.ascontiguousarray(np.atleast_1d(x), dtype="<u8").view(np.uint8).reshape(x.shape + (8,))
        return np.unpackbits(raw, axis=-1).sum(axis=-1).astype(np.int64)

    def describe(self) -> Dict:
        return {**super().describe(), "p": self.p}


LOCAL_MODELS: Dict[str, Type[BaseLocalModel]] = {
    cls.kind: cls for cls in (Window, PermPattern, TorusPattern, SubgraphCount, HypercubeMax)
}


def build_local_model(kind: str, **params) -> BaseLocalModel:
    if kind not in LOCAL_MODELS:
        raise ValidationException(f"unknown local model {kind!r}, expected one of {sorted(LOCAL_MODELS)}")
    return LOCAL_MODELS[kind](**params)
