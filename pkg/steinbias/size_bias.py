"""
Size-bias couplings for sums of local statistics: the dependency structure the bounds read, the
directional construction that regenerates one cell from its ``X_alpha``-weighted law, and the
estimators of ``Delta``.

The independent-sum baseline lives in ``steinbias.laws`` and is re-exported here.
"""
import logging
from dataclasses import dataclass
from typing import Iterator, Optional, Tuple

import numpy as np

from steinbias.exceptions import DegenerateException, NotEnumerableException, ValidationException
from steinbias.laws import size_bias_discrete_oracle, size_bias_independent_sum  # noqa: F401
from steinbias.local_models import BaseLocalModel
from steinbias.utils import AliasTable, SeedLike, as_generator, atom_key

logger = logging.getLogger(__name__)

DEFAULT_PREPASS = 10_000
DEFAULT_STATE_CAP = 1 << 16
P_METHOD_EXACT = "exact"
P_METHOD_MC = "monte-carlo"


@dataclass(frozen=True, eq=False)
class DependencyStructure:
    """
    Neighborhoods, distances and index weights of one local model.

    ``neighborhoods[alpha, beta]`` is True when the cells of alpha and beta share an underlying
    variable; ``pairs`` is the set of index pairs within distance ``3 rho``.
    """

    neighborhoods: np.ndarray
    distances: np.ndarray
    rho: float
    pairs: np.ndarray
    p: np.ndarray
    regular: bool
    value_cap: float
    p_method: str = P_METHOD_EXACT
    p_stderr: Optional[np.ndarray] = None

    @property
    def index_count(self) -> int:
        return self.p.size

    @property
    def neighborhood_sizes(self) -> np.ndarray:
        return self.neighborhoods.sum(axis=1)

    @property
    def b(self) -> int:
        return int(self.neighborhood_sizes.max())

    @property
    def pair_count(self) -> int:
        return int(self.pairs.sum())

    @property
    def gap_bound(self) -> float:
        return self.b * self.value_cap

    def neighborhood(self, alpha: int) -> np.ndarray:
        return np.flatnonzero(self.neighborhoods[alpha])

    def V(self, r: float) -> int:
        """Size of the radius ``r`` ball around the first index."""
        return int((self.distances[0] <= r).sum())

    def describe(self) -> dict:
        return {
            "indices": self.index_count,
            "b": self.b,
            "rho": self.rho,
            "pairs": self.pair_count,
            "V_rho": self.V(self.rho),
            "V_3rho": self.V(3 * self.rho),
            "regular": self.regular,
            "p_method": self.p_method,
        }


def build_dependency_structure(
    model: BaseLocalModel, prepass: int = DEFAULT_PREPASS, rng: Optional[np.random.Generator] = None
) -> DependencyStructure:
    incidence = np.zeros((model.index_count, model.state_size), dtype=np.int32)
    np.put_along_axis(incidence, model.cells, 1, axis=1)
    neighborhoods = (incidence @ incidence.T) > 0
    distances = model.distance_matrix()
    rho = float(distances[neighborhoods].max())
    pairs = distances <= 3 * rho
    regular = all(np.unique((distances <= r).sum(axis=1)).size == 1 for r in (rho, 3 * rho))

    p_stderr = None
    if model.indicator:
        expected = model.expected_values()
        p_method = P_METHOD_EXACT
    else:
        if prepass < 2:
            raise ValidationException(f"prepass must be >= 2, got {prepass}")
        x = model.evaluate(model.sample_state(rng or as_generator(0), prepass))
        expected = x.mean(axis=0)
        p_method = P_METHOD_MC
    total = expected.sum()
    if total <= 0:
        raise DegenerateException(f"{model.kind} has E Y = 0, size biasing is undefined")
    p = expected / total
    if p_method == P_METHOD_MC:
        p_stderr = x.std(axis=0, ddof=1) / np.sqrt(prepass) / total
        logger.debug(f"{model.kind}: index weights from a {prepass} draw pre-pass, max stderr {p_stderr.max():.3g}")

    structure = DependencyStructure(
        neighborhoods=neighborhoods,
        distances=distances,
        rho=rho,
        pairs=pairs,
        p=p,
        regular=regular,
        value_cap=model.value_cap,
        p_method=p_method,
        p_stderr=p_stderr,
    )
    logger.debug(f"{model.kind} dependency structure: {structure.describe()}")
    return structure


@dataclass(frozen=True)
class SizeBiasDraw:
    y: float
    y_s: float
    chosen: int
    regenerated: Tuple
    gap: float


SIZE_RECORD_FIELDS = ("y", "y_s", "chosen", "gap")


@dataclass(frozen=True, eq=False)
class SizeBiasBatch:
    y: np.ndarray
    y_s: np.ndarray
    chosen: np.ndarray
    gap: np.ndarray
    regenerated: np.ndarray
    outside_unchanged: np.ndarray
    gap_bound: float

    def __len__(self) -> int:
        return self.y.size

    def draw(self, k: int) -> SizeBiasDraw:
        return SizeBiasDraw(
            y=float(self.y[k]),
            y_s=float(self.y_s[k]),
            chosen=int(self.chosen[k]),
            regenerated=tuple(self.regenerated[k].tolist()),
            gap=float(self.gap[k]),
        )

    def __iter__(self) -> Iterator[SizeBiasDraw]:
        return (self.draw(k) for k in range(len(self)))

    def records(self) -> np.ndarray:
        return np.column_stack([np.asarray(getattr(self, f), dtype="<f8") for f in SIZE_RECORD_FIELDS])


def directional_draw(
    model: BaseLocalModel, alpha: int, rng: np.random.Generator, state: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    One state and its regeneration in direction ``alpha``.

    Returns:
        (state, regenerated state), both flat rows of length ``model.state_size``
    """
    if not 0 <= alpha < model.index_count:
        raise ValidationException(f"direction {alpha} outside 0..{model.index_count - 1}")
    if model.expected_values()[alpha] <= 0:
        raise DegenerateException(f"direction {alpha} of {model.kind} has E X = 0")
    state = model.sample_state(rng, 1) if state is None else np.atleast_2d(state)
    return state[0], model.regenerate(state, alpha, rng)[0]


class LocalSizeBiasSampler:
    name = "size-local"

    def __init__(self, model: BaseLocalModel, structure: DependencyStructure):
        if structure.index_count != model.index_count:
            raise ValidationException("dependency structure was built for a different model")
        self.model = model
        self.structure = structure
        self.table = AliasTable(structure.p)

    @property
    def gap_bound(self) -> float:
        return self.structure.gap_bound

    def sample(self, rng: np.random.Generator, size: int) -> SizeBiasBatch:
        model, structure = self.model, self.structure
        state = model.sample_state(rng, size)
        x = model.evaluate(state)
        chosen = self.table.sample(rng, size)
        biased = model.regenerate(state, chosen, rng)
        x_biased = model.evaluate(biased)
        inside = structure.neighborhoods[chosen]
        local = np.where(inside, x_biased - x, 0.0).sum(axis=1)
        outside_unchanged = ~np.any((x_biased != x) & ~inside, axis=1)
        if not outside_unchanged.all():
            logger.error(f"{model.kind}: {int((~outside_unchanged).sum())} draws changed X outside B_I")
        return SizeBiasBatch(
            y=x.sum(axis=1),
            y_s=x_biased.sum(axis=1),
            chosen=chosen,
            gap=np.abs(local),
            regenerated=np.take_along_axis(biased, model.cells[chosen], axis=1),
            outside_unchanged=outside_unchanged,
            gap_bound=self.gap_bound,
        )


def size_bias_sum_draw(
    model: BaseLocalModel, structure: DependencyStructure, rng: np.random.Generator
) -> SizeBiasDraw:
    return LocalSizeBiasSampler(model, structure).sample(rng, 1).draw(0)


def _conditional_increments(
    model: BaseLocalModel, structure: DependencyStructure, state: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """``sum_alpha p_alpha sum_{beta in B_alpha} (X_beta^alpha - X_beta)`` for each state row."""
    x = model.evaluate(state)
    z = np.zeros(state.shape[0])
    for alpha in np.flatnonzero(structure.p > 0):
        around = structure.neighborhood(alpha)
        regenerated = model.regenerate(state, alpha, rng)
        z += structure.p[alpha] * (model.evaluate(regenerated, around) - x[:, around]).sum(axis=1)
    return z


@dataclass(frozen=True)
class DeltaEstimate:
    value: float
    stderr: float
    outer: int
    inner: int
    raw_variance: float


def delta_proxy_estimate(
    model: BaseLocalModel, structure: DependencyStructure, outer: int, inner: int, seed: SeedLike
) -> DeltaEstimate:
    """
    Estimate ``sqrt(Var(E(Ys - Y | state)))`` with a nested Monte Carlo loop.

    The outer variance of the inner means overstates the target by the mean inner variance over
    ``inner``; that term is subtracted before the square root, and the square root is jackknifed
    over the outer replicates.
    """
    if outer < 3:
        raise ValidationException(f"outer reps must be >= 3, got {outer}")
    if inner < (1 if model.deterministic_regeneration else 2):
        raise ValidationException(f"inner reps must be >= 2 for random regeneration, got {inner}")
    rng = as_generator(seed)
    state = np.repeat(model.sample_state(rng, outer), inner, axis=0)
    z = _conditional_increments(model, structure, state, rng).reshape(outer, inner)

    means = z.mean(axis=1)
    within = z.var(axis=1, ddof=1) if inner > 1 else np.zeros(outer)

    def corrected(m_sum, m_sq, w_sum, count):
        mean = m_sum / count
        return (m_sq - count * mean**2) / (count - 1) - w_sum / count / inner

    full = corrected(means.sum(), (means**2).sum(), within.sum(), outer)
    leave_one_out = corrected(means.sum() - means, (means**2).sum() - means**2, within.sum() - within, outer - 1)
    theta = np.sqrt(max(full, 0.0))
    theta_loo = np.sqrt(np.clip(leave_one_out, 0.0, None))
    value = outer * theta - (outer - 1) * theta_loo.mean()
    stderr = np.sqrt((outer - 1) / outer * ((theta_loo - theta_loo.mean()) ** 2).sum())
    logger.debug(f"{model.kind}: delta proxy {value:.6g} +- {stderr:.3g} from {outer}x{inner} draws")
    return DeltaEstimate(
        value=float(max(value, 0.0)), stderr=float(stderr), outer=outer, inner=inner, raw_variance=float(full)
    )


@dataclass(frozen=True)
class ExactDelta:
    proxy: float
    delta: float
    states: int


def exact_delta(model: BaseLocalModel, structure: DependencyStructure, cap: int = DEFAULT_STATE_CAP) -> ExactDelta:
    """
    Exact ``sqrt(Var(E(Ys - Y | state)))`` and ``sqrt(Var(E(Ys - Y | Y)))`` by enumerating every
    underlying state. Only for models whose regeneration is a function of the state.
    """
    if not model.deterministic_regeneration:
        raise NotEnumerableException(f"{model.kind} regenerates at random, exact delta needs a deterministic map")
    states, probabilities = model.enumerate_states(cap)
    z = _conditional_increments(model, structure, states, np.random.default_rng(0))
    y = model.total(states)
    mean = probabilities @ z
    proxy = float(np.sqrt(max(probabilities @ (z - mean) ** 2, 0.0)))

    keys = np.array([atom_key(v)[0] for v in y])
    levels, inverse = np.unique(keys, return_inverse=True)
    level_mass = np.bincount(inverse, weights=probabilities, minlength=levels.size)
    level_mean = np.bincount(inverse, weights=probabilities * z, minlength=levels.size) / level_mass
    delta = float(np.sqrt(max(level_mass @ (level_mean - mean) ** 2, 0.0)))
    logger.debug(f"{model.kind}: exact delta {delta:.6g}, state proxy {proxy:.6g} over {len(states)} states")
    return ExactDelta(proxy=proxy, delta=delta, states=len(states))
