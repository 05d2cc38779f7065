"""
The experiment runner. It owns the worker pool: replicate block ``r`` of an experiment draws from
``substream(seed, r)`` on a thread pool and the blocks are merged in block order, so a report only
depends on the config and the seed.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Type

from steinbias.arrays import MomentSummary
from steinbias.bounds import BoundReport, SmoothnessClass
from steinbias.config import SBConfig, SBConfigExperiment
from steinbias.construction import BaseConstruction
from steinbias.exceptions import InvalidConfigException, SteinBiasException
from steinbias.report import write_spool
from steinbias.utils import CHECK_STREAM, MOMENT_STREAM, PREPASS_STREAM, concat_batches, substream
from steinbias.verify import CheckReport, DistanceEstimate

logger = logging.getLogger(__name__)

SPOOL_DIR = "spool"


@dataclass
class RunReport:
    experiment: str
    construction: str
    config: Dict
    seed: int
    replicates: int
    moments: Optional[MomentSummary] = None
    distances: List[DistanceEstimate] = field(default_factory=list)
    bounds: List[BoundReport] = field(default_factory=list)
    smoothness: List[SmoothnessClass] = field(default_factory=list)
    checks: List[CheckReport] = field(default_factory=list)
    describe: Dict = field(default_factory=dict)
    timings: Dict = field(default_factory=dict)
    spool: Optional[str] = None
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckReport:
        return next(c for c in self.checks if c.name == name)

    def distance(self, metric: str) -> DistanceEstimate:
        return next(d for d in self.distances if d.metric == metric)

    def to_dict(self) -> Dict:
        return {
            "experiment": self.experiment,
            "construction": self.construction,
            "config": self.config,
            "seed": self.seed,
            "replicates": self.replicates,
            "moments": asdict(self.moments) if self.moments else None,
            "distances": [asdict(d) for d in self.distances],
            "bounds": [{**b.to_dict(), "smoothness": s.kind} for s, b in zip(self.smoothness, self.bounds)],
            "checks": [c.to_dict() for c in self.checks],
            "describe": self.describe,
            "timings": self.timings,
            "spool": self.spool,
            "error": self.error,
            "passed": self.passed,
        }


@dataclass
class SweepRow:
    point: Dict[str, Any]
    report: RunReport

    def to_row(self) -> Dict:
        report = self.report
        distances = {d.metric: d.value for d in report.distances}
        bound = min((b.delta_bound for b in report.bounds), default=None)
        return {
            **self.point,
            "sigma": report.moments.sigma if report.moments else None,
            "delta_half_line": distances.get("half-line"),
            "delta_interval": distances.get("interval"),
            "bound": bound,
            "vacuous": None if bound is None else bound > 1.0,
            "pass": report.passed,
            "error": report.error or "",
        }


SWEEP_FIELDS = ("sigma", "delta_half_line", "delta_interval", "bound", "vacuous", "pass", "error")


def block_sizes(replicates: int, block_size: int) -> List[int]:
    return [min(block_size, replicates - start) for start in range(0, replicates, block_size)]


class Runner:
    """
    Args:
        config: the loaded suite
        threads: worker count, ``os.cpu_count()`` when unset
        seed: overrides every experiment's seed
        replicates: overrides every experiment's replicate count
    """

    def __init__(
        self,
        config: SBConfig,
        threads: Optional[int] = None,
        seed: Optional[int] = None,
        replicates: Optional[int] = None,
    ):
        self.config = config
        self.threads = threads or config.threads or os.cpu_count() or 1
        self.seed = seed
        self.replicates = replicates

    def seed_for(self, experiment_config: SBConfigExperiment) -> int:
        if self.seed is not None:
            return self.seed
        return self.config.seed if experiment_config.seed is None else experiment_config.seed

    def sample(self, construction: BaseConstruction, seed: int, replicates: int):
        sizes = block_sizes(replicates, self.config.block_size)
        logger.debug(
            f"experiment.{construction.name}: {replicates} draws in {len(sizes)} blocks on {self.threads} threads"
        )
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            futures = [pool.submit(construction.sample, substream(seed, r), size) for r, size in enumerate(sizes)]
            batches = [f.result() for f in futures]
        return concat_batches(batches)

    def run(
        self,
        name: str,
        experiment_config: Optional[SBConfigExperiment] = None,
        construction_cls: Optional[Type[BaseConstruction]] = None,
        with_checks: bool = True,
        spool: Optional[bool] = None,
        sample_draws: bool = True,
    ) -> RunReport:
        """
        Moments, bounds, draws, distances and checks of one experiment; with ``sample_draws=False`` only the
        moments and the bounds. A ``SteinBiasException`` is recorded in the report, never raised.
        """
        experiment_config = experiment_config or self.config.experiment[name]
        construction_cls = construction_cls or self.config.construction_cls[name]
        if self.replicates is not None:
            experiment_config = replace(experiment_config, replicates=self.replicates)
        seed = self.seed_for(experiment_config)
        report = RunReport(
            experiment=name,
            construction=experiment_config.construction or construction_cls.__name__,
            config=asdict(experiment_config),
            seed=seed,
            replicates=experiment_config.replicates,
        )
        started = datetime.now()
        logger.info(f"experiment.{name}: {report.construction}, {report.replicates} replicates, seed {seed}")
        try:
            construction = construction_cls(name=name, config=experiment_config, suite=self.config)
            self._pipeline(
                construction, report, with_checks, experiment_config.spool if spool is None else spool, sample_draws
            )
        except SteinBiasException as e:
            logger.error(f"experiment.{name}: {type(e).__name__}: {e}")
            report.error = f"{type(e).__name__}: {e}"
        finished = datetime.now()
        report.timings = {"started_at": started, "seconds": (finished - started).total_seconds()}
        logger.info(f"experiment.{name}: {'passed' if report.passed else 'FAILED'}")
        return report

    def _pipeline(
        self, construction: BaseConstruction, report: RunReport, with_checks: bool, spool: bool, sample_draws: bool
    ):
        seed = report.seed
        construction.prepare(substream(seed, PREPASS_STREAM))
        moments = construction.moments(substream(seed, MOMENT_STREAM))
        report.moments = moments
        report.describe = construction.describe()
        pairs = construction.bounds(moments)
        report.smoothness = [s for s, _ in pairs]
        report.bounds = [b for _, b in pairs]
        if not sample_draws:
            return

        batch = self.sample(construction, seed, report.replicates)
        draws = construction.draws(batch)
        report.distances = list(construction.distances(draws, moments).values())

        if spool:
            directory = Path(self.config.output_dir) / SPOOL_DIR
            records = construction.records(batch)
            report.spool = str(write_spool(directory, report.experiment, records, construction.record_fields))
        if not with_checks:
            return
        rng = substream(seed, CHECK_STREAM)
        for name in dict.fromkeys(construction.construction_config.checks):
            report.checks.append(construction.check(name, draws, moments, rng))

    def run_all(self, names: Optional[Sequence[str]] = None, **kwargs) -> List[RunReport]:
        names = list(names or self.config.experiment)
        unknown = [n for n in names if n not in self.config.experiment]
        if unknown:
            raise InvalidConfigException(f"experiment: unknown or disabled experiments {unknown}")
        return [self.run(name, **kwargs) for name in names]

    def sweep(self, name: str) -> List[SweepRow]:
        """One run per grid point; a point whose config is invalid becomes an errored row."""
        if name not in self.config.sweep:
            raise InvalidConfigException(f"sweep: unknown sweep {name!r}")
        template = self.config.sweep[name].experiment
        rows = []
        for k, (point, raw) in enumerate(self.config.sweep_points(name)):
            label = f"{template}[{k}]"
            try:
                experiment_config, construction_cls = self.config.experiment_config(label, raw)
                is_valid, reason = experiment_config.validate()
                if not is_valid:
                    raise InvalidConfigException(f"sweep.{name}.{label}.{reason}")
            except SteinBiasException as e:
                logger.error(f"sweep.{name}: point {point} errored: {e}")
                rows.append(SweepRow(point=point, report=self._errored(label, raw, e)))
                continue
            rows.append(SweepRow(point=point, report=self.run(label, experiment_config, construction_cls)))
        return rows

    def _errored(self, label: str, raw: Dict, error: Exception) -> RunReport:
        seed = self.seed if self.seed is not None else raw.get("seed")
        seed = self.config.seed if seed is None else seed
        return RunReport(
            experiment=label,
            construction=raw.get("construction") or raw.get("load_module") or "",
            config=raw,
            seed=seed,
            replicates=self.replicates or raw.get("replicates", 0),
            timings={"started_at": datetime.now(), "seconds": 0.0},
            error=f"{type(error).__name__}: {error}",
        )
