import copy
import itertools
import logging
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple

import toml

from steinbias.exceptions import InvalidConfigException
from steinbias.utils import confirm_dc_type, import_class

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "STEINBIAS_OUTPUT_DIR"
LOG_LEVELS = ("CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG")

BUILTIN_CONSTRUCTIONS = {
    "zero-uniform": "steinbias.contrib.construction.uniform::UniformConstruction",
    "zero-cycle-type": "steinbias.contrib.construction.cycle_type::CycleTypeConstruction",
    "zero-independent": "steinbias.contrib.construction.independent::ZeroIndependentConstruction",
    "size-independent": "steinbias.contrib.construction.independent::SizeIndependentConstruction",
    "size-local": "steinbias.contrib.construction.local::LocalConstruction",
}


@dataclass
class SBConfigExperiment:
    """
    The basic configuration set of one experiment.

    If a construction needs custom fields, its config should inherit this.
    """

    load_module: str = None
    construction: str = None
    enable: bool = True
    replicates: int = 10_000
    seed: Optional[int] = None
    checks: List[str] = field(default_factory=list)
    smoothness: List[str] = field(default_factory=lambda: ["half-lines", "intervals"])
    bound_variants: List[str] = field(default_factory=list)
    spool: bool = False

    def validate(self) -> Tuple[bool, Optional[str]]:
        """
        Returns:
            tuple(bool, str): (config_is_valid, reason), reason names the offending field
        """
        if not isinstance(self.replicates, int) or self.replicates < 1:
            return False, f"replicates must be an integer >= 1, got {self.replicates!r}"
        if self.seed is not None and (not isinstance(self.seed, int) or self.seed < 0):
            return False, f"seed must be a nonnegative integer, got {self.seed!r}"
        return True, None


@dataclass
class SBConfigSweep:
    experiment: str = None
    grid: Dict[str, List[Any]] = field(default_factory=dict)

    def validate(self) -> Tuple[bool, Optional[str]]:
        if not self.experiment:
            return False, "experiment: a sweep needs the id of its template experiment"
        if not self.grid or any(not isinstance(v, list) or not v for v in self.grid.values()):
            return False, "grid: a sweep needs a nonempty list of values per parameter"
        return True, None

    def points(self) -> Iterator[Dict[str, Any]]:
        names = sorted(self.grid)
        for values in itertools.product(*(self.grid[name] for name in names)):
            yield dict(zip(names, values))


@dataclass
class SBConfig:
    _file: Path = None
    _raw: Dict = field(default_factory=dict)
    log_level: str = "INFO"
    output_dir: Path = None
    seed: int = 0
    threads: Optional[int] = None
    block_size: int = 1 << 14
    enumeration_cap: int = 40320
    tuple_table_cap: int = 10**7
    z_threshold: float = 4.0
    experiment: Dict[str, SBConfigExperiment] = field(default_factory=dict)
    sweep: Dict[str, SBConfigSweep] = field(default_factory=dict)
    # Hold all construction classes.
    _construction_cls: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def load(cls, config_file: Path) -> "SBConfig":
        """Load config from file."""
        logger.debug(f"Loading steinbias configs from {str(config_file)}.")
        try:
            raw_config: Dict = toml.load(config_file)  # noqa
        except (OSError, toml.TomlDecodeError) as e:
            raise InvalidConfigException(f"can not read config {config_file}: {e}")
        return cls.from_dict(raw_config, config_file)

    @classmethod
    def from_dict(cls, raw_config: Dict, config_file: Path = None) -> "SBConfig":
        config_fields = {
            f.name: copy.deepcopy(raw_config[f.name])
            for f in fields(cls)
            if f.name in raw_config and not f.name.startswith("_")
        }
        config = cls(**config_fields, _file=config_file, _raw=raw_config)
        config.confirm_data_type()

        # validation
        is_valid, reason = config.validate()
        if not is_valid:
            raise InvalidConfigException(reason)
        return config

    def reload(self) -> "SBConfig":
        return self.load(self._file)

    def validate(self) -> Tuple[bool, Optional[str]]:
        if str(self.log_level).upper() not in LOG_LEVELS:
            return False, f"log_level must be one of {LOG_LEVELS}, got {self.log_level!r}"
        for name in ("block_size", "enumeration_cap", "tuple_table_cap"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                return False, f"{name} must be an integer >= 1, got {getattr(self, name)!r}"
        if self.threads is not None and (not isinstance(self.threads, int) or self.threads < 1):
            return False, f"threads must be an integer >= 1, got {self.threads!r}"
        if not isinstance(self.seed, int) or self.seed < 0:
            return False, f"seed must be a nonnegative integer, got {self.seed!r}"
        if not self.z_threshold > 0:
            return False, f"z_threshold must be > 0, got {self.z_threshold!r}"
        for name, experiment in self.experiment.items():
            is_valid, reason = experiment.validate()
            if not is_valid:
                return False, f"experiment.{name}.{reason}"
        for name, sweep in self.sweep.items():
            is_valid, reason = sweep.validate()
            if not is_valid:
                return False, f"sweep.{name}.{reason}"
            if sweep.experiment not in self._raw.get("experiment", {}):
                return False, f"sweep.{name}.experiment: unknown experiment {sweep.experiment!r}"
        return True, None

    def confirm_data_type(self):
        if self._file:
            self._file = Path(self._file)
        self.output_dir = Path(os.environ.get(OUTPUT_DIR_ENV) or self.output_dir or "./steinbias-output")
        self.log_level = str(self.log_level).upper()
        self.sweep = {name: confirm_dc_type(config, SBConfigSweep) for name, config in self.sweep.items()}

        # Initialize the configuration with each construction's own config class.
        config: Dict
        for name, config in list(self.experiment.items()):
            if not config.get("enable", True):
                self.experiment.pop(name)
                continue
            self.experiment[name], self._construction_cls[name] = self.experiment_config(name, config)

    def experiment_config(self, name: str, raw: Dict) -> Tuple[SBConfigExperiment, Any]:
        """Convert one raw experiment table into its construction's config dataclass."""
        construction_cls = resolve_construction(name, raw)
        try:
            return confirm_dc_type(raw, construction_cls.config), construction_cls
        except (TypeError, ValueError) as e:
            raise InvalidConfigException(f"experiment.{name}: {e}")

    def sweep_points(self, name: str) -> Iterator[Tuple[Dict[str, Any], Dict]]:
        """Each grid point of a sweep with the raw experiment table it produces."""
        sweep = self.sweep[name]
        template = self._raw["experiment"][sweep.experiment]
        for point in sweep.points():
            raw = copy.deepcopy(template)
            raw.update(point)
            yield point, raw

    def seed_for(self, name: str) -> int:
        seed = self.experiment[name].seed
        return self.seed if seed is None else seed

    @property
    def construction_cls(self):
        return self._construction_cls


def resolve_construction(name: str, raw: Dict):
    load_module = raw.get("load_module") or BUILTIN_CONSTRUCTIONS.get(raw.get("construction", ""), "")
    construction_cls = import_class(load_module)
    if not construction_cls:
        raise InvalidConfigException(
            f"experiment.{name}.load_module: it must be in format \"module_path::class_name\" or the experiment "
            f"must name a builtin construction ({', '.join(BUILTIN_CONSTRUCTIONS)})"
        )
    return construction_cls
