from pathlib import Path
from unittest import mock

import pytest

from steinbias.config import OUTPUT_DIR_ENV, SBConfig, SBConfigExperiment, SBConfigSweep, resolve_construction
from steinbias.contrib.construction.independent import IndependentConfig, ZeroIndependentConstruction
from steinbias.contrib.construction.local import LocalConfig, LocalConstruction
from steinbias.exceptions import InvalidConfigException
from tests.conftest import CONFIG_FILE, test_pair


RADEMACHER_TRIPLE = [{"law": "rademacher", "count": 3}]


def _raw(**experiment):
    return {"experiment": {"demo": {"construction": "zero-independent", "summands": RADEMACHER_TRIPLE, **experiment}}}


def test_load_config():
    SBConfig.load(CONFIG_FILE)


def test_load_constructions_from_config():
    config = SBConfig.load(CONFIG_FILE)
    assert len(config.construction_cls) == len(config.experiment) > 0
    assert config.construction_cls["window-100-2"] is LocalConstruction
    assert isinstance(config.experiment["window-100-2"], LocalConfig)
    assert config.construction_cls["rademacher-sanity"] is ZeroIndependentConstruction
    assert isinstance(config.experiment["rademacher-sanity"], IndependentConfig)


def test_disabled_experiment_is_skipped_but_usable_as_template():
    config = SBConfig.load(CONFIG_FILE)
    assert "window-sweep-base" not in config.experiment
    points = list(config.sweep_points("window-n"))
    assert [point for point, _ in points] == [{"n": 50}, {"n": 100}, {"n": 200}]
    assert all(raw["model"] == "window" for _, raw in points)


def test_config_defaults():
    config = SBConfig.from_dict({})
    assert config.seed == 0
    assert config.log_level == "INFO"
    assert config.output_dir == Path("./steinbias-output")
    assert config.experiment == {}


@mock.patch.dict("os.environ", {OUTPUT_DIR_ENV: "/tmp/elsewhere"})
def test_output_dir_env_override():
    assert SBConfig.from_dict({"output_dir": "ignored"}).output_dir == Path("/tmp/elsewhere")


def test_seed_for():
    config = SBConfig.from_dict({"seed": 5, **_raw()})
    assert config.seed_for("demo") == 5
    assert SBConfig.from_dict({"seed": 5, **_raw(seed=11)}).seed_for("demo") == 11


test_exception_args_config = [
    test_pair(input={"log_level": "LOUD"}, expected="log_level"),
    test_pair(input={"block_size": 0}, expected="block_size"),
    test_pair(input={"threads": 0}, expected="threads"),
    test_pair(input={"seed": -1}, expected="seed"),
    test_pair(input={"z_threshold": 0}, expected="z_threshold"),
    test_pair(input=_raw(replicates=0), expected="experiment.demo.replicates"),
    test_pair(input=_raw(seed=-3), expected="experiment.demo.seed"),
    test_pair(input=_raw(construction="zero-nothing"), expected="experiment.demo.load_module"),
    test_pair(input=_raw(load_module="not a path"), expected="experiment.demo.load_module"),
    test_pair(input={"sweep": {"s": {"experiment": "missing", "grid": {"n": [1]}}}}, expected="sweep.s.experiment"),
    test_pair(input={**_raw(), "sweep": {"s": {"experiment": "demo", "grid": {"n": []}}}}, expected="sweep.s.grid"),
]


@pytest.mark.parametrize("test", test_exception_args_config)
def test_config_validation(test: test_pair):
    with pytest.raises(InvalidConfigException, match=test.expected):
        SBConfig.from_dict(test.input)


def test_load_missing_or_broken_file(tmp_path):
    with pytest.raises(InvalidConfigException):
        SBConfig.load(tmp_path / "nothing.toml")
    broken = tmp_path / "broken.toml"
    broken.write_text("seed = [", encoding="utf-8")
    with pytest.raises(InvalidConfigException):
        SBConfig.load(broken)


def test_reload(tmp_path):
    path = tmp_path / "suite.toml"
    path.write_text("seed = 3\n", encoding="utf-8")
    config = SBConfig.load(path)
    path.write_text("seed = 4\n", encoding="utf-8")
    assert config.reload().seed == 4


def test_local_config_requires_model_parameters():
    is_valid, reason = LocalConfig(model="window", n=10).validate()
    assert not is_valid and reason.startswith("m:")
    assert LocalConfig(model="perm-pattern", n=5, m=2).validate() == (True, None)
    assert not LocalConfig(model="ring").validate()[0]


def test_local_config_pattern_is_one_based():
    config = LocalConfig(model="perm-pattern", n=5, m=3, pattern=[2, 3, 1])
    assert config.model_parameters() == {"n": 5, "m": 3, "pattern": [1, 2, 0]}


def test_sweep_points_are_sorted_products():
    sweep = SBConfigSweep(experiment="demo", grid={"n": [1, 2], "m": [3]})
    assert list(sweep.points()) == [{"m": 3, "n": 1}, {"m": 3, "n": 2}]


def test_resolve_construction_prefers_load_module():
    raw = {
        "construction": "size-local",
        "load_module": "steinbias.contrib.construction.independent::ZeroIndependentConstruction",
    }
    assert resolve_construction("demo", raw) is ZeroIndependentConstruction


def test_experiment_validation_defaults():
    assert SBConfigExperiment().validate() == (True, None)
    assert not SBConfigExperiment(replicates=1.5).validate()[0]
