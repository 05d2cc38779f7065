import csv
import json
from dataclasses import replace
from datetime import datetime

import numpy as np
import pytest

from steinbias.arrays import METHOD_EXACT, MomentSummary
from steinbias.bounds import SmoothnessClass, zero_bias_bound
from steinbias.exceptions import ValidationException
from steinbias.report import (
    SUMMARY_FIELDS,
    dumps,
    load_reports,
    load_schema,
    read_spool,
    summary_row,
    summary_table,
    to_jsonable,
    validate_report,
    write_reports,
    write_spool,
)
from steinbias.runner import RunReport, SweepRow
from steinbias.verify import HALF_LINE, INTERVAL, CheckReport, DistanceEstimate
from tests.conftest import test_pair


@pytest.fixture
def report():
    smoothness = SmoothnessClass.half_lines()
    return RunReport(
        experiment="demo",
        construction="zero-independent",
        config={"replicates": 1000, "checks": ["gap"]},
        seed=7,
        replicates=1000,
        moments=MomentSummary(mean=0.0, variance=4.0, method=METHOD_EXACT),
        distances=[
            DistanceEstimate(metric=HALF_LINE, value=0.01, sample_count=1000, dkw_band=0.05),
            DistanceEstimate(metric=INTERVAL, value=0.02, sample_count=1000, dkw_band=0.05),
        ],
        bounds=[zero_bias_bound(2.0, 1 / 24, smoothness, "half-line")],
        smoothness=[smoothness],
        checks=[
            CheckReport(name="gap-zero", passed=True, observed=1.5, threshold=2.0),
            CheckReport(name="oracle", passed=False, observed=float("nan"), threshold=float("inf")),
        ],
        timings={"started_at": datetime(2024, 6, 1, 12, 0, 0), "seconds": 1.25},
    )


def test_report_dict_matches_schema(report):
    data = to_jsonable(report.to_dict())
    validate_report(data)
    assert data["timings"]["started_at"] == "2024-06-01T12:00:00.000000"
    assert data["bounds"][0]["smoothness"] == "half-lines"
    assert data["passed"] is False


def test_non_finite_values_become_null(report):
    data = json.loads(dumps(report.to_dict()))
    assert data["checks"][1]["observed"] is None
    assert data["checks"][1]["threshold"] is None


test_exception_args_validate_report = [
    test_pair(input=("seed", -1), expected="seed"),
    test_pair(input=("experiment", ""), expected="experiment"),
    test_pair(input=("surprise", 1), expected="<root>"),
]


@pytest.mark.parametrize("test", test_exception_args_validate_report)
def test_validate_report_names_the_path(test: test_pair, report):
    data = to_jsonable(report.to_dict())
    key, value = test.input
    data[key] = value
    with pytest.raises(ValidationException, match=test.expected):
        validate_report(data, load_schema())


def test_summary_row(report):
    row = summary_row(to_jsonable(report.to_dict()))
    assert set(row) == set(SUMMARY_FIELDS)
    assert row["sigma"] == 2.0
    assert row["delta_half_line"] == 0.01
    assert row["checks"] == "1/2"
    assert row["vacuous"] is True
    assert row["error"] == ""


test_args_vacuous_rows = [
    test_pair(input=1.0, expected=False),
    test_pair(input=1.5, expected=True),
]


@pytest.mark.parametrize("test", test_args_vacuous_rows)
def test_rows_flag_vacuous_only_above_one(test: test_pair, report):
    report = replace(report, bounds=[replace(report.bounds[0], delta_bound=test.input)])
    assert summary_row(to_jsonable(report.to_dict()))["vacuous"] is test.expected
    assert SweepRow(point={"n": 4}, report=report).to_row()["vacuous"] is test.expected


def test_summary_table():
    table = summary_table([{"name": "a", "value": 0.123456789, "ok": True, "error": None}])
    header, rule, line = table.splitlines()
    assert header.split() == ["name", "value", "ok", "error"]
    assert set(rule.replace(" ", "")) == {"-"}
    assert line.split() == ["a", "0.123457", "yes", "-"]


def test_write_and_load_json_reports(report, tmp_path):
    path = write_reports([report.to_dict()], tmp_path / "out")
    assert path == tmp_path / "out" / "reports.json"
    loaded = load_reports(path)
    assert loaded[0]["experiment"] == "demo"
    assert path.read_text(encoding="utf-8") == dumps(loaded)


def test_write_csv_reports(report, tmp_path):
    path = write_reports([report.to_dict()], tmp_path, fmt="csv")
    with path.open(encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == list(SUMMARY_FIELDS)
    assert rows[0]["sigma"] == "2.0"
    assert rows[0]["passed"] == "False"


def test_write_reports_rejects_bad_input(report, tmp_path):
    with pytest.raises(ValidationException):
        write_reports([report.to_dict()], tmp_path, fmt="xml")
    broken = report.to_dict()
    broken["seed"] = -5
    with pytest.raises(ValidationException):
        write_reports([broken], tmp_path)


def test_load_reports_errors(tmp_path):
    with pytest.raises(ValidationException):
        load_reports(tmp_path / "missing.json")
    garbage = tmp_path / "garbage.json"
    garbage.write_text("{not json", encoding="utf-8")
    with pytest.raises(ValidationException):
        load_reports(garbage)


def test_spool_round_trip(tmp_path):
    records = np.array([[1.0, 2.0, 0.5], [-1.0, 0.0, 1.0]])
    path = write_spool(tmp_path / "spool", "demo", records, ("y", "y_star", "gap"))
    assert path.name == "demo.f8"
    assert path.stat().st_size == records.size * 8
    side_car = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    assert side_car == {"fields": ["y", "y_star", "gap"], "dtype": "<f8", "count": 2}
    fields, loaded = read_spool(path)
    assert fields == ["y", "y_star", "gap"]
    np.testing.assert_array_equal(loaded, records)


def test_spool_shape_mismatch(tmp_path):
    with pytest.raises(ValidationException):
        write_spool(tmp_path, "demo", np.zeros((3, 2)), ("y", "y_star", "gap"))
