"""
Report writers: JSON and CSV run reports validated against the shipped schema, the sweep table,
the plain-text summary table and the binary draw spool.
"""
import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import jsonschema
import numpy as np

from steinbias.exceptions import ValidationException
from steinbias.scripts import REPORT_SCHEMA
from steinbias.utils import encoder_factory

logger = logging.getLogger(__name__)

FORMATS = ("json", "csv")
REPORT_FILE = "reports"
SPOOL_DTYPE = "<f8"

SUMMARY_FIELDS = (
    "experiment",
    "construction",
    "seed",
    "replicates",
    "mean",
    "sigma",
    "delta_half_line",
    "delta_interval",
    "bound",
    "vacuous",
    "checks",
    "passed",
    "error",
)

_encoder = encoder_factory(dt_fmt="%Y-%m-%dT%H:%M:%S.%f")


def finite(obj: Any) -> Any:
    """JSON has no NaN or infinity; they become null."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [finite(v) for v in obj]
    return obj


def to_jsonable(obj: Any) -> Any:
    return finite(json.loads(json.dumps(obj, default=_encoder)))


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def load_schema() -> Dict:
    return json.loads(REPORT_SCHEMA.read_text(encoding="utf-8"))


def validate_report(data: Dict, schema: Dict = None):
    try:
        jsonschema.validate(instance=data, schema=schema or load_schema())
    except jsonschema.ValidationError as e:
        path = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ValidationException(f"report does not match the run report schema at {path}: {e.message}")


def summary_row(data: Dict) -> Dict:
    """One flat row of a run report dict."""
    distances = {d["metric"]: d["value"] for d in data.get("distances") or []}
    bounds = [b["delta_bound"] for b in data.get("bounds") or [] if b.get("delta_bound") is not None]
    moments = data.get("moments") or {}
    variance = moments.get("variance")
    checks = data.get("checks") or []
    return {
        "experiment": data["experiment"],
        "construction": data["construction"],
        "seed": data["seed"],
        "replicates": data["replicates"],
        "mean": moments.get("mean"),
        "sigma": math.sqrt(variance) if variance is not None else None,
        "delta_half_line": distances.get("half-line"),
        "delta_interval": distances.get("interval"),
        "bound": min(bounds) if bounds else None,
        "vacuous": (min(bounds) > 1.0) if bounds else None,
        "checks": f"{sum(1 for c in checks if c['passed'])}/{len(checks)}",
        "passed": data["passed"],
        "error": data.get("error") or "",
    }


def _cell(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def summary_table(rows: Sequence[Dict], columns: Sequence[str] = None) -> str:
    columns = list(columns or (rows[0].keys() if rows else SUMMARY_FIELDS))
    cells = [[_cell(row.get(c)) for c in columns] for row in rows]
    widths = [max([len(c)] + [len(r[k]) for r in cells]) for k, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths)), "  ".join("-" * w for w in widths)]
    lines.extend("  ".join(v.ljust(w) for v, w in zip(r, widths)) for r in cells)
    return "\n".join(lines)


def write_csv(path: Path, rows: Sequence[Dict], fieldnames: Sequence[str]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_value(row.get(k)) for k in fieldnames})
    logger.info(f"wrote {len(rows)} rows to {path}")
    return path


def _csv_value(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def write_reports(reports: Sequence[Dict], out_dir: Path, fmt: str = "json") -> Path:
    """
    Write validated report dicts as ``reports.json`` or ``reports.csv`` under ``out_dir``.

    Returns:
        the written path
    """
    if fmt not in FORMATS:
        raise ValidationException(f"unknown report format {fmt!r}, expected one of {FORMATS}")
    schema = load_schema()
    data = [to_jsonable(r) for r in reports]
    for item in data:
        validate_report(item, schema)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{REPORT_FILE}.{fmt}"
    if fmt == "csv":
        return write_csv(path, [summary_row(d) for d in data], SUMMARY_FIELDS)
    path.write_text(dumps(data), encoding="utf-8")
    logger.info(f"wrote {len(data)} run reports to {path}")
    return path


def load_reports(path: Path) -> List[Dict]:
    """Read back a ``reports.json`` file, validating every report."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationException(f"can not read reports from {path}: {e}")
    data = data if isinstance(data, list) else [data]
    schema = load_schema()
    for item in data:
        validate_report(item, schema)
    return data


def write_spool(directory: Path, name: str, records: np.ndarray, fields: Sequence[str]) -> Path:
    """
    Raw little-endian float64 records, one row per draw, plus a ``.json`` side-car with the field
    names in column order.
    """
    records = np.ascontiguousarray(records, dtype=SPOOL_DTYPE)
    if records.ndim != 2 or records.shape[1] != len(fields):
        raise ValidationException(f"spool records of shape {records.shape} do not match fields {list(fields)}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{name}.f8"
    records.tofile(path)
    side_car = {"fields": list(fields), "dtype": SPOOL_DTYPE, "count": int(records.shape[0])}
    path.with_suffix(".json").write_text(dumps(side_car), encoding="utf-8")
    logger.debug(f"spooled {records.shape[0]} draws to {path}")
    return path


def read_spool(path: Path) -> Tuple[List[str], np.ndarray]:
    path = Path(path)
    side_car = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    fields = side_car["fields"]
    records = np.fromfile(path, dtype=side_car["dtype"]).reshape(-1, len(fields))
    return fields, records
