"""Serialized experiment output.

CSV columns, in order:

config_hash, method, grid_index, seed, eps_init, T, eps_lloyds, eps_total,
delta, cost, rounds, non_private, ledger

Floats are written with ``repr`` so they read back exactly; an empty cell
means "not applicable" (eps_init for baselines, eps_lloyds when T = 0) and
``inf`` marks the budget of non-private methods. ``ledger`` is the JSON list
of ``{"label", "epsilon", "delta"}`` charges. The JSON format holds the same
fields in ``{"schema": 1, "records": [...]}``.

Wall-clock times go to a separate ``timings.csv`` so that the records, front
and manifest files are byte-identical across reruns.
"""

from __future__ import annotations

import csv
import io
import json
import platform
from pathlib import Path

import numpy as np
import scipy

from .runner import RunRecord

__all__ = ["COLUMNS", "RECORD_SCHEMA", "write_records", "read_records", "export_results",
           "validate_records_json"]

COLUMNS = ("config_hash", "method", "grid_index", "seed", "eps_init", "T", "eps_lloyds",
           "eps_total", "delta", "cost", "rounds", "non_private", "ledger")

_TYPES = {
    "config_hash": str, "method": str, "grid_index": int, "seed": int, "eps_init": "optfloat",
    "T": int, "eps_lloyds": "optfloat", "eps_total": float, "delta": float, "cost": float,
    "rounds": int, "non_private": bool, "ledger": str,
}

RECORD_SCHEMA = {
    "type": "object",
    "required": ["schema", "records"],
    "properties": {
        "schema": {"const": 1},
        "records": {"type": "array", "items": {"type": "object", "required": list(COLUMNS)}},
    },
}


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(name: str, text: str):
    kind = _TYPES[name]
    if kind == "optfloat":
        return None if text == "" else float(text)
    if kind is bool:
        if text not in ("true", "false"):
            raise ValueError(f"bad boolean {text!r} in column {name}")
        return text == "true"
    return kind(text)


def _json_value(value):
    if isinstance(value, float) and not np.isfinite(value):
        return repr(value)
    return value


def _record_dict(rec: RunRecord) -> dict:
    return {c: getattr(rec, c) for c in COLUMNS}


def write_records(records, path, fmt: str = "csv") -> None:
    path = Path(path)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for rec in records:
            writer.writerow([_cell(getattr(rec, c)) for c in COLUMNS])
        path.write_text(buf.getvalue())
    elif fmt == "json":
        rows = [{k: _json_value(v) for k, v in _record_dict(r).items()} for r in records]
        path.write_text(json.dumps({"schema": 1, "records": rows}, indent=1, sort_keys=True) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def read_records(path, fmt: str | None = None) -> list[RunRecord]:
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "csv")
    if fmt == "json":
        payload = json.loads(path.read_text())
        validate_records_json(payload)
        rows = [{k: (float(v) if k in ("eps_total", "eps_init", "eps_lloyds", "cost", "delta")
                     and isinstance(v, str) else v) for k, v in row.items()}
                for row in payload["records"]]
        return [RunRecord(**{c: row[c] for c in COLUMNS}) for row in rows]
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != COLUMNS:
            raise ValueError(f"{path}: unexpected header {header}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(COLUMNS):
                raise ValueError(f"{path}:{lineno}: expected {len(COLUMNS)} cells, got {len(row)}")
            out.append(RunRecord(**{c: _parse(c, cell) for c, cell in zip(COLUMNS, row)}))
        return out


def validate_records_json(payload) -> None:
    """Check ``payload`` against :data:`RECORD_SCHEMA`; raises ValueError."""
    if not isinstance(payload, dict) or payload.get("schema") != 1:
        raise ValueError("records JSON must be an object with schema = 1")
    rows = payload.get("records")
    if not isinstance(rows, list):
        raise ValueError("records JSON needs a 'records' array")
    for i, row in enumerate(rows):
        if not isinstance(row, dict):
            raise ValueError(f"record {i} is not an object")
        missing = [c for c in COLUMNS if c not in row]
        if missing:
            raise ValueError(f"record {i} lacks {missing}")


def export_results(records, front, out_dir, fmt: str = "csv", config=None) -> dict[str, Path]:
    """Write records, Pareto front, manifest and timings into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ext = "json" if fmt == "json" else "csv"
    paths = {"records": out / f"records.{ext}", "front": out / f"front.{ext}",
             "manifest": out / "manifest.json", "timings": out / "timings.csv"}
    write_records(records, paths["records"], fmt)
    write_records(front, paths["front"], fmt)
    manifest = {
        "config": None if config is None else config.to_dict(),
        "seeds": None if config is None else list(config.seeds),
        "n_records": len(records),
        "n_front": len(front),
        "columns": list(COLUMNS),
        "versions": {"python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__},
    }
    paths["manifest"].write_text(json.dumps(manifest, indent=1, sort_keys=True, default=str) + "\n")
    with paths["timings"].open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "grid_index", "seed", "wall_time"])
        for rec in records:
            writer.writerow([rec.method, rec.grid_index, rec.seed, repr(rec.wall_time)])
    return paths
