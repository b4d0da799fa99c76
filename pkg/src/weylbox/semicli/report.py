"""Sweep output: bit-stable CSV and JSON plus a metadata companion."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import platform

import numpy as np

from .. import __version__
from ..errors import EmptySweep
from .sweep import SweepRow

UNSTABLE = ("wall_time",)


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.17g" % float(v)


def rows_to_csv(rows: list[SweepRow], exclude=()) -> str:
    if not rows:
        raise EmptySweep("no rows to report")
    cols = [c for c in SweepRow.columns() if c not in exclude]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in cols])
    return buf.getvalue()


def csv_to_rows(text: str) -> list[SweepRow]:
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for rec in reader:
        kw = {}
        for c in SweepRow.columns():
            if c == "error":
                kw[c] = rec.get(c, "")
            else:
                kw[c] = float(rec[c])
        out.append(SweepRow(**kw))
    return out


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def rows_to_json(rows: list[SweepRow]) -> str:
    if not rows:
        raise EmptySweep("no rows to report")
    return json.dumps([{k: _json_value(v) for k, v in r.as_dict().items()} for r in rows], indent=1)


def json_to_rows(text: str) -> list[SweepRow]:
    out = []
    for rec in json.loads(text):
        kw = {k: (float(v) if k != "error" else v) for k, v in rec.items()}
        out.append(SweepRow(**kw))
    return out


def stable_hash(rows: list[SweepRow]) -> str:
    """SHA-256 of the CSV without the wall-time column."""
    return hashlib.sha256(rows_to_csv(rows, exclude=UNSTABLE).encode()).hexdigest()


def rows_equal(a: list[SweepRow], b: list[SweepRow]) -> bool:
    if len(a) != len(b):
        return False
    for x, y in zip(a, b):
        for c in SweepRow.columns():
            u, v = getattr(x, c), getattr(y, c)
            if isinstance(u, float) and math.isnan(u) and isinstance(v, float) and math.isnan(v):
                continue
            if u != v:
                return False
    return True


def emit_report(rows: list[SweepRow], out_dir, fmt: str = "csv", prefix: str = "sweep", config_echo: dict | None = None) -> list[str]:
    """Write rows as CSV and/or JSON, plus ``<prefix>.meta.json``; returns the written paths."""
    if not rows:
        raise EmptySweep("no rows to report")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    if fmt in ("csv", "both"):
        p = os.path.join(out_dir, f"{prefix}.csv")
        with open(p, "w", newline="") as fh:
            fh.write(rows_to_csv(rows))
        paths.append(p)
    if fmt in ("json", "both"):
        p = os.path.join(out_dir, f"{prefix}.json")
        with open(p, "w") as fh:
            fh.write(rows_to_json(rows))
        paths.append(p)
    meta = {
        "library": "weylbox",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "rows": len(rows),
        "columns": SweepRow.columns(),
        "stable_hash": stable_hash(rows),
        "config": config_echo or {},
    }
    p = os.path.join(out_dir, f"{prefix}.meta.json")
    with open(p, "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True, default=str)
    paths.append(p)
    return paths
