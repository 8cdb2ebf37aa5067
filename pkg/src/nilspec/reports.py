"""Deterministic report files: ``report.json``, ``rows.jsonl`` and CSV spectra.

Floats are written with Python's shortest round-trip ``repr``; keys are
sorted and no timestamps or host data are recorded, so identical inputs give
identical bytes.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from . import __version__
from .config import RunConfig, config_hash

__all__ = ["jsonable", "dumps", "summarize", "write_reports"]

TOOL = "nilspec"


def jsonable(obj):
    """Convert numpy scalars/arrays, complex numbers and tuples to JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [jsonable(float(obj.real)), jsonable(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def dumps(obj, indent: Optional[int] = None) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=indent, allow_nan=False)


def summarize(rows: Iterable[dict]) -> dict:
    """Per-check counts, max/median residual and verdict."""
    by: dict = {}
    for r in rows:
        by.setdefault(r["check"], []).append(r)
    out = {}
    for check, rs in by.items():
        res = np.array([r["residual"] for r in rs], dtype=float)
        fails = sum(1 for r in rs if not r["verdict"])
        out[check] = {"n": len(rs), "n_fail": fails, "max_residual": float(np.max(res)),
                      "median_residual": float(np.median(res)), "verdict": fails == 0}
    return out


def write_reports(out_dir, cfg: RunConfig, suite: str, rows: list, extra: Optional[dict] = None,
                  csv_files: Optional[dict] = None) -> bool:
    """Write the report bundle and return the overall verdict."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    h = config_hash(cfg)
    summary = summarize(rows)
    verdict = all(s["verdict"] for s in summary.values())
    report = {"tool": TOOL, "version": __version__, "config_hash": h, "suite": suite,
              "tolerances": cfg.tolerances, "summary": summary, "verdict": verdict,
              "n_rows": len(rows)}
    if extra:
        report.update(extra)
    (out / "report.json").write_text(dumps(report, indent=2) + "\n")
    with open(out / "rows.jsonl", "w") as fh:
        for r in rows:
            fh.write(dumps({"config_hash": h, **r}) + "\n")
    for name, text in (csv_files or {}).items():
        (out / name).write_text(text)
    return verdict
