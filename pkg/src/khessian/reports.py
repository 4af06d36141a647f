"""Deterministic CSV/JSON report writers.

Floats are rendered with repr (shortest round-trip), JSON keys are sorted,
and nothing time-dependent enters the report bodies, so identical inputs
produce byte-identical files.  Run metadata with timestamps goes to a
separate ``*.runinfo.json`` sidecar.
"""

import json
from pathlib import Path

import numpy as np

__all__ = [
    "fmt",
    "write_csv",
    "write_json",
    "profile_files",
    "radial_solution_files",
    "field_files",
]


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, columns, rows):
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def write_json(path, obj):
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def profile_files(base, p, xi, rows):
    """Profile table: CSV (t, phi, phi_prime, M, predicted) + JSON header."""
    write_csv(f"{base}.csv", ["t", "phi", "phi_prime", "M", "predicted"], rows)
    write_json(f"{base}.json", {**p.header(), "xi": xi, "rows": len(rows)})


def radial_solution_files(base, sol, extra_meta=None):
    write_csv(f"{base}.csv", ["r", "u", "u1"], zip(sol.r, sol.u, sol.u1))
    meta = {"Rstar": sol.Rstar, **sol.meta}
    if extra_meta:
        meta.update(extra_meta)
    write_json(f"{base}.json", meta)


def field_files(base, fld, extra_meta=None):
    rows = zip(fld.node_x, fld.node_y, fld.node_d, fld.interior_values())
    write_csv(f"{base}.csv", ["x", "y", "d", "u"], rows)
    meta = dict(fld.meta)
    if extra_meta:
        meta.update(extra_meta)
    write_json(f"{base}.json", meta)
