"""On-disk formats: trajectory CSV, JSON sidecars and their schemas.

Trajectory CSV columns are ``n,t,phase,x_1..x_d1,y_1..y_d2,s,eps,delta,alpha,k``.
Floats are written with ``repr`` so equal runs give byte-identical files;
missing values are empty fields.  Wall-clock timestamps live only in the
JSON sidecar.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Optional, Sequence

import jsonschema

__all__ = [
    "csv_columns",
    "CsvSink",
    "format_value",
    "read_csv",
    "validate_csv",
    "write_json",
    "validate_json",
    "SCHEMAS",
]

PHASES = ("interval", "stage")


def csv_columns(d1: int, d2: int) -> list:
    return (
        ["n", "t", "phase"]
        + [f"x_{i}" for i in range(1, d1 + 1)]
        + [f"y_{j}" for j in range(1, d2 + 1)]
        + ["s", "eps", "delta", "alpha", "k"]
    )


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    return repr(float(v))


class CsvSink:
    """Streams trajectory rows to disk as they are produced."""

    def __init__(self, path, d1: int, d2: int):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.d1, self.d2 = d1, d2
        self._fh = open(self.path, "w", newline="", encoding="utf-8")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(csv_columns(d1, d2))
        self.rows = 0

    def write(self, n, t, phase, x, y, s=None, eps=None, delta=None, alpha=None, k=None):
        fmt = format_value
        self._writer.writerow(
            [str(n), str(t), phase]
            + [fmt(v) for v in x]
            + [fmt(v) for v in y]
            + [fmt(s), fmt(eps), fmt(delta), fmt(alpha), "" if k is None else str(int(k))]
        )
        self.rows += 1

    def close(self):
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_csv(path) -> tuple:
    """Return ``(header, rows)`` with rows as lists of strings."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def validate_csv(path, d1: int, d2: int) -> list:
    """Check a trajectory CSV against the row schema; returns a list of problems."""
    header, rows = read_csv(path)
    expected = csv_columns(d1, d2)
    problems = []
    if header != expected:
        return [f"header {header} != {expected}"]
    idx = {name: i for i, name in enumerate(header)}
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            problems.append(f"line {lineno}: {len(row)} fields, expected {len(header)}")
            continue
        if not (row[0].isdigit() and row[1].isdigit()):
            problems.append(f"line {lineno}: n and t must be non-negative integers")
        if row[2] not in PHASES:
            problems.append(f"line {lineno}: phase {row[2]!r} not in {PHASES}")
        for name in expected[3 : 3 + d1 + d2]:
            v = row[idx[name]]
            if not _is_float(v) or not math.isfinite(float(v)):
                problems.append(f"line {lineno}: {name}={v!r} is not a finite number")
        for name in ("s", "eps", "delta", "alpha"):
            v = row[idx[name]]
            if v and not _is_float(v):
                problems.append(f"line {lineno}: {name}={v!r} is not a number")
        k = row[idx["k"]]
        if k and not (k.isdigit() and int(k) >= 1):
            problems.append(f"line {lineno}: k={k!r} must be a positive integer")
    return problems


def write_json(path, payload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


_num = {"type": "number"}
_num_or_null = {"type": ["number", "null"]}
_vec = {"type": "array", "items": _num}
_mat = {"type": "array", "items": _vec}

SCHEMAS = {
    "report": {
        "type": "object",
        "required": [
            "kind", "x", "y", "grad_norm_leader", "grad_norm_follower",
            "max_eig_leader_hessian", "max_eig_follower_hessian", "classification", "tolerances",
        ],
        "properties": {
            "kind": {"enum": ["dne", "dse"]},
            "x": _vec,
            "y": _vec,
            "grad_norm_leader": _num,
            "grad_norm_follower": _num,
            "max_eig_leader_hessian": _num,
            "max_eig_follower_hessian": _num,
            "classification": {"enum": ["DSS", "DNE", "stationary-only", "none"]},
            "tolerances": {
                "type": "object",
                "required": ["grad_tol", "eig_tol"],
                "properties": {"grad_tol": _num, "eig_tol": _num},
            },
        },
    },
    "oracle": {
        "type": "object",
        "required": ["x_star", "y_star", "g_hessian", "is_strict_max"],
        "properties": {"x_star": _vec, "y_star": _vec, "g_hessian": _mat, "is_strict_max": {"type": "boolean"}},
    },
    "meta": {
        "type": "object",
        "required": ["algorithm", "game", "seed", "d1", "d2", "columns", "projections", "created"],
        "properties": {
            "algorithm": {"enum": ["hic", "coupled", "sga"]},
            "game": {"type": "string"},
            "seed": {"type": "integer"},
            "d1": {"type": "integer", "minimum": 1},
            "d2": {"type": "integer", "minimum": 1},
            "columns": {"type": "array", "items": {"type": "string"}},
            "projections": {
                "type": "object",
                "required": ["leader", "follower"],
                "properties": {"leader": {"type": "integer"}, "follower": {"type": "integer"}},
            },
            "created": {"type": "string"},
        },
    },
    "summary": {
        "type": "object",
        "required": ["config", "algorithm", "game", "rows", "aggregates", "failed_seeds"],
        "properties": {
            "config": {"type": "string"},
            "algorithm": {"enum": ["hic", "coupled", "sga"]},
            "game": {"type": "string"},
            "x_star": {"type": ["array", "null"], "items": _num},
            "failed_seeds": {"type": "array", "items": {"type": "integer"}},
            "rows": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": [
                        "seed", "final_x", "final_y", "final_distance", "grad_norm_leader",
                        "grad_norm_follower", "classification", "wall_clock", "projections",
                    ],
                    "properties": {
                        "seed": {"type": "integer"},
                        "final_x": _vec,
                        "final_y": _vec,
                        "final_distance": _num_or_null,
                        "grad_norm_leader": _num_or_null,
                        "grad_norm_follower": _num_or_null,
                        "classification": {"enum": ["DSS", "DNE", "stationary-only", "none", "error"]},
                        "wall_clock": _num,
                        "projections": {"type": "integer", "minimum": 0},
                    },
                },
            },
            "aggregates": {
                "type": "object",
                "required": ["n_runs", "median_final_distance", "iqr_final_distance"],
                "properties": {
                    "n_runs": {"type": "integer"},
                    "median_final_distance": _num_or_null,
                    "iqr_final_distance": _num_or_null,
                },
            },
        },
    },
    "validation": {
        "type": "object",
        "required": ["ok", "violations"],
        "properties": {
            "ok": {"type": "boolean"},
            "violations": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["condition", "message"],
                    "properties": {"condition": {"type": "string"}, "message": {"type": "string"}},
                },
            },
        },
    },
}

SERIES_COLUMNS = ["seed", "n", "distance", "ratio"]


def validate_json(payload, kind: str) -> None:
    """Raise ``jsonschema.ValidationError`` if ``payload`` does not match ``SCHEMAS[kind]``."""
    jsonschema.validate(payload, SCHEMAS[kind])
