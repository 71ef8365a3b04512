"""CSV / JSON round-tripping for tables, with 17 significant digits."""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .model_sim import ModelOutcomeTable
from .scm_data import ObservationalSample, PotentialOutcomeTable

__all__ = [
    "model_table_from_csv",
    "model_table_to_csv",
    "observational_to_csv",
    "table_from_csv",
    "table_from_json",
    "table_to_csv",
    "table_to_json",
]


def _g(v: float) -> str:
    return format(float(v), ".17g")


def _write(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def table_to_csv(table: PotentialOutcomeTable) -> str:
    d = table.covariates.shape[1]
    header = ["unit"] + [f"x_{j}" for j in range(d)] + ["y1", "y0"]
    rows = (
        [i] + [_g(v) for v in table.covariates[i]] + [_g(table.y1[i]), _g(table.y0[i])] for i in range(table.n)
    )
    return _write(header, rows)


def table_from_csv(text: str) -> PotentialOutcomeTable:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    cov_cols = [k for k, name in enumerate(header) if name.startswith("x_")]
    i1, i0 = header.index("y1"), header.index("y0")
    rows = [r for r in reader if r]
    cov = np.array([[float(r[k]) for k in cov_cols] for r in rows]).reshape(len(rows), len(cov_cols))
    return PotentialOutcomeTable(cov, [float(r[i1]) for r in rows], [float(r[i0]) for r in rows])


def table_to_json(table: PotentialOutcomeTable) -> str:
    # repr of a Python float is the shortest string that round-trips
    records = [
        {"unit": i, "x": [float(v) for v in table.covariates[i]], "y1": float(table.y1[i]), "y0": float(table.y0[i])}
        for i in range(table.n)
    ]
    return json.dumps(records)


def table_from_json(text: str) -> PotentialOutcomeTable:
    records = json.loads(text)
    cov = np.array([r["x"] for r in records], dtype=float)
    return PotentialOutcomeTable(cov, [r["y1"] for r in records], [r["y0"] for r in records])


def model_table_to_csv(model: ModelOutcomeTable) -> str:
    has_nu = model.nu is not None
    header = ["unit", "ym1", "ym0"] + (["nu"] if has_nu else [])
    rows = (
        [i, _g(model.ym1[i]), _g(model.ym0[i])] + ([_g(model.nu[i])] if has_nu else []) for i in range(model.n)
    )
    return _write(header, rows)


def model_table_from_csv(text: str) -> ModelOutcomeTable:
    recs = list(csv.DictReader(io.StringIO(text)))
    nu = np.array([float(r["nu"]) for r in recs]) if recs and "nu" in recs[0] else None
    return ModelOutcomeTable([float(r["ym1"]) for r in recs], [float(r["ym0"]) for r in recs], nu)


def observational_to_csv(sample: ObservationalSample) -> str:
    nx, nw = sample.covariates.shape[1], sample.w_confounders.shape[1]
    header = ["unit"] + [f"x_{j}" for j in range(nx)] + [f"w_{j}" for j in range(nw)] + ["t", "y"]
    rows = (
        [i]
        + [_g(v) for v in sample.covariates[i]]
        + [_g(v) for v in sample.w_confounders[i]]
        + [_g(sample.t[i]), _g(sample.y[i])]
        for i in range(sample.n)
    )
    return _write(header, rows)
