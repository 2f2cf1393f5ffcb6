"""CSV ingestion and lossless archive serialization of posterior draws."""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from .errors import ParseError, ValidationError
from .model_core import (
    PROGNOSTIC,
    TREATMENT,
    Dataset,
    Draw,
    Forest,
    Hyperparams,
    PosteriorDraws,
    ScaleState,
    Tree,
)

SCHEMA_VERSION = 1


def read_table(path, delimiter: str = ","):
    """Read a delimited file with a header row; returns (header, rows of str)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        rows = list(reader)
    if not rows:
        raise ParseError(f"{path}: empty file, expected a header row")
    return rows[0], rows[1:]


def _parse_cell(raw, path, row_idx, col_name):
    try:
        val = float(raw)
    except ValueError:
        raise ParseError(
            f"{path}: non-numeric value {raw!r} at row {row_idx}, column {col_name!r}")
    if math.isnan(val) or math.isinf(val):
        raise ParseError(
            f"{path}: non-finite value at row {row_idx}, column {col_name!r}")
    return val


def load_csv(path, outcome_col: str, treatment_col: str, propensity_col=None,
             delimiter: str = ",", exclude=()) -> Dataset:
    """Parse a delimited file into a Dataset.

    Columns other than the outcome, treatment, (optional) propensity and
    any `exclude` names become the covariate matrix in header order. Row
    numbers in errors are 1-based data rows (the header is row 0).
    """
    header, rows = read_table(path, delimiter)
    for name in filter(None, (outcome_col, treatment_col, propensity_col)):
        if name not in header:
            raise ParseError(f"{path}: column {name!r} not found in header {header}")
    special = {outcome_col, treatment_col, *exclude}
    if propensity_col:
        special.add(propensity_col)
    feature_cols = [c for c in header if c not in special]
    col_of = {name: header.index(name) for name in header}

    y, z, pi, X = [], [], [], []
    for i, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {i} has {len(row)} cells, expected {len(header)}")
        y.append(_parse_cell(row[col_of[outcome_col]], path, i, outcome_col))
        zval = _parse_cell(row[col_of[treatment_col]], path, i, treatment_col)
        if zval not in (0.0, 1.0):
            raise ParseError(
                f"{path}: treatment must be 0 or 1, got {zval} at row {i}, "
                f"column {treatment_col!r}")
        z.append(int(zval))
        if propensity_col:
            pi.append(_parse_cell(row[col_of[propensity_col]], path, i, propensity_col))
        X.append([_parse_cell(row[col_of[c]], path, i, c) for c in feature_cols])
    return Dataset(
        y=np.asarray(y), z=np.asarray(z, dtype=np.int64),
        X=np.asarray(X).reshape(len(rows), len(feature_cols)),
        pi_hat=np.asarray(pi) if propensity_col else None,
    ).validate()


def feature_columns(header, outcome_col, treatment_col, propensity_col=None):
    special = {outcome_col, treatment_col, propensity_col}
    return [c for c in header if c and c not in special]


# --- forest archive ---------------------------------------------------------

def _tree_to_nodes(tree: Tree):
    nodes = []
    for i in range(tree.n_nodes):
        if tree.is_leaf(i):
            nodes.append({"id": i, "kind": "leaf", "var": None, "cut": None,
                          "left": None, "right": None, "mu": float(tree.mu[i])})
        else:
            nodes.append({"id": i, "kind": "internal", "var": int(tree.var[i]),
                          "cut": float(tree.cut[i]), "left": int(tree.left[i]),
                          "right": int(tree.right[i]), "mu": None})
    return nodes


def _tree_from_nodes(nodes) -> Tree:
    n = len(nodes)
    var = np.full(n, -1, dtype=np.int64)
    cut = np.full(n, np.nan)
    left = np.full(n, -1, dtype=np.int64)
    right = np.full(n, -1, dtype=np.int64)
    mu = np.zeros(n)
    for node in nodes:
        i = node["id"]
        if node["kind"] == "internal":
            var[i] = node["var"]
            cut[i] = node["cut"]
            left[i] = node["left"]
            right[i] = node["right"]
        else:
            mu[i] = node["mu"]
    return Tree(var=var, cut=cut, left=left, right=right, mu=mu)


def serialize_draws(draws: PosteriorDraws) -> str:
    """Canonical text form: sorted keys, fixed separators, round-trip floats."""
    if not draws.draws:
        raise ValidationError("cannot serialize an empty draw set")
    first = draws.draws[0].scale
    for d in draws.draws:
        if (d.scale.y_mean, d.scale.y_sd) != (first.y_mean, first.y_sd):
            raise ValidationError("snapshots disagree on standardization constants")
    hp = draws.hyperparams
    doc = {
        "schema_version": SCHEMA_VERSION,
        "hyperparams": {k: (int(v) if isinstance(v, (int, np.integer)) else float(v))
                        for k, v in hp.__dict__.items()},
        "y_mean": float(first.y_mean),
        "y_sd": float(first.y_sd),
        "draws": [
            {
                "a": float(d.scale.a),
                "b0": float(d.scale.b0),
                "b1": float(d.scale.b1),
                "sigma0_sq": float(d.scale.sigma0_sq),
                "sigma1_sq": float(d.scale.sigma1_sq),
                "burnin": bool(d.burnin),
                "chain_id": int(d.chain_id),
                "prognostic": [_tree_to_nodes(t) for t in d.prognostic.trees],
                "treatment": [_tree_to_nodes(t) for t in d.treatment.trees],
            }
            for d in draws.draws
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def deserialize_draws(text: str) -> PosteriorDraws:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"archive is not valid JSON: {exc}")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ParseError(f"unsupported archive schema_version {doc.get('schema_version')!r}")
    hp = Hyperparams(**doc["hyperparams"])
    y_mean, y_sd = doc["y_mean"], doc["y_sd"]
    draws = []
    for rec in doc["draws"]:
        scale = ScaleState(a=rec["a"], b0=rec["b0"], b1=rec["b1"],
                           sigma0_sq=rec["sigma0_sq"], sigma1_sq=rec["sigma1_sq"],
                           y_mean=y_mean, y_sd=y_sd)
        draws.append(Draw(
            prognostic=Forest([_tree_from_nodes(t) for t in rec["prognostic"]], PROGNOSTIC),
            treatment=Forest([_tree_from_nodes(t) for t in rec["treatment"]], TREATMENT),
            scale=scale, burnin=rec["burnin"], chain_id=rec["chain_id"],
        ))
    return PosteriorDraws(draws, hp)


def save_archive(draws: PosteriorDraws, path) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_draws(draws))


def load_archive(path) -> PosteriorDraws:
    with open(path) as fh:
        return deserialize_draws(fh.read())


# --- CATE / metrics tables --------------------------------------------------

def write_cate_table(summary, path, delimiter: str = ",") -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(["row_id", "cate_mean", "cate_lo", "cate_hi"])
        for i in range(len(summary.point)):
            writer.writerow([i, repr(float(summary.point[i])),
                             repr(float(summary.lo[i])), repr(float(summary.hi[i]))])


def read_cate_table(path, delimiter: str = ","):
    header, rows = read_table(path, delimiter)
    if header[:4] != ["row_id", "cate_mean", "cate_lo", "cate_hi"]:
        raise ParseError(f"{path}: unexpected CATE table header {header}")
    mean = np.array([float(r[1]) for r in rows])
    lo = np.array([float(r[2]) for r in rows])
    hi = np.array([float(r[3]) for r in rows])
    return mean, lo, hi


def write_metrics_table(rows, path, delimiter: str = ",") -> None:
    from .simulation import RESULT_COLUMNS
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow([row.get(c, "") if row.get(c) is not None else "FAILED"
                             for c in RESULT_COLUMNS])
