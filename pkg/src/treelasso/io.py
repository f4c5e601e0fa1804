"""File formats: tree edge lists, data tables, reports, DOT export, manifests.

Numbers written to CSV use 17 significant digits, so re-parsing recovers
the in-memory double exactly.  Tree files have a canonical form (edges
listed child-by-child in topological order), making round trips
byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone

import pandas as pd

from . import __version__
from .errors import LabelMismatch, MissingValues, TreeFileError
from .selection import EffectReport, EffectRow
from .tree import build_tree

TREE_HEADER = "parent,child,weight"

LEVEL_PALETTE = (
    "#66C2A5", "#FC8D62", "#8DA0CB", "#E78AC3",
    "#A6D854", "#FFD92F", "#E5C494", "#B3B3B3",
)


def fmt(x):
    """Render a float with 17 significant digits (exact round trip)."""
    return format(float(x), ".17g")


# --- tree files -------------------------------------------------------------

def tree_to_csv(tree):
    """Canonical CSV edge list.

    Rows are ordered lexicographically by (parent, child) label, so the
    bytes depend only on the labeled edge set: writing, re-reading, and
    writing again is byte-identical.
    """
    rows = sorted(
        (tree.labels[e.parent], tree.labels[e.child], e.weight) for e in tree.edges
    )
    lines = [TREE_HEADER]
    for parent, child, w in rows:
        lines.append(f"{parent},{child},{fmt(w)}")
    return "\n".join(lines) + "\n"


def write_tree_csv(tree, path):
    with open(path, "w") as fh:
        fh.write(tree_to_csv(tree))


def read_tree_csv(path):
    """Parse a parent,child,weight edge list; errors carry line numbers."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != TREE_HEADER:
        raise TreeFileError(f"expected header {TREE_HEADER!r}", line=1)
    labels = []
    seen = set()
    edges = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 3:
            raise TreeFileError(
                f"expected 3 comma-separated fields, got {len(parts)}", line=lineno
            )
        parent, child, wtext = parts
        try:
            w = float(wtext)
        except ValueError:
            raise TreeFileError(f"bad weight {wtext!r}", line=lineno) from None
        for lab in (parent, child):
            if lab not in seen:
                seen.add(lab)
                labels.append(lab)
        edges.append((parent, child, w))
    if not labels:
        raise TreeFileError("edge list is empty; use the JSON format for "
                            "single-node trees", line=1)
    return build_tree(labels, edges)


def tree_to_json(tree):
    return json.dumps(
        {
            "nodes": list(tree.labels),
            "edges": [
                {
                    "parent": tree.labels[e.parent],
                    "child": tree.labels[e.child],
                    "weight": e.weight,
                }
                for e in tree.edges
            ],
        },
        indent=2,
    ) + "\n"


def write_tree_json(tree, path):
    with open(path, "w") as fh:
        fh.write(tree_to_json(tree))


def read_tree_json(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TreeFileError(f"invalid JSON: {exc.msg}", line=exc.lineno) from None
    try:
        nodes = doc["nodes"]
        edges = [(e["parent"], e["child"], e["weight"]) for e in doc["edges"]]
    except (KeyError, TypeError) as exc:
        raise TreeFileError(f"missing field in tree JSON: {exc}") from None
    return build_tree(nodes, edges)


def read_tree(path):
    """Dispatch on extension: .json falls to JSON, anything else to CSV."""
    if str(path).endswith(".json"):
        return read_tree_json(path)
    return read_tree_csv(path)


# --- data tables ------------------------------------------------------------

def load_dataset(path, response, tree):
    """Read a data CSV, returning (X, y) with columns in tree order.

    The file must contain the response column and one column per tree
    label; extra columns are ignored.
    """
    df = pd.read_csv(path)
    if response not in df.columns:
        raise LabelMismatch(f"response column {response!r} not found in {path}")
    missing = [lab for lab in tree.labels if lab not in df.columns]
    if missing:
        raise LabelMismatch(
            f"data is missing columns for tree nodes: {', '.join(missing)}"
        )
    cols = list(tree.labels) + [response]
    if df[cols].isna().any().any():
        bad = [c for c in cols if df[c].isna().any()]
        raise MissingValues(f"missing values in columns: {', '.join(bad)}")
    X = df[list(tree.labels)].to_numpy(dtype=float)
    y = df[response].to_numpy(dtype=float)
    return X, y


# --- report writers ---------------------------------------------------------

def write_effect_report_csv(report, path):
    with open(path, "w") as fh:
        fh.write("label,level,beta,beta_active,gamma,gamma_active\n")
        for r in report.rows:
            fh.write(
                f"{r.label},{r.level},{fmt(r.beta)},{int(r.beta_active)},"
                f"{fmt(r.gamma)},{int(r.gamma_active)}\n"
            )


def read_effect_report_csv(path, tree, active_tol=1e-8):
    df = pd.read_csv(path)
    expected = ["label", "level", "beta", "beta_active", "gamma", "gamma_active"]
    if list(df.columns) != expected:
        raise TreeFileError(f"expected columns {expected}, got {list(df.columns)}")
    if list(df["label"]) != list(tree.labels):
        raise LabelMismatch("effect report rows do not match the tree's labels")
    rows = tuple(
        EffectRow(
            label=str(r.label),
            level=int(r.level),
            beta=float(r.beta),
            gamma=float(r.gamma),
            beta_active=bool(r.beta_active),
            gamma_active=bool(r.gamma_active),
        )
        for r in df.itertuples()
    )
    return EffectReport(rows=rows, tree=tree, active_tol=active_tol)


def write_cp_table_csv(result, path):
    with open(path, "w") as fh:
        fh.write("alpha,lambda,df,rss,cp\n")
        for alpha, lam, df_, rss, cp in result.table:
            fh.write(f"{fmt(alpha)},{fmt(lam)},{int(df_)},{fmt(rss)},{fmt(cp)}\n")


def write_fit_json(result, tree, penalty_name, path, extra=None):
    doc = {
        "penalty": penalty_name,
        "alpha": result.best_alpha,
        "lambda": result.best_lambda,
        "sigma2": result.sigma2,
        "objective": float(result.fit.objective),
        "kkt_residual": None
        if result.fit.kkt_residual is None
        else float(result.fit.kkt_residual),
        "converged": bool(result.fit.converged),
        "iterations": int(result.fit.iterations),
        "labels": list(tree.labels),
        "beta": [float(b) for b in result.fit.beta],
        "gamma": None if result.gamma is None else [float(g) for g in result.gamma],
    }
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _metric(x):
    return "NA" if x is None else fmt(x)


def write_study_csv(report, path):
    with open(path, "w") as fh:
        fh.write(
            "model,method,beta_sensitivity,beta_specificity,beta_mse,"
            "gamma_sensitivity,gamma_specificity,gamma_mse,"
            "replications,failures\n"
        )
        for r in report.rows:
            fh.write(
                f"{r.scenario},{r.method},"
                f"{_metric(r.beta.sensitivity)},{_metric(r.beta.specificity)},"
                f"{_metric(r.beta.mse)},"
                f"{_metric(r.gamma.sensitivity)},{_metric(r.gamma.specificity)},"
                f"{_metric(r.gamma.mse)},"
                f"{r.replications},{r.failures}\n"
            )


# --- DOT export -------------------------------------------------------------

def export_dot(tree, report, mode="total", outcome="outcome"):
    """Render the tree and its active effects as a DOT digraph.

    Structural parent->child edges are gray; each active effect adds an
    edge from the node to the single outcome box, red for positive and
    blue for negative, with width proportional to the magnitude (floor
    0.5, the largest effect drawn at width 5).  Node fill color encodes
    the level.
    """
    if mode not in ("direct", "total"):
        raise ValueError(f"mode must be 'direct' or 'total', got {mode!r}")
    values = [r.beta if mode == "direct" else r.gamma for r in report.rows]
    active = [
        r.beta_active if mode == "direct" else r.gamma_active for r in report.rows
    ]
    vmax = max((abs(v) for v, a in zip(values, active) if a), default=0.0)

    lines = [
        f"digraph {mode}_effects {{",
        "  rankdir=TB;",
        '  node [shape=box, style="rounded,filled", fontname="Helvetica"];',
    ]
    for j, lab in enumerate(tree.labels):
        color = LEVEL_PALETTE[tree.levels[j] % len(LEVEL_PALETTE)]
        lines.append(f'  "{lab}" [fillcolor="{color}"];')
    lines.append(f'  "{outcome}" [shape=ellipse, fillcolor="#EEEEEE"];')
    for e in tree.edges:
        lines.append(
            f'  "{tree.labels[e.parent]}" -> "{tree.labels[e.child]}" '
            f'[color="#999999", arrowsize=0.7];'
        )
    for j, (v, a) in enumerate(zip(values, active)):
        if not a:
            continue
        width = max(0.5, 5.0 * abs(v) / vmax)
        color = "red" if v > 0 else "blue"
        lines.append(
            f'  "{tree.labels[j]}" -> "{outcome}" '
            f'[color={color}, penwidth={width:.3f}];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


# --- run manifests ----------------------------------------------------------

@dataclass(frozen=True)
class RunManifest:
    command: str
    tool_version: str
    seed: int | None
    config_digest: str | None
    inputs: dict
    outputs: dict
    created_utc: str


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(command, seed=None, config_digest=None, inputs=(), outputs=()):
    """Digest the given input/output files into a manifest record."""
    return RunManifest(
        command=command,
        tool_version=__version__,
        seed=seed,
        config_digest=config_digest,
        inputs={str(p): file_digest(p) for p in inputs},
        outputs={str(p): file_digest(p) for p in outputs},
        created_utc=datetime.now(timezone.utc).isoformat(),
    )


def write_manifest(manifest, path):
    with open(path, "w") as fh:
        json.dump(manifest.__dict__, fh, indent=2)
        fh.write("\n")
