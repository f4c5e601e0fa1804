"""Command-line interface.

Commands: gen-tree, fit, simulate, diagnose, export-dot.
Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .errors import NumericalError, ValidationError
from .selection import (
    DEFAULT_ALPHA_GRID,
    DEFAULT_L1_RATIO_GRID,
    effect_report,
    select_elastic_net,
    select_model,
)
from .simulation import ReplicationConfig, run_study
from .solvers import stack_penalty
from .tree import compositional_adjacency, make_binary_tree
from .diagnostics import irrepresentability
from . import io as tio


@click.group()
@click.version_option(version=__version__, prog_name="treelasso")
def cli():
    """Tree-structured total-effect regularization for linear regression."""


def _parse_grid(text, default):
    if text is None:
        return default
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ValidationError(f"could not parse grid {text!r}") from None


@cli.command("gen-tree")
@click.option("--levels", type=int, default=None, help="Full binary tree depth.")
@click.option("--edges", "edge_file", type=click.Path(exists=True), default=None,
              help="Existing edge-list file to canonicalize.")
@click.option("--weight", type=float, default=1.0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def cmd_gen_tree(levels, edge_file, weight, out):
    """Write a canonical CSV edge list for a tree."""
    if (levels is None) == (edge_file is None):
        raise ValidationError("provide exactly one of --levels or --edges")
    if levels is not None:
        tree = make_binary_tree(levels, weight)
    else:
        tree = tio.read_tree(edge_file)
    tio.write_tree_csv(tree, out)
    click.echo(f"wrote {tree.p} nodes, {len(tree.edges)} edges to {out}")


def _standardize(X, y, standardize, center_response):
    if standardize:
        X = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)
    if center_response:
        y = y - y.mean()
    return X, y


@cli.command("fit")
@click.option("--data", type=click.Path(exists=True), required=True)
@click.option("--tree", "tree_file", type=click.Path(exists=True), required=True)
@click.option("--response", required=True, help="Name of the outcome column.")
@click.option("--penalty", type=click.Choice(["r1", "r", "lasso", "en"]),
              default="r", show_default=True)
@click.option("--alpha-grid", default=None,
              help="Comma-separated mixing weights (or l1 ratios for en).")
@click.option("--sigma", type=float, default=None,
              help="Known noise sd; estimated when omitted.")
@click.option("--compositional", is_flag=True,
              help="Reweight tree edges by child/parent sd ratios of the raw data.")
@click.option("--standardize/--no-standardize", default=True, show_default=True)
@click.option("--center-response/--no-center-response", default=True,
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def cmd_fit(data, tree_file, response, penalty, alpha_grid, sigma, compositional,
            standardize, center_response, seed, out):
    """Fit a penalized model with Cp-tuned parameters and write reports."""
    tree = tio.read_tree(tree_file)
    X_raw, y_raw = tio.load_dataset(data, response, tree)
    if compositional:
        tree = compositional_adjacency(tree, X_raw.std(axis=0, ddof=1))
    X, y = _standardize(X_raw, y_raw, standardize, center_response)
    sigma2 = None if sigma is None else sigma**2
    D = tree.influence()

    if penalty == "en":
        grid = _parse_grid(alpha_grid, DEFAULT_L1_RATIO_GRID)
        result = select_elastic_net(X, y, l1_ratio_grid=grid, sigma2=sigma2,
                                    D=D, seed=seed)
    else:
        if penalty == "r1":
            grid = (0.0,)
        elif penalty == "lasso":
            grid = (0.0,)
            D = None
        else:
            grid = _parse_grid(alpha_grid, DEFAULT_ALPHA_GRID)
        result = select_model(X, y, D, alpha_grid=grid, sigma2=sigma2, seed=seed)

    result.gamma = tree.influence() @ result.fit.beta  # totals always on the tree scale
    report = effect_report(tree, result.fit)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "effects": outdir / "effects.csv",
        "cp_table": outdir / "cp_table.csv",
        "fit": outdir / "fit.json",
        "dot_direct": outdir / "effects_direct.dot",
        "dot_total": outdir / "effects_total.dot",
    }
    tio.write_effect_report_csv(report, paths["effects"])
    tio.write_cp_table_csv(result, paths["cp_table"])
    tio.write_fit_json(result, tree, penalty, paths["fit"])
    paths["dot_direct"].write_text(tio.export_dot(tree, report, "direct", response))
    paths["dot_total"].write_text(tio.export_dot(tree, report, "total", response))
    manifest = tio.build_manifest(
        "fit", seed=seed, inputs=[data, tree_file], outputs=paths.values()
    )
    tio.write_manifest(manifest, outdir / "manifest.json")
    click.echo(
        f"selected alpha={result.best_alpha:g} lambda={result.best_lambda:.6g} "
        f"(kkt residual {result.fit.kkt_residual:.2e}); reports in {outdir}"
    )


@cli.command("simulate")
@click.option("--config", "config_file", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True)
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Parallel workers; does not affect the report's content.")
def cmd_simulate(config_file, out, jobs):
    """Run the replication study described by a JSON config."""
    with open(config_file) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid config JSON: {exc}") from None
    known = {"scenarios", "methods", "reps", "seed", "n", "sigma", "omega"}
    unknown = set(doc) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    if "scenarios" not in doc:
        raise ValidationError("config must list scenarios")
    config = ReplicationConfig(
        n=doc.get("n", 50),
        reps=doc.get("reps", 200),
        seed=doc.get("seed", 20240915),
        methods=tuple(doc.get("methods", ("R1", "R", "lasso", "EN"))),
        sigma=doc.get("sigma", 1.0),
        omega=None if doc.get("omega") is None else tuple(doc["omega"]),
    )
    report = run_study(config, doc["scenarios"], n_jobs=jobs)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    report_path = outdir / "report.csv"
    tio.write_study_csv(report, report_path)
    manifest = tio.build_manifest(
        "simulate",
        seed=config.seed,
        config_digest=tio.file_digest(config_file),
        inputs=[config_file],
        outputs=[report_path],
    )
    tio.write_manifest(manifest, outdir / "manifest.json")
    click.echo(f"wrote {report_path}")


@cli.command("diagnose")
@click.option("--fit", "fit_file", type=click.Path(exists=True), required=True)
@click.option("--data", type=click.Path(exists=True), required=True)
@click.option("--tree", "tree_file", type=click.Path(exists=True), required=True)
@click.option("--response", required=True)
@click.option("--standardize/--no-standardize", default=True, show_default=True)
@click.option("--center-response/--no-center-response", default=True,
              show_default=True)
@click.option("--out", type=click.Path(), required=True)
def cmd_diagnose(fit_file, data, tree_file, response, standardize,
                 center_response, out):
    """Alignment diagnostic at a fitted model's support (plug-in, not truth)."""
    tree = tio.read_tree(tree_file)
    X, y = tio.load_dataset(data, response, tree)
    X, y = _standardize(X, y, standardize, center_response)
    with open(fit_file) as fh:
        fit_doc = json.load(fh)
    beta = np.asarray(fit_doc["beta"], dtype=float)
    if fit_doc["penalty"] in ("lasso", "en"):
        D, alpha = np.eye(tree.p), 0.0  # these penalize coefficients directly
    else:
        D, alpha = tree.influence(), float(fit_doc["alpha"])
    penalty = stack_penalty(D, alpha)
    transformed = penalty @ beta
    support = np.flatnonzero(np.abs(transformed) > 1e-8)
    if support.size == 0:
        raise ValidationError("fitted model has empty support; nothing to diagnose")
    rep = irrepresentability(X, penalty, support, np.sign(transformed[support]))
    doc = {
        "value": rep.value,
        "tau_implied": rep.tau_implied,
        "support_size": len(rep.support),
        "support_rows": list(rep.support),
        "note": (
            "support and signs are taken from the fitted model (plug-in), "
            "not from ground truth"
        ),
    }
    with open(out, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    click.echo(f"alignment value {rep.value:.4f} (margin {rep.tau_implied:.4f})")


@cli.command("export-dot")
@click.option("--tree", "tree_file", type=click.Path(exists=True), required=True)
@click.option("--report", "report_file", type=click.Path(exists=True), required=True)
@click.option("--mode", type=click.Choice(["direct", "total"]), default="total",
              show_default=True)
@click.option("--outcome", default="outcome", show_default=True)
@click.option("--out", type=click.Path(), required=True)
def cmd_export_dot(tree_file, report_file, mode, outcome, out):
    """Render an effect report as a DOT digraph."""
    tree = tio.read_tree(tree_file)
    report = tio.read_effect_report_csv(report_file, tree)
    Path(out).write_text(tio.export_dot(tree, report, mode, outcome))
    click.echo(f"wrote {out}")


def main():
    try:
        cli(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(max(exc.exit_code, 2))
    except click.Abort:
        sys.exit(1)
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except NumericalError as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        sys.exit(3)


if __name__ == "__main__":
    main()
