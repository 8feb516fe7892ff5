"""Command-line front end: benchmark runs, single recourse cases, dataset
listing, and the HTTP service.

Exit codes: 0 on success, 2 for configuration or input errors, 3 when the
search finished but produced only infeasible outcomes.
"""

import json
import sys

import click

from .datasets import list_datasets, load_dataset
from .experiment import (
    deployed_predictor,
    load_run_config,
    render_report,
    run_experiment,
)
from .search import (
    PRESETS,
    config_for_dataset,
    optimize,
    problem_for_dataset,
)

EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def _fail(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_CONFIG)


def _errmsg(exc: BaseException) -> str:
    # KeyError wraps its message in quotes; unwrap for readable output
    if isinstance(exc, KeyError) and exc.args:
        return str(exc.args[0])
    return str(exc)


def _sig6(value):
    if isinstance(value, float):
        return float(f"{value:.6g}")
    return value


@click.group()
def main():
    """Counterfactual explanations and causal recourse on structural
    causal models."""


@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(),
              help="TOML run description")
@click.option("--format", "fmt", default="table-text", show_default=True,
              type=click.Choice(["table-text", "csv", "plot-data"]))
@click.option("--out", "out_path", default=None, type=click.Path(),
              help="write the report here instead of stdout")
def run_cmd(config_path, fmt, out_path):
    """Run the benchmark described by a config file."""
    try:
        cfg = load_run_config(config_path)
        report = run_experiment(cfg)
    except (OSError, ValueError, KeyError) as exc:
        _fail(_errmsg(exc))
    text = render_report(report, fmt)
    if out_path is None:
        click.echo(text, nl=False)
    else:
        with open(out_path, "w") as fh:
            fh.write(text)
        click.echo(out_path)
    if all(r.n_feasible == 0 for r in report.rows):
        sys.exit(EXIT_INFEASIBLE)


@main.command()
@click.option("--dataset", required=True, help="bundled dataset name")
@click.option("--method", required=True,
              help="CE, CR-ind, CR-sub, ICR-ind or ICR-sub")
@click.option("--confidence", required=True, type=float,
              help="target confidence in (0.5, 1]")
@click.option("--factual", "factual_path", required=True, type=click.Path(),
              help="JSON file of pre-action covariate values")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--preset", default=None, type=click.Choice(sorted(PRESETS)),
              help="optimizer size preset (defaults to the dataset's own)")
@click.option("--threshold", default=0.5, show_default=True, type=float)
def recommend(dataset, method, confidence, factual_path, seed, preset,
              threshold):
    """Solve one recourse case and print the result as JSON."""
    try:
        spec = load_dataset(dataset)
    except KeyError as exc:
        _fail(_errmsg(exc))
    try:
        with open(factual_path) as fh:
            factual = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        _fail(f"cannot read factual: {exc}")
    if not isinstance(factual, dict):
        _fail("factual file must hold a JSON object of covariate values")

    overrides = {}
    if preset is not None:
        chosen = PRESETS[preset]
        overrides = {
            "population": chosen.population,
            "generations": chosen.generations,
        }
    predictor = deployed_predictor(spec, threshold, seed=seed)
    try:
        problem = problem_for_dataset(
            spec, method, confidence, factual, predictor,
            config=config_for_dataset(spec, **overrides),
            threshold=threshold,
        )
    except (ValueError, KeyError) as exc:
        _fail(_errmsg(exc))
    rec = optimize(problem, seed=seed)
    payload = {
        "dataset": dataset,
        "method": rec.method,
        "target_confidence": _sig6(rec.target_confidence),
        "threshold": _sig6(threshold),
        "seed": seed,
        "factual": {k: _sig6(float(v)) for k, v in factual.items()},
        "action": {k: _sig6(v) for k, v in rec.action.assignments},
        "cost": _sig6(rec.cost),
        "confidence": _sig6(rec.confidence),
        "feasible": rec.feasible,
        "violation": _sig6(rec.violation),
        "gamma_ind": _sig6(rec.gamma_ind),
        "gamma_sub": _sig6(rec.gamma_sub),
        "gamma_sub_is_observational": rec.gamma_sub_is_observational,
        "eta_under_h": _sig6(rec.eta_under_h),
        "eta_under_h_ind": _sig6(rec.eta_under_h_ind),
        "acceptance_bound": _sig6(rec.acceptance_bound),
    }
    click.echo(json.dumps(payload, indent=2, sort_keys=True))
    if not rec.feasible:
        sys.exit(EXIT_INFEASIBLE)


@main.command("list-datasets")
def list_datasets_cmd():
    """Bundled benchmark datasets."""
    for name in list_datasets():
        spec = load_dataset(name)
        click.echo(f"{name:<20} {spec.predictor_kind:<11} {spec.description}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--ui", "ui_dir", default=None, type=click.Path(),
              help="directory of built explorer assets to mount at /ui")
def serve(host, port, ui_dir):
    """Serve the HTTP API (and the explorer UI when built)."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(ui_dir=ui_dir), host=host, port=port)


if __name__ == "__main__":
    main()
