"""Benchmark harness: per-method, per-confidence observed improvement and
acceptance rates with ground-truth counterfactual outcomes.

One run samples a population with its noise retained, derives the deployed
predictor, selects rejected individuals, solves recourse for each method and
confidence level, then applies every recommended action to the individual's
stored noise. Observed rates aggregate as mean and sd across runs.
"""

from __future__ import annotations

import csv
import io
import json

try:
    import tomllib
except ModuleNotFoundError:  # 3.10: same module published as tomli
    import tomli as tomllib
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .datasets import DatasetSpec, load_dataset
from .errors import UnsupportedModelError
from .post_recourse import IndividualizedPredictor
from .predictors import (
    ScmOraclePredictor,
    fit_observational_logistic,
    refit_family,
)
from .scm import ground_truth_counterfactual, sample_observational
from .search import (
    METHODS,
    ConfidenceCache,
    config_for_dataset,
    optimize,
    problem_for_dataset,
)

DEFAULT_CONFIDENCES = (0.85, 0.9, 0.95)


@dataclass(frozen=True)
class RunConfig:
    dataset: str
    methods: tuple[str, ...] = METHODS
    confidences: tuple[float, ...] = DEFAULT_CONFIDENCES
    n_individuals: int = 100
    n_runs: int = 3
    refits: int = 5
    seed: int = 0
    population: Optional[int] = None     # optimizer overrides; None -> preset
    generations: Optional[int] = None
    samples: int = 256
    threshold: float = 0.5
    train_n: int = 2000

    def __post_init__(self):
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; expected one of {METHODS}")
        if not self.methods:
            raise ValueError("at least one method required")
        for c in self.confidences:
            if not 0.5 < c <= 1.0:
                raise ValueError("confidence levels must lie in (0.5, 1]")
        if self.n_individuals < 1 or self.n_runs < 1:
            raise ValueError("n_individuals and n_runs must be >= 1")
        if self.refits < 0:
            raise ValueError("refits must be >= 0")


def load_run_config(path: str) -> RunConfig:
    """Parse a TOML run file. Unknown keys are rejected so typos fail loudly."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"unknown config keys: {unknown}")
    if "dataset" not in raw:
        raise ValueError("config must name a dataset")
    for key in ("methods", "confidences"):
        if key in raw:
            raw[key] = tuple(raw[key])
    return RunConfig(**raw)


@dataclass(frozen=True)
class ReportRow:
    method: str
    confidence: float
    gamma_obs: Optional[float]
    gamma_sd: Optional[float]
    eta_obs: Optional[float]
    eta_sd: Optional[float]
    eta_ind_obs: Optional[float]
    eta_ind_sd: Optional[float]
    eta_refit_obs: Optional[float]
    eta_refit_sd: Optional[float]
    mean_cost: Optional[float]
    cost_sd: Optional[float]
    n_feasible: int = 0
    n_infeasible: int = 0


@dataclass(frozen=True)
class ExperimentReport:
    dataset: str
    n_individuals: int
    n_runs: int
    threshold: float
    seed: int
    rows: tuple[ReportRow, ...]

    def row(self, method: str, confidence: float) -> ReportRow:
        for r in self.rows:
            if r.method == method and r.confidence == confidence:
                return r
        raise KeyError((method, confidence))


def deployed_predictor(spec: DatasetSpec, threshold: float, seed):
    """The model the institution is assumed to score with."""
    if spec.predictor_kind == "logistic":
        return fit_observational_logistic(spec.scm, 2000, seed)
    return ScmOraclePredictor(spec.scm, on_infeasible="zero")


def _rejected_population(scm, predictor, threshold, n, seed):
    """First n rejected individuals (with their ground-truth noise) from
    fresh observational draws."""
    out = []
    chunk_seed = seed
    while len(out) < n:
        rows, noises = sample_observational(
            scm, 8 * n, seed=chunk_seed, return_noise=True
        )
        for row, noise in zip(rows, noises):
            x = {k: v for k, v in row.items() if k != scm.target}
            if predictor.score(x) < threshold:
                out.append((x, noise))
                if len(out) == n:
                    break
        chunk_seed += 1
    return out


def run_experiment(config: RunConfig) -> ExperimentReport:
    spec = load_dataset(config.dataset)
    scm = spec.scm
    t = config.threshold
    overrides = {}
    if config.population is not None:
        overrides["population"] = config.population
    if config.generations is not None:
        overrides["generations"] = config.generations
    opt_cfg = config_for_dataset(spec, samples=config.samples, **overrides)
    refit_applies = spec.predictor_kind == "logistic" and config.refits > 0

    # per-run accumulator: {(method, conf): {metric: [per-run means]}}
    per_run: dict[tuple, dict[str, list]] = {
        (m, c): {k: [] for k in ("gamma", "eta", "eta_ind", "eta_refit", "cost")}
        for m in config.methods
        for c in config.confidences
    }
    feasible_counts = {key: 0 for key in per_run}
    infeasible_counts = {key: 0 for key in per_run}

    for run_idx in range(config.n_runs):
        base = config.seed * 1_000_000 + run_idx * 10_000
        predictor = deployed_predictor(spec, t, seed=base)
        refits = (
            refit_family(scm, config.refits, config.train_n, seed=base + 1)
            if refit_applies
            else []
        )
        population = _rejected_population(
            scm, predictor, t, config.n_individuals, seed=base + 2
        )
        samples: dict[tuple, dict[str, list]] = {
            key: {k: [] for k in ("gamma", "eta", "eta_ind", "eta_refit", "cost")}
            for key in per_run
        }
        for ind_idx, (x_pre, noise) in enumerate(population):
            for method in config.methods:
                cache = ConfidenceCache()
                opt_seed = base + 100 + ind_idx
                for conf_level in config.confidences:
                    problem = problem_for_dataset(
                        spec, method, conf_level, x_pre, predictor,
                        config=opt_cfg, cache=cache, threshold=t,
                        require_rejected=False,
                    )
                    rec = optimize(problem, seed=opt_seed, annotate=False)
                    key = (method, conf_level)
                    if not rec.feasible:
                        infeasible_counts[key] += 1
                        continue
                    feasible_counts[key] += 1
                    post = ground_truth_counterfactual(scm, noise, rec.action)
                    x_post = {k: v for k, v in post.items() if k != scm.target}
                    bucket = samples[key]
                    bucket["gamma"].append(post[scm.target])
                    bucket["eta"].append(float(predictor.score(x_post) >= t))
                    bucket["cost"].append(rec.cost)
                    if method == "ICR-ind":
                        try:
                            rescorer = IndividualizedPredictor(
                                scm, x_pre, rec.action, mode="closed-form",
                                seed=opt_seed,
                            )
                        except UnsupportedModelError:
                            pass
                        else:
                            bucket["eta_ind"].append(
                                float(rescorer.score(x_post) >= t)
                            )
                    if refits:
                        bucket["eta_refit"].append(
                            float(
                                np.mean(
                                    [float(r.score(x_post) >= t) for r in refits]
                                )
                            )
                        )
        for key, bucket in samples.items():
            for metric, vals in bucket.items():
                if vals:
                    per_run[key][metric].append(float(np.mean(vals)))

    rows = []
    for method in config.methods:
        for conf_level in config.confidences:
            key = (method, conf_level)
            acc = per_run[key]

            def stat(metric):
                vals = acc[metric]
                if not vals:
                    return None, None
                mean = float(np.mean(vals))
                sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
                return mean, sd

            g, g_sd = stat("gamma")
            e, e_sd = stat("eta")
            ei, ei_sd = stat("eta_ind")
            er, er_sd = stat("eta_refit")
            c, c_sd = stat("cost")
            rows.append(
                ReportRow(
                    method=method, confidence=conf_level,
                    gamma_obs=g, gamma_sd=g_sd, eta_obs=e, eta_sd=e_sd,
                    eta_ind_obs=ei, eta_ind_sd=ei_sd,
                    eta_refit_obs=er, eta_refit_sd=er_sd,
                    mean_cost=c, cost_sd=c_sd,
                    n_feasible=feasible_counts[key],
                    n_infeasible=infeasible_counts[key],
                )
            )
    return ExperimentReport(
        dataset=config.dataset,
        n_individuals=config.n_individuals,
        n_runs=config.n_runs,
        threshold=t,
        seed=config.seed,
        rows=tuple(rows),
    )


# --------------------------------------------------------------------------
# export


CSV_COLUMNS = (
    "method", "confidence", "gamma_obs", "gamma_sd", "eta_obs", "eta_sd",
    "eta_ind_obs", "eta_ind_sd", "eta_refit_obs", "eta_refit_sd",
    "mean_cost", "cost_sd",
)


def _fmt(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.6g}"


def render_report(report: ExperimentReport, fmt: str) -> str:
    """Deterministic text rendering; identical reports give identical bytes."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in report.rows:
            writer.writerow(
                [r.method, f"{r.confidence:.6g}"]
                + [_fmt(getattr(r, col)) for col in CSV_COLUMNS[2:]]
            )
        return buf.getvalue()
    if fmt == "plot-data":
        grouped: dict[str, dict[str, list]] = {}
        for r in report.rows:
            g = grouped.setdefault(
                r.method, {col: [] for col in CSV_COLUMNS[1:]}
            )
            g["confidence"].append(float(f"{r.confidence:.6g}"))
            for col in CSV_COLUMNS[2:]:
                v = getattr(r, col)
                g[col].append(None if v is None else float(f"{v:.6g}"))
        payload = {
            "dataset": report.dataset,
            "scale_hint": "quadratic",
            "series": grouped,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if fmt == "table-text":
        head = (
            f"dataset: {report.dataset}  runs: {report.n_runs}  "
            f"individuals: {report.n_individuals}  threshold: "
            f"{report.threshold:.6g}  seed: {report.seed}"
        )
        widths = [9, 12, 16, 16, 16, 16, 12, 10]
        cols = [
            "method", "confidence", "gamma_obs", "eta_obs", "eta_ind_obs",
            "eta_refit_obs", "mean_cost", "infeasible",
        ]
        lines = [head, ""]
        lines.append("".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip())

        def pm(mean, sd):
            if mean is None:
                return "-"
            return f"{mean:.2f} +- {sd:.2f}"

        for r in report.rows:
            cells = [
                r.method,
                f"{r.confidence:.6g}",
                pm(r.gamma_obs, r.gamma_sd),
                pm(r.eta_obs, r.eta_sd),
                pm(r.eta_ind_obs, r.eta_ind_sd),
                pm(r.eta_refit_obs, r.eta_refit_sd),
                _fmt(r.mean_cost) or "-",
                str(r.n_infeasible),
            ]
            lines.append(
                "".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
            )
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}; expected table-text, csv, plot-data")


def export_report(report: ExperimentReport, fmt: str, path: str) -> str:
    text = render_report(report, fmt)
    with open(path, "w") as fh:
        fh.write(text)
    return path


def parse_report_csv(text: str) -> list[dict]:
    """Inverse of the csv rendering, for round-trip checks and tooling."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError("unexpected csv header")
    out = []
    for raw in reader:
        row: dict = {"method": raw["method"]}
        for col in CSV_COLUMNS[1:]:
            row[col] = float(raw[col]) if raw[col] != "" else None
        out.append(row)
    return out
