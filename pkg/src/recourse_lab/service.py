"""HTTP facade: dataset listing, what-if sessions around a rejected
individual, action evaluation panels, and optimized recommendations.

Transport adds nothing: every number a route returns equals the direct
library call with the same seeds, then gets serialized to 6 significant
digits. Sessions are in-memory with TTL eviction and a per-session lock, so
interleaved requests across sessions behave like serial execution.
"""

from __future__ import annotations

import secrets
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from . import __version__
from .datasets import DatasetSpec, list_datasets, load_dataset
from .errors import (
    TargetInterventionError,
    UnknownNodeError,
)
from .experiment import _rejected_population, deployed_predictor
from .scm import (
    Action,
    causes_of_target,
    nondescendants,
    validate_observation,
    value_kind,
)
from .search import (
    METHODS,
    PRESETS,
    RecourseProblem,
    config_for_dataset,
    confidence_panel,
    optimize,
    problem_for_dataset,
    space_for_dataset,
)

DEFAULT_TTL_SECONDS = 3600.0
DEFAULT_THRESHOLD = 0.5
# the institution's model is one fixed artifact, not per-session state
PREDICTOR_SEED = 0


def sig6(value):
    """Canonical wire form for floats: 6 significant digits."""
    if value is None:
        return None
    return float(f"{float(value):.6g}")


class SessionRequest(BaseModel):
    dataset: str
    seed: Optional[int] = None
    factual: Optional[dict[str, float]] = None


class EvaluateRequest(BaseModel):
    action: dict[str, float]


class RecommendRequest(BaseModel):
    method: str
    confidence: float
    optimizer_preset: Optional[str] = None


@dataclass
class Session:
    id: str
    spec: DatasetSpec
    predictor: object
    threshold: float
    factual: dict[str, float]
    score: float
    seed: int
    created: float
    lock: threading.Lock = field(default_factory=threading.Lock)
    panel_problem: Optional[RecourseProblem] = None
    problems: dict = field(default_factory=dict)
    answers: dict = field(default_factory=dict)

    def problem(self, method: str, confidence: float, preset: Optional[str]):
        """One pinned problem per request shape; repeated identical requests
        reuse its confidence cache and reproduce the same bytes."""
        key = (method, confidence, preset)
        if key not in self.problems:
            overrides = {}
            if preset is not None:
                chosen = PRESETS[preset]
                overrides = {
                    "population": chosen.population,
                    "generations": chosen.generations,
                }
            self.problems[key] = problem_for_dataset(
                self.spec, method, confidence, self.factual, self.predictor,
                config=config_for_dataset(self.spec, **overrides),
                threshold=self.threshold,
                require_rejected=False,
            )
        return self.problems[key]


def _dataset_descriptor(spec: DatasetSpec) -> dict:
    scm = spec.scm
    causes = sorted(causes_of_target(scm))
    space = space_for_dataset(spec)
    bounds = {
        node: (low, high)
        for node, low, high in zip(space.nodes, space.lows, space.highs)
    }
    domains = {}
    for node in scm.covariates:
        kind, levels = value_kind(scm, node)
        domains[node] = {"kind": kind}
        if kind == "categorical":
            domains[node]["levels"] = levels
        if node in bounds:  # control ranges for the explorer's sliders
            domains[node]["low"] = sig6(bounds[node][0])
            domains[node]["high"] = sig6(bounds[node][1])
    return {
        "name": spec.name,
        "description": spec.description,
        "target": scm.target,
        "covariates": list(scm.covariates),
        "actionable": list(spec.actionable),
        "causes": causes,
        "edges": [list(edge) for edge in scm.graph.edges],
        "cost_weights": {k: sig6(v) for k, v in spec.cost_weights.items()},
        "predictor": spec.predictor_kind,
        "value_decimals": spec.value_decimals,
        "default_threshold": sig6(DEFAULT_THRESHOLD),
        "domains": domains,
    }


def _guarantee_sentence(problem: RecourseProblem, rec) -> Optional[str]:
    """Plain-language form of the confidence statement behind a feasible
    recommendation: who the reference group is and what holds for it."""
    if not rec.feasible:
        return None
    scm = problem.scm
    if problem.method in ("CR-sub", "ICR-sub"):
        shared = sorted(nondescendants(scm, rec.action.nodes))
    else:
        # individualized statements condition on everything observed
        shared = list(scm.covariates)
    traits = ", ".join(f"{n} = {sig6(problem.x_pre[n])}" for n in shared)
    if not traits:
        traits = "no particular pre-action characteristics"
    pct = f"{problem.target_confidence * 100:.6g}"
    if problem.method.startswith("ICR"):
        outcome = f"genuinely improve ({scm.target} = 1)"
    else:
        outcome = "be accepted by the deployed model"
    return (
        f"Within a group of individuals that share {traits} and implement "
        f"this action, at least {pct}% would {outcome}."
    )


def create_app(
    ttl_seconds: float = DEFAULT_TTL_SECONDS,
    ui_dir: Optional[str] = None,
    clock=time.time,
) -> FastAPI:
    app = FastAPI(title="recourse-lab", version=__version__)
    sessions: dict[str, Session] = {}
    predictors: dict[str, object] = {}
    store_lock = threading.Lock()

    def predictor_for(spec: DatasetSpec):
        if spec.name not in predictors:
            predictors[spec.name] = deployed_predictor(
                spec, DEFAULT_THRESHOLD, seed=PREDICTOR_SEED
            )
        return predictors[spec.name]

    def get_session(session_id: str) -> Session:
        with store_lock:
            now = clock()
            expired = [
                sid for sid, s in sessions.items()
                if now - s.created > ttl_seconds
            ]
            for sid in expired:
                del sessions[sid]
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(404, f"unknown session {session_id!r}")
        return session

    @app.get("/healthz", response_class=PlainTextResponse)
    def healthz():
        return "ok"

    @app.get("/datasets")
    def datasets():
        return [_dataset_descriptor(load_dataset(n)) for n in list_datasets()]

    @app.post("/sessions", status_code=201)
    def create_session(body: SessionRequest):
        try:
            spec = load_dataset(body.dataset)
        except KeyError as exc:
            raise HTTPException(404, str(exc.args[0]))
        predictor = predictor_for(spec)
        threshold = DEFAULT_THRESHOLD
        seed = body.seed if body.seed is not None else secrets.randbits(31)
        if body.factual is not None:
            factual = {k: float(v) for k, v in body.factual.items()}
            try:
                validate_observation(
                    spec.scm, factual, require_all_covariates=True
                )
            except (UnknownNodeError, ValueError) as exc:
                raise HTTPException(422, _errdetail(exc))
            if spec.scm.target in factual:
                raise HTTPException(
                    422, "factual must not fix the target outcome"
                )
            score = float(predictor.score(factual))
            if score >= threshold:
                raise HTTPException(
                    409,
                    {
                        "message": "factual is already accepted; recourse "
                        "applies to rejected individuals",
                        "score": sig6(score),
                        "threshold": sig6(threshold),
                    },
                )
        else:
            (factual, _), = _rejected_population(
                spec.scm, predictor, threshold, 1, seed=seed
            )
            factual = {k: float(v) for k, v in factual.items()}
            score = float(predictor.score(factual))
        session = Session(
            id=uuid.uuid4().hex,
            spec=spec,
            predictor=predictor,
            threshold=threshold,
            factual=factual,
            score=score,
            seed=seed,
            created=clock(),
        )
        with store_lock:
            sessions[session.id] = session
        return {
            "id": session.id,
            "dataset": spec.name,
            "factual": {k: sig6(v) for k, v in factual.items()},
            "score": sig6(score),
            "threshold": sig6(threshold),
            "predictor": spec.predictor_kind,
        }

    @app.post("/sessions/{session_id}/evaluate")
    def evaluate(session_id: str, body: EvaluateRequest):
        session = get_session(session_id)
        with session.lock:
            if session.panel_problem is None:
                # method is irrelevant to the panel; any valid one wires the
                # same samplers, cost weights, and sample counts
                session.panel_problem = problem_for_dataset(
                    session.spec, "CR-ind", 0.9, session.factual,
                    session.predictor,
                    config=config_for_dataset(session.spec),
                    threshold=session.threshold,
                    require_rejected=False,
                )
            try:
                panel = confidence_panel(
                    session.panel_problem,
                    Action.of(body.action),
                    seed=session.seed,
                )
            except (TargetInterventionError, ValueError) as exc:
                raise HTTPException(422, _errdetail(exc))
        if panel["eta_under_h_ind"] is None:
            # the panel degrades to None when the equation inventory has no
            # closed-form individualized rescoring; over HTTP that is a
            # capability gap, not a number
            raise HTTPException(
                501,
                "individualized post-recourse rescoring is not available "
                "for this model",
            )
        return {
            "action": {k: sig6(v) for k, v in panel["action"].assignments},
            "cost": sig6(panel["cost"]),
            "gamma_ind": sig6(panel["gamma_ind"]),
            "gamma_sub": sig6(panel["gamma_sub"]),
            "gamma_sub_is_observational": panel["gamma_sub_is_observational"],
            "eta_under_h": sig6(panel["eta_under_h"]),
            "eta_under_h_ind": sig6(panel["eta_under_h_ind"]),
            "acceptance_bound": sig6(panel["acceptance_bound"]),
        }

    @app.post("/sessions/{session_id}/recommend")
    def recommend(session_id: str, body: RecommendRequest):
        session = get_session(session_id)
        if body.method not in METHODS:
            raise HTTPException(
                422,
                f"unknown method {body.method!r}; expected one of "
                f"{', '.join(METHODS)}",
            )
        if body.optimizer_preset is not None and (
            body.optimizer_preset not in PRESETS
        ):
            raise HTTPException(
                422,
                f"unknown optimizer preset {body.optimizer_preset!r}; "
                f"expected one of {', '.join(sorted(PRESETS))}",
            )
        request_key = (body.method, body.confidence, body.optimizer_preset)
        with session.lock:
            # a cache hit inside a repeated search would shift the optimizer's
            # randomness, so the pinned-seed guarantee is kept by answering
            # identical requests from the stored result
            if request_key in session.answers:
                return session.answers[request_key]
            try:
                problem = session.problem(
                    body.method, body.confidence, body.optimizer_preset
                )
            except ValueError as exc:
                raise HTTPException(422, _errdetail(exc))
            rec = optimize(problem, seed=session.seed)
        answer = {
            "method": rec.method,
            "target_confidence": sig6(rec.target_confidence),
            "action": {k: sig6(v) for k, v in rec.action.assignments},
            "cost": sig6(rec.cost),
            "confidence": sig6(rec.confidence),
            "feasible": rec.feasible,
            "violation": sig6(rec.violation),
            "gamma_ind": sig6(rec.gamma_ind),
            "gamma_sub": sig6(rec.gamma_sub),
            "gamma_sub_is_observational": rec.gamma_sub_is_observational,
            "eta_under_h": sig6(rec.eta_under_h),
            "eta_under_h_ind": sig6(rec.eta_under_h_ind),
            "acceptance_bound": sig6(rec.acceptance_bound),
            "guarantee": _guarantee_sentence(problem, rec),
        }
        with session.lock:
            session.answers[request_key] = answer
        return answer

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def _errdetail(exc: BaseException) -> str:
    if isinstance(exc, KeyError) and exc.args:
        return str(exc.args[0])
    return str(exc)
