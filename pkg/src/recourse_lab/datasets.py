"""Bundled model specifications and the structured-text loading format.

Each dataset ships as one JSON document: nodes with {id, parents, equation
kind, link coefficients or expression tag, noise family + parameters}, the
target id, cost weights, actionability flags, the default predictor kind, and
the default optimizer preset. ``load_dataset`` builds an immutable Scm from
it; ``audit_table`` renders the equation inventory for inspection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Union

import numpy as np

from .errors import ScmDefinitionError
from .scm import (
    AdditiveEquation,
    Bernoulli,
    Categorical,
    CausalGraph,
    ExogenousEquation,
    ExprLink,
    Gamma,
    GammaPoisson,
    LinearLink,
    Normal,
    Scm,
    SigmoidBernoulliEquation,
    StructuralEquation,
    Uniform01,
    XorAdditiveEquation,
    register_link,
    sample_columns,
    sigmoid,
)

DATASET_NAMES = (
    "3var-causal",
    "3var-noncausal",
    "5var-skill",
    "7var-covid",
    "covid-admission-e1",
)


# Nonlinear link expressions referenced by the bundled files. The language
# level bakes in the one-decimal variable rounding: its deterministic part is
# round(sigmoid(10*S), 1), which keeps every observable value on the 0.1 grid
# (the integer-valued noise preserves the offset).
register_link("skill-github-activity", lambda v: 10.0 * np.asarray(v["E"]) * (11.0 + 100.0 * np.asarray(v["D"])))
register_link("skill-language-level", lambda v: np.round(sigmoid(10.0 * np.asarray(v["S"])), 1))
register_link(
    "covid-risk",
    lambda v: -(
        np.asarray(v["D"])
        - 3.0
        - np.asarray(v["V_I"])
        - 2.5 * np.asarray(v["V_C"])
        + 0.2 * np.asarray(v["B"]) ** 2
    ),
)
register_link("covid-fatigue", lambda v: -1.0 + np.asarray(v["B"]) ** 2 - 2.0 * np.asarray(v["C"]))


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    description: str
    scm: Scm
    cost_weights: Mapping[str, float]
    actionable: tuple[str, ...]
    predictor_kind: str  # 'logistic' | 'scm-oracle'
    optimizer_preset: Mapping[str, int]
    value_decimals: int


def _parse_noise(doc: Mapping):
    family = doc["family"]
    if family == "normal":
        return Normal(doc["mean"], doc["sd"])
    if family == "uniform01":
        return Uniform01()
    if family == "bernoulli":
        return Bernoulli(doc["p"])
    if family == "categorical":
        return Categorical(tuple(doc["probs"]))
    if family == "gamma":
        return Gamma(doc["shape"], doc["rate"])
    if family == "gamma-poisson":
        return GammaPoisson(doc["shape"], doc["rate"])
    raise ScmDefinitionError(f"unknown noise family: {family!r}")


def _parse_link(doc: Mapping, parents: tuple[str, ...]):
    if doc["type"] == "linear":
        return LinearLink(
            intercept=float(doc.get("intercept", 0.0)),
            terms=tuple((k, float(w)) for k, w in doc.get("coeffs", {}).items()),
        )
    if doc["type"] == "expr":
        return ExprLink(tag=doc["tag"], parent_names=parents)
    raise ScmDefinitionError(f"unknown link type: {doc['type']!r}")


def _parse_equation(doc: Mapping) -> StructuralEquation:
    kind = doc["kind"]
    parents = tuple(doc.get("parents", ()))
    if kind == "exogenous":
        if parents:
            raise ScmDefinitionError("exogenous nodes cannot have parents")
        return ExogenousEquation(noise=_parse_noise(doc["noise"]))
    link = _parse_link(doc["link"], parents)
    if kind == "additive":
        return AdditiveEquation(link=link, noise=_parse_noise(doc["noise"]))
    if kind == "sigmoid-bernoulli":
        return SigmoidBernoulliEquation(link=link)
    if kind == "xor-additive":
        noise = _parse_noise(doc["noise"])
        if not isinstance(noise, Bernoulli):
            raise ScmDefinitionError("xor-additive noise must be bernoulli")
        return XorAdditiveEquation(link=link, noise=noise)
    raise ScmDefinitionError(f"unknown equation kind: {kind!r}")


def parse_scm_document(doc: Mapping) -> DatasetSpec:
    nodes = tuple(n["id"] for n in doc["nodes"])
    edges = tuple(
        (parent, n["id"]) for n in doc["nodes"] for parent in n.get("parents", ())
    )
    graph = CausalGraph(nodes=nodes, edges=edges, target=doc["target"])
    equations = {n["id"]: _parse_equation(n) for n in doc["nodes"]}
    scm = Scm(graph=graph, equations=equations)
    weights = {k: float(v) for k, v in doc["cost_weights"].items()}
    if any(w <= 0 for w in weights.values()):
        raise ScmDefinitionError("cost weights must be strictly positive")
    return DatasetSpec(
        name=doc["name"],
        description=doc.get("description", ""),
        scm=scm,
        cost_weights=weights,
        actionable=tuple(doc["actionable"]),
        predictor_kind=doc.get("predictor", "logistic"),
        optimizer_preset=dict(doc.get("optimizer_preset", {})),
        value_decimals=int(doc.get("value_decimals", 1)),
    )


def load_scm_file(path: Union[str, Path]) -> DatasetSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scm_document(json.load(fh))


def load_dataset(name: str) -> DatasetSpec:
    if name not in DATASET_NAMES:
        raise KeyError(
            f"unknown dataset {name!r}; available: {', '.join(DATASET_NAMES)}"
        )
    ref = resources.files("recourse_lab").joinpath("data", f"{name}.json")
    return parse_scm_document(json.loads(ref.read_text(encoding="utf-8")))


def list_datasets() -> tuple[str, ...]:
    return DATASET_NAMES


def audit_table(spec: DatasetSpec) -> str:
    """Aligned text table of the equation inventory."""
    rows = [("node", "kind", "parents", "noise", "cost", "actionable")]
    for node in spec.scm.graph.nodes:
        eq = spec.scm.equations[node]
        kind = type(eq).__name__.replace("Equation", "")
        parents = ",".join(spec.scm.parents(node)) or "-"
        noise = repr(getattr(eq, "noise", None))
        cost = f"{spec.cost_weights.get(node, 0):g}" if node != spec.scm.target else "-"
        action = (
            "yes" if node in spec.actionable else "no"
        ) if node != spec.scm.target else "target"
        rows.append((node, kind, parents, noise, cost, action))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = [
        "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
        for row in rows
    ]
    return "\n".join(lines)


def feature_stats(
    spec: DatasetSpec, n: int = 10_000, seed: int = 97
) -> dict[str, tuple[float, float, float]]:
    """Empirical (min, max, std) of each covariate over n observational draws.

    Used to bound and scale value genes during search.
    """
    values, _ = sample_columns(spec.scm, n, seed)
    out: dict[str, tuple[float, float, float]] = {}
    for node in spec.scm.covariates:
        col = values[node]
        out[node] = (float(col.min()), float(col.max()), float(col.std()))
    return out
