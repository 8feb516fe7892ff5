"""Immutable structural causal models: graph queries, sampling, interventions,
and ground-truth counterfactual evaluation.

A model is a DAG over named nodes plus one structural equation per node. Node
values are stored as floats even for binary/categorical variables; exactness
is asserted at the boundaries (see ``validate_observation``). All sampling
takes an explicit seed or generator, so concurrent use is reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np
from scipy import special, stats

from .errors import (
    MissingNoiseError,
    ScmDefinitionError,
    TargetInterventionError,
    UnknownNodeError,
)

Array = np.ndarray
Values = Mapping[str, Union[float, Array]]

_PROB_TOL = 1e-9


def sigmoid(z):
    return special.expit(z)


# --------------------------------------------------------------------------
# noise families


@dataclass(frozen=True)
class Normal:
    mean: float
    sd: float

    def __post_init__(self):
        if not self.sd > 0:
            raise ScmDefinitionError(f"normal sd must be positive, got {self.sd}")

    def sample(self, rng: np.random.Generator, size: int) -> Array:
        return rng.normal(self.mean, self.sd, size)

    def log_mass(self, u):
        u = np.asarray(u, dtype=float)
        return -0.5 * ((u - self.mean) / self.sd) ** 2 - math.log(
            self.sd * math.sqrt(2.0 * math.pi)
        )


@dataclass(frozen=True)
class Uniform01:
    def sample(self, rng: np.random.Generator, size: int) -> Array:
        return rng.uniform(0.0, 1.0, size)

    def log_mass(self, u):
        u = np.asarray(u, dtype=float)
        return np.where((u >= 0.0) & (u <= 1.0), 0.0, -np.inf)


@dataclass(frozen=True)
class Bernoulli:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ScmDefinitionError(f"bernoulli p out of range: {self.p}")

    def sample(self, rng: np.random.Generator, size: int) -> Array:
        return (rng.random(size) < self.p).astype(float)

    def log_mass(self, u):
        u = np.asarray(u, dtype=float)
        on_grid = _is_integer(u) & ((u == 0.0) | (u == 1.0))
        with np.errstate(divide="ignore"):
            lp = np.where(u == 1.0, _safe_log(self.p), _safe_log(1.0 - self.p))
        return np.where(on_grid, lp, -np.inf)


@dataclass(frozen=True)
class Categorical:
    probs: tuple[float, ...]

    def __post_init__(self):
        if abs(sum(self.probs) - 1.0) > _PROB_TOL or any(p < 0 for p in self.probs):
            raise ScmDefinitionError(f"categorical probs invalid: {self.probs}")

    def sample(self, rng: np.random.Generator, size: int) -> Array:
        return rng.choice(len(self.probs), size=size, p=self.probs).astype(float)

    def log_mass(self, u):
        u = np.asarray(u, dtype=float)
        idx = np.clip(np.rint(u).astype(int), 0, len(self.probs) - 1)
        table = np.array([_safe_log(p) for p in self.probs])
        valid = _is_integer(u) & (u >= 0.0) & (u <= len(self.probs) - 1)
        return np.where(valid, table[idx], -np.inf)


@dataclass(frozen=True)
class Gamma:
    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ScmDefinitionError("gamma shape and rate must be positive")

    def sample(self, rng: np.random.Generator, size: int) -> Array:
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    def log_mass(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            lp = stats.gamma.logpdf(u, a=self.shape, scale=1.0 / self.rate)
        return np.where(u > 0.0, lp, -np.inf)


@dataclass(frozen=True)
class GammaPoisson:
    """Gamma-Poisson mixture: lambda ~ Gamma(shape, rate), X ~ Poisson(lambda).

    Marginally negative binomial with r = shape, p = rate / (1 + rate) and
    mean shape / rate; integer-valued and nonnegative.
    """

    shape: float
    rate: float

    def __post_init__(self):
        if not (self.shape > 0 and self.rate > 0):
            raise ScmDefinitionError("gamma-poisson shape and rate must be positive")

    def sample(self, rng: np.random.Generator, size: int) -> Array:
        lam = rng.gamma(self.shape, 1.0 / self.rate, size)
        return rng.poisson(lam).astype(float)

    def log_mass(self, u):
        u = np.asarray(u, dtype=float)
        k = np.rint(u)
        p = self.rate / (1.0 + self.rate)
        with np.errstate(divide="ignore", invalid="ignore"):
            lp = stats.nbinom.logpmf(np.maximum(k, 0).astype(int), self.shape, p)
        return np.where(_is_integer(u) & (u >= 0.0), lp, -np.inf)


NoiseDistribution = Union[Normal, Uniform01, Bernoulli, Categorical, Gamma, GammaPoisson]


def _is_integer(u: Array, tol: float = 1e-9) -> Array:
    return np.abs(u - np.rint(u)) <= tol


def _safe_log(p: float) -> float:
    return math.log(p) if p > 0.0 else -math.inf


# --------------------------------------------------------------------------
# deterministic links


LINK_REGISTRY: dict[str, Callable[[Values], Union[float, Array]]] = {}


def register_link(tag: str, fn: Callable[[Values], Union[float, Array]]) -> None:
    LINK_REGISTRY[tag] = fn


@dataclass(frozen=True)
class LinearLink:
    """intercept + sum of coefficient * parent value."""

    intercept: float = 0.0
    terms: tuple[tuple[str, float], ...] = ()

    def __call__(self, values: Values):
        out = self.intercept
        for name, coef in self.terms:
            out = out + coef * np.asarray(values[name])
        return out

    @property
    def parents(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.terms)


@dataclass(frozen=True)
class ExprLink:
    """Named nonlinear expression, looked up in LINK_REGISTRY at call time."""

    tag: str
    parent_names: tuple[str, ...]

    def __call__(self, values: Values):
        try:
            fn = LINK_REGISTRY[self.tag]
        except KeyError:
            raise ScmDefinitionError(f"unregistered link expression: {self.tag!r}")
        return fn(values)

    @property
    def parents(self) -> tuple[str, ...]:
        return self.parent_names


Link = Union[LinearLink, ExprLink]


# --------------------------------------------------------------------------
# structural equations


@dataclass(frozen=True)
class AdditiveEquation:
    """x = link(parents) + u; invertible given parents."""

    link: Link
    noise: NoiseDistribution

    def evaluate(self, values: Values, u):
        return self.link(values) + u


@dataclass(frozen=True)
class SigmoidBernoulliEquation:
    """x = [u <= sigmoid(link(parents))] with u ~ Uniform(0, 1)."""

    link: Link
    noise: Uniform01 = field(default_factory=Uniform01)

    def evaluate(self, values: Values, u):
        return (np.asarray(u) <= sigmoid(self.link(values))).astype(float)


@dataclass(frozen=True)
class ExogenousEquation:
    """x = u; a root node distributed as its noise."""

    noise: NoiseDistribution

    def evaluate(self, values: Values, u):
        return u


@dataclass(frozen=True)
class XorAdditiveEquation:
    """x = (link(parents) + u) mod 2 with u ~ Bernoulli(p); invertible mod 2."""

    link: Link
    noise: Bernoulli

    def evaluate(self, values: Values, u):
        return np.mod(np.asarray(self.link(values)) + u, 2.0)


@dataclass(frozen=True)
class ConstantEquation:
    """Result of an intervention: x = value, no noise."""

    value: float

    def evaluate(self, values: Values, u):
        return self.value if u is None else np.full_like(np.asarray(u, float), self.value)


StructuralEquation = Union[
    AdditiveEquation,
    SigmoidBernoulliEquation,
    ExogenousEquation,
    XorAdditiveEquation,
    ConstantEquation,
]


def equation_parents(eq: StructuralEquation) -> tuple[str, ...]:
    if isinstance(eq, (ExogenousEquation, ConstantEquation)):
        return ()
    return eq.link.parents


# --------------------------------------------------------------------------
# actions


@dataclass(frozen=True, order=True)
class Action:
    """A structural intervention do(X_I := theta_I), stored sorted by node."""

    assignments: tuple[tuple[str, float], ...] = ()

    @staticmethod
    def of(mapping: Mapping[str, float]) -> "Action":
        return Action(tuple(sorted((str(k), float(v)) for k, v in mapping.items())))

    def as_dict(self) -> dict[str, float]:
        return dict(self.assignments)

    @property
    def nodes(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.assignments)

    def is_empty(self) -> bool:
        return not self.assignments


EMPTY_ACTION = Action()


# --------------------------------------------------------------------------
# graph and model


@dataclass(frozen=True)
class CausalGraph:
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    target: str

    def __post_init__(self):
        seen = set(self.nodes)
        if len(seen) != len(self.nodes):
            raise ScmDefinitionError("duplicate node ids")
        if self.target not in seen:
            raise ScmDefinitionError(f"target {self.target!r} is not a node")
        for a, b in self.edges:
            if a not in seen or b not in seen:
                raise ScmDefinitionError(f"edge ({a!r}, {b!r}) has unknown endpoint")


@dataclass(frozen=True)
class Scm:
    """Graph plus equations; immutable and freely shareable across threads."""

    graph: CausalGraph
    equations: Mapping[str, StructuralEquation]

    def __post_init__(self):
        for node in self.graph.nodes:
            if node not in self.equations:
                raise ScmDefinitionError(f"missing equation for {node!r}")
        edge_parents: dict[str, set[str]] = {n: set() for n in self.graph.nodes}
        for a, b in self.graph.edges:
            edge_parents[b].add(a)
        for node, eq in self.equations.items():
            if node not in edge_parents:
                raise ScmDefinitionError(f"equation for unknown node {node!r}")
            if not isinstance(eq, ConstantEquation) and set(
                equation_parents(eq)
            ) != edge_parents[node]:
                raise ScmDefinitionError(
                    f"equation parents for {node!r} do not match graph edges"
                )
        y_eq = self.equations[self.graph.target]
        if not isinstance(y_eq, (SigmoidBernoulliEquation, XorAdditiveEquation)) and not (
            isinstance(y_eq, ExogenousEquation) and isinstance(y_eq.noise, Bernoulli)
        ):
            raise ScmDefinitionError("target must be binary-valued")
        object.__setattr__(self, "_order", _topological_sort(self.graph))

    # -- graph queries ------------------------------------------------------

    @property
    def target(self) -> str:
        return self.graph.target

    @property
    def covariates(self) -> tuple[str, ...]:
        return tuple(n for n in self.graph.nodes if n != self.graph.target)

    def parents(self, node: str) -> tuple[str, ...]:
        self._check_node(node)
        return tuple(a for a, b in self.graph.edges if b == node)

    def children(self, node: str) -> tuple[str, ...]:
        self._check_node(node)
        return tuple(b for a, b in self.graph.edges if a == node)

    def _check_node(self, node: str) -> None:
        if node not in self.graph.nodes:
            raise UnknownNodeError(node)

    # -- interventions ------------------------------------------------------

    def intervene(self, action: Action) -> "Scm":
        """New model with each intervened equation replaced by a constant."""
        for node in action.nodes:
            self._check_node(node)
            if node == self.graph.target:
                raise TargetInterventionError(
                    "interventions on the target are rejected; recourse acts on covariates"
                )
        if action.is_empty():
            return self
        equations = dict(self.equations)
        for node, value in action.assignments:
            equations[node] = ConstantEquation(float(value))
        return Scm(self.graph, equations)


def _topological_sort(graph: CausalGraph) -> tuple[str, ...]:
    """Kahn's algorithm; ties broken by node declaration order."""
    position = {n: i for i, n in enumerate(graph.nodes)}
    indegree = {n: 0 for n in graph.nodes}
    for _, b in graph.edges:
        indegree[b] += 1
    ready = sorted((n for n, d in indegree.items() if d == 0), key=position.get)
    order: list[str] = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        for a, b in graph.edges:
            if a == node:
                indegree[b] -= 1
                if indegree[b] == 0:
                    ready.append(b)
        ready.sort(key=position.get)
    if len(order) != len(graph.nodes):
        raise ScmDefinitionError("graph contains a cycle")
    return tuple(order)


def topological_order(scm: Scm) -> tuple[str, ...]:
    return scm._order  # computed once at construction


def intervene(scm: Scm, action: Action) -> Scm:
    return scm.intervene(action)


def descendants(scm: Scm, nodes: Iterable[str]) -> set[str]:
    sources = set(nodes)
    for n in sources:
        scm._check_node(n)
    adj: dict[str, list[str]] = {}
    for a, b in scm.graph.edges:
        adj.setdefault(a, []).append(b)
    seen: set[str] = set()
    frontier = list(sources)
    while frontier:
        node = frontier.pop()
        for child in adj.get(node, ()):
            if child not in seen:
                seen.add(child)
                frontier.append(child)
    return seen - sources


def ancestors(scm: Scm, node: str) -> set[str]:
    scm._check_node(node)
    radj: dict[str, list[str]] = {}
    for a, b in scm.graph.edges:
        radj.setdefault(b, []).append(a)
    seen: set[str] = set()
    frontier = [node]
    while frontier:
        cur = frontier.pop()
        for parent in radj.get(cur, ()):
            if parent not in seen:
                seen.add(parent)
                frontier.append(parent)
    seen.discard(node)
    return seen


def nondescendants(scm: Scm, nodes: Iterable[str]) -> set[str]:
    """Covariates neither intervened on nor reachable from the intervened set."""
    sources = set(nodes)
    return set(scm.covariates) - descendants(scm, sources) - sources - {scm.target}


def causes_of_target(scm: Scm) -> set[str]:
    return ancestors(scm, scm.target)


# --------------------------------------------------------------------------
# evaluation and sampling


def draw_noise(scm: Scm, n: int, rng: np.random.Generator) -> dict[str, Array]:
    noise: dict[str, Array] = {}
    for node in topological_order(scm):
        eq = scm.equations[node]
        if not isinstance(eq, ConstantEquation):
            noise[node] = eq.noise.sample(rng, n)
    return noise


def evaluate_forward(
    scm: Scm,
    noise: Mapping[str, Union[float, Array]],
    do: Mapping[str, Union[float, Array]] | None = None,
) -> dict[str, Union[float, Array]]:
    """Evaluate equations in topological order on the given exogenous values,
    with intervened nodes pinned to their constants."""
    do = do or {}
    values: dict[str, Union[float, Array]] = {}
    for node in topological_order(scm):
        if node in do:
            values[node] = do[node]
            continue
        eq = scm.equations[node]
        if isinstance(eq, ConstantEquation):
            values[node] = eq.value
            continue
        if node not in noise:
            raise MissingNoiseError(node)
        values[node] = eq.evaluate(values, noise[node])
    return values


def sample_observational(
    scm: Scm,
    n: int,
    seed: Union[int, np.random.Generator],
    return_noise: bool = False,
):
    """n rows drawn from the observational distribution (target included)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    noise = draw_noise(scm, n, rng)
    columns = evaluate_forward(scm, noise)
    rows = _columns_to_rows(columns, n)
    if return_noise:
        return rows, _columns_to_rows(noise, n)
    return rows


def sample_columns(
    scm: Scm, n: int, seed: Union[int, np.random.Generator]
) -> tuple[dict[str, Array], dict[str, Array]]:
    """Column-oriented variant of sample_observational: (values, noise)."""
    rng = np.random.default_rng(seed)
    noise = draw_noise(scm, n, rng)
    values = {
        k: np.broadcast_to(np.asarray(v, dtype=float), (n,))
        for k, v in evaluate_forward(scm, noise).items()
    }
    return values, noise


def ground_truth_counterfactual(
    scm: Scm, noise: Mapping[str, float], action: Action
) -> dict[str, float]:
    """Deterministic counterfactual of one individual's stored noise under an
    action; the empty action reproduces the factual row."""
    for node in action.nodes:
        scm._check_node(node)
        if node == scm.target:
            raise TargetInterventionError("cannot intervene on the target")
    values = evaluate_forward(scm, noise, do=action.as_dict())
    return {k: float(np.asarray(v)) for k, v in values.items()}


def _columns_to_rows(columns: Mapping[str, Union[float, Array]], n: int) -> list[dict]:
    keys = list(columns)
    arrays = [np.broadcast_to(np.asarray(columns[k], dtype=float), (n,)) for k in keys]
    return [
        {k: float(a[i]) for k, a in zip(keys, arrays)} for i in range(n)
    ]


# --------------------------------------------------------------------------
# value-domain helpers


def value_kind(scm: Scm, node: str) -> tuple[str, int]:
    """('binary', 2) | ('categorical', k) | ('continuous', 0) for one node."""
    eq = scm.equations[node]
    if isinstance(eq, (SigmoidBernoulliEquation, XorAdditiveEquation)):
        return ("binary", 2)
    if isinstance(eq, ExogenousEquation):
        if isinstance(eq.noise, Bernoulli):
            return ("binary", 2)
        if isinstance(eq.noise, Categorical):
            return ("categorical", len(eq.noise.probs))
    return ("continuous", 0)


def validate_observation(
    scm: Scm, values: Mapping[str, float], require_all_covariates: bool = False
) -> None:
    """Keys must be nodes; binary/categorical entries must sit on their grid."""
    for node, value in values.items():
        if node not in scm.graph.nodes:
            raise UnknownNodeError(node)
        kind, k = value_kind(scm, node)
        if kind == "binary" and value not in (0.0, 1.0):
            raise ValueError(f"{node} is binary, got {value}")
        if kind == "categorical" and (
            value != int(value) or not 0 <= value <= k - 1
        ):
            raise ValueError(f"{node} is categorical with {k} levels, got {value}")
    if require_all_covariates:
        missing = [n for n in scm.covariates if n not in values]
        if missing:
            raise ValueError(f"missing covariates: {missing}")
