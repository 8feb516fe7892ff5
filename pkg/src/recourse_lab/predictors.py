"""Observational predictors of the binary target.

Two families are bundled. The model-derived oracle computes the exact
conditional P(Y = 1 | X = x) by factorizing the joint over the target's
Markov blanket; it is the reference predictor for models whose fitted
surrogate would be needlessly lossy. The logistic family is fit from scratch
with Newton iterations and covers the datasets whose decision boundary is
(log-)linear in the covariates.

Every predictor exposes score(values) -> float and
score_batch(columns) -> ndarray over covariate columns.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import InfeasibleObservationError, UnknownNodeError
from .scm import (
    AdditiveEquation,
    Array,
    ConstantEquation,
    ExogenousEquation,
    Scm,
    SigmoidBernoulliEquation,
    XorAdditiveEquation,
    sample_columns,
    sigmoid,
    validate_observation,
)


def _node_log_mass(equation, x_j, env) -> Array:
    """log p(x_j | parents) for one equation, vectorized over env columns."""
    x = np.asarray(x_j, dtype=float)
    if isinstance(equation, AdditiveEquation):
        return equation.noise.log_mass(x - np.asarray(equation.link(env), float))
    if isinstance(equation, XorAdditiveEquation):
        u = np.mod(x - np.asarray(equation.link(env), float), 2.0)
        binary = (x == 0.0) | (x == 1.0)
        return np.where(binary, equation.noise.log_mass(u), -np.inf)
    if isinstance(equation, SigmoidBernoulliEquation):
        z = np.asarray(equation.link(env), dtype=float)
        # log sigma(z) and log(1 - sigma(z)) without overflow
        log_p1 = -np.logaddexp(0.0, -z)
        log_p0 = -np.logaddexp(0.0, z)
        out = np.where(x == 1.0, log_p1, log_p0)
        return np.where((x == 0.0) | (x == 1.0), out, -np.inf)
    if isinstance(equation, ExogenousEquation):
        return equation.noise.log_mass(x)
    if isinstance(equation, ConstantEquation):
        return np.where(x == equation.value, 0.0, -np.inf)
    raise TypeError(f"no conditional mass for {type(equation).__name__}")


class ScmOraclePredictor:
    """Exact P(Y = 1 | X = x) derived from the generating model.

    Only the target's own conditional and its children's conditionals depend
    on y, so the posterior odds reduce to the product of those factors at
    y = 1 versus y = 0. Observations with zero mass under both target states
    raise InfeasibleObservationError, or score 0.0 when on_infeasible="zero".
    """

    def __init__(self, scm: Scm, on_infeasible: str = "raise"):
        if on_infeasible not in ("raise", "zero"):
            raise ValueError("on_infeasible must be 'raise' or 'zero'")
        self.scm = scm
        self.on_infeasible = on_infeasible
        self._target = scm.target
        self._blanket = [self._target] + sorted(scm.children(self._target))

    def _log_weight(self, columns, y: float) -> Array:
        env: dict[str, Union[float, Array]] = dict(columns)
        env[self._target] = y
        total = 0.0
        for node in self._blanket:
            x_j = y if node == self._target else columns[node]
            total = total + _node_log_mass(self.scm.equations[node], x_j, env)
        return np.asarray(total, dtype=float)

    def score_batch(self, columns: Mapping[str, Array]) -> Array:
        if self._target in columns:
            raise ValueError("observational predictor scores covariates only")
        for name in columns:
            if name not in self.scm.graph.nodes:
                raise UnknownNodeError(name)
        missing = [n for n in self.scm.covariates if n not in columns]
        if missing:
            raise ValueError(f"missing covariates: {missing}")
        log_w0 = np.atleast_1d(self._log_weight(columns, 0.0))
        log_w1 = np.atleast_1d(self._log_weight(columns, 1.0))
        feasible0, feasible1 = np.isfinite(log_w0), np.isfinite(log_w1)
        out = np.zeros(np.broadcast(log_w0, log_w1).shape)
        both = feasible0 & feasible1
        out[both] = sigmoid(log_w1[both] - log_w0[both])
        out[feasible1 & ~feasible0] = 1.0
        neither = ~feasible0 & ~feasible1
        if np.any(neither) and self.on_infeasible == "raise":
            raise InfeasibleObservationError(
                "observation has probability zero under both target states"
            )
        return out

    def score(self, values: Mapping[str, float]) -> float:
        validate_observation(self.scm, values)
        covs = {k: v for k, v in values.items() if k != self._target}
        return float(self.score_batch({k: np.asarray([v]) for k, v in covs.items()})[0])


def scm_oracle_score(scm: Scm, values: Mapping[str, float]) -> float:
    """One-shot exact observational score; see ScmOraclePredictor."""
    return ScmOraclePredictor(scm).score(values)


@dataclass(frozen=True)
class LogisticPredictor:
    feature_names: tuple[str, ...]
    intercept: float
    coefficients: tuple[float, ...]
    converged: bool = True

    def __post_init__(self):
        if len(self.feature_names) != len(self.coefficients):
            raise ValueError("one coefficient per feature required")

    def decision_batch(self, columns: Mapping[str, Array]) -> Array:
        z = np.asarray(self.intercept, dtype=float)
        for name, coef in zip(self.feature_names, self.coefficients):
            if name not in columns:
                raise ValueError(f"missing feature column: {name}")
            z = z + coef * np.asarray(columns[name], dtype=float)
        return np.atleast_1d(z)

    def score_batch(self, columns: Mapping[str, Array]) -> Array:
        return sigmoid(self.decision_batch(columns))

    def score(self, values: Mapping[str, float]) -> float:
        return float(self.score_batch({k: np.asarray([v]) for k, v in values.items()})[0])

    def dump(self) -> str:
        lines = ["logistic-predictor v1", f"intercept {self.intercept!r}"]
        for name, coef in zip(self.feature_names, self.coefficients):
            lines.append(f"feature {name} {coef!r}")
        lines.append(f"converged {'true' if self.converged else 'false'}")
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, text: str) -> "LogisticPredictor":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        if not lines or lines[0] != "logistic-predictor v1":
            raise ValueError("not a logistic predictor dump")
        intercept, names, coefs, converged = 0.0, [], [], True
        for line in lines[1:]:
            head, _, rest = line.partition(" ")
            if head == "intercept":
                intercept = float(rest)
            elif head == "feature":
                name, _, value = rest.partition(" ")
                names.append(name)
                coefs.append(float(value))
            elif head == "converged":
                converged = rest.strip() == "true"
            else:
                raise ValueError(f"unknown dump line: {line}")
        return cls(tuple(names), intercept, tuple(coefs), converged)


def fit_logistic(
    columns: Mapping[str, Array],
    y: Array,
    penalty: float = 0.0,
    max_iter: int = 100,
    tol: float = 1e-6,
) -> LogisticPredictor:
    """Newton-Raphson logistic regression on named feature columns.

    Stops when the gradient's max-norm drops to tol; hitting max_iter leaves
    converged=False and emits a warning, which on clean data indicates
    separation (coefficients drifting to infinity). penalty adds an L2 term
    on the non-intercept coefficients.
    """
    names = tuple(columns.keys())
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    X = np.column_stack(
        [np.ones(n)] + [np.asarray(columns[name], dtype=float) for name in names]
    )
    if X.shape[0] != n:
        raise ValueError("feature columns and labels disagree on length")
    ridge = np.full(X.shape[1], float(penalty))
    ridge[0] = 0.0  # intercept stays unpenalized
    beta = np.zeros(X.shape[1])
    converged = False
    for _ in range(max_iter):
        p = sigmoid(X @ beta)
        grad = X.T @ (y - p) - ridge * beta
        if np.max(np.abs(grad)) <= tol:
            converged = True
            break
        w = np.maximum(p * (1.0 - p), 1e-12)
        hessian = (X.T * w) @ X + np.diag(np.maximum(ridge, 1e-12))
        beta = beta + np.linalg.solve(hessian, grad)
    # separable classes drive the weights to exact saturation: the gradient
    # vanishes numerically while the coefficients run off to infinity
    separated = bool(np.max(np.abs(beta)) > 30.0)
    if separated or not converged:
        converged = False
        warnings.warn(
            "logistic fit did not reach a stable optimum (separable classes "
            "or iteration cap); consider a ridge penalty",
            RuntimeWarning,
        )
    return LogisticPredictor(
        feature_names=names,
        intercept=float(beta[0]),
        coefficients=tuple(float(b) for b in beta[1:]),
        converged=converged,
    )


def fit_observational_logistic(
    scm: Scm,
    n: int,
    seed: Union[int, np.random.Generator],
    penalty: float = 0.0,
) -> LogisticPredictor:
    """Fit a logistic predictor of the target on n fresh observational rows."""
    values, _ = sample_columns(scm, n, seed)
    features = {name: values[name] for name in scm.covariates}
    return fit_logistic(features, values[scm.target], penalty=penalty)


def refit_family(
    scm: Scm,
    k: int,
    n: int,
    seed: Union[int, np.random.Generator],
    penalty: float = 0.0,
) -> list[LogisticPredictor]:
    """k independent refits on disjoint fresh samples, for refit robustness."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    return [fit_observational_logistic(scm, n, rng, penalty=penalty) for _ in range(k)]


Predictor = Union[ScmOraclePredictor, LogisticPredictor]


def bayes_logistic_reference(scm: Scm) -> LogisticPredictor:
    """Exact logistic form of the oracle when its log-odds are linear.

    Fits the oracle's logit exactly on the binary covariate grid; raises if
    the grid logits are not affine (then no logistic predictor is exact).
    """
    oracle = ScmOraclePredictor(scm)
    covs = scm.covariates
    from .scm import value_kind

    if any(value_kind(scm, c)[0] != "binary" for c in covs):
        raise ValueError("reference form needs all-binary covariates")
    base = {c: 0.0 for c in covs}
    logit = lambda p: math.log(p / (1.0 - p))
    b0 = logit(oracle.score(base))
    coefs = []
    for c in covs:
        point = dict(base)
        point[c] = 1.0
        coefs.append(logit(oracle.score(point)) - b0)
    ref = LogisticPredictor(tuple(covs), b0, tuple(coefs))
    for corner in range(2 ** len(covs)):
        point = {c: float((corner >> i) & 1) for i, c in enumerate(covs)}
        if abs(ref.score(point) - oracle.score(point)) > 1e-9:
            raise ValueError("oracle log-odds are not affine; no exact logistic form")
    return ref
