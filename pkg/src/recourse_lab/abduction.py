"""Abduction: noise posteriors from a factual observation, the mixture
posterior over the unobserved target, and the individualized post-recourse
distribution sampler with its improvement/acceptance estimators.

The three-step counterfactual runs: (1) abduct every exogenous u conditional
on the factual covariates and a drawn target state y' ~ Bernoulli(h(x_pre)),
(2) replace intervened equations with constants, (3) push the abducted noise
back through the intervened model. With the exact observational predictor as
mixture weight, the resulting draws follow the true joint posterior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import InfeasibleObservationError
from .scm import (
    Action,
    AdditiveEquation,
    Array,
    ConstantEquation,
    ExogenousEquation,
    Scm,
    SigmoidBernoulliEquation,
    XorAdditiveEquation,
    evaluate_forward,
    sigmoid,
    topological_order,
)


@dataclass(frozen=True)
class PointMass:
    """Degenerate noise posterior of an invertible equation."""

    value: Union[float, Array]


@dataclass(frozen=True)
class TruncatedUniform:
    """Noise posterior of a threshold equation: u ~ Uniform(lo, hi)."""

    lo: Union[float, Array]
    hi: Union[float, Array]

    def __post_init__(self):
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        if np.any(lo < 0.0) or np.any(hi > 1.0) or np.any(lo >= hi):
            raise InfeasibleObservationError(
                f"degenerate truncated-uniform posterior: [{self.lo}, {self.hi}]"
            )

    def mass_below(self, threshold):
        """P(U <= threshold); vectorized."""
        return np.clip((np.asarray(threshold) - self.lo) / (self.hi - self.lo), 0.0, 1.0)


AbductedNoise = Union[PointMass, TruncatedUniform]


def abduct_node(
    equation, x_j: Union[float, Array], parent_values: Mapping[str, Union[float, Array]]
) -> AbductedNoise:
    """Posterior of one node's exogenous noise given its value and parents.

    Invertible kinds yield a point mass; threshold kinds yield a truncated
    uniform. The target's value must be supplied in parent_values when the
    node has the target as a parent.
    """
    for parent in _link_parents(equation):
        if parent not in parent_values:
            raise ValueError(f"unobserved parent {parent!r} during abduction")
    if isinstance(equation, AdditiveEquation):
        return PointMass(np.asarray(x_j, float) - np.asarray(equation.link(parent_values), float))
    if isinstance(equation, XorAdditiveEquation):
        return PointMass(
            np.mod(np.asarray(x_j, float) - np.asarray(equation.link(parent_values), float), 2.0)
        )
    if isinstance(equation, ExogenousEquation):
        return PointMass(np.asarray(x_j, float))
    if isinstance(equation, SigmoidBernoulliEquation):
        p = np.asarray(sigmoid(equation.link(parent_values)), float)
        x = np.asarray(x_j, float)
        lo = np.where(x == 1.0, 0.0, p)
        hi = np.where(x == 1.0, p, 1.0)
        if lo.ndim == 0:
            lo, hi = float(lo), float(hi)
        return TruncatedUniform(lo, hi)
    raise TypeError(f"cannot abduct {type(equation).__name__}")


def _link_parents(equation) -> tuple[str, ...]:
    if isinstance(equation, (ExogenousEquation, ConstantEquation)):
        return ()
    return equation.link.parents


def _check_feasible(node: str, posterior: AbductedNoise, noise_dist) -> None:
    if isinstance(posterior, PointMass):
        mass = noise_dist.log_mass(posterior.value)
        if np.any(np.isneginf(mass)):
            raise InfeasibleObservationError(
                f"observation has probability zero at node {node!r}"
            )


def _draw(posterior: AbductedNoise, rng: np.random.Generator, size: int) -> Array:
    if isinstance(posterior, PointMass):
        return np.broadcast_to(np.asarray(posterior.value, float), (size,)).copy()
    lo = np.broadcast_to(np.asarray(posterior.lo, float), (size,))
    hi = np.broadcast_to(np.asarray(posterior.hi, float), (size,))
    return lo + (hi - lo) * rng.uniform(size=size)


# --------------------------------------------------------------------------
# mixture abduction over the unobserved target


@dataclass(frozen=True)
class IndividualizedBank:
    """M abducted noise worlds for one factual, reusable across actions.

    y_prime holds the drawn target branch per world; noise holds one (M,)
    array per node (target included). Pushing the bank through any intervened
    model yields draws from the individualized post-recourse distribution.
    """

    x_pre: Mapping[str, float]
    weight: float
    y_prime: Array
    noise: Mapping[str, Array]

    @property
    def size(self) -> int:
        return int(self.y_prime.shape[0])


def _weight_predictor(scm: Scm, weight_predictor):
    if weight_predictor is None:
        from .predictors import ScmOraclePredictor

        return ScmOraclePredictor(scm)
    return weight_predictor


def build_individualized_bank(
    scm: Scm,
    x_pre: Mapping[str, float],
    M: int,
    seed: Union[int, np.random.Generator],
    weight_predictor=None,
) -> IndividualizedBank:
    """Abduct M noise worlds from x_pre, mixing over the two target states.

    The mixture weight is h(x_pre) under weight_predictor; the default is the
    exact model-derived observational predictor.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    rng = np.random.default_rng(seed)
    target = scm.target
    predictor = _weight_predictor(scm, weight_predictor)
    w = float(predictor.score(x_pre))
    if not 0.0 <= w <= 1.0 or math.isnan(w):
        raise ValueError(f"predictor returned a value outside [0, 1]: {w}")
    y_prime = (rng.uniform(size=M) < w).astype(float)

    noise: dict[str, Array] = {}
    env: dict[str, Union[float, Array]] = {
        k: v for k, v in x_pre.items() if k != target
    }
    env[target] = y_prime
    for node in topological_order(scm):
        eq = scm.equations[node]
        if isinstance(eq, ConstantEquation):
            continue
        if node == target:
            posterior = _abduct_target(eq, y_prime, env)
        else:
            posterior = abduct_node(eq, x_pre[node], env)
        _check_feasible(node, posterior, eq.noise)
        noise[node] = _draw(posterior, rng, M)
    return IndividualizedBank(x_pre=dict(x_pre), weight=w, y_prime=y_prime, noise=noise)


def _abduct_target(equation, y_prime: Array, parent_values) -> AbductedNoise:
    if isinstance(equation, SigmoidBernoulliEquation):
        p = np.asarray(sigmoid(equation.link(parent_values)), float)
        p = np.broadcast_to(p, y_prime.shape)
        if np.any((y_prime == 1.0) & (p <= 0.0)) or np.any((y_prime == 0.0) & (p >= 1.0)):
            raise InfeasibleObservationError(
                "drawn target state has probability zero given its parents"
            )
        lo = np.where(y_prime == 1.0, 0.0, p)
        hi = np.where(y_prime == 1.0, p, 1.0)
        return TruncatedUniform(lo, hi)
    return abduct_node(equation, y_prime, parent_values)


@dataclass(frozen=True)
class PosteriorSampleSet:
    """Draws from a post-recourse distribution, column-oriented."""

    x_pre: Mapping[str, float]
    action: Action
    columns: Mapping[str, Array]  # includes the target
    target: str

    @property
    def size(self) -> int:
        return int(next(iter(self.columns.values())).shape[0])

    @property
    def y_post(self) -> Array:
        return self.columns[self.target]

    def covariate_columns(self) -> dict[str, Array]:
        return {k: v for k, v in self.columns.items() if k != self.target}

    def rows(self) -> list[tuple[dict[str, float], float]]:
        covs = self.covariate_columns()
        y = self.y_post
        return [
            ({k: float(v[i]) for k, v in covs.items()}, float(y[i]))
            for i in range(self.size)
        ]


def push_bank(scm: Scm, bank: IndividualizedBank, action: Action) -> PosteriorSampleSet:
    """Action + prediction steps: evaluate the intervened model on the bank."""
    M = bank.size
    do = {k: np.full(M, float(v)) for k, v in action.assignments}
    values = evaluate_forward(scm, bank.noise, do=do)
    columns = {
        k: np.broadcast_to(np.asarray(v, float), (M,)) for k, v in values.items()
    }
    return PosteriorSampleSet(
        x_pre=bank.x_pre, action=action, columns=columns, target=scm.target
    )


def sample_individualized_posterior(
    scm: Scm,
    x_pre: Mapping[str, float],
    action: Action,
    M: int,
    seed: Union[int, np.random.Generator],
    weight_predictor=None,
) -> PosteriorSampleSet:
    """Algorithmic core: abduct under the target mixture, intervene, predict."""
    bank = build_individualized_bank(scm, x_pre, M, seed, weight_predictor)
    return push_bank(scm, bank, action)


def _fsum_mean(values: Array) -> float:
    # compensated summation so reduction order cannot shift the estimate
    return math.fsum(values.tolist()) / len(values)


def gamma_ind(
    scm: Scm,
    x_pre: Mapping[str, float],
    action: Action,
    M: int = 1024,
    seed: Union[int, np.random.Generator] = 0,
    weight_predictor=None,
) -> float:
    """Individualized improvement confidence P(Y^post = 1 | x_pre, do(a))."""
    samples = sample_individualized_posterior(
        scm, x_pre, action, M, seed, weight_predictor
    )
    return _fsum_mean(samples.y_post)


def eta_ind(
    scm: Scm,
    h,
    t: float,
    x_pre: Mapping[str, float],
    action: Action,
    M: int = 1024,
    seed: Union[int, np.random.Generator] = 0,
    weight_predictor=None,
) -> float:
    """Individualized acceptance confidence P(h(x^post) >= t | x_pre, do(a))."""
    if not 0.0 <= t < 1.0:
        raise ValueError("decision threshold must lie in [0, 1)")
    samples = sample_individualized_posterior(
        scm, x_pre, action, M, seed, weight_predictor
    )
    scores = h.score_batch(samples.covariate_columns())
    return _fsum_mean((np.asarray(scores) >= t).astype(float))
