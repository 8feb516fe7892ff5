"""Post-recourse predictor: the probability of the favorable target state
given the covariates observed after acting, conditioned on the factual.

Meeting an improvement target does not by itself guarantee acceptance by a
fixed observational model, but an institution willing to re-score applicants
with this predictor accepts anyone whose improvement confidence clears the
bound below. Two evaluation routes are provided:

* closed form: enumerate the four (pre-branch, post-branch) target
  combinations; each covariate contributes the mass its abducted noise
  posterior assigns to the noise value required to reproduce the candidate
  post-recourse observation. Point masses turn into indicators, truncated
  uniforms into interval overlaps, so the route is exact for every bundled
  model.
* rejection: draw from the individualized posterior and keep exact covariate
  matches. Only sound when every free covariate is discrete; guarded by a
  proposal budget and a minimum acceptance rate.
"""

from __future__ import annotations

import math
from typing import Mapping, Union

import numpy as np

from .abduction import (
    PointMass,
    TruncatedUniform,
    abduct_node,
    build_individualized_bank,
    push_bank,
)
from .errors import (
    InfeasibleObservationError,
    IntractableRejectionError,
    UnsupportedModelError,
)
from .predictors import ScmOraclePredictor
from .scm import (
    Action,
    AdditiveEquation,
    Array,
    ExogenousEquation,
    Scm,
    SigmoidBernoulliEquation,
    XorAdditiveEquation,
    sigmoid,
    topological_order,
    value_kind,
)

_MATCH_TOL = 1e-9


def acceptance_lower_bound(gamma: float, t: float) -> float:
    """Sharp lower bound on re-scored acceptance confidence at threshold t
    for anyone whose improvement confidence is gamma."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    if not 0.0 <= t < 1.0:
        raise ValueError(f"threshold must lie in [0, 1), got {t}")
    return max(0.0, (gamma - t) / (1.0 - t))


def _branch_weights(scm: Scm, x_pre, weight_predictor) -> tuple[float, float]:
    predictor = (
        ScmOraclePredictor(scm) if weight_predictor is None else weight_predictor
    )
    w1 = float(predictor.score(x_pre))
    if not 0.0 <= w1 <= 1.0 or math.isnan(w1):
        raise ValueError(f"predictor returned a value outside [0, 1]: {w1}")
    return 1.0 - w1, w1


def _point_mass_indicator(required, abducted) -> Array:
    return (
        np.abs(np.asarray(required, float) - np.asarray(abducted, float)) <= _MATCH_TOL
    ).astype(float)


class IndividualizedPredictor:
    """h at a fixed (factual, action) pair, scoring post-recourse covariates.

    mode is one of "closed-form", "rejection", or "auto"; auto picks
    rejection when every non-intervened covariate is discrete and the exact
    route otherwise. Scores are conditional on the factual observation, the
    action, and the candidate observation jointly.
    """

    def __init__(
        self,
        scm: Scm,
        x_pre: Mapping[str, float],
        action: Action,
        mode: str = "auto",
        budget: int = 1_000_000,
        min_rate: float = 1e-4,
        target_accepted: int = 8192,
        seed: Union[int, np.random.Generator] = 0,
        weight_predictor=None,
    ):
        if mode not in ("auto", "closed-form", "rejection"):
            raise ValueError(f"unknown mode: {mode}")
        self.scm = scm
        self.x_pre = dict(x_pre)
        self.action = action
        self.budget = int(budget)
        self.min_rate = float(min_rate)
        self.target_accepted = int(target_accepted)
        self._seed = seed
        self._free = [
            c for c in scm.covariates if c not in set(action.nodes)
        ]
        discrete = all(
            value_kind(scm, c)[0] in ("binary", "categorical") for c in self._free
        )
        if mode == "auto":
            mode = "rejection" if discrete else "closed-form"
        if mode == "rejection" and not discrete:
            raise UnsupportedModelError(
                "rejection conditioning requires discrete free covariates"
            )
        self.mode = mode
        self._weights = _branch_weights(scm, self.x_pre, weight_predictor)
        self._abducted = self._abduct_branches()

    # -- shared abduction ---------------------------------------------------

    def _abduct_branches(self):
        """Per-branch noise posteriors for every non-intervened node."""
        scm, x_pre = self.scm, self.x_pre
        target = scm.target
        branches = {}
        for y_prime, weight in zip((0.0, 1.0), self._weights):
            if weight == 0.0:
                continue
            env = dict(x_pre)
            env[target] = y_prime
            posts = {}
            try:
                for node in topological_order(scm):
                    eq = scm.equations[node]
                    value = y_prime if node == target else x_pre[node]
                    posts[node] = abduct_node(eq, value, env)
                    if isinstance(posts[node], PointMass):
                        mass = eq.noise.log_mass(posts[node].value)
                        if np.any(np.isneginf(mass)):
                            raise InfeasibleObservationError(node)
            except InfeasibleObservationError:
                # the mixture weight said this branch was possible, the
                # equations disagree; treat it as weightless
                continue
            branches[y_prime] = posts
        if not branches:
            raise InfeasibleObservationError(
                "factual observation is impossible under both target states"
            )
        return branches

    # -- closed form --------------------------------------------------------

    def _branch_factor(self, posts, columns, y_post: float, n: int) -> Array:
        """P(X^post = columns, Y^post = y_post | branch noise posteriors)."""
        scm = self.scm
        target = scm.target
        do = dict(self.action.assignments)
        env: dict[str, Union[float, Array]] = {k: np.asarray(v, float) for k, v in columns.items()}
        env[target] = y_post
        factor = np.ones(n)
        for node in topological_order(scm):
            eq = scm.equations[node]
            observed = np.full(n, y_post) if node == target else env[node]
            if node in do:
                factor = factor * (np.abs(observed - do[node]) <= _MATCH_TOL)
                continue
            q = posts[node]
            if isinstance(eq, AdditiveEquation):
                required = observed - np.asarray(eq.link(env), float)
                factor = factor * _point_mass_indicator(required, q.value)
            elif isinstance(eq, XorAdditiveEquation):
                required = np.mod(observed - np.asarray(eq.link(env), float), 2.0)
                on_grid = (observed == 0.0) | (observed == 1.0)
                factor = factor * on_grid * _point_mass_indicator(required, q.value)
            elif isinstance(eq, ExogenousEquation):
                factor = factor * _point_mass_indicator(observed, q.value)
            elif isinstance(eq, SigmoidBernoulliEquation):
                p_post = np.asarray(sigmoid(eq.link(env)), float)
                up = q.mass_below(p_post)
                factor = factor * np.where(observed == 1.0, up, 1.0 - up)
                factor = factor * ((observed == 0.0) | (observed == 1.0))
            else:
                raise UnsupportedModelError(type(eq).__name__)
            if not np.any(factor > 0.0):
                break
        return factor

    def _score_closed(self, columns: Mapping[str, Array], n: int) -> Array:
        favorable = np.zeros(n)
        total = np.zeros(n)
        for y_prime, posts in self._abducted.items():
            weight = self._weights[int(y_prime)]
            for y_post in (0.0, 1.0):
                term = weight * self._branch_factor(posts, columns, y_post, n)
                total += term
                if y_post == 1.0:
                    favorable += term
        out = np.full(n, np.nan)
        reachable = total > 0.0
        out[reachable] = favorable[reachable] / total[reachable]
        if np.any(~reachable):
            raise InfeasibleObservationError(
                "candidate observation is unreachable from the factual under "
                "this action"
            )
        return out

    # -- rejection ----------------------------------------------------------

    def _score_rejection(self, row: Mapping[str, float]) -> float:
        rng = np.random.default_rng(self._seed)
        chunk = 65536
        proposed = accepted = favorable = 0
        while proposed < self.budget and accepted < self.target_accepted:
            m = min(chunk, self.budget - proposed)
            bank = build_individualized_bank(
                self.scm, self.x_pre, m, rng, weight_predictor=_Fixed(self._weights[1])
            )
            samples = push_bank(self.scm, bank, self.action)
            keep = np.ones(m, dtype=bool)
            for node in self.scm.covariates:
                keep &= np.abs(samples.columns[node] - row[node]) <= _MATCH_TOL
            proposed += m
            accepted += int(keep.sum())
            favorable += int(samples.y_post[keep].sum())
            if proposed >= 131072 and accepted / proposed < self.min_rate:
                break
        if accepted == 0 or accepted / proposed < self.min_rate:
            raise IntractableRejectionError(
                f"acceptance rate {accepted / proposed:.2e} below "
                f"{self.min_rate:.0e} after {proposed} proposals"
            )
        return favorable / accepted

    # -- public surface -----------------------------------------------------

    def score(self, x_post: Mapping[str, float]) -> float:
        missing = [c for c in self.scm.covariates if c not in x_post]
        if missing:
            raise ValueError(f"missing covariates: {missing}")
        if self.mode == "rejection":
            return self._score_rejection(x_post)
        columns = {k: np.asarray([float(x_post[k])]) for k in self.scm.covariates}
        return float(self._score_closed(columns, 1)[0])

    def score_batch(self, columns: Mapping[str, Array]) -> Array:
        missing = [c for c in self.scm.covariates if c not in columns]
        if missing:
            raise ValueError(f"missing covariates: {missing}")
        n = len(np.asarray(next(iter(columns.values()))))
        if self.mode == "rejection":
            return np.array(
                [
                    self._score_rejection({k: float(v[i]) for k, v in columns.items()})
                    for i in range(n)
                ]
            )
        return self._score_closed(columns, n)


class _Fixed:
    def __init__(self, value: float):
        self.value = value

    def score(self, values) -> float:
        return self.value


def h_star_ind(
    scm: Scm,
    x_pre: Mapping[str, float],
    action: Action,
    x_post: Mapping[str, float],
    mode: str = "auto",
    seed: Union[int, np.random.Generator] = 0,
    weight_predictor=None,
) -> float:
    """One-shot post-recourse score; see IndividualizedPredictor."""
    return IndividualizedPredictor(
        scm, x_pre, action, mode=mode, seed=seed, weight_predictor=weight_predictor
    ).score(x_post)
