"""Subpopulation post-recourse distribution: clamp what the action cannot
touch, resample everything downstream with fresh noise.

The group carrying the guarantee is every individual sharing the factual's
values on the nondescendants of the intervened set. Improvement confidence
over that group is defined only when the action intervenes on at least one
cause of the target; acceptance confidence is defined for any action.
"""

from __future__ import annotations

import math
from typing import Mapping, Union

import numpy as np

from .abduction import PosteriorSampleSet
from .errors import NotACauseError
from .scm import (
    Action,
    Array,
    ConstantEquation,
    Scm,
    causes_of_target,
    descendants,
    nondescendants,
    topological_order,
)


def intervenes_on_cause(scm: Scm, action: Action) -> bool:
    return bool(set(action.nodes) & causes_of_target(scm))


def _resampled_columns(
    scm: Scm,
    x_pre: Mapping[str, float],
    action: Action,
    M: int,
    rng: np.random.Generator,
) -> dict[str, Array]:
    target = scm.target
    intervened = dict(action.assignments)
    clamped = nondescendants(scm, set(action.nodes)) if not action.is_empty() else set(
        scm.covariates
    )
    downstream = descendants(scm, set(action.nodes)) if not action.is_empty() else set()

    columns: dict[str, Array] = {}
    for node in topological_order(scm):
        eq = scm.equations[node]
        if node in intervened:
            columns[node] = np.full(M, float(intervened[node]))
        elif node in clamped:
            columns[node] = np.full(M, float(x_pre[node]))
        elif node == target or node in downstream:
            # fresh noise: the target is redrawn even when it is not
            # downstream, as a conditional draw feeding any resampled child
            if isinstance(eq, ConstantEquation):
                columns[node] = np.full(M, float(eq.value))
            else:
                u = eq.noise.sample(rng, M)
                columns[node] = np.asarray(eq.evaluate(columns, u), dtype=float)
        else:
            raise AssertionError(f"node {node} fell through the partition")
    return columns


def sample_subpopulation_posterior(
    scm: Scm,
    x_pre: Mapping[str, float],
    action: Action,
    M: int,
    seed: Union[int, np.random.Generator],
) -> PosteriorSampleSet:
    """M draws of (x^post, y^post) for the factual's subpopulation under do(a).

    Raises NotACauseError, carrying the observational confidence at x_pre,
    when the action touches no cause of the target: the group-level
    improvement distribution is undefined there.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if not intervenes_on_cause(scm, action):
        from .predictors import scm_oracle_score

        raise NotACauseError(
            f"action on {sorted(action.nodes)} touches no cause of {scm.target}",
            observational_confidence=scm_oracle_score(scm, x_pre),
        )
    rng = np.random.default_rng(seed)
    columns = _resampled_columns(scm, x_pre, action, M, rng)
    return PosteriorSampleSet(
        x_pre=dict(x_pre), action=action, columns=columns, target=scm.target
    )


def gamma_sub(
    scm: Scm,
    x_pre: Mapping[str, float],
    action: Action,
    M: int = 1024,
    seed: Union[int, np.random.Generator] = 0,
) -> float:
    """Subpopulation improvement confidence P(Y^post = 1 | x_G, do(a))."""
    samples = sample_subpopulation_posterior(scm, x_pre, action, M, seed)
    return math.fsum(samples.y_post.tolist()) / samples.size


def eta_sub(
    scm: Scm,
    h,
    t: float,
    x_pre: Mapping[str, float],
    action: Action,
    M: int = 1024,
    seed: Union[int, np.random.Generator] = 0,
) -> float:
    """Subpopulation acceptance confidence P(h(x^post) >= t | x_G, do(a)).

    Defined for every action, cause or not; actions off the target's
    ancestry simply leave the clamped covariates in place.
    """
    if not 0.0 <= t < 1.0:
        raise ValueError("decision threshold must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    columns = _resampled_columns(scm, x_pre, action, M, rng)
    covariates = {k: v for k, v in columns.items() if k != scm.target}
    scores = np.asarray(h.score_batch(covariates))
    return math.fsum((scores >= t).astype(float).tolist()) / scores.shape[0]
