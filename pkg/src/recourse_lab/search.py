"""Recourse objectives and the constrained NSGA-II search.

Five methods share one genome encoding (mask bits over the actionable
covariates plus a value vector): plain counterfactual overrides (CE),
acceptance-targeted recourse under the deployed model (CR-ind / CR-sub), and
improvement-targeted recourse (ICR-ind / ICR-sub). Improvement methods only
ever intervene on causes of the target, so their genome simply drops every
non-cause gene.

Confidence evaluation is the hot path. Each problem owns a bank of common
random worlds (abducted noise for individualized methods, fresh noise for
subpopulation ones); a generation's new genomes are pushed through the bank
as one (genomes, worlds) array batch, and results are memoized per rounded
action so re-runs at other confidence targets cost nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Union

import numpy as np

from .abduction import build_individualized_bank, eta_ind, gamma_ind
from .errors import (
    NotACauseError,
    TargetInterventionError,
    UnknownNodeError,
    UnsupportedModelError,
)
from .post_recourse import IndividualizedPredictor, acceptance_lower_bound
from .predictors import scm_oracle_score
from .scm import (
    Action,
    Array,
    ConstantEquation,
    EMPTY_ACTION,
    Scm,
    causes_of_target,
    nondescendants,
    sample_columns,
    topological_order,
    validate_observation,
    value_kind,
)
from .subpopulation import gamma_sub as gamma_sub_estimate
from .subpopulation import intervenes_on_cause

METHODS = ("CE", "CR-ind", "CR-sub", "ICR-ind", "ICR-sub")

_FAMILY = {
    "CE": ("ce", "eta"),
    "CR-ind": ("ind", "eta"),
    "CR-sub": ("sub", "eta"),
    "ICR-ind": ("ind", "gamma"),
    "ICR-sub": ("sub", "gamma"),
}


@dataclass(frozen=True)
class CostModel:
    """Weighted absolute displacement: cost(a, x) = sum w_i |theta_i - x_i|."""

    weights: Mapping[str, float]

    def __post_init__(self):
        bad = {k: v for k, v in self.weights.items() if not v > 0.0}
        if bad:
            raise ValueError(f"cost weights must be strictly positive: {bad}")

    def cost(self, action: Action, x_pre: Mapping[str, float]) -> float:
        total = 0.0
        for node, theta in action.assignments:
            if node not in self.weights:
                raise UnknownNodeError(node)
            total += self.weights[node] * abs(theta - x_pre[node])
        return total


@dataclass(frozen=True)
class OptimizerConfig:
    population: int = 300
    generations: int = 600
    crossover_p: float = 0.3
    mutation_p: float = 0.05
    decimals: int = 1
    samples: int = 256

    def __post_init__(self):
        if self.population < 4 or self.generations < 1:
            raise ValueError("population must be >= 4 and generations >= 1")
        if not (0.0 <= self.crossover_p <= 1.0 and 0.0 <= self.mutation_p <= 1.0):
            raise ValueError("probabilities must lie in [0, 1]")


PRESETS = {
    "full-small": OptimizerConfig(population=300, generations=600),
    "full-large": OptimizerConfig(population=500, generations=1000),
    "desk": OptimizerConfig(population=100, generations=200),
}


@dataclass(frozen=True, eq=False)
class ActionSpace:
    """Search box over the actionable covariates.

    Continuous genes are bounded by the empirical range of observational
    draws and rounded to the configured decimals; binary and categorical
    genes live on their integer grids. Each continuous gene also keeps a pool
    of observed values: several bundled variables have integer-valued noise,
    so their support is a lattice that a rounded Gaussian walk almost never
    hits, and proposals resampled from the pool stay on it.
    """

    nodes: tuple[str, ...]
    kinds: tuple[str, ...]
    lows: tuple[float, ...]
    highs: tuple[float, ...]
    stds: tuple[float, ...]
    pools: tuple[Array, ...]
    decimals: int = 1

    @staticmethod
    def build(
        scm: Scm,
        actionable: tuple[str, ...],
        decimals: int = 1,
        n: int = 10_000,
        seed: int = 97,
    ) -> "ActionSpace":
        for node in actionable:
            if node not in scm.covariates:
                raise UnknownNodeError(node)
        values, _ = sample_columns(scm, n, seed)
        kinds, lows, highs, stds, pools = [], [], [], [], []
        for node in actionable:
            kind, k = value_kind(scm, node)
            kinds.append(kind)
            if kind == "binary":
                lows.append(0.0), highs.append(1.0), stds.append(1.0)
                pools.append(np.array([0.0, 1.0]))
            elif kind == "categorical":
                lows.append(0.0), highs.append(float(k - 1)), stds.append(1.0)
                pools.append(np.arange(k, dtype=float))
            else:
                col = np.round(values[node], decimals)
                lows.append(float(col.min()))
                highs.append(float(col.max()))
                stds.append(float(col.std()))
                pools.append(np.unique(col))
        return ActionSpace(
            tuple(actionable), tuple(kinds), tuple(lows), tuple(highs), tuple(stds),
            tuple(pools), decimals,
        )

    def restricted_to_causes(self, scm: Scm) -> "ActionSpace":
        causes = causes_of_target(scm)
        keep = [i for i, n in enumerate(self.nodes) if n in causes]
        pick = lambda xs: tuple(xs[i] for i in keep)
        return ActionSpace(
            pick(self.nodes), pick(self.kinds), pick(self.lows), pick(self.highs),
            pick(self.stds), pick(self.pools), self.decimals,
        )

    @property
    def size(self) -> int:
        return len(self.nodes)

    def round_values(self, values: Array) -> Array:
        out = np.asarray(values, dtype=float).copy()
        for j, kind in enumerate(self.kinds):
            col = out[..., j]
            if kind == "continuous":
                col = np.round(col, self.decimals)
            else:
                col = np.rint(col)
            out[..., j] = np.clip(col, self.lows[j], self.highs[j])
        return out

    def random_values(self, rng: np.random.Generator, size: int) -> Array:
        raw = np.empty((size, self.size))
        for j, pool in enumerate(self.pools):
            raw[:, j] = rng.choice(pool, size)
        return self.round_values(raw)


_SPACE_MEMO: dict[tuple, ActionSpace] = {}


def space_for_dataset(spec) -> ActionSpace:
    """Gene box for a bundled manifest, memoized per dataset name."""
    key = (spec.name, spec.actionable, spec.value_decimals)
    if key not in _SPACE_MEMO:
        _SPACE_MEMO[key] = ActionSpace.build(
            spec.scm, spec.actionable, decimals=spec.value_decimals
        )
    return _SPACE_MEMO[key]


def config_for_dataset(spec, samples: int = 256, **overrides) -> OptimizerConfig:
    sizes = dict(spec.optimizer_preset)
    sizes.setdefault("population", 300)
    sizes.setdefault("generations", 600)
    sizes.update(overrides)
    return OptimizerConfig(samples=samples, decimals=spec.value_decimals, **sizes)


class ConfidenceCache:
    """Memoized confidence keyed by (method, individual, rounded action).

    The (method, individual) prefix is interned to a small integer so the hot
    loop hashes short tuples only.
    """

    def __init__(self):
        self._store: dict = {}
        self._prefixes: dict = {}
        self.hits = 0
        self.misses = 0

    def prefix(self, method: str, individual_key) -> int:
        return self._prefixes.setdefault((method, individual_key), len(self._prefixes))

    def lookup(self, key):
        if key in self._store:
            self.hits += 1
            return self._store[key]
        self.misses += 1
        return None

    def store(self, key, value: float) -> None:
        self._store[key] = value

    def __len__(self) -> int:
        return len(self._store)


@dataclass
class RecourseProblem:
    """One individual's search instance: method, target, factual, model."""

    scm: Scm
    method: str
    target_confidence: float
    x_pre: Mapping[str, float]
    predictor: object
    cost_model: CostModel
    space: ActionSpace
    threshold: float = 0.5
    config: OptimizerConfig = field(default_factory=lambda: PRESETS["desk"])
    cache: Optional[ConfidenceCache] = None
    individual_key: Optional[tuple] = None
    weight_predictor: object = None
    require_rejected: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected {METHODS}")
        if not 0.5 < self.target_confidence <= 1.0:
            raise ValueError("confidence target must lie in (0.5, 1]")
        if not 0.0 <= self.threshold < 1.0:
            raise ValueError("decision threshold must lie in [0, 1)")
        validate_observation(self.scm, self.x_pre, require_all_covariates=True)
        if self.scm.target in self.x_pre:
            raise TargetInterventionError("factual must not fix the target")
        if self.require_rejected:
            score = float(self.predictor.score(self.x_pre))
            if score >= self.threshold:
                raise ValueError(
                    f"factual is already accepted (score {score:.3f} >= "
                    f"threshold {self.threshold}); recourse is moot"
                )
        if self.individual_key is None:
            self.individual_key = tuple(sorted(self.x_pre.items()))
        if self.cache is None:
            # every evaluation of this problem shares one cache, so a direct
            # confidence query after a search is a hit, not a fresh estimate
            self.cache = ConfidenceCache()

    def search_space(self) -> ActionSpace:
        if self.method.startswith("ICR"):
            return self.space.restricted_to_causes(self.scm)
        return self.space


@dataclass(frozen=True)
class Recommendation:
    method: str
    target_confidence: float
    action: Action
    cost: float
    confidence: float
    feasible: bool
    violation: float
    gamma_ind: Optional[float] = None
    gamma_sub: Optional[float] = None
    gamma_sub_is_observational: bool = False
    eta_under_h: Optional[float] = None
    eta_under_h_ind: Optional[float] = None
    acceptance_bound: Optional[float] = None


# --------------------------------------------------------------------------
# vectorized confidence kernels


def _mask_tables(scm: Scm, nodes: tuple[str, ...]):
    """For every subset of the actionable nodes: which covariates stay
    clamped, and whether the subset touches a cause of the target."""
    covariates = scm.covariates
    causes = causes_of_target(scm)
    B = len(nodes)
    clamp = np.zeros((1 << B, len(covariates)), dtype=bool)
    is_cause = np.zeros(1 << B, dtype=bool)
    col = {c: i for i, c in enumerate(covariates)}
    for code in range(1 << B):
        chosen = {nodes[j] for j in range(B) if code >> j & 1}
        if not chosen:
            clamp[code, :] = True
        else:
            for c in nondescendants(scm, chosen):
                clamp[code, col[c]] = True
        is_cause[code] = bool(chosen & causes)
    return clamp, is_cause


class _Evaluator:
    """Batched confidence evaluation with common random worlds.

    Worlds are drawn lazily on the first cache miss, so fully-cached queries
    trigger no sampling at all.
    """

    def __init__(self, problem: RecourseProblem, seed):
        self._rng = np.random.default_rng(seed)
        self.problem = problem
        self.space = problem.search_space()
        self.kind, self.measure = _FAMILY[problem.method]
        self._col_index = {n: j for j, n in enumerate(self.space.nodes)}
        self._worlds = None
        if self.kind == "sub":
            self.clamp_table, self.cause_table = _mask_tables(
                problem.scm, self.space.nodes
            )
            self.baseline = scm_oracle_score(problem.scm, problem.x_pre)
        self.cache = problem.cache
        self._prefix = self.cache.prefix(problem.method, problem.individual_key)
        self._pow2 = 1 << np.arange(self.space.size)

    def _common_worlds(self):
        if self._worlds is None:
            problem, scm = self.problem, self.problem.scm
            M = problem.config.samples
            if self.kind == "ind":
                self._worlds = build_individualized_bank(
                    scm, problem.x_pre, M, self._rng,
                    weight_predictor=problem.weight_predictor,
                ).noise
            else:
                self._worlds = {
                    node: scm.equations[node].noise.sample(self._rng, M)
                    for node in topological_order(scm)
                    if not isinstance(scm.equations[node], ConstantEquation)
                }
        return self._worlds

    # -- genome plumbing ----------------------------------------------------

    def actions(self, masks: Array, values: Array) -> list[Action]:
        out = []
        for bits, theta in zip(masks, values):
            out.append(
                Action.of(
                    {
                        node: float(theta[j])
                        for j, node in enumerate(self.space.nodes)
                        if bits[j]
                    }
                )
            )
        return out

    def validity(self, masks: Array) -> Array:
        """Whether each genome is admissible as a recourse result. Group
        improvement confidence is undefined off the target's ancestry (the
        reported number is the observational score), so such genomes never
        count as feasible."""
        if self.kind == "sub" and self.measure == "gamma":
            return self.cause_table[masks @ self._pow2]
        return np.ones(masks.shape[0], dtype=bool)

    def confidences(self, masks: Array, values: Array) -> Array:
        """Memoized batch evaluation; one vectorized pass per unique miss.

        Keys encode the rounded action numerically (mask bit-code + the bytes
        of the masked values), equivalent to the nominal
        (method, individual, rounded action) key but cheap to hash.
        """
        G = masks.shape[0]
        codes = masks @ self._pow2
        # zeroing unmasked genes (and +0.0 to kill negative zeros) makes the
        # byte encoding a function of the action alone
        masked_values = np.where(masks, values, 0.0) + 0.0
        out = np.full(G, np.nan)
        fresh: dict[tuple, list[int]] = {}
        lookup, prefix = self.cache.lookup, self._prefix
        for i in range(G):
            key = (prefix, int(codes[i]), masked_values[i].tobytes())
            hit = lookup(key)
            if hit is not None:
                out[i] = hit
            else:
                fresh.setdefault(key, []).append(i)
        if fresh:
            rows = [idx[0] for idx in fresh.values()]
            confs = self._evaluate_batch(masks[rows], values[rows])
            for key, conf in zip(fresh.keys(), confs):
                self.cache.store(key, float(conf))
                for i in fresh[key]:
                    out[i] = conf
        return out

    # -- kernels ------------------------------------------------------------

    def _evaluate_batch(self, masks: Array, values: Array) -> Array:
        if self.kind == "ce":
            return self._ce(masks, values)
        columns = self._push(masks, values)
        scm = self.problem.scm
        if self.measure == "gamma":
            conf = columns[scm.target].mean(axis=1)
            if self.kind == "sub":
                codes = masks @ (1 << np.arange(masks.shape[1]))
                conf = np.where(self.cause_table[codes], conf, self.baseline)
            return conf
        covs = {k: v for k, v in columns.items() if k != scm.target}
        scores = np.asarray(self.problem.predictor.score_batch(covs))
        return (scores >= self.problem.threshold).mean(axis=1)

    def _ce(self, masks: Array, values: Array) -> Array:
        problem = self.problem
        cols = {}
        for node in problem.scm.covariates:
            j = self._col_index.get(node)
            base = np.full(masks.shape[0], float(problem.x_pre[node]))
            if j is None:
                cols[node] = base
            else:
                cols[node] = np.where(masks[:, j], values[:, j], base)
        scores = np.asarray(problem.predictor.score_batch(cols))
        return (scores >= problem.threshold).astype(float)

    def _push(self, masks: Array, values: Array) -> dict[str, Array]:
        """Evaluate the per-genome intervened model over the common worlds."""
        problem = self.problem
        scm = problem.scm
        G = masks.shape[0]
        M = problem.config.samples
        sub = self.kind == "sub"
        noise = self._common_worlds()
        if sub:
            codes = masks @ (1 << np.arange(masks.shape[1]))
            clamp = self.clamp_table[codes]  # (G, n_covariates)
        cov_index = {c: i for i, c in enumerate(scm.covariates)}
        env: dict[str, Array] = {}
        for node in topological_order(scm):
            eq = scm.equations[node]
            if isinstance(eq, ConstantEquation):
                computed = np.full((G, M), float(eq.value))
            else:
                computed = np.broadcast_to(
                    np.asarray(eq.evaluate(env, noise[node][None, :]), float), (G, M)
                )
            if node == scm.target:
                env[node] = computed
                continue
            j = self._col_index.get(node)
            is_do = masks[:, j][:, None] if j is not None else np.zeros((G, 1), bool)
            theta = values[:, j][:, None] if j is not None else np.zeros((G, 1))
            if sub:
                clamped = clamp[:, cov_index[node]][:, None]
                resting = np.where(clamped, float(problem.x_pre[node]), computed)
            else:
                resting = computed
            env[node] = np.where(is_do, theta, resting)
        return env


def problem_for_dataset(
    spec,
    method: str,
    target_confidence: float,
    x_pre: Mapping[str, float],
    predictor,
    config: Optional[OptimizerConfig] = None,
    cache: Optional[ConfidenceCache] = None,
    threshold: float = 0.5,
    weight_predictor=None,
    require_rejected: bool = True,
) -> RecourseProblem:
    """Wire a search instance from a bundled manifest: cost weights,
    actionable set, gene bounds, and preset optimizer sizes."""
    return RecourseProblem(
        scm=spec.scm,
        method=method,
        target_confidence=target_confidence,
        x_pre=x_pre,
        predictor=predictor,
        cost_model=CostModel(dict(spec.cost_weights)),
        space=space_for_dataset(spec),
        threshold=threshold,
        config=config if config is not None else config_for_dataset(spec),
        cache=cache,
        weight_predictor=weight_predictor,
        require_rejected=require_rejected,
    )


def evaluate_confidence(
    problem: RecourseProblem,
    action: Action,
    seed: Union[int, np.random.Generator] = 0,
) -> float:
    """Confidence of one action under the problem's method.

    The action is rounded to the configured decimals first (cache discipline
    applies to direct queries too). Improvement methods reject masks that
    leave the target's ancestry.
    """
    space = problem.space
    for node in action.nodes:
        if node not in space.nodes:
            if node == problem.scm.target:
                raise TargetInterventionError("actions cannot set the target")
            raise ValueError(f"{node!r} is not an actionable covariate")
    if problem.method.startswith("ICR"):
        causes = causes_of_target(problem.scm)
        stray = sorted(set(action.nodes) - causes)
        if stray:
            raise NotACauseError(
                f"improvement-targeted actions may only touch causes of "
                f"{problem.scm.target}; {stray} are not causes",
                observational_confidence=scm_oracle_score(problem.scm, problem.x_pre),
            )
    evaluator = _Evaluator(problem, seed)
    masks = np.zeros((1, evaluator.space.size), dtype=bool)
    values = np.zeros((1, evaluator.space.size))
    for node, theta in action.assignments:
        j = evaluator._col_index[node]
        masks[0, j] = True
        values[0, j] = theta
    values = evaluator.space.round_values(values)
    return float(evaluator.confidences(masks, values)[0])


# --------------------------------------------------------------------------
# NSGA-II


def _ranking_keys(conf: Array, cost: Array, target: float, valid=None):
    """Constrained domination collapses to a total preorder here: feasible
    individuals sort by cost, infeasible ones sort by violation after every
    feasible individual."""
    feasible = conf >= target
    if valid is not None:
        feasible = feasible & valid
    violation = np.where(feasible, 0.0, target - conf)
    primary = np.where(feasible, cost, violation)
    return feasible, violation, primary


def _tournament(
    rng: np.random.Generator, feasible: Array, primary: Array, n: int
) -> Array:
    a = rng.integers(0, feasible.shape[0], n)
    b = rng.integers(0, feasible.shape[0], n)
    a_key = np.stack([~feasible[a], primary[a]], axis=1)
    b_key = np.stack([~feasible[b], primary[b]], axis=1)
    better_b = (b_key[:, 0] < a_key[:, 0]) | (
        (b_key[:, 0] == a_key[:, 0]) & (b_key[:, 1] < a_key[:, 1])
    )
    return np.where(better_b, b, a)


def optimize(
    problem: RecourseProblem,
    seed: Union[int, np.random.Generator] = 0,
    annotate: bool = True,
) -> Recommendation:
    """Constrained NSGA-II over (mask, values) genomes; deterministic per seed.

    Returns the cheapest feasible action found, or the least-violating
    candidate flagged infeasible. Infeasibility is a result, not an error.
    annotate=False skips the complementary-estimates panel (harness loops
    recompute their own observed rates and don't need it).
    """
    rng = np.random.default_rng(seed)
    evaluator = _Evaluator(problem, rng)
    space = evaluator.space
    cfg = problem.config
    target = problem.target_confidence
    B = space.size

    if B == 0:
        # improvement method on a model whose causes are all non-actionable:
        # the empty action is the entire search space
        return _finish(problem, EMPTY_ACTION, _empty_confidence(problem), rng, annotate)

    x_vec = np.array([problem.x_pre[n] for n in space.nodes])
    w_vec = np.array([problem.cost_model.weights[n] for n in space.nodes])
    stds = np.array(space.stds)

    N = cfg.population
    masks = rng.random((N, B)) < 0.5
    values = space.random_values(rng, N)
    conf = evaluator.confidences(masks, values)
    valid = evaluator.validity(masks)
    cost = (masks * w_vec * np.abs(values - x_vec)).sum(axis=1)
    champion = _champion(evaluator, None, masks, values, conf, cost, target)

    for _ in range(cfg.generations):
        feasible, violation, primary = _ranking_keys(conf, cost, target, valid)
        parent_idx = _tournament(rng, feasible, primary, 2 * N)
        pa, pb = parent_idx[:N], parent_idx[N:]
        child_masks = masks[pa].copy()
        child_values = values[pa].copy()
        # uniform crossover on a fraction of the pairs
        crossing = rng.random(N) < cfg.crossover_p
        swap = (rng.random((N, B)) < 0.5) & crossing[:, None]
        child_masks[swap] = masks[pb][swap]
        child_values[swap] = values[pb][swap]
        # mask bit flips
        flips = rng.random((N, B)) < cfg.mutation_p
        child_masks ^= flips
        # value mutation: grid genes resample from their level set; continuous
        # genes get a Gaussian nudge half the time and a pool resample the
        # other half (lattice-valued supports are unreachable by nudging)
        mutate = rng.random((N, B)) < cfg.mutation_p
        noise = rng.normal(0.0, 1.0, (N, B)) * stds
        resample = space.random_values(rng, N)
        nudge = rng.random((N, B)) < 0.5
        for j, kind in enumerate(space.kinds):
            if kind == "continuous":
                proposal = np.where(
                    nudge[:, j], child_values[:, j] + noise[:, j], resample[:, j]
                )
            else:
                proposal = resample[:, j]
            child_values[:, j] = np.where(mutate[:, j], proposal, child_values[:, j])
        child_values = space.round_values(child_values)
        child_conf = evaluator.confidences(child_masks, child_values)
        child_cost = (child_masks * w_vec * np.abs(child_values - x_vec)).sum(axis=1)
        champion = _champion(
            evaluator, champion, child_masks, child_values, child_conf, child_cost,
            target,
        )

        masks = np.concatenate([masks, child_masks])
        values = np.concatenate([values, child_values])
        conf = np.concatenate([conf, child_conf])
        valid = np.concatenate([valid, evaluator.validity(child_masks)])
        cost = np.concatenate([cost, child_cost])
        feasible, violation, primary = _ranking_keys(conf, cost, target, valid)
        order = np.lexsort((np.arange(2 * N), primary, ~feasible))
        keep = order[:N]
        masks, values, conf, cost = masks[keep], values[keep], conf[keep], cost[keep]
        valid = valid[keep]

    action, best_conf = champion[1], champion[2]
    return _finish(problem, action, best_conf, rng, annotate)


def _champion(evaluator, current, masks, values, conf, cost, target):
    """Best genome ever evaluated. Feasible genomes beat infeasible ones;
    ties break deterministically by cost, then higher estimated confidence,
    then mask names, then value vector. Confidence outranks the name order:
    equally cheap actions are not equally robust, and returning the one with
    more margin keeps realized acceptance in line with the estimate.

    A vectorized screen drops rows that cannot beat the incumbent (including
    exact copies of it, which converged populations are full of) before any
    per-genome work happens.
    """
    best = current
    feasible = (conf >= target) & evaluator.validity(masks)
    codes = masks @ evaluator._pow2
    masked_values = np.where(masks, values, 0.0) + 0.0
    if best is None:
        could_win = np.ones(masks.shape[0], dtype=bool)
    else:
        (flag, primary, *_), code0, row0 = best[0], best[3], best[4]
        same = (codes == code0) & (masked_values == row0).all(axis=1)
        if flag == 0:
            could_win = feasible & (cost <= primary) & ~same
        else:
            could_win = (feasible | (target - conf <= primary)) & ~same
    for i in np.flatnonzero(could_win):
        action = Action.of(
            {
                node: float(values[i, j])
                for j, node in enumerate(evaluator.space.nodes)
                if masks[i, j]
            }
        )
        key = (
            0 if feasible[i] else 1,
            cost[i] if feasible[i] else target - conf[i],
            cost[i],
            -conf[i],
            tuple(sorted(action.nodes)),
            tuple(v for _, v in action.assignments),
        )
        if best is None or key < best[0]:
            best = (key, action, float(conf[i]), int(codes[i]), masked_values[i].copy())
    return best


def _empty_confidence(problem: RecourseProblem) -> float:
    if problem.method == "CE":
        return float(problem.predictor.score(problem.x_pre) >= problem.threshold)
    return scm_oracle_score(problem.scm, problem.x_pre)


def _action_admissible(problem: RecourseProblem, action: Action) -> bool:
    # group improvement is undefined off the target's ancestry; everything
    # else accepts any action, including the empty one
    if _FAMILY[problem.method] == ("sub", "gamma"):
        return intervenes_on_cause(problem.scm, action)
    return True


def _finish(
    problem: RecourseProblem, action: Action, confidence: float, rng, annotate: bool
) -> Recommendation:
    feasible = confidence >= problem.target_confidence and _action_admissible(
        problem, action
    )
    violation = 0.0 if feasible else max(0.0, problem.target_confidence - confidence)
    rec = Recommendation(
        method=problem.method,
        target_confidence=problem.target_confidence,
        action=action,
        cost=problem.cost_model.cost(action, problem.x_pre),
        confidence=confidence,
        feasible=bool(feasible),
        violation=float(violation),
    )
    return annotate_recommendation(problem, rec, rng) if annotate else rec


def annotate_recommendation(
    problem: RecourseProblem,
    rec: Recommendation,
    seed: Union[int, np.random.Generator] = 0,
) -> Recommendation:
    """Fill in the complementary confidence panel for a recommendation."""
    extras = _complementary_estimates(problem, rec.action, np.random.default_rng(seed))
    return replace(rec, **extras)


def confidence_panel(
    problem: RecourseProblem,
    action: Action,
    seed: Union[int, np.random.Generator] = 0,
) -> dict:
    """Method-agnostic what-if panel for an arbitrary candidate action.

    Values are rounded to the problem's decimals first; the returned dict
    carries the canonical action alongside both improvement confidences, the
    two acceptance readings, the guarantee bound, and the action's cost.
    Actions off the target's ancestry report observational gamma fields with
    the marker set instead of failing.
    """
    space = problem.space
    for node in action.nodes:
        if node not in space.nodes:
            if node == problem.scm.target:
                raise TargetInterventionError("actions cannot set the target")
            raise ValueError(f"{node!r} is not an actionable covariate")
    index = {node: j for j, node in enumerate(space.nodes)}
    row = np.zeros((1, space.size))
    for node, theta in action.assignments:
        row[0, index[node]] = theta
    row = space.round_values(row)
    canonical = Action.of(
        {node: float(row[0, index[node]]) for node in action.nodes}
    )
    extras = _complementary_estimates(
        problem, canonical, np.random.default_rng(seed)
    )
    extras["action"] = canonical
    extras["cost"] = problem.cost_model.cost(canonical, problem.x_pre)
    return extras


def _complementary_estimates(problem: RecourseProblem, action: Action, rng) -> dict:
    """The full confidence panel for one action, at 4x the search samples."""
    scm, x_pre = problem.scm, problem.x_pre
    M = 4 * problem.config.samples
    h = problem.predictor
    t = problem.threshold
    observational = not intervenes_on_cause(scm, action)
    if observational:
        # off the target's ancestry the post-action target equals the factual
        # one, so both improvement readings reduce to the observational score
        g_ind = g_sub = scm_oracle_score(scm, x_pre)
    else:
        g_ind = gamma_ind(
            scm, x_pre, action, M=M, seed=rng,
            weight_predictor=problem.weight_predictor,
        )
        g_sub = gamma_sub_estimate(scm, x_pre, action, M=M, seed=rng)
    e_h = eta_ind(
        scm, h, t, x_pre, action, M=M, seed=rng,
        weight_predictor=problem.weight_predictor,
    )
    try:
        rescorer = IndividualizedPredictor(
            scm, x_pre, action, mode="closed-form",
            weight_predictor=problem.weight_predictor,
        )
        samples = _posterior_for_rescoring(problem, action, M, rng)
        rescored = rescorer.score_batch(samples)
        e_h_ind = float(np.mean(rescored >= t))
    except UnsupportedModelError:
        e_h_ind = None
    return {
        "gamma_ind": g_ind,
        "gamma_sub": g_sub,
        "gamma_sub_is_observational": observational,
        "eta_under_h": e_h,
        "eta_under_h_ind": e_h_ind,
        "acceptance_bound": acceptance_lower_bound(max(0.0, min(1.0, g_ind)), t),
    }


def _posterior_for_rescoring(problem, action, M, rng):
    from .abduction import sample_individualized_posterior

    samples = sample_individualized_posterior(
        problem.scm, problem.x_pre, action, M, rng,
        weight_predictor=problem.weight_predictor,
    )
    return samples.covariate_columns()
