"""Subpopulation sampler: clamping, resampling, and the group estimators."""

import math

import numpy as np
import pytest

from recourse_lab.abduction import gamma_ind
from recourse_lab.datasets import load_dataset
from recourse_lab.errors import NotACauseError
from recourse_lab.predictors import ScmOraclePredictor, bayes_logistic_reference
from recourse_lab.scm import (
    EMPTY_ACTION,
    Action,
    AdditiveEquation,
    CausalGraph,
    ExogenousEquation,
    LinearLink,
    Normal,
    Scm,
    SigmoidBernoulliEquation,
    nondescendants,
    sample_observational,
)
from recourse_lab.subpopulation import (
    eta_sub,
    gamma_sub,
    intervenes_on_cause,
    sample_subpopulation_posterior,
)

from oracles import e1


def mc_tol(p: float, m: int, slack: float = 1e-3) -> float:
    return 4.0 * math.sqrt(max(p * (1.0 - p), 1e-6) / m) + slack


def e1_factual(v, s):
    return {"V": float(v), "S": float(s)}


@pytest.mark.parametrize(
    "name,action",
    [
        ("3var-causal", {"X1": 1.0}),
        ("3var-causal", {"X2": 0.5}),
        ("3var-noncausal", {"X2": -1.0}),
        ("7var-covid", {"V_C": 3.0}),
        ("7var-covid", {"D": 1.0, "V_I": 1.0}),
        ("5var-skill", {"E": 4.0}),
    ],
)
def test_nondescendants_are_clamped_exactly(name, action):
    spec = load_dataset(name)
    row = sample_observational(spec.scm, 1, seed=2)[0]
    x_pre = {k: v for k, v in row.items() if k != spec.scm.target}
    samples = sample_subpopulation_posterior(
        spec.scm, x_pre, Action.of(action), M=128, seed=3
    )
    clamped = nondescendants(spec.scm, set(action))
    for node in clamped:
        np.testing.assert_array_equal(samples.columns[node], x_pre[node])
    for node, value in action.items():
        np.testing.assert_array_equal(samples.columns[node], value)


def test_descendants_are_actually_resampled():
    spec = load_dataset("3var-causal")
    x_pre = {"X1": 0.0, "X2": 0.0, "X3": 0.0}
    samples = sample_subpopulation_posterior(
        spec.scm, x_pre, Action.of({"X1": 1.0}), M=256, seed=4
    )
    # X2 = 1 + fresh U2: spread close to a unit Gaussian, not a constant
    assert samples.columns["X2"].std() > 0.7
    assert samples.columns["X2"].mean() == pytest.approx(1.0, abs=0.3)


@pytest.mark.parametrize("v,s", [(0, 0), (0, 1), (1, 0), (1, 1)])
@pytest.mark.parametrize("do", [{"V": 0}, {"V": 1}, {"V": 1, "S": 1}])
def test_gamma_sub_matches_enumeration(v, s, do):
    scm = load_dataset("covid-admission-e1").scm
    exact = e1.gamma_sub({"V": v, "S": s}, do)
    M = 8192
    est = gamma_sub(scm, e1_factual(v, s), Action.of(do), M=M, seed=50 + v * 2 + s)
    assert est == pytest.approx(exact, abs=mc_tol(exact, M)), do


@pytest.mark.parametrize("do", [{}, {"S": 0}, {"S": 1}])
def test_non_cause_actions_raise_with_observational_confidence(do):
    scm = load_dataset("covid-admission-e1").scm
    x = e1_factual(0, 0)
    action = Action.of(do)
    assert not intervenes_on_cause(scm, action)
    with pytest.raises(NotACauseError) as err:
        gamma_sub(scm, x, action, M=16, seed=0)
    assert err.value.observational_confidence == pytest.approx(
        9.0 / 1738.0, abs=1e-12
    )
    with pytest.raises(NotACauseError):
        sample_subpopulation_posterior(scm, x, action, M=16, seed=0)


@pytest.mark.parametrize("v,s", [(0, 0), (1, 0), (0, 1)])
@pytest.mark.parametrize("do", [{}, {"S": 1}, {"V": 1}, {"V": 1, "S": 1}])
def test_eta_sub_matches_enumeration_even_off_the_causes(v, s, do):
    scm = load_dataset("covid-admission-e1").scm
    h = bayes_logistic_reference(scm)
    exact = e1.eta_sub({"V": v, "S": s}, do, lambda r: h.score(r), 0.5)
    M = 8192
    est = eta_sub(scm, h, 0.5, e1_factual(v, s), Action.of(do), M=M, seed=60 + v)
    assert est == pytest.approx(exact, abs=mc_tol(exact, M)), do


def test_eta_sub_on_clamp_only_action_is_an_indicator():
    """do(S=1) clamps V and fixes S, so eta is exactly [h(V, 1) >= t]."""
    scm = load_dataset("covid-admission-e1").scm
    h = bayes_logistic_reference(scm)
    for v in (0, 1):
        est = eta_sub(scm, h, 0.5, e1_factual(v, 0), Action.of({"S": 1.0}), M=32, seed=1)
        assert est == 1.0
    est = eta_sub(scm, h, 0.5, e1_factual(0, 0), EMPTY_ACTION, M=32, seed=1)
    assert est == 0.0  # h(0, 0) is far below the threshold


FROZEN_SUBPOP = [
    ({"X1": 1.0}, 0.919284200326),
    ({"X1": 1.0, "X2": 1.0}, 0.971896015698),
]


@pytest.mark.parametrize("do,exact", FROZEN_SUBPOP)
def test_gamma_sub_matches_quadrature_constants(do, exact):
    scm = load_dataset("3var-causal").scm
    x = {"X1": -0.3, "X2": 0.2, "X3": 0.4}  # irrelevant once all clamps vanish
    M = 16384
    est = gamma_sub(scm, x, Action.of(do), M=M, seed=71)
    assert est == pytest.approx(exact, abs=mc_tol(exact, M))


def test_gamma_sub_uses_the_clamped_covariates():
    from oracles import linear_gaussian

    scm = load_dataset("3var-causal").scm
    M = 16384
    for i, (x, do) in enumerate(
        [
            ({"X1": 0.8, "X2": -0.2, "X3": 0.1}, {"X2": 1.0}),
            ({"X1": 0.8, "X2": -0.2, "X3": 0.1}, {"X3": 2.0}),
            ({"X1": -1.0, "X2": 0.5, "X3": 0.0}, {"X2": 0.0, "X3": 0.0}),
        ]
    ):
        exact = linear_gaussian.causal_gamma_sub(x, do)
        est = gamma_sub(scm, x, Action.of(do), M=M, seed=80 + i)
        assert est == pytest.approx(exact, abs=mc_tol(exact, M)), do


def test_tower_property_on_the_chain():
    """Averaging individualized confidence over the observational population
    reproduces the subpopulation confidence when nothing is clamped."""
    scm = load_dataset("covid-admission-e1").scm
    do = Action.of({"V": 1.0})
    marginal = {
        (v, s): sum(
            w
            for noise, w in e1.noise_configurations()
            if e1.forward(noise, {})["V"] == v and e1.forward(noise, {})["S"] == s
        )
        for v in (0, 1)
        for s in (0, 1)
    }
    expected = sum(
        p * e1.gamma_ind({"V": v, "S": s}, {"V": 1}) for (v, s), p in marginal.items()
    )
    assert expected == pytest.approx(0.91, abs=1e-12)
    M = 16384
    est = gamma_sub(scm, e1_factual(0, 0), do, M=M, seed=90)
    assert est == pytest.approx(expected, abs=mc_tol(expected, M))
    # and the individualized estimate for one stratum genuinely differs
    gi = gamma_ind(scm, e1_factual(1, 0), do, M=M, seed=91)
    assert abs(gi - expected) > 0.4


def _latent_target_scm() -> Scm:
    """A -> C <- Y with Y upstream of nothing the action touches."""
    graph = CausalGraph(
        nodes=("A", "Y", "C"),
        edges=(("A", "C"), ("Y", "C")),
        target="Y",
    )
    equations = {
        "A": ExogenousEquation(noise=Normal(0.0, 1.0)),
        "Y": SigmoidBernoulliEquation(link=LinearLink(0.0, ())),
        "C": AdditiveEquation(
            link=LinearLink(0.0, (("A", 1.0), ("Y", 2.0))), noise=Normal(0.0, 0.5)
        ),
    }
    return Scm(graph=graph, equations=equations)


def test_latent_target_is_resampled_for_downstream_children():
    """When the intervened set reaches a child of the target but not the
    target itself, the child's redraw must marginalize over a fresh target."""
    scm = _latent_target_scm()
    x_pre = {"A": 0.0, "C": 2.1}
    action = Action.of({"A": 1.0})
    assert not intervenes_on_cause(scm, action)
    with pytest.raises(NotACauseError):
        gamma_sub(scm, x_pre, action, M=64, seed=5)

    class OnC:
        def score_batch(self, columns):
            return 1.0 / (1.0 + np.exp(-(np.asarray(columns["C"]) - 2.0)))

    M = 20000
    est = eta_sub(scm, OnC(), 0.5, x_pre, action, M=M, seed=6)
    # C^post = 1 + 2*Bern(0.5) + N(0, 0.5): P(C >= 2) = 0.5*P(N>=1)+0.5*P(N>=-1)
    from scipy.stats import norm

    exact = 0.5 * norm.sf(1.0, scale=0.5) + 0.5 * norm.sf(-1.0, scale=0.5)
    assert est == pytest.approx(exact, abs=mc_tol(exact, M))


def test_determinism_and_validation():
    scm = load_dataset("covid-admission-e1").scm
    a = gamma_sub(scm, e1_factual(0, 0), Action.of({"V": 1.0}), M=512, seed=7)
    b = gamma_sub(scm, e1_factual(0, 0), Action.of({"V": 1.0}), M=512, seed=7)
    assert a == b
    with pytest.raises(ValueError):
        sample_subpopulation_posterior(
            scm, e1_factual(0, 0), Action.of({"V": 1.0}), M=0, seed=1
        )
    h = ScmOraclePredictor(scm)
    with pytest.raises(ValueError):
        eta_sub(scm, h, -0.1, e1_factual(0, 0), EMPTY_ACTION, M=8, seed=1)
