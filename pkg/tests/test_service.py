"""HTTP facade: sessions, evaluation panels, recommendations, and the
transport-adds-nothing equality with direct library calls."""

import json
from importlib import resources

import pytest
from fastapi.testclient import TestClient

import recourse_lab.service as service_module
from recourse_lab.datasets import list_datasets, load_dataset
from recourse_lab.experiment import deployed_predictor
from recourse_lab.predictors import scm_oracle_score
from recourse_lab.scm import Action
from recourse_lab.search import (
    PRESETS,
    config_for_dataset,
    confidence_panel,
    optimize,
    problem_for_dataset,
)
from recourse_lab.service import create_app, sig6

E1 = "covid-admission-e1"
E1_REJECTED = {"V": 0.0, "S": 0.0}


@pytest.fixture()
def client():
    return TestClient(create_app())


def make_session(client, dataset=E1, **body):
    r = client.post("/sessions", json={"dataset": dataset, **body})
    assert r.status_code == 201, r.text
    return r.json()


# --------------------------------------------------------------------------
# plumbing


def test_healthz(client):
    r = client.get("/healthz")
    assert r.status_code == 200
    assert r.text == "ok"


def test_datasets_listing_is_stable(client):
    first = client.get("/datasets")
    second = client.get("/datasets")
    assert first.status_code == 200
    assert first.json() == second.json()
    names = [d["name"] for d in first.json()]
    assert names == list(list_datasets())
    assert len(names) == 5


def test_seven_var_descriptor_shape(client):
    desc = {d["name"]: d for d in client.get("/datasets").json()}["7var-covid"]
    assert len(desc["covariates"]) == 7
    assert desc["target"] not in desc["covariates"]
    assert set(desc["actionable"]) <= set(desc["covariates"])
    assert set(desc["causes"]) <= set(desc["covariates"])
    for node in desc["actionable"]:
        assert "low" in desc["domains"][node]


def test_descriptor_edges_mirror_the_manifest(client):
    listed = {d["name"]: d for d in client.get("/datasets").json()}
    for name in list_datasets():
        doc = json.loads(
            resources.files("recourse_lab")
            .joinpath("data", f"{name}.json")
            .read_text(encoding="utf-8")
        )
        want = [
            [parent, node["id"]]
            for node in doc["nodes"]
            for parent in node.get("parents", [])
        ]
        assert listed[name]["edges"] == want


# --------------------------------------------------------------------------
# sessions


def test_sampled_factual_is_rejected(client):
    body = make_session(client, seed=11)
    assert body["score"] < body["threshold"]
    # the fitted admission rule accepts anyone with symptoms present
    assert body["factual"]["S"] == 0.0
    assert body["predictor"] == "logistic"


def test_same_seed_same_factual(client):
    a = make_session(client, dataset="7var-covid", seed=42)
    b = make_session(client, dataset="7var-covid", seed=42)
    assert a["factual"] == b["factual"]
    assert a["id"] != b["id"]
    c = make_session(client, dataset="7var-covid", seed=43)
    assert c["factual"] != a["factual"]


def test_provided_factual_round_trips(client):
    body = make_session(client, factual=E1_REJECTED, seed=1)
    assert body["factual"] == E1_REJECTED


def test_unknown_dataset_404(client):
    r = client.post("/sessions", json={"dataset": "no-such"})
    assert r.status_code == 404
    assert "unknown dataset" in r.json()["detail"]


def test_invalid_factual_422(client):
    r = client.post("/sessions", json={"dataset": E1,
                                       "factual": {"V": 2.0, "S": 0.0}})
    assert r.status_code == 422
    r = client.post("/sessions", json={"dataset": E1, "factual": {"V": 0.0}})
    assert r.status_code == 422
    assert "missing" in r.json()["detail"]


def test_accepted_factual_409(client):
    r = client.post("/sessions", json={"dataset": E1,
                                       "factual": {"V": 0.0, "S": 1.0}})
    assert r.status_code == 409
    detail = r.json()["detail"]
    assert detail["score"] >= detail["threshold"]
    assert "accepted" in detail["message"]


def test_sessions_expire_after_ttl():
    now = [0.0]
    app = create_app(ttl_seconds=100.0, clock=lambda: now[0])
    client = TestClient(app)
    sid = make_session(client, factual=E1_REJECTED, seed=1)["id"]
    now[0] = 99.0
    assert client.post(f"/sessions/{sid}/evaluate",
                       json={"action": {}}).status_code == 200
    now[0] = 201.0
    assert client.post(f"/sessions/{sid}/evaluate",
                       json={"action": {}}).status_code == 404


def test_unknown_session_404(client):
    assert client.post("/sessions/deadbeef/evaluate",
                       json={"action": {}}).status_code == 404
    assert client.post("/sessions/deadbeef/recommend",
                       json={"method": "CE", "confidence": 0.9}).status_code == 404


# --------------------------------------------------------------------------
# evaluate


@pytest.fixture()
def e1_session(client):
    return make_session(client, factual=E1_REJECTED, seed=5)


def test_evaluate_cause_flip(client, e1_session):
    r = client.post(f"/sessions/{e1_session['id']}/evaluate",
                    json={"action": {"V": 1}})
    assert r.status_code == 200
    body = r.json()
    assert body["action"] == {"V": 1.0}
    assert body["cost"] == 0.5
    assert body["gamma_sub"] == pytest.approx(0.91, abs=0.03)
    assert body["gamma_sub_is_observational"] is False
    assert body["eta_under_h"] == 1.0
    assert body["acceptance_bound"] > 0.8


def test_evaluate_non_cause_reports_observational_gamma(client, e1_session):
    r = client.post(f"/sessions/{e1_session['id']}/evaluate",
                    json={"action": {"S": 1}})
    body = r.json()
    spec = load_dataset(E1)
    h_star = sig6(scm_oracle_score(spec.scm, E1_REJECTED))
    assert body["gamma_sub_is_observational"] is True
    assert body["gamma_ind"] == h_star
    assert body["gamma_sub"] == h_star
    assert body["eta_under_h"] == 1.0  # the deployed rule accepts S=1
    assert body["eta_under_h_ind"] == 0.0
    assert body["cost"] == 0.1


def test_evaluate_empty_action(client, e1_session):
    body = client.post(f"/sessions/{e1_session['id']}/evaluate",
                       json={"action": {}}).json()
    spec = load_dataset(E1)
    h_star = sig6(scm_oracle_score(spec.scm, E1_REJECTED))
    assert body["gamma_ind"] == h_star
    assert body["gamma_sub"] == h_star
    assert body["cost"] == 0.0


def test_evaluate_seed_discipline(client, e1_session):
    url = f"/sessions/{e1_session['id']}/evaluate"
    first = client.post(url, json={"action": {"V": 1}}).json()
    second = client.post(url, json={"action": {"V": 1}}).json()
    assert first == second


def test_evaluate_rejects_bad_actions(client, e1_session):
    url = f"/sessions/{e1_session['id']}/evaluate"
    assert client.post(url, json={"action": {"Y": 1}}).status_code == 422
    assert client.post(url, json={"action": {"Q": 1}}).status_code == 422
    assert client.post(url, json={"action": {"V": "high"}}).status_code == 422


def test_evaluate_matches_library(client, e1_session):
    body = client.post(f"/sessions/{e1_session['id']}/evaluate",
                       json={"action": {"V": 1}}).json()
    spec = load_dataset(E1)
    predictor = deployed_predictor(spec, 0.5, seed=0)
    problem = problem_for_dataset(
        spec, "CR-ind", 0.9, E1_REJECTED, predictor,
        config=config_for_dataset(spec), require_rejected=False,
    )
    panel = confidence_panel(problem, Action.of({"V": 1.0}), seed=5)
    assert body["gamma_ind"] == sig6(panel["gamma_ind"])
    assert body["gamma_sub"] == sig6(panel["gamma_sub"])
    assert body["eta_under_h"] == sig6(panel["eta_under_h"])
    assert body["eta_under_h_ind"] == sig6(panel["eta_under_h_ind"])
    assert body["acceptance_bound"] == sig6(panel["acceptance_bound"])
    assert body["cost"] == sig6(panel["cost"])


def test_evaluate_501_when_rescoring_unsupported(client, e1_session,
                                                 monkeypatch):
    def degraded(problem, action, seed=0):
        panel = confidence_panel(problem, action, seed=seed)
        panel["eta_under_h_ind"] = None
        return panel

    monkeypatch.setattr(service_module, "confidence_panel", degraded)
    r = client.post(f"/sessions/{e1_session['id']}/evaluate",
                    json={"action": {"V": 1}})
    assert r.status_code == 501
    assert "not available" in r.json()["detail"]


# --------------------------------------------------------------------------
# recommend


def test_recommend_group_improvement_flips_the_cause(client, e1_session):
    r = client.post(
        f"/sessions/{e1_session['id']}/recommend",
        json={"method": "ICR-sub", "confidence": 0.85,
              "optimizer_preset": "desk"},
    )
    assert r.status_code == 200
    body = r.json()
    assert body["action"] == {"V": 1.0}
    assert body["cost"] == 0.5
    assert body["feasible"] is True
    assert body["guarantee"].startswith(
        "Within a group of individuals that share"
    )


def test_recommend_explanation_overrides_the_symptom(client, e1_session):
    body = client.post(
        f"/sessions/{e1_session['id']}/recommend",
        json={"method": "CE", "confidence": 0.9, "optimizer_preset": "desk"},
    ).json()
    assert body["action"] == {"S": 1.0}
    assert body["cost"] == 0.1
    assert body["gamma_sub_is_observational"] is True


def test_recommend_repeats_identically(client, e1_session):
    url = f"/sessions/{e1_session['id']}/recommend"
    payload = {"method": "ICR-ind", "confidence": 0.85,
               "optimizer_preset": "desk"}
    first = client.post(url, json=payload).json()
    second = client.post(url, json=payload).json()
    assert first == second


def test_recommend_matches_library(client, e1_session):
    body = client.post(
        f"/sessions/{e1_session['id']}/recommend",
        json={"method": "CR-sub", "confidence": 0.85,
              "optimizer_preset": "desk"},
    ).json()
    spec = load_dataset(E1)
    predictor = deployed_predictor(spec, 0.5, seed=0)
    desk = PRESETS["desk"]
    problem = problem_for_dataset(
        spec, "CR-sub", 0.85, E1_REJECTED, predictor,
        config=config_for_dataset(
            spec, population=desk.population, generations=desk.generations
        ),
        require_rejected=False,
    )
    rec = optimize(problem, seed=5)
    assert body["action"] == {k: sig6(v) for k, v in rec.action.assignments}
    assert body["cost"] == sig6(rec.cost)
    assert body["confidence"] == sig6(rec.confidence)
    assert body["feasible"] == rec.feasible
    assert body["gamma_ind"] == sig6(rec.gamma_ind)
    assert body["eta_under_h"] == sig6(rec.eta_under_h)
    assert body["acceptance_bound"] == sig6(rec.acceptance_bound)


def test_recommend_infeasible_is_a_200_result(client):
    # no vaccination action reaches 0.9 individualized improvement from V=1
    session = make_session(client, factual={"V": 1.0, "S": 0.0}, seed=2)
    r = client.post(
        f"/sessions/{session['id']}/recommend",
        json={"method": "ICR-ind", "confidence": 0.9,
              "optimizer_preset": "desk"},
    )
    assert r.status_code == 200
    body = r.json()
    assert body["feasible"] is False
    assert body["violation"] > 0.0
    assert body["guarantee"] is None


def test_recommend_validation_errors(client, e1_session):
    url = f"/sessions/{e1_session['id']}/recommend"
    assert client.post(url, json={"method": "CR-both",
                                  "confidence": 0.9}).status_code == 422
    assert client.post(url, json={"method": "CE",
                                  "confidence": 0.4}).status_code == 422
    assert client.post(url, json={"method": "CE", "confidence": 0.9,
                                  "optimizer_preset": "huge"}).status_code == 422


def test_guarantee_sentence_names_the_subgroup(client):
    # a 5var session where the intervened set has nondescendants to share
    session = make_session(client, dataset="5var-skill", seed=9)
    body = client.post(
        f"/sessions/{session['id']}/recommend",
        json={"method": "ICR-sub", "confidence": 0.85,
              "optimizer_preset": "desk"},
    ).json()
    if body["feasible"]:
        assert body["guarantee"].startswith("Within a group of individuals")
        assert "%" in body["guarantee"]


# --------------------------------------------------------------------------
# isolation


def test_interleaved_sessions_match_serial_execution():
    def drive(client, interleave):
        a = make_session(client, factual=E1_REJECTED, seed=1)["id"]
        b = make_session(client, factual={"V": 1.0, "S": 0.0}, seed=2)["id"]
        order = [a, b, b, a] if interleave else [a, a, b, b]
        out = []
        for sid in order:
            out.append((
                sid == a,
                client.post(f"/sessions/{sid}/evaluate",
                            json={"action": {"V": 1}}).json(),
                client.post(
                    f"/sessions/{sid}/recommend",
                    json={"method": "CR-ind", "confidence": 0.85,
                          "optimizer_preset": "desk"},
                ).json(),
            ))
        return sorted(
            (is_a, json.dumps(ev, sort_keys=True), json.dumps(rc, sort_keys=True))
            for is_a, ev, rc in out
        )

    serial = drive(TestClient(create_app()), interleave=False)
    woven = drive(TestClient(create_app()), interleave=True)
    assert serial == woven


def test_ui_mount_serves_static_assets(tmp_path):
    (tmp_path / "index.html").write_text("<!doctype html><title>explorer</title>")
    client = TestClient(create_app(ui_dir=str(tmp_path)))
    r = client.get("/ui/")
    assert r.status_code == 200
    assert "explorer" in r.text
    bare = TestClient(create_app())
    assert bare.get("/ui/").status_code == 404
