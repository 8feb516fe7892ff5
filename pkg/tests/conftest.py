"""Session fixtures for the desk-scale outcome tables.

The reports below back every table-level assertion in test_acceptance.py.
Each one takes minutes to compute, so they are built once per session and
shared; wall-clock seconds are recorded for the runtime-budget check.
"""

from __future__ import annotations

import time

import pytest

from recourse_lab import ExperimentReport, RunConfig, run_experiment

DESK_CONFIDENCES = (0.85, 0.9, 0.95)

_reports: dict[str, ExperimentReport] = {}
_seconds: dict[str, float] = {}


def _desk_report(dataset: str, methods: tuple[str, ...], refits: int = 0) -> ExperimentReport:
    if dataset not in _reports:
        config = RunConfig(
            dataset=dataset,
            methods=methods,
            confidences=DESK_CONFIDENCES,
            n_individuals=100,
            n_runs=3,
            refits=refits,
            population=100,
            generations=200,
            seed=0,
        )
        started = time.perf_counter()
        _reports[dataset] = run_experiment(config)
        _seconds[dataset] = time.perf_counter() - started
    return _reports[dataset]


@pytest.fixture(scope="session")
def desk_3var_noncausal() -> ExperimentReport:
    return _desk_report(
        "3var-noncausal", ("CE", "CR-ind", "CR-sub", "ICR-ind", "ICR-sub"), refits=5
    )


@pytest.fixture(scope="session")
def desk_5var_skill() -> ExperimentReport:
    return _desk_report("5var-skill", ("CE", "CR-ind", "CR-sub", "ICR-ind"))


@pytest.fixture(scope="session")
def desk_7var_covid() -> ExperimentReport:
    return _desk_report("7var-covid", ("CE", "CR-ind", "CR-sub", "ICR-ind", "ICR-sub"))


@pytest.fixture(scope="session")
def desk_3var_causal() -> ExperimentReport:
    return _desk_report(
        "3var-causal", ("CE", "CR-ind", "CR-sub", "ICR-ind", "ICR-sub"), refits=5
    )


@pytest.fixture(scope="session")
def desk_seconds() -> dict[str, float]:
    """Wall-clock seconds per desk run, keyed by dataset name."""
    return _seconds
