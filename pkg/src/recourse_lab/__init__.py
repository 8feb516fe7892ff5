"""Causal-recourse engine: counterfactual explanations (CE), causal recourse
(CR), and improvement-focused causal recourse (ICR) on structural causal
models, with post-recourse predictors, acceptance guarantees, an experiment
harness, a CLI, and an HTTP service."""

from .errors import (
    InfeasibleObservationError,
    IntractableRejectionError,
    MissingNoiseError,
    NotACauseError,
    ScmDefinitionError,
    TargetInterventionError,
    UnknownNodeError,
    UnsupportedModelError,
)
from .scm import (
    Action,
    AdditiveEquation,
    Bernoulli,
    Categorical,
    CausalGraph,
    ConstantEquation,
    ExogenousEquation,
    ExprLink,
    Gamma,
    GammaPoisson,
    LinearLink,
    Normal,
    Scm,
    SigmoidBernoulliEquation,
    Uniform01,
    XorAdditiveEquation,
    ancestors,
    causes_of_target,
    descendants,
    evaluate_forward,
    ground_truth_counterfactual,
    intervene,
    nondescendants,
    register_link,
    sample_observational,
    topological_order,
)
from .datasets import DatasetSpec, audit_table, list_datasets, load_dataset, load_scm_file
from .abduction import (
    IndividualizedBank,
    PosteriorSampleSet,
    build_individualized_bank,
    eta_ind,
    gamma_ind,
    push_bank,
    sample_individualized_posterior,
)
from .subpopulation import (
    eta_sub,
    gamma_sub,
    intervenes_on_cause,
    sample_subpopulation_posterior,
)
from .predictors import (
    LogisticPredictor,
    ScmOraclePredictor,
    bayes_logistic_reference,
    fit_logistic,
    fit_observational_logistic,
    refit_family,
    scm_oracle_score,
)
from .post_recourse import (
    IndividualizedPredictor,
    acceptance_lower_bound,
    h_star_ind,
)
from .search import (
    METHODS,
    PRESETS,
    ActionSpace,
    ConfidenceCache,
    CostModel,
    OptimizerConfig,
    Recommendation,
    RecourseProblem,
    annotate_recommendation,
    config_for_dataset,
    confidence_panel,
    evaluate_confidence,
    optimize,
    problem_for_dataset,
    space_for_dataset,
)
from .experiment import (
    DEFAULT_CONFIDENCES,
    ExperimentReport,
    ReportRow,
    RunConfig,
    deployed_predictor,
    export_report,
    load_run_config,
    parse_report_csv,
    render_report,
    run_experiment,
)

__version__ = "0.1.0"
