"""Exception types shared across the engine."""

from __future__ import annotations


class ScmDefinitionError(ValueError):
    """Invalid model definition (cycle, dangling edge, bad parameters)."""


class UnknownNodeError(KeyError):
    """A node id that is not part of the model."""


class TargetInterventionError(ValueError):
    """Recourse acts on covariates only; the target cannot be intervened on."""


class MissingNoiseError(KeyError):
    """A full exogenous assignment was required but an entry is missing."""


class InfeasibleObservationError(ValueError):
    """The observation has probability zero under the model."""


class NotACauseError(ValueError):
    """Subpopulation improvement is undefined for actions that cannot affect
    the target; carries the trivially correct observational confidence."""

    def __init__(self, message: str, observational_confidence: float):
        super().__init__(message)
        self.observational_confidence = observational_confidence


class IntractableRejectionError(RuntimeError):
    """Rejection sampling acceptance rate fell below the tractability floor."""


class UnsupportedModelError(RuntimeError):
    """Requested computation is not available for this equation inventory."""
