"""Exception types raised by the kfls library."""


class KflsError(Exception):
    """Base class for all kfls-specific errors."""


class DefinitenessError(KflsError, ValueError):
    """A matrix does not have the definiteness required by an operation."""


class SingularMatrixError(KflsError, ValueError):
    """A matrix that must be invertible is (numerically) singular."""


class ModelError(KflsError, ValueError):
    """A system model is invalid, e.g. a singular state matrix A_k."""


class NumericalError(KflsError, RuntimeError):
    """A filter step failed numerically, e.g. singular innovation covariance."""


class ForgettingConditionError(KflsError, ValueError):
    """The forgetting matrix violates the existence condition P_k^{-1} - F_k > 0."""


class StrategyParameterError(KflsError, ValueError):
    """A forgetting strategy produced an invalid (non-PSD) covariance."""


class IntegrationError(KflsError, RuntimeError):
    """The ground-truth integrator produced a non-finite or inconsistent state."""


class ConfigError(KflsError, ValueError):
    """An experiment configuration file is invalid."""
