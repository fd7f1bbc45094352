"""Exception types raised across the package."""


class WanewaveError(Exception):
    """Base class for all package errors."""


class ParameterError(WanewaveError, ValueError):
    """Invalid model parameters."""


class NoEndemicEquilibrium(WanewaveError):
    """Raised when R0 <= 1, so no positive steady state exists."""


class ConvergenceFailure(WanewaveError):
    """An iterative solver exhausted its budget."""


class DomainError(WanewaveError, ValueError):
    """A state lies outside the probability simplex."""


class OutsideFeasibleInterval(WanewaveError, ValueError):
    """The requested delay has no feasible frequency on this branch."""


class SearchRangeExceeded(WanewaveError):
    """Frequencies are still feasible at the end of the delay search range."""


class DegenerateQ(WanewaveError):
    """Q(i*omega) vanishes, so the crossing angle is undefined."""


class DegenerateDelay(WanewaveError, ValueError):
    """The delay is too small for a collocation discretization."""


class StepSizeUnderflow(WanewaveError):
    """The adaptive integrator could not meet the tolerance."""


class DomainEscape(WanewaveError):
    """A trajectory left the simplex beyond tolerance."""


class WindowTooShort(WanewaveError, ValueError):
    """The trajectory does not cover transient + window."""


class TangentialZero(WanewaveError, RuntimeWarning):
    """A switch function touches zero with vanishing slope; the crossing is not classified."""


class NewtonDivergence(WanewaveError, RuntimeWarning):
    """Newton refinement of a characteristic root failed; the matrix estimate is kept."""
