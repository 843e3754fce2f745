"""Exception types and process exit codes shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ToolkitError):
    """Invalid configuration or parameters (CLI exit code 2)."""


class ParamOutOfRange(ConfigError):
    """A parameter violates its documented range."""


class SolverError(ToolkitError):
    """A simulation run failed (CLI exit code 3)."""


class InitialStateOutsideCD(SolverError):
    """The initial state is in neither the flow set nor the jump set."""


class EventLocalizationFailure(SolverError):
    """A guard sign change could not be bracketed down to the event tolerance."""


class StagnationError(SolverError):
    """Too many consecutive jumps with no intervening flow time (Zeno guard)."""


class IntegrationFailure(SolverError):
    """The underlying ODE stepper reported a failure."""


class TimeOutsideDomain(ToolkitError):
    """A hybrid time (t, j) falls outside an arc's domain."""


class DegenerateVelocity(ToolkitError):
    """An operation requiring a nonzero pre-jump velocity received zero."""


class OriginState(ToolkitError):
    """An operation undefined at (q1, q2) = (0, 0) received the origin."""


class DomainTooShort(ToolkitError):
    """The arc does not span the hybrid-time window the check needs."""


class InsufficientData(ToolkitError):
    """Not enough usable samples to produce an estimate."""


class AmplitudeCollapse(UserWarning):
    """The adaptive pulse amplitude hit the zero clamp."""


EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_SOLVER_ERROR = 3
