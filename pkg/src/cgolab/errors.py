"""Exception hierarchy for the workbench."""


class CgoLabError(Exception):
    """Base class for all workbench errors."""


class InvalidArgumentError(CgoLabError, ValueError):
    """An argument violates a documented precondition."""


class ConfigError(CgoLabError):
    """Bad configuration: unknown profile, malformed scenario, bad key."""

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class UnsupportedError(CgoLabError):
    """Requested order/feature outside the supported range."""


class OutOfDomainError(CgoLabError, ValueError):
    """Evaluation point lies outside the domain."""


class ResolutionError(CgoLabError):
    """Oscillation too fast for the grid; carries the required resolution."""

    def __init__(self, message, required_n_area=None):
        self.required_n_area = required_n_area
        super().__init__(message)


class SolverFailureError(CgoLabError):
    """Fixed-point iteration failed to contract."""

    def __init__(self, message, factor=None):
        self.factor = factor
        super().__init__(message)


class DegenerateSpecError(CgoLabError):
    """Jet-matching system is singular."""


class FrameDegeneracyError(CgoLabError):
    """Vekua frame construction failed (unstable zero set or singular frame)."""


class ConstraintViolationError(CgoLabError, ValueError):
    """A named constraint inequality failed."""


class EmptyReportError(CgoLabError):
    """All samples were excluded; nothing to report."""


class PreconditionError(CgoLabError):
    """Input residual above tolerance; carries the measured residual."""

    def __init__(self, message, measured=None):
        self.measured = measured
        super().__init__(message)


class PinFailureError(CgoLabError):
    """Pinning system ill-conditioned at the requested point."""

    def __init__(self, message, condition=None):
        self.condition = condition
        super().__init__(message)
