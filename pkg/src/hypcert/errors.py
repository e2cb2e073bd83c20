"""Exception hierarchy shared by every module."""


class HypcertError(Exception):
    """Base class for all toolkit errors."""


class ParseError(HypcertError):
    """Input file is not valid JSON or is missing required keys."""


class ValidationError(HypcertError):
    """Input parsed but violates a structural invariant."""


class DomainError(HypcertError, ValueError):
    """Argument outside the domain of a mathematical operation."""


class EigenFailure(HypcertError):
    """Flux matrix is not strictly hyperbolic at some node."""


class OrderingBreak(HypcertError):
    """Sign pattern of the characteristic speeds changes across nodes."""


class SteadyStateViolation(HypcertError):
    """Supplied steady state does not satisfy the stationary equation."""


class IntegrationFailure(HypcertError):
    """Weight ODE left the admissible region before reaching x = L.

    ``x`` is the abscissa where integration stopped and ``profile`` holds the
    partial solution sampled on the nodes reached so far (may be ``None``).
    """

    def __init__(self, message, x, profile=None):
        super().__init__(message)
        self.x = x
        self.profile = profile


class FloorHit(IntegrationFailure):
    def __init__(self, index, x, profile=None):
        super().__init__(f"weight f_{index + 1} reached the positivity floor at x={x:.6g}",
                         x, profile)
        self.index = index


class Blowup(IntegrationFailure):
    def __init__(self, x, profile=None):
        super().__init__(f"weights blew up at x={x:.6g}", x, profile)


class OracleMismatch(HypcertError):
    """Optimizer and independent oracle disagree; indicates a bug."""


class CombinatorialLimit(HypcertError):
    """Brute-force enumeration would exceed the cost guard."""


class NotFound(HypcertError):
    pass


class CflViolation(HypcertError):
    pass


class NonFinite(HypcertError):
    pass


class CompatibilityError(HypcertError):
    """Initial data violates the zeroth-order compatibility condition."""


class DecayedToZero(HypcertError):
    """Lyapunov series underflows on the fit window."""


class ResolutionError(HypcertError):
    pass


class SupportError(HypcertError):
    pass


class PreconditionError(HypcertError):
    """Interior violation required by the counterexample is absent."""


class InconclusiveError(HypcertError):
    def __init__(self, message, slopes=None):
        super().__init__(message)
        self.slopes = slopes
