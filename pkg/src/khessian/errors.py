"""Exception types shared across the package."""


class KHessianError(Exception):
    """Base class for all package-specific failures."""


class ParameterError(KHessianError, ValueError):
    """A precondition on user-supplied parameters is violated."""


class KellerOssermanViolation(KHessianError):
    """The profile integral diverges for the given nonlinearity/order pair.

    Carries the fitted (or exact) tail exponent of the integrand so callers
    can report how far from integrability the input is.
    """

    def __init__(self, message, tail_exponent=None):
        super().__init__(message)
        self.tail_exponent = tail_exponent


class LimitNotDetected(KHessianError):
    """A probed limit did not settle within the configured tolerance."""

    def __init__(self, message, probes=None):
        super().__init__(message)
        self.probes = probes


class ConditionViolation(KHessianError):
    """A structural condition (e.g. the constant gap test) fails.

    ``label`` is the short condition tag used in CLI diagnostics,
    e.g. ``"(1.5)"`` for the constant-gap condition.
    """

    def __init__(self, message, label=None):
        super().__init__(message)
        self.label = label


class IntegrationFailure(KHessianError):
    """Adaptive integration stopped; ``solution`` holds the last good state."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class SolveFailure(KHessianError):
    """A nonlinear solve did not converge; carries the residual history."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []


class GeometryError(KHessianError):
    """Collar geometry evaluated outside its validity region."""


class CertificationFailure(KHessianError):
    """No parameter in the search ladder certified the inequality."""

    def __init__(self, message, worst_margin=None, report=None):
        super().__init__(message)
        self.worst_margin = worst_margin
        self.report = report


class ReportTruncated(KHessianError):
    """Requested report range is not resolved; carries the available rows."""

    def __init__(self, message, rows=None):
        super().__init__(message)
        self.rows = rows
