"""Exception hierarchy shared by every module of the package."""


class VibdsdeError(Exception):
    """Base class; ``category`` drives the CLI exit code."""

    category = "runtime"


class BadParameter(VibdsdeError, ValueError):
    category = "validation"


class DomainViolation(VibdsdeError, ValueError):
    """A point lies outside the effective domain of a convex function."""


class GeometryUndefined(VibdsdeError, ValueError):
    """Domain geometry (normal vector) is not defined at the query point."""


class SingularRegression(VibdsdeError, ArithmeticError):
    pass


class RootFindFailure(VibdsdeError, ArithmeticError):
    pass


class ShapeMismatch(VibdsdeError, ValueError):
    pass


class NonConvergence(VibdsdeError):
    """Picard iteration did not reach tolerance; carries the residual history."""

    def __init__(self, message, residuals=()):
        super().__init__(message)
        self.residuals = list(residuals)


class OutOfRange(VibdsdeError, ValueError):
    pass


class QuadratureFailure(VibdsdeError, ArithmeticError):
    pass


class HypothesisViolation(VibdsdeError):
    """Ordering hypotheses of a comparison check failed on the samples."""

    category = "verification"


class ConfigError(VibdsdeError):
    """Malformed run configuration (unknown key, bad type, unreadable file)."""

    category = "config"

    def __init__(self, message, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line
