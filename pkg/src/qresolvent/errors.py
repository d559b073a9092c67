"""Exception and warning types shared by the solvers."""


class QResolventError(Exception):
    """Base class for all errors raised by the package."""


class DomainError(QResolventError, ValueError):
    """Argument outside the supported range of a special function."""


class SingularityError(DomainError):
    """Evaluation at a logarithmic or pole singularity."""


class ValidationError(QResolventError, ValueError):
    """Input data violates a structural invariant."""


class CapacityError(QResolventError, ValueError):
    """Photon number exceeds the Fock-space truncation."""


class SingularResolventError(QResolventError, ArithmeticError):
    """Spectral parameter too close to an eigenvalue of the kernel."""

    def __init__(self, message, nearest=None):
        super().__init__(message)
        self.nearest = nearest


class ResonanceError(QResolventError, ArithmeticError):
    """Near-zero resonance denominator."""


class ConvergenceError(QResolventError, ArithmeticError):
    """An iterative or quadrature procedure did not converge."""


class TruncationError(ConvergenceError):
    """A truncated mode sum failed its tail check."""


class DegeneracyWarning(UserWarning):
    """Nearly coincident eigenvalues; carries the condition estimate."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition
