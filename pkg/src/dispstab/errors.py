"""Exception hierarchy shared by all modules."""


class DispStabError(Exception):
    """Base class for all package errors."""


class InputShapeError(DispStabError, ValueError):
    pass


class DomainError(DispStabError, ValueError):
    """Parameter outside the admissible set (speed, lambda, support, ...)."""


class SymmetryError(DispStabError, ValueError):
    pass


class ConvergenceError(DispStabError, RuntimeError):
    """Iteration failed to reach tolerance.

    Carries the last residual and, when raised from a branch, the speed.
    """

    def __init__(self, message, residual=None, speed=None):
        super().__init__(message)
        self.residual = residual
        self.speed = speed


class NumericalError(DispStabError, RuntimeError):
    pass


class InsufficientDataError(DispStabError, ValueError):
    pass


class IndeterminateError(DispStabError, ValueError):
    """dP/dc is inside its noise floor; the criterion cannot decide."""

    def __init__(self, message, dP_dc=None, noise_floor=None):
        super().__init__(message)
        self.dP_dc = dP_dc
        self.noise_floor = noise_floor


class KernelAssumptionError(DispStabError, RuntimeError):
    """ker L0 is not one-dimensional; the criterion does not apply."""


class TrackingError(DispStabError, RuntimeError):
    """Eigenvalue branch tracking failed (jump or loss)."""

    def __init__(self, message, lam=None, overlap=None):
        super().__init__(message)
        self.lam = lam
        self.overlap = overlap


class BlowUpError(DispStabError, RuntimeError):
    """Time integration produced non-finite or runaway values."""

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class DegenerateError(DispStabError, ValueError):
    pass


class ConfigError(DispStabError, ValueError):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
