"""Exception hierarchy shared by the library and the command line."""


class CCSBError(Exception):
    exit_code = 1


class ConfigurationError(CCSBError, ValueError):
    """Inconsistent shapes, parameters or run configuration."""

    exit_code = 2


class DegenerateBasisError(CCSBError):
    """The overlap system has no singular value above the cutoff."""

    exit_code = 4

    def __init__(self, message, rank=0, condition=float("inf")):
        super().__init__(message)
        self.rank = rank
        self.condition = condition


class PropagationError(CCSBError):
    """Integration cannot continue (step-size underflow, non-real action rate)."""

    exit_code = 5


class NormGuardError(CCSBError):
    """The wavefunction norm left the allowed band; partial results are attached."""

    exit_code = 3

    def __init__(self, message, t=None, norm=None, partial=None):
        super().__init__(message)
        self.t = t
        self.norm = norm
        self.partial = partial
