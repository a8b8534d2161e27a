"""Exception hierarchy shared by the library and the command line."""


class SigRegError(Exception):
    """Base class for all errors raised by sigreg."""


class CapacityError(SigRegError):
    """The requested signature size exceeds the coefficient budget."""


class ConditioningError(SigRegError):
    """A linear system is singular or too ill-conditioned to solve."""


class DataError(SigRegError, ValueError):
    """Input data is malformed (non-finite values, bad shapes, bad files)."""


class ConfigError(SigRegError, ValueError):
    """Invalid configuration or parameter values."""
