"""Exception types raised across the package."""


class InvalidArgument(ValueError):
    pass


class InvalidKernel(ValueError):
    pass


class NotPSD(ValueError):
    """Operator has an eigenvalue below ``-psd_tol``."""


class UnsupportedGrowth(ValueError):
    """Activation growth exponent r >= 2; the rate-function machinery needs r < 2."""


class UnstableMGF(RuntimeError):
    """Effective sample size of the exponential tilting fell below the floor."""


class InsufficientHits(RuntimeError):
    pass


class OffGridInput(ValueError):
    pass


class ConfigError(ValueError):
    """Invalid experiment configuration. ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
