"""Exception types raised by the toolkit."""


class IsacOtError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(IsacOtError, ValueError):
    """Malformed or incomplete scenario / solution input."""


class DegenerateGeometry(IsacOtError, ValueError):
    """Coincident points or a nonpositive effective distance."""


class PerfectSensing(IsacOtError):
    """Raised by channel_error when the sensing error is exactly zero.

    The caller is expected to substitute a zero error channel.
    """


class InfiniteCrb(IsacOtError):
    """Sensing power is zero, so the target is unobservable."""


class InfeasibleBudget(IsacOtError):
    """Box bounds cannot meet the power budget with equality."""


class OracleTooLarge(IsacOtError):
    """Exhaustive grid search would exceed the combination limit."""
