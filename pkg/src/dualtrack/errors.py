"""Exception types shared across the package."""


class DualTrackError(Exception):
    """Base class for all errors raised by this package."""


class NonPositiveDefinite(DualTrackError):
    """A covariance matrix could not be factorized, even after jitter."""


class AllWeightsDegenerate(DualTrackError):
    """Every particle log-weight is -inf or NaN, so no normalization exists."""


class InvalidWeights(DualTrackError):
    """Resampling weights are negative or do not sum to one."""


class EmptyInput(DualTrackError):
    """An operation that needs at least one sample received none."""


class DimensionMismatch(DualTrackError):
    """State or weight arrays have incompatible shapes."""


class OriginSingularity(DualTrackError):
    """Range-bearing measurement requested at the sensor origin."""


class StaleTransferPacket(DualTrackError):
    """A transfer packet was offered to a filter step it was not built for."""


class LengthMismatch(DualTrackError):
    """Time series that must be aligned have different lengths."""


class ConfigError(DualTrackError):
    """Invalid or incomplete scenario configuration."""


class DegenerateWeightsWarning(UserWarning):
    """Weights collapsed and were reset to uniform to keep the run alive."""
