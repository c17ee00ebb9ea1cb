"""Reduce a one-hour raw segment to its 512-bin inverted-histogram feature.

The feature is one minus the relative frequency histogram of the sample
values, with 512 equal-width bins spanning the sensor's measurement range.
Bin i covers [min + i*w, min + (i+1)*w) for w = (max - min)/512; the last bin
is closed on the right, and out-of-range samples count toward the edge bins
(real sensors saturate, so clamping keeps the segment usable).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, MissingDataError, NumericError

FEATURE_DIM = 512
SECONDS_PER_SEGMENT = 3600.0


@dataclass
class TimeSeriesSegment:
    """One nominal 1-hour recording from a single channel."""

    samples: np.ndarray
    sample_rate_hz: float
    range_min: float
    range_max: float
    channel_id: int = 0
    hour_index: int = 0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if not self.range_min < self.range_max:
            raise ConfigError(
                f"measurement range [{self.range_min}, {self.range_max}] is empty"
            )
        if self.sample_rate_hz <= 0:
            raise ConfigError(f"sample rate {self.sample_rate_hz} must be positive")

    @property
    def expected_samples(self) -> int:
        return int(round(SECONDS_PER_SEGMENT * self.sample_rate_hz))


@dataclass
class FeatureVector:
    """512 inverted relative frequencies in [0, 1] plus provenance."""

    values: np.ndarray
    channel_id: int = 0
    hour_index: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (FEATURE_DIM,):
            raise ConfigError(f"feature must have shape ({FEATURE_DIM},), got {self.values.shape}")


def ierfh(segment: TimeSeriesSegment) -> FeatureVector:
    """Inverted envelope of the relative frequency histogram of one segment."""
    x = segment.samples
    if x.size == 0:
        raise MissingDataError(
            f"channel {segment.channel_id} hour {segment.hour_index}: empty segment"
        )
    if not np.all(np.isfinite(x)):
        raise NumericError(
            f"channel {segment.channel_id} hour {segment.hour_index}: non-finite sample"
        )
    lo, hi = segment.range_min, segment.range_max
    clipped = np.clip(x, lo, hi)
    idx = np.floor((clipped - lo) * (FEATURE_DIM / (hi - lo))).astype(np.int64)
    np.clip(idx, 0, FEATURE_DIM - 1, out=idx)
    counts = np.bincount(idx, minlength=FEATURE_DIM)
    rel_freq = counts / x.size
    return FeatureVector(1.0 - rel_freq, segment.channel_id, segment.hour_index)


def detect_missing(segment: TimeSeriesSegment) -> bool:
    """True when the segment holds fewer samples than its rate implies."""
    return segment.samples.size < segment.expected_samples
