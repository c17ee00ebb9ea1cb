"""Seeded synthetic generator for the nine raw-signal data patterns.

Real bridge recordings are not distributable, so experiments run on synthetic
segments that reproduce the qualitative pattern taxonomy: normal ambient
response, missing, minor-amplitude, outlier spikes, square wave, linear
trend, random drift, constant bias, and heavy-tail noise corruption.

Each pattern has an explicit quantitative contract (thresholds below are
this generator's operationalization of the qualitative descriptions) and
every generated segment is validated against its own contract before being
returned. Generation is a pure function of the spec, so identical specs give
bit-identical segments.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .errors import ConfigError, GenerationError
from .reduction import FeatureVector, TimeSeriesSegment, ierfh

PATTERNS = ("normal", "missing", "minor", "outlier", "square",
            "trend", "drift", "biased", "noise")

CASE_PATTERNS = {
    1: ("normal", "minor", "outlier", "square", "trend", "drift"),
    2: ("normal", "minor", "biased", "outlier", "noise"),
}
CASE_RANGES = {1: (-1.0, 1.0), 2: (-50.0, 50.0)}
CASE_BASE_AMPLITUDE = {1: 0.1, 2: 5.0}

CASE_ORIGINAL_COUNTS = {
    1: (13575, 1775, 527, 2996, 5778, 679),
    2: (19454, 6802, 1169, 289, 578),
}

LOW_SHOT_SPECS = {
    1: {
        "ls1": (10, 10, 10, 10, 10, 10),
        "ls2": (30, 30, 30, 30, 30, 30),
        "ls3": (50, 50, 50, 50, 50, 50),
        "ls4": (50, 30, 30, 30, 50, 30),
        "ls5": (100, 50, 50, 50, 80, 50),
        "ls6": (200, 50, 50, 50, 150, 50),
    },
    2: {
        "ls1": (10, 10, 10, 10, 10),
        "ls2": (30, 30, 30, 30, 30),
        "ls3": (50, 50, 50, 50, 50),
        "ls4": (30, 20, 20, 10, 10),
        "ls5": (50, 50, 30, 30, 30),
        "ls6": (100, 80, 50, 50, 50),
    },
}

# Pattern contract constants (artifact choices, see module docstring).
MINOR_MAX_RATIO = 0.05
OUTLIER_MIN_SPIKES = 3
OUTLIER_SPIKE_SIGMA = 10.0
SQUARE_LEVEL_TOLERANCE = 0.01
SQUARE_MIN_FRACTION = 0.95
TREND_MIN_RISE_SIGMA = 5.0
DRIFT_MIN_DISPLACEMENT_SIGMA = 3.0
BIAS_MIN_OFFSET_SIGMA = 4.0
NOISE_MIN_STD_RATIO = 3.0


@dataclass(frozen=True)
class PatternSpec:
    pattern: str
    base_amplitude: float
    sample_rate_hz: float = 1.0
    duration_s: float = 3600.0
    range_min: float = -1.0
    range_max: float = 1.0
    seed: int = 0
    channel_id: int = 0
    hour_index: int = 0

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ConfigError(f"unknown data pattern {self.pattern!r}")
        if self.base_amplitude <= 0:
            raise ConfigError("base_amplitude must be positive")


@dataclass
class LabeledSample:
    feature: FeatureVector
    label: int


def _smooth(x: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average with edge-shrunk windows."""
    n = x.size
    half = window // 2
    cs = np.concatenate(([0.0], np.cumsum(x)))
    lo = np.clip(np.arange(n) - half, 0, n)
    hi = np.clip(np.arange(n) + half + 1, 0, n)
    return (cs[hi] - cs[lo]) / (hi - lo)


def _ambient_base(stream: np.random.Generator, n: int, amplitude: float) -> np.ndarray:
    """Zero-mean band-limited stochastic response with std exactly `amplitude`.

    A few random structural-mode sinusoids below Nyquist plus lightly
    smoothed broadband noise; per-segment mode count, frequencies, phases,
    and noise fraction vary so one class spans a family of histogram shapes.
    """
    n_modes = int(stream.integers(2, 5))
    freqs = stream.uniform(0.05, 0.45, n_modes)          # cycles per sample
    amps = stream.uniform(0.3, 1.0, n_modes)
    phases = stream.uniform(0.0, 2.0 * np.pi, n_modes)
    t = np.arange(n)
    sig = np.zeros(n)
    for f, a, p in zip(freqs, amps, phases):
        sig += a * np.sin(2.0 * np.pi * f * t + p)
    noise = _smooth(stream.standard_normal(n), 3)
    frac = stream.uniform(0.15, 0.5)
    sig = sig / max(sig.std(), 1e-12) * (1.0 - frac) + noise / max(noise.std(), 1e-12) * frac
    sig -= sig.mean()
    return sig / max(sig.std(), 1e-12) * amplitude


def gen_segment(spec: PatternSpec) -> TimeSeriesSegment:
    """Generate one segment for the given pattern.

    Every returned segment satisfies its own pattern contract: draws that
    land outside it (possible for the stochastic patterns) are retried on a
    derived stream, so the result is still a pure function of the spec.
    """
    n = int(round(spec.duration_s * spec.sample_rate_hz))
    if n < 1:
        raise ConfigError("duration * rate must give at least one sample")
    for attempt in range(16):
        stream = rngmod.spawn(spec.seed, "segment", spec.pattern, attempt)
        segment = TimeSeriesSegment(
            _gen_samples(spec, stream, n), spec.sample_rate_hz,
            spec.range_min, spec.range_max,
            channel_id=spec.channel_id, hour_index=spec.hour_index)
        if segment_matches_pattern(spec, segment):
            return segment
    raise GenerationError(
        f"could not generate a valid {spec.pattern!r} segment (seed {spec.seed})"
    )


def _gen_samples(spec: PatternSpec, stream: np.random.Generator, n: int) -> np.ndarray:
    amp = spec.base_amplitude
    pattern = spec.pattern

    if pattern == "normal":
        x = _ambient_base(stream, n, amp)
    elif pattern == "minor":
        ratio = stream.uniform(0.01, 0.04)
        x = _ambient_base(stream, n, amp * ratio)
    elif pattern == "outlier":
        x = _ambient_base(stream, n, amp)
        n_spikes = int(stream.integers(OUTLIER_MIN_SPIKES, 9))
        positions = stream.choice(n, size=n_spikes, replace=False)
        for pos in positions:
            width = int(stream.integers(1, 9))
            magnitude = stream.uniform(16.0, 25.0) * amp * stream.choice((-1.0, 1.0))
            x[pos:pos + width] += magnitude
    elif pattern == "square":
        low = -amp * stream.uniform(0.8, 1.2)
        high = amp * stream.uniform(0.8, 1.2)
        x = np.empty(n)
        level = bool(stream.integers(0, 2))
        pos = 0
        max_dwell = max(2, n // 3)
        while pos < n:
            dwell = min(max(1, int(stream.exponential(n / 20.0))), max_dwell)
            x[pos:pos + dwell] = high if level else low
            level = not level
            pos += dwell
        x += stream.normal(0.0, 0.002 * amp, n)
    elif pattern == "trend":
        base = _ambient_base(stream, n, amp)
        rise = stream.uniform(5.0, 8.0) * amp * stream.choice((-1.0, 1.0))
        x = base + np.linspace(0.0, rise, n)
        x -= x.mean()
    elif pattern == "drift":
        base = _ambient_base(stream, n, amp)
        # Low-passed random walk: slow wander with a controlled endpoint.
        walk = _smooth(np.cumsum(stream.standard_normal(n)), max(5, n // 20))
        displacement = walk[-1] - walk[0]
        if abs(displacement) < 1e-9:
            walk = walk + np.linspace(0.0, 1.0, n)
            displacement = walk[-1] - walk[0]
        target = stream.uniform(5.0, 8.0) * amp * stream.choice((-1.0, 1.0))
        x = base + walk * (target / displacement)
        x -= x.mean()
    elif pattern == "biased":
        base = _ambient_base(stream, n, amp)
        offset = stream.uniform(5.0, 8.0) * amp * stream.choice((-1.0, 1.0))
        x = base + offset
    elif pattern == "noise":
        base = _ambient_base(stream, n, amp)
        heavy = stream.standard_t(3, n)
        target_std = stream.uniform(3.5, 5.0) * amp
        x = base + heavy / max(heavy.std(), 1e-12) * target_std
    elif pattern == "missing":
        base = _ambient_base(stream, n, amp)
        kept = int(np.floor(n * stream.uniform(0.0, 0.9)))
        x = base[:kept]
    else:  # pragma: no cover - PatternSpec already validates
        raise ConfigError(f"unknown data pattern {pattern!r}")
    return x


def segment_matches_pattern(spec: PatternSpec, segment: TimeSeriesSegment) -> bool:
    """Black-box check that a segment satisfies its pattern's defining property."""
    x = segment.samples
    amp = spec.base_amplitude
    n_expected = segment.expected_samples
    if spec.pattern == "missing":
        return x.size < n_expected
    if x.size != n_expected:
        return False

    if spec.pattern == "normal":
        return abs(x.mean()) <= 0.05 * amp and abs(x.std() / amp - 1.0) <= 0.15
    if spec.pattern == "minor":
        return x.std() <= MINOR_MAX_RATIO * amp
    if spec.pattern == "outlier":
        q16, q50, q84 = np.quantile(x, (0.16, 0.5, 0.84))
        sigma = max((q84 - q16) / 2.0, 1e-12)
        return int(np.sum(np.abs(x - q50) >= OUTLIER_SPIKE_SIGMA * sigma)) >= OUTLIER_MIN_SPIKES
    if spec.pattern == "square":
        mid = (x.min() + x.max()) / 2.0
        below, above = x[x < mid], x[x >= mid]
        if below.size == 0 or above.size == 0:
            return False
        c1, c2 = np.median(below), np.median(above)
        span = max(c2 - c1, 1e-12)
        near = np.minimum(np.abs(x - c1), np.abs(x - c2)) <= SQUARE_LEVEL_TOLERANCE * span
        return near.mean() >= SQUARE_MIN_FRACTION
    if spec.pattern == "trend":
        t = np.arange(x.size) / segment.sample_rate_hz
        slope, intercept = np.polyfit(t, x, 1)
        residual = x - (slope * t + intercept)
        rise = abs(slope) * (x.size / segment.sample_rate_hz)
        return rise >= TREND_MIN_RISE_SIGMA * max(residual.std(), 1e-12)
    if spec.pattern == "drift":
        window = max(5, x.size // 20)
        m = _smooth(x, window)
        residual_std = max((x - m).std(), 1e-12)
        return abs(m[-1] - m[0]) >= DRIFT_MIN_DISPLACEMENT_SIGMA * residual_std
    if spec.pattern == "biased":
        mean = x.mean()
        return abs(mean) >= BIAS_MIN_OFFSET_SIGMA * max((x - mean).std(), 1e-12)
    if spec.pattern == "noise":
        return x.std() >= NOISE_MIN_STD_RATIO * amp
    raise ConfigError(f"unknown data pattern {spec.pattern!r}")


def scaled_counts(case: int, scale: float) -> dict[str, int]:
    """Scale the original per-pattern counts, apportioning by largest remainder
    so the total equals round(total * scale) exactly."""
    if case not in CASE_PATTERNS:
        raise ConfigError(f"case must be 1 or 2, got {case}")
    if scale <= 0:
        raise ConfigError("scale must be positive")
    originals = CASE_ORIGINAL_COUNTS[case]
    total = int(round(sum(originals) * scale))
    quotas = [c * scale for c in originals]
    floors = [int(np.floor(q)) for q in quotas]
    remainder = total - sum(floors)
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - floors[i]), i))
    for i in order[:remainder]:
        floors[i] += 1
    return dict(zip(CASE_PATTERNS[case], floors))


def gen_dataset(case: int, counts, seed: int, sample_rate_hz: float = 1.0,
                duration_s: float = 3600.0, raw_sink=None) -> list[LabeledSample]:
    """Generate a labeled dataset for one case; labels index the case's pattern list.

    `counts` maps pattern name to sample count (or is a sequence aligned with
    the case's pattern order). Per-sample amplitude is drawn around the case
    default so each class spans a range of signal sizes.
    """
    if case not in CASE_PATTERNS:
        raise ConfigError(f"case must be 1 or 2, got {case}")
    patterns = CASE_PATTERNS[case]
    if not isinstance(counts, dict):
        counts = dict(zip(patterns, counts))
    unknown = set(counts) - set(patterns)
    if unknown:
        raise ConfigError(f"patterns {sorted(unknown)} are not part of case {case}")
    if any(c < 0 for c in counts.values()):
        raise ConfigError("counts must be non-negative")
    lo, hi = CASE_RANGES[case]
    base = CASE_BASE_AMPLITUDE[case]
    samples: list[LabeledSample] = []
    for label, pattern in enumerate(patterns):
        count = counts.get(pattern, 0)
        amp_stream = rngmod.spawn(seed, "amplitude", case, pattern)
        amps = base * amp_stream.uniform(0.6, 1.6, size=count)
        for i in range(count):
            spec = PatternSpec(
                pattern=pattern, base_amplitude=float(amps[i]),
                sample_rate_hz=sample_rate_hz, duration_s=duration_s,
                range_min=lo, range_max=hi,
                seed=rngmod.derive_seed(seed, "segment", case, pattern, i),
                channel_id=label, hour_index=i,
            )
            segment = gen_segment(spec)
            samples.append(LabeledSample(ierfh(segment), label))
            if raw_sink is not None:
                raw_sink(spec, segment)
    return samples


def write_segment_csv(segment: TimeSeriesSegment, path) -> None:
    """Dump one raw segment for inspection: one (time, value) row per sample."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "value"])
        for i, value in enumerate(segment.samples):
            writer.writerow([f"{i / segment.sample_rate_hz:.6f}", f"{value:.9g}"])


def read_segment_csv(path, sample_rate_hz: float, range_min: float, range_max: float,
                     channel_id: int = 0, hour_index: int = 0) -> TimeSeriesSegment:
    """Load a raw-segment CSV written by `write_segment_csv` (or hand-made)."""
    values = []
    with Path(path).open(newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().lower() == "time":
                continue
            values.append(float(row[1]))
    return TimeSeriesSegment(np.asarray(values), sample_rate_hz, range_min, range_max,
                             channel_id=channel_id, hour_index=hour_index)
