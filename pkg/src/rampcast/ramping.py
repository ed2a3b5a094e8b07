"""Swinging-door trend segmentation and ramp-class assignment."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BivariateSeries, DataError, RampClass

MAX_RAMP_WINDOW_MINUTES = 240.0


@dataclass(frozen=True)
class SdaConfig:
    epsilon: float

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise DataError("SDA epsilon must be positive")

    @classmethod
    def for_capacity(cls, capacity_mw: float, fraction: float = 0.01) -> "SdaConfig":
        return cls(epsilon=fraction * capacity_mw)


@dataclass(frozen=True)
class RampThresholds:
    """Ramp-ratio thresholds ``s1 < s2`` (MW/min) and the magnitude fraction ``omega``."""

    s1: float
    s2: float
    capacity_mw: float
    omega: float = 0.2

    def __post_init__(self) -> None:
        if not 0 < self.s1 < self.s2:
            raise DataError("thresholds must satisfy 0 < s1 < s2")
        if self.capacity_mw <= 0:
            raise DataError("capacity must be positive")
        if not 0 < self.omega <= 1:
            raise DataError("omega must lie in (0, 1]")

    @classmethod
    def from_capacity(cls, capacity_mw: float, omega: float = 0.2) -> "RampThresholds":
        # 10% and 20% of capacity per hour
        return cls(0.1 * capacity_mw / 60.0, 0.2 * capacity_mw / 60.0, capacity_mw, omega)


@dataclass(frozen=True)
class TrendSegment:
    start_idx: int
    end_idx: int
    ramp_ratio_mw_per_min: float
    assigned_class: RampClass

    def __post_init__(self) -> None:
        if self.start_idx > self.end_idx:
            raise DataError("segment start after end")

    def __len__(self) -> int:
        return self.end_idx - self.start_idx + 1


class SwingingDoor:
    """Running door state anchored at a pivot sample.

    ``lo``/``hi`` bound the slopes (MW per sample) of lines through the pivot
    that stay within ``epsilon`` of every sample accepted so far. A new sample
    continues the trend when its own slope from the pivot lies inside that
    opening; the doors then narrow to include its ``±epsilon`` band.
    """

    __slots__ = ("pivot_idx", "pivot_power", "epsilon", "last_idx", "lo", "hi")

    def __init__(self, pivot_idx: int, pivot_power: float, epsilon: float):
        if not epsilon > 0:
            raise DataError("SDA epsilon must be positive")
        self.pivot_idx = pivot_idx
        self.pivot_power = float(pivot_power)
        self.epsilon = float(epsilon)
        self.last_idx = pivot_idx
        self.lo = -math.inf
        self.hi = math.inf

    def belongs(self, power: float, idx: int | None = None) -> bool:
        if idx is None:
            idx = self.last_idx + 1
        dt = idx - self.pivot_idx
        if dt <= 0:
            raise DataError("sample must come after the pivot")
        rise = power - self.pivot_power
        slope = rise / dt
        if slope < self.lo or slope > self.hi:
            return False
        self.lo = max(self.lo, (rise - self.epsilon) / dt)
        self.hi = min(self.hi, (rise + self.epsilon) / dt)
        self.last_idx = idx
        return True

    def copy(self) -> "SwingingDoor":
        other = SwingingDoor(self.pivot_idx, self.pivot_power, self.epsilon)
        other.last_idx, other.lo, other.hi = self.last_idx, self.lo, self.hi
        return other


def sda_belongs(door: SwingingDoor, new_power: float) -> bool:
    """Test the next sample against the door; narrows the door when it belongs."""
    return door.belongs(new_power)


def ramp_ratio(series: BivariateSeries, seg: TrendSegment) -> float:
    """Signed power change per minute between a segment's endpoints."""
    return _ratio(series.power, seg.start_idx - series.start_index,
                  seg.end_idx - series.start_index, series.period_minutes)


def _ratio(power: np.ndarray, start: int, end: int, period: float) -> float:
    if not 0 <= start <= end < power.size:
        raise DataError("segment outside series bounds")
    if end == start:
        raise DataError("zero-length segment has no ramp ratio")
    return float(power[end] - power[start]) / ((end - start) * period)


def classify_ramp(rr: float, th: RampThresholds) -> RampClass:
    if rr <= -th.s2:
        return RampClass.RAMP_DOWN_CRITICAL
    if rr <= -th.s1:
        return RampClass.RAMP_DOWN
    if rr < th.s1:
        return RampClass.NO_RAMP
    if rr < th.s2:
        return RampClass.RAMP_UP
    return RampClass.RAMP_UP_CRITICAL


def close_segment(power: np.ndarray, start: int, end: int, period: float,
                  th: RampThresholds, offset: int = 0) -> TrendSegment:
    """Build the finished segment ``[start, end]`` (positions into ``power``).

    A single-sample segment can only occur at the end of a finite series;
    it is given a ramp ratio of zero.
    """
    rr = _ratio(power, start, end, period) if end > start else 0.0
    return TrendSegment(start + offset, end + offset, rr, classify_ramp(rr, th))


def segment_series(series: BivariateSeries, cfg: SdaConfig,
                   th: RampThresholds | None = None) -> list[TrendSegment]:
    """Partition the series into swinging-door trends.

    The sample that breaks a trend becomes the pivot of the next one. The
    last segment is closed at the end of the series.
    """
    if len(series) < 2:
        raise DataError("segmentation needs at least 2 samples")
    if th is None:
        th = _default_thresholds(series)
    power = series.power
    segments = []
    door = SwingingDoor(0, power[0], cfg.epsilon)
    for t in range(1, power.size):
        if not door.belongs(power[t], t):
            segments.append(close_segment(power, door.pivot_idx, t - 1,
                                          series.period_minutes, th, series.start_index))
            door = SwingingDoor(t, power[t], cfg.epsilon)
    segments.append(close_segment(power, door.pivot_idx, power.size - 1,
                                  series.period_minutes, th, series.start_index))
    return segments


def _default_thresholds(series: BivariateSeries) -> RampThresholds:
    if series.capacity_mw is None:
        raise DataError("ramp thresholds need a capacity")
    return RampThresholds.from_capacity(series.capacity_mw)


def label_series(series: BivariateSeries, cfg: SdaConfig,
                 th: RampThresholds | None = None) -> BivariateSeries:
    """Return a copy of ``series`` labeled (5-class) from its own trends."""
    labels: list[RampClass] = []
    for seg in segment_series(series, cfg, th):
        labels.extend([seg.assigned_class] * len(seg))
    return series.with_labels(labels)


def reconstruct(series: BivariateSeries, segments: list[TrendSegment]) -> np.ndarray:
    """Piecewise-linear reconstruction joining each segment's endpoints."""
    out = np.empty(len(series))
    p = series.power
    for seg in segments:
        a, b = seg.start_idx - series.start_index, seg.end_idx - series.start_index
        if a == b:
            out[a] = p[a]
        else:
            out[a:b + 1] = np.linspace(p[a], p[b], b - a + 1)
    return out


def is_ramp_event(series: BivariateSeries, t: int, dt: int, th: RampThresholds) -> bool:
    """Magnitude test: power swing over ``[t, t+dt]`` reaches ``omega * capacity``."""
    if dt < 0:
        raise DataError("dt must be non-negative")
    if dt * series.period_minutes > MAX_RAMP_WINDOW_MINUTES:
        raise DataError(f"window of {dt * series.period_minutes:g} min exceeds 4 hours")
    a = t - series.start_index
    if a < 0 or a + dt >= len(series):
        raise DataError("window outside series bounds")
    window = series.power[a:a + dt + 1]
    return float(window.max() - window.min()) >= th.capacity_mw * th.omega
