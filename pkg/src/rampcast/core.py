"""Domain types, class schemes, CSV ingestion and MinMax scaling."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np


class RampcastError(Exception):
    """Base class for library errors."""


class DataError(RampcastError, ValueError):
    """Invalid input data or configuration (CLI exit code 2)."""


class SeriesFormatError(DataError):
    """A series file could not be parsed; ``line`` is 1-based."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class RampClass(enum.Enum):
    RAMP_DOWN_CRITICAL = "ramp_down_critical"
    RAMP_DOWN = "ramp_down"
    NO_RAMP = "no_ramp"
    RAMP_UP = "ramp_up"
    RAMP_UP_CRITICAL = "ramp_up_critical"
    RAMP_DOWN_STAR = "ramp_down_star"
    RAMP_UP_STAR = "ramp_up_star"
    UNKNOWN = "unknown"

    @classmethod
    def parse(cls, text: str) -> "RampClass":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise DataError(f"unknown ramp label {text!r}") from None

    def __str__(self) -> str:
        return self.value


UNKNOWN_CODE = -1

_FIVE = (
    RampClass.RAMP_DOWN_CRITICAL,
    RampClass.RAMP_DOWN,
    RampClass.NO_RAMP,
    RampClass.RAMP_UP,
    RampClass.RAMP_UP_CRITICAL,
)
_THREE = (RampClass.RAMP_DOWN_STAR, RampClass.NO_RAMP, RampClass.RAMP_UP_STAR)


class ClassScheme(enum.Enum):
    """Ordered label sets; a class's integer code is its position."""

    FIVE = "five"
    THREE = "three"

    @classmethod
    def parse(cls, text: str | int) -> "ClassScheme":
        key = str(text).strip().lower()
        aliases = {"5": cls.FIVE, "five": cls.FIVE, "3": cls.THREE, "three": cls.THREE}
        if key not in aliases:
            raise DataError(f"unknown class scheme {text!r}")
        return aliases[key]

    @property
    def classes(self) -> tuple[RampClass, ...]:
        return _FIVE if self is ClassScheme.FIVE else _THREE

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def code(self, label: RampClass) -> int:
        if label is RampClass.UNKNOWN:
            return UNKNOWN_CODE
        try:
            return self.classes.index(label)
        except ValueError:
            raise DataError(f"{label} is not a class of the {self.value}-class scheme") from None

    def label(self, code: int) -> RampClass:
        if code == UNKNOWN_CODE:
            return RampClass.UNKNOWN
        if not 0 <= code < self.n_classes:
            raise DataError(f"class code {code} outside the {self.value}-class scheme")
        return self.classes[code]

    def adapt(self, label: RampClass) -> RampClass:
        """Bring a label into this scheme (5-class labels are grouped for THREE)."""
        if self is ClassScheme.THREE and label in _FIVE:
            return group_to_three(label)
        self.code(label)  # validates membership
        return label

    def codes(self, labels: Sequence[RampClass]) -> np.ndarray:
        return np.array([self.code(self.adapt(lab)) for lab in labels], dtype=np.int64)


def group_to_three(label: RampClass) -> RampClass:
    """Map a 5-class label onto the grouped 3-class scheme."""
    if label in (RampClass.RAMP_DOWN, RampClass.RAMP_DOWN_CRITICAL):
        return RampClass.RAMP_DOWN_STAR
    if label in (RampClass.RAMP_UP, RampClass.RAMP_UP_CRITICAL):
        return RampClass.RAMP_UP_STAR
    if label in (RampClass.NO_RAMP, RampClass.UNKNOWN):
        return label
    raise DataError(f"{label} is already a grouped label")


@dataclass(frozen=True)
class PowerSample:
    index: int
    power: float
    label: RampClass = RampClass.UNKNOWN


@dataclass(frozen=True, eq=False)
class BivariateSeries:
    """Power readings (MW) on consecutive sample ordinals, with ramp labels.

    ``power`` is stored as a read-only float64 array; ``labels`` holds one
    :class:`RampClass` per sample.
    """

    power: np.ndarray
    labels: tuple[RampClass, ...]
    start_index: int = 0
    period_minutes: float = 15.0
    capacity_mw: float | None = None
    _codes_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        power = np.array(self.power, dtype=np.float64)
        if power.ndim != 1 or power.size == 0:
            raise DataError("series must be a non-empty 1-D sequence")
        if len(self.labels) != power.size:
            raise DataError("labels and power must have equal length")
        if not np.all(np.isfinite(power)):
            raise DataError("power values must be finite")
        if np.any(power < 0):
            raise DataError(f"negative power at index {self.start_index + int(np.argmax(power < 0))}")
        if self.capacity_mw is not None and np.any(power > self.capacity_mw):
            raise DataError("power exceeds declared capacity")
        if self.period_minutes <= 0:
            raise DataError("period_minutes must be positive")
        power.setflags(write=False)
        object.__setattr__(self, "power", power)
        object.__setattr__(self, "labels", tuple(self.labels))

    @classmethod
    def from_power(cls, power: Sequence[float], labels: Sequence[RampClass] | None = None,
                   **kwargs) -> "BivariateSeries":
        if labels is None:
            labels = (RampClass.UNKNOWN,) * len(power)
        return cls(np.asarray(power, dtype=np.float64), tuple(labels), **kwargs)

    def __len__(self) -> int:
        return self.power.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BivariateSeries):
            return NotImplemented
        return (self.start_index == other.start_index
                and self.period_minutes == other.period_minutes
                and self.capacity_mw == other.capacity_mw
                and self.labels == other.labels
                and np.array_equal(self.power, other.power))

    __hash__ = None  # type: ignore[assignment]

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.start_index, self.start_index + len(self))

    @property
    def samples(self) -> Iterator[PowerSample]:
        for k, (p, lab) in enumerate(zip(self.power, self.labels)):
            yield PowerSample(self.start_index + k, float(p), lab)

    @property
    def is_labeled(self) -> bool:
        return RampClass.UNKNOWN not in self.labels

    def label_codes(self, scheme: ClassScheme) -> np.ndarray:
        if scheme not in self._codes_cache:
            self._codes_cache[scheme] = scheme.codes(self.labels)
        return self._codes_cache[scheme]

    def with_labels(self, labels: Sequence[RampClass]) -> "BivariateSeries":
        return BivariateSeries(self.power, tuple(labels), self.start_index,
                               self.period_minutes, self.capacity_mw)

    def with_power(self, power: np.ndarray) -> "BivariateSeries":
        return BivariateSeries(power, self.labels, self.start_index,
                               self.period_minutes, None)


CSV_HEADER = ("index", "power", "label")


def format_number(value: float) -> str:
    return f"{value:.12g}"


def read_series(path: str | Path, has_labels: bool = True, period_minutes: float = 15.0,
                capacity_mw: float | None = None) -> BivariateSeries:
    """Parse an ``index,power[,label]`` CSV with a header line.

    Rows without a label column (or with ``has_labels=False``) are labeled
    ``unknown``.
    """
    powers: list[float] = []
    labels: list[RampClass] = []
    first_index = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SeriesFormatError("missing header", 1) from None
        header = [h.strip().lower() for h in header]
        if header[:2] != ["index", "power"]:
            raise SeriesFormatError("header must start with index,power", 1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise SeriesFormatError("expected at least 2 columns", lineno)
            try:
                idx = int(row[0])
                power = float(row[1])
            except ValueError:
                raise SeriesFormatError(f"cannot parse {row[:2]}", lineno) from None
            if not math.isfinite(power):
                raise SeriesFormatError("power must be finite", lineno)
            if power < 0:
                raise SeriesFormatError(f"negative power {power}", lineno)
            if first_index is None:
                first_index = idx
            elif idx != first_index + len(powers):
                raise SeriesFormatError(f"index {idx} does not follow {first_index + len(powers) - 1}", lineno)
            label = RampClass.UNKNOWN
            if has_labels and len(row) > 2 and row[2].strip():
                try:
                    label = RampClass.parse(row[2])
                except DataError as exc:
                    raise SeriesFormatError(str(exc), lineno) from None
            powers.append(power)
            labels.append(label)
    if not powers:
        raise SeriesFormatError("no data rows", 2)
    return BivariateSeries(np.array(powers), tuple(labels), first_index or 0,
                           period_minutes, capacity_mw)


def write_series(series: BivariateSeries, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for s in series.samples:
            writer.writerow((s.index, format_number(s.power), s.label.value))


@dataclass(frozen=True)
class ScaleParams:
    minimum: float
    maximum: float

    def inverse(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values) * (self.maximum - self.minimum) + self.minimum


def minmax_scale(series: BivariateSeries) -> tuple[BivariateSeries, float, float]:
    """Scale power to [0, 1]; returns the series plus (min, max) in MW."""
    lo = float(series.power.min())
    hi = float(series.power.max())
    if hi == lo:
        raise DataError("constant series: MinMax range is degenerate")
    scaled = (series.power - lo) / (hi - lo)
    return series.with_power(scaled), lo, hi


def minmax_inverse(series: BivariateSeries, lo: float, hi: float) -> BivariateSeries:
    return series.with_power(ScaleParams(lo, hi).inverse(series.power))
