"""Real-time loop: one power reading in, one forecast out."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import BivariateSeries, ClassScheme, DataError, RampClass, ScaleParams, UNKNOWN_CODE
from .evaluation import MetricsReport, compute_metrics
from .features import feature_matrix
from .imbalance import EnsembleModel
from .preprocess import column_names
from .ramping import RampThresholds, SdaConfig, SwingingDoor, TrendSegment, close_segment


@dataclass(frozen=True, eq=False)
class ForecastRecord:
    """Output of one step.

    ``predicted`` is None during warm-up. ``provisional`` marks forecasts
    made before any event has closed (last-event code -1).
    """

    j: int
    predicted: RampClass | None
    scores: np.ndarray | None
    event_closed: TrendSegment | None = None
    provisional: bool = False
    row: np.ndarray | None = field(default=None, repr=False)

    @property
    def is_forecast(self) -> bool:
        return self.predicted is not None

    def format(self, scheme: ClassScheme) -> str:
        """``j,predicted,score_0..score_{C-1}[,closed_event_class]``."""
        if self.predicted is None:
            parts = [str(self.j), "none", *([""] * scheme.n_classes)]
        else:
            parts = [str(self.j), self.predicted.value, *(f"{s:.12g}" for s in self.scores)]
        if self.event_closed is not None:
            parts.append(scheme.adapt(self.event_closed.assigned_class).value)
        return ",".join(parts)


class StreamState:
    """Mutable per-stream state. Samples after ``last_event_idx`` are unlabeled.

    Trend detection runs on MW readings; when ``scale`` is given the window
    handed to the model is MinMax-scaled with those parameters first.
    """

    def __init__(self, model: EnsembleModel, thresholds: RampThresholds, sda: SdaConfig,
                 period_minutes: float = 15.0, scale: ScaleParams | None = None):
        if tuple(model.columns) != column_names(model.l):
            raise DataError("model column layout does not match its window length")
        self.model = model
        self.thresholds = thresholds
        self.sda = sda
        self.period_minutes = period_minutes
        self.scale = scale
        self.powers: list[float] = []
        self.labels: list[RampClass] = []
        self.door: SwingingDoor | None = None
        self.last_event_idx = -1
        self.last_event_class: RampClass | None = None
        self.closed: list[TrendSegment] = []

    @property
    def scheme(self) -> ClassScheme:
        return self.model.scheme

    def history(self) -> BivariateSeries:
        return BivariateSeries.from_power(self.powers, self.labels, period_minutes=self.period_minutes)

    def _window_row(self, j: int) -> tuple[np.ndarray, bool]:
        l = self.model.l
        w = j - l + 1
        powers = np.asarray(self.powers[w:j + 1], dtype=np.float64)
        if self.scale is not None:
            powers = (powers - self.scale.minimum) / (self.scale.maximum - self.scale.minimum)
        codes = np.array([self.scheme.code(self.scheme.adapt(lab)) for lab in self.labels[w:j + 1]],
                         dtype=np.float64)
        last = UNKNOWN_CODE if self.last_event_class is None else \
            self.scheme.code(self.scheme.adapt(self.last_event_class))
        feats = feature_matrix(powers[None, :], np.array([last]))[0]
        return np.concatenate([powers, codes, feats]), last == UNKNOWN_CODE


def _advance(state: StreamState, new_power: float
             ) -> tuple[int, TrendSegment | None, np.ndarray | None, bool]:
    """SDA update, back-fill and window construction for one reading."""
    new_power = float(new_power)
    if not np.isfinite(new_power) or new_power < 0:
        raise DataError(f"invalid power reading {new_power!r}")
    j = len(state.powers)
    closed = None
    if state.door is None:
        state.door = SwingingDoor(j, new_power, state.sda.epsilon)
    elif not state.door.belongs(new_power, j):
        pivot = state.door.pivot_idx
        closed = close_segment(np.asarray(state.powers[pivot:j]), 0, j - 1 - pivot,
                               state.period_minutes, state.thresholds, offset=pivot)
        for k in range(state.last_event_idx + 1, j):
            state.labels[k] = closed.assigned_class
        state.closed.append(closed)
        state.last_event_idx = j - 1
        state.last_event_class = closed.assigned_class
        state.door = SwingingDoor(j, new_power, state.sda.epsilon)
    state.powers.append(new_power)
    state.labels.append(RampClass.UNKNOWN)
    if j < state.model.l - 1:
        return j, closed, None, False
    row, provisional = state._window_row(j)
    return j, closed, row, provisional


def _record(state: StreamState, j: int, closed, row, provisional, scores) -> ForecastRecord:
    if row is None:
        return ForecastRecord(j, None, None, closed)
    return ForecastRecord(j, state.scheme.label(int(np.argmax(scores))), scores, closed, provisional, row)


def step(state: StreamState, new_power: float) -> ForecastRecord:
    """Ingest one reading and forecast the class ``h`` steps ahead."""
    j, closed, row, provisional = _advance(state, new_power)
    scores = None if row is None else state.model.decision_scores(row[None, :])[0]
    return _record(state, j, closed, row, provisional, scores)


def run_stream(state: StreamState, powers: Iterable[float]) -> Iterable[ForecastRecord]:
    for p in powers:
        yield step(state, p)


@dataclass(frozen=True, eq=False)
class ReplayResult:
    records: tuple[ForecastRecord, ...]
    metrics: MetricsReport | None
    scored_steps: np.ndarray
    state: StreamState = field(repr=False)

    @property
    def forecasts(self) -> tuple[ForecastRecord, ...]:
        return tuple(r for r in self.records if r.is_forecast)


def replay(series: BivariateSeries, model: EnsembleModel, thresholds: RampThresholds,
           sda: SdaConfig, reference: Sequence[RampClass] | None = None,
           scale: ScaleParams | None = None) -> ReplayResult:
    """Stream ``series`` sample by sample.

    Forecasts made at step ``j`` are scored against the reference label at
    ``j + h`` when one exists (``reference`` or the series' own labels).
    """
    l, h = model.l, model.h
    if len(series) < l + h:
        raise DataError(f"series of {len(series)} samples is shorter than l+h={l + h}")
    if reference is None and series.is_labeled:
        reference = series.labels
    state = StreamState(model, thresholds, sda, series.period_minutes, scale)
    # rows never depend on earlier forecasts, so scoring can be batched
    steps = [_advance(state, p) for p in series.power]
    rows = np.array([row for _, _, row, _ in steps if row is not None])
    scores = iter(model.decision_scores(rows))
    records = tuple(_record(state, j, closed, row, prov, None if row is None else next(scores))
                    for j, closed, row, prov in steps)
    metrics = None
    scored = np.empty(0, dtype=np.int64)
    if reference is not None:
        if len(reference) != len(series):
            raise DataError("reference labels must match the series length")
        truth, pred, done = [], [], []
        for r in records:
            if r.is_forecast and r.j + h < len(series) and reference[r.j + h] is not RampClass.UNKNOWN:
                truth.append(model.scheme.code(model.scheme.adapt(reference[r.j + h])))
                pred.append(model.scheme.code(r.predicted))
                done.append(r.j)
        if truth:
            metrics = compute_metrics(truth, pred, model.scheme)
            scored = np.asarray(done, dtype=np.int64)
    return ReplayResult(records, metrics, scored, state)


__all__ = ["ForecastRecord", "ReplayResult", "StreamState", "replay", "run_stream", "step"]
