"""Seeded regime-switching wind-farm generator with self-consistent labels."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import BivariateSeries, DataError
from .ramping import RampThresholds, SdaConfig, label_series
from .seeding import DEFAULT_SEED, rng_for

REGIMES = ("calm", "up", "down", "up_critical", "down_critical")

# calm leaves rarely; ramps last a couple of hours on average
_TRANSITIONS = (
    (0.976, 0.007, 0.007, 0.005, 0.005),
    (0.125, 0.875, 0.0, 0.0, 0.0),
    (0.125, 0.0, 0.875, 0.0, 0.0),
    (0.2, 0.0, 0.0, 0.8, 0.0),
    (0.2, 0.0, 0.0, 0.0, 0.8),
)


@dataclass(frozen=True)
class SynthConfig:
    """Regime chain over :data:`REGIMES`; drifts in MW/min, noise in MW per sample."""

    capacity_mw: float = 669.0
    n_samples: int = 28_800
    period_minutes: float = 15.0
    transitions: tuple[tuple[float, ...], ...] = _TRANSITIONS
    drift_mw_per_min: tuple[float, ...] = (0.0, 1.6, -1.6, 3.2, -3.2)
    noise_mw: tuple[float, ...] = (2.0, 3.0, 3.0, 4.0, 4.0)
    calm_level: float = 0.45  # fraction of capacity the calm regime reverts to
    calm_reversion: float = 0.01  # per-sample pull towards the calm level
    omega: float = 0.2
    sda_fraction: float = 0.01  # SDA epsilon as a fraction of capacity
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        k = len(REGIMES)
        if self.capacity_mw <= 0 or self.period_minutes <= 0:
            raise DataError("capacity and period must be positive")
        if self.n_samples < 2:
            raise DataError("n_samples must be >= 2")
        P = np.asarray(self.transitions, dtype=np.float64)
        if P.shape != (k, k) or np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-12):
            raise DataError("transitions must be a row-stochastic 5x5 matrix")
        if len(self.drift_mw_per_min) != k or len(self.noise_mw) != k:
            raise DataError("one drift and one noise scale per regime")
        if any(s < 0 for s in self.noise_mw):
            raise DataError("noise scales must be non-negative")
        th = self.thresholds()
        d = self.drift_mw_per_min
        if abs(d[0]) >= th.s1:
            raise DataError("calm drift must stay below s1")
        if abs(d[3]) < th.s2 or abs(d[4]) < th.s2:
            raise DataError("critical drifts must reach s2")
        if not 0 <= self.calm_level <= 1 or not 0 <= self.calm_reversion < 1:
            raise DataError("calm_level must lie in [0, 1] and calm_reversion in [0, 1)")

    def thresholds(self) -> RampThresholds:
        return RampThresholds.from_capacity(self.capacity_mw, self.omega)

    def sda(self) -> SdaConfig:
        return SdaConfig.for_capacity(self.capacity_mw, self.sda_fraction)

    def to_dict(self) -> dict:
        return asdict(self)


def simulate_regimes(cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """Hidden regime path and clipped power (MW)."""
    rng = rng_for(cfg.seed, "synth")
    P = np.cumsum(np.asarray(cfg.transitions), axis=1)
    u = rng.random(cfg.n_samples)
    noise = rng.standard_normal(cfg.n_samples)
    drift = np.asarray(cfg.drift_mw_per_min) * cfg.period_minutes
    sigma = np.asarray(cfg.noise_mw)
    target = cfg.calm_level * cfg.capacity_mw
    regimes = np.empty(cfg.n_samples, dtype=np.int64)
    power = np.empty(cfg.n_samples)
    r = 0
    p = target
    for t in range(cfg.n_samples):
        if t > 0:
            r = min(int(np.searchsorted(P[r], u[t], side="right")), len(REGIMES) - 1)
            step = drift[r] + sigma[r] * noise[t]
            if r == 0:
                step += cfg.calm_reversion * (target - p)
            p = min(max(p + step, 0.0), cfg.capacity_mw)
        regimes[t] = r
        power[t] = p
    return regimes, power


def generate(cfg: SynthConfig | None = None) -> BivariateSeries:
    """Labeled 5-class series; labels come from the swinging-door labeler."""
    cfg = cfg or SynthConfig()
    _, power = simulate_regimes(cfg)
    series = BivariateSeries.from_power(power, period_minutes=cfg.period_minutes,
                                        capacity_mw=cfg.capacity_mw)
    return label_series(series, cfg.sda(), cfg.thresholds())


__all__ = ["REGIMES", "SynthConfig", "generate", "simulate_regimes"]
