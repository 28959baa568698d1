"""Prevalence-driven alarm functions and the signals that feed them.

An alarm value a_t in [0, 1) expresses how strongly the population has
reduced its transmission-relevant behaviour at time t, as a function of
an epidemic signal observed one step earlier (lagged prevalence, or an
externally supplied series such as smoothed intervention incidence).

Four parametric families are supported:

    threshold:           a = delta1            if signal > delta2 else 0
    exponential:         a = 1 - exp(-delta1 * signal)
    scaled_exponential:  a = delta2 * (1 - exp(-delta1 * signal))
    hill:                a = signal^delta2 / (delta1^delta2 + signal^delta2)

The hill family is defined on proportion-valued signals only. The
threshold comparison is strict: a tie at delta2 raises no alarm.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import ConfigError
from .epidemic import EpidemicHistory

__all__ = [
    "THRESHOLD",
    "EXPONENTIAL",
    "SCALED_EXPONENTIAL",
    "HILL",
    "FAMILIES",
    "AlarmSignal",
    "AlarmSpec",
    "alarm_value",
    "alarm_values",
    "alarm_series",
    "resolve_signal",
    "has_exact_zero_form",
]

THRESHOLD = "threshold"
EXPONENTIAL = "exponential"
SCALED_EXPONENTIAL = "scaled_exponential"
HILL = "hill"
FAMILIES = (THRESHOLD, EXPONENTIAL, SCALED_EXPONENTIAL, HILL)

COUNT = "count"
PROPORTION = "proportion"
EXTERNAL = "external"
SIGNAL_KINDS = (COUNT, PROPORTION, EXTERNAL)

# Largest float below 1; keeps 1 - a_t strictly positive even when the
# exponential saturates, so (1 - a_t)^-1 stays finite.
_MAX_ALARM = float(np.nextafter(1.0, 0.0))


@dataclass(frozen=True)
class AlarmSignal:
    """What drives the alarm: lagged internal prevalence or an external series.

    Attributes:
        kind: "count" (infectious count), "proportion" (count / n) or
            "external" (user-supplied series indexed by time).
        series: for external signals, mapping time -> raw value.
        window: optional rolling-average width w; the smoothed value at
            time t averages raw values at t-w+1..t.
        presmoothed: set when the external series is already averaged,
            to avoid smoothing twice.
    """

    kind: str = COUNT
    series: Optional[Mapping[int, float]] = None
    window: Optional[int] = None
    presmoothed: bool = False

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise ConfigError(f"unknown signal kind {self.kind!r}")
        if self.kind == EXTERNAL and self.series is None:
            raise ConfigError("external signal requires a series")
        if self.kind != EXTERNAL and self.series is not None:
            raise ConfigError(f"{self.kind} signal does not accept a series")
        if self.window is not None and self.window < 1:
            raise ConfigError(f"rolling window must be >= 1, got {self.window}")
        if self.presmoothed and self.kind != EXTERNAL:
            raise ConfigError("presmoothed only applies to external series")

    @property
    def is_proportion(self) -> bool:
        return self.kind == PROPORTION


@dataclass(frozen=True)
class AlarmSpec:
    """One parametric alarm family plus its driving signal.

    delta1 = 0 (with delta2 = 0 where applicable) is admitted as the
    exact no-alarm configuration used by spike-and-slab screening.
    """

    family: str
    delta1: float
    delta2: Optional[float] = None
    signal: AlarmSignal = field(default_factory=AlarmSignal)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown alarm family {self.family!r}")
        d1, d2 = self.delta1, self.delta2
        if self.family == THRESHOLD:
            if not 0.0 <= d1 < 1.0:
                raise ConfigError(f"threshold needs 0 <= delta1 < 1, got {d1}")
            if d2 is None or d2 < 0.0:
                raise ConfigError(f"threshold needs delta2 >= 0, got {d2}")
        elif self.family == EXPONENTIAL:
            if not 0.0 <= d1 < 1.0:
                raise ConfigError(f"exponential needs 0 <= delta1 < 1, got {d1}")
            if d2 is not None:
                raise ConfigError("exponential alarm has no delta2")
        elif self.family == SCALED_EXPONENTIAL:
            if not 0.0 <= d1 < 1.0:
                raise ConfigError(
                    f"scaled_exponential needs 0 <= delta1 < 1, got {d1}")
            if d2 is None or not 0.0 <= d2 <= 1.0:
                raise ConfigError(
                    f"scaled_exponential needs 0 <= delta2 <= 1, got {d2}")
        elif self.family == HILL:
            if not 0.0 < d1 < 1.0:
                raise ConfigError(f"hill needs 0 < delta1 < 1, got {d1}")
            if d2 is None or d2 <= 0.0:
                raise ConfigError(f"hill needs delta2 > 0, got {d2}")
            if not self.signal.is_proportion:
                raise ConfigError("hill alarm requires a proportion signal")


def has_exact_zero_form(family: str) -> bool:
    """Whether setting the parameters to zero makes the alarm identically
    zero at every signal level (required for spike-and-slab screening)."""
    return family in (THRESHOLD, EXPONENTIAL, SCALED_EXPONENTIAL)


def alarm_values(family: str, delta1: float, delta2, signal_values) -> np.ndarray:
    """Vectorised alarm evaluation over an array of signal values."""
    s = np.asarray(signal_values, dtype=float)
    if family == THRESHOLD:
        a = np.where(s > delta2, delta1, 0.0)
    elif family == EXPONENTIAL:
        a = -np.expm1(-delta1 * s)
    elif family == SCALED_EXPONENTIAL:
        a = delta2 * -np.expm1(-delta1 * s)
    elif family == HILL:
        if delta1 <= 0.0:
            raise ValueError("hill alarm undefined for delta1 <= 0")
        num = s ** delta2
        a = num / (delta1 ** delta2 + num)
    else:
        raise ValueError(f"unknown alarm family {family!r}")
    return np.minimum(a, _MAX_ALARM)


def alarm_value(spec: AlarmSpec, signal_value: float) -> float:
    """Alarm level for one signal value; always in [0, 1)."""
    if signal_value < 0:
        raise ValueError(f"signal must be non-negative, got {signal_value}")
    if spec.family == HILL and spec.signal.is_proportion and signal_value > 1.0:
        raise ValueError(
            f"proportion signal must be <= 1, got {signal_value}")
    return float(alarm_values(spec.family, spec.delta1, spec.delta2,
                              signal_value))


def _smooth(series: Mapping[int, float], times: np.ndarray, window: int,
            presmoothed: bool):
    """Rolling average of `series` at each requested time; the average at t
    covers raw values t-window+1..t."""
    if presmoothed or window is None or window == 1:
        needed = set(int(t) for t in times)
    else:
        needed = set()
        for t in times:
            needed.update(range(int(t) - window + 1, int(t) + 1))
    missing = sorted(t for t in needed if t not in series)
    if missing:
        raise ConfigError(
            f"external signal series has gaps; missing times: {missing}")
    if presmoothed or window is None or window == 1:
        return np.array([float(series[int(t)]) for t in times])
    return np.array([
        float(np.mean([series[u] for u in range(int(t) - window + 1, int(t) + 1)]))
        for t in times
    ])


def resolve_signal(signal: AlarmSignal, times, history: EpidemicHistory = None,
                   n: int = None) -> np.ndarray:
    """Signal values at the given times.

    Internal kinds read infectious prevalence from the history (which may
    be queried one step before its window for the first alarm). External
    kinds read (and optionally smooth) the stored series.
    """
    times = np.asarray(times, dtype=int)
    if signal.kind == EXTERNAL:
        return _smooth(signal.series, times, signal.window, signal.presmoothed)
    if history is None:
        raise ValueError(f"{signal.kind} signal requires an epidemic history")
    counts = np.array([history.infectious_count(int(t)) for t in times],
                      dtype=float)
    if signal.kind == COUNT:
        return counts
    if n is None:
        n = history.n
    return counts / float(n)


def alarm_series(spec: AlarmSpec, history: EpidemicHistory = None,
                 n: int = None, t_start: int = None,
                 t_end: int = None) -> np.ndarray:
    """Alarm values a_t for t in [t_start, t_end], reading the signal at t-1.

    Defaults to the history's window. Proportion signals divide counts by
    n (the history's population size unless given).
    """
    if t_start is None or t_end is None:
        if history is None:
            raise ValueError("need either a history or an explicit time range")
        t_start = history.t_min if t_start is None else t_start
        t_end = history.t_max if t_end is None else t_end
    times = np.arange(t_start - 1, t_end)  # signal is read one step back
    sig = resolve_signal(spec.signal, times, history=history, n=n)
    if np.any(sig < 0):
        raise ValueError("alarm signal must be non-negative")
    if spec.family == HILL and spec.signal.is_proportion and np.any(sig > 1.0):
        raise ValueError("proportion signal exceeds 1")
    return alarm_values(spec.family, spec.delta1, spec.delta2, sig)
