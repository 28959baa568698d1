"""Discrete-time compartmental bookkeeping for SIR and SEIR epidemics.

Transition times are event times: an individual infected at time t
enters the next compartment at t+1. Concretely, with infection event
time ``e`` and removal time ``r``, the individual is infectious at
times e+1..r inclusive and removed strictly after r; the exposed
period (SEIR) is placed analogously between the exposure event and the
infection event. This makes the infectious period length exactly
``removal_time - infection_time`` time steps.

Histories are immutable after construction and safe to share.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import DataFormatError

__all__ = [
    "SIR",
    "SEIR",
    "TransitionTimes",
    "PeriodSpec",
    "EpidemicHistory",
    "load_events",
    "save_events",
]

SIR = "sir"
SEIR = "seir"

_NEVER = np.inf  # sentinel for "event never happens"


@dataclass(frozen=True)
class TransitionTimes:
    """Per-individual event times; None means the event never occurred."""

    exposure_time: Optional[int] = None
    infection_time: Optional[int] = None
    removal_time: Optional[int] = None


@dataclass(frozen=True)
class PeriodSpec:
    """Known, fixed compartment dwell times (in time steps).

    removal_overrides maps individual id to an absolute removal time
    that takes precedence over the scheduled ``infection + infectious_period``
    when it is earlier (e.g. culled farms). Overrides never shorten the
    infectious period below one step.
    """

    infectious_period: int
    exposed_period: Optional[int] = None
    removal_overrides: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.infectious_period < 1:
            raise ValueError(f"infectious_period must be >= 1, "
                             f"got {self.infectious_period}")
        if self.exposed_period is not None and self.exposed_period < 1:
            raise ValueError(f"exposed_period must be >= 1, "
                             f"got {self.exposed_period}")

    def removal_time(self, individual: int, infection_time: int) -> int:
        scheduled = infection_time + self.infectious_period
        override = self.removal_overrides.get(individual)
        if override is None:
            return scheduled
        return max(infection_time + 1, min(scheduled, int(override)))


def _as_time_array(values, n):
    arr = np.full(n, _NEVER, dtype=float)
    if values is None:
        return arr
    values = np.asarray(values, dtype=float)
    if values.shape != (n,):
        raise ValueError(f"expected {n} transition times, got shape {values.shape}")
    mask = np.isfinite(values)
    arr[mask] = values[mask]
    return arr


class EpidemicHistory:
    """Complete transition record over an integer study window.

    Args:
        framework: "sir" or "seir".
        n: population size.
        t_min, t_max: inclusive study window.
        infection_times: infection event time per individual (inf/None = never).
        removal_times: removal time per individual.
        exposure_times: exposure event time per individual (SEIR only).
    """

    def __init__(self, framework, n, t_min, t_max, infection_times=None,
                 removal_times=None, exposure_times=None):
        if framework not in (SIR, SEIR):
            raise ValueError(f"unknown framework {framework!r}")
        if t_min > t_max:
            raise ValueError(f"empty window [{t_min}, {t_max}]")
        self.framework = framework
        self.n = int(n)
        self.t_min = int(t_min)
        self.t_max = int(t_max)
        self._infection = _as_time_array(infection_times, self.n)
        self._removal = _as_time_array(removal_times, self.n)
        if framework == SEIR:
            self._exposure = _as_time_array(exposure_times, self.n)
        else:
            if exposure_times is not None:
                raise ValueError("exposure_times only apply to the SEIR framework")
            self._exposure = self._infection  # S -> I directly: events coincide
        self._validate()
        for arr in (self._infection, self._removal, self._exposure):
            arr.setflags(write=False)

    def _validate(self):
        for i in range(self.n):
            e, f, r = self._exposure[i], self._infection[i], self._removal[i]
            if self.framework == SEIR:
                if np.isfinite(f) and not np.isfinite(e):
                    raise ValueError(f"individual {i}: infection without exposure")
                if np.isfinite(f) and not e < f:
                    raise ValueError(
                        f"individual {i}: exposure_time {e:g} must be < "
                        f"infection_time {f:g}")
                if np.isfinite(r) and not np.isfinite(f):
                    raise ValueError(f"individual {i}: removal without infection")
            if np.isfinite(r) and not f < r:
                raise ValueError(
                    f"individual {i}: infection_time {f:g} must be < "
                    f"removal_time {r:g}")

    # -- per-individual views ------------------------------------------------

    def transitions(self, i: int) -> TransitionTimes:
        def get(arr):
            v = arr[i]
            return int(v) if np.isfinite(v) else None

        return TransitionTimes(
            exposure_time=get(self._exposure) if self.framework == SEIR else None,
            infection_time=get(self._infection),
            removal_time=get(self._removal),
        )

    @property
    def event_times(self) -> np.ndarray:
        """Time each individual acquired infection (entered E in SEIR,
        I in SIR); inf for never-infected."""
        return self._exposure if self.framework == SEIR else self._infection

    # -- state queries -------------------------------------------------------

    def _check_window(self, t):
        if not self.t_min <= t <= self.t_max:
            raise ValueError(f"time {t} outside study window "
                             f"[{self.t_min}, {self.t_max}]")

    def state_of(self, i: int, t: int) -> str:
        """Compartment ("S", "E", "I" or "R") of individual i at time t."""
        self._check_window(t)
        if t <= self._exposure[i]:
            return "S"
        if t <= self._infection[i]:
            return "E"  # only reachable in SEIR (arrays coincide in SIR)
        if t <= self._removal[i]:
            return "I"
        return "R"

    def susceptible_mask(self, t: int) -> np.ndarray:
        return t <= self._exposure

    def infectious_mask(self, t: int) -> np.ndarray:
        return (self._infection < t) & (t <= self._removal)

    def infectious_at(self, t: int) -> np.ndarray:
        """Indices infectious at time t (no window restriction; callers may
        read one step before t_min for alarm signals)."""
        return np.flatnonzero(self.infectious_mask(t))

    def infectious_count(self, t: int) -> int:
        return int(self.infectious_mask(t).sum())

    def compartment_counts(self, t: int) -> dict[str, int]:
        self._check_window(t)
        sus = int((t <= self._exposure).sum())
        exp_ = int(((self._exposure < t) & (t <= self._infection)).sum())
        inf_ = int(((self._infection < t) & (t <= self._removal)).sum())
        rem = self.n - sus - exp_ - inf_
        return {"S": sus, "E": exp_, "I": inf_, "R": rem}

    # -- incidence -----------------------------------------------------------

    def new_infections(self, t: int) -> set[int]:
        """Individuals acquiring infection at time t, i.e. I(t+1)\\I(t) for
        SIR or E(t+1)\\E(t) for SEIR."""
        self._check_window(t)
        if t + 1 > self.t_max:
            raise ValueError(f"new_infections({t}) needs t+1 <= t_max={self.t_max}")
        return set(np.flatnonzero(self.event_times == t).tolist())

    def epidemic_curve(self) -> np.ndarray:
        """Incident-infection counts, one entry per t in [t_min, t_max-1]."""
        events = self.event_times
        counts = np.zeros(self.t_max - self.t_min, dtype=int)
        finite = events[np.isfinite(events)].astype(int)
        for t in finite:
            if self.t_min <= t <= self.t_max - 1:
                counts[t - self.t_min] += 1
        return counts

    def total_infected(self, include_initial: bool = True) -> int:
        """Number of ever-infected individuals; optionally excluding the
        initial infectives whose event precedes the window."""
        events = self.event_times
        infected = np.isfinite(events)
        if not include_initial:
            infected &= events >= self.t_min
        return int(infected.sum())

    def __repr__(self) -> str:
        return (f"EpidemicHistory({self.framework}, n={self.n}, "
                f"window=[{self.t_min}, {self.t_max}], "
                f"infected={self.total_infected()})")


def save_events(history: EpidemicHistory, path) -> None:
    """Write one row per individual: ``id,exposure_time,infection_time,
    removal_time``; empty cells mean "never"."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "exposure_time", "infection_time", "removal_time"])
        for i in range(history.n):
            tr = history.transitions(i)
            writer.writerow([
                i,
                "" if tr.exposure_time is None else tr.exposure_time,
                "" if tr.infection_time is None else tr.infection_time,
                "" if tr.removal_time is None else tr.removal_time,
            ])


def load_events(path, n: int, framework: str, t_min: int, t_max: int) -> EpidemicHistory:
    """Read an events CSV (see save_events) and validate it.

    The time origin and window come from the run configuration, never
    from the data. Every id 0..n-1 must appear exactly once; ordering
    violations raise a validation error naming the individual.
    """
    exposure = np.full(n, _NEVER)
    infection = np.full(n, _NEVER)
    removal = np.full(n, _NEVER)
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError("empty file", path=path) from None
        expected = ["id", "exposure_time", "infection_time", "removal_time"]
        if [h.strip() for h in header] != expected:
            raise DataFormatError(f"expected header {','.join(expected)}",
                                  path=path, line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise DataFormatError(f"expected 4 fields, got {len(row)}",
                                      path=path, line=lineno)
            try:
                ident = int(row[0])
                vals = [float(v) if v.strip() else _NEVER for v in row[1:]]
            except ValueError as exc:
                raise DataFormatError(f"non-numeric field ({exc})", path=path,
                                      line=lineno) from None
            if not 0 <= ident < n:
                raise DataFormatError(
                    f"id {ident} outside population 0..{n - 1}",
                    path=path, line=lineno)
            if ident in seen:
                raise DataFormatError(f"duplicate id {ident}", path=path,
                                      line=lineno)
            seen.add(ident)
            if framework == SIR and np.isfinite(vals[0]):
                raise DataFormatError(
                    f"individual {ident}: exposure_time set but framework is SIR",
                    path=path, line=lineno)
            exposure[ident], infection[ident], removal[ident] = vals
    if len(seen) != n:
        missing = sorted(set(range(n)) - seen)
        raise DataFormatError(
            f"{len(missing)} individuals missing relative to the population "
            f"(first missing id {missing[0]})", path=path)
    try:
        return EpidemicHistory(
            framework, n, t_min, t_max,
            infection_times=infection, removal_times=removal,
            exposure_times=exposure if framework == SEIR else None)
    except ValueError as exc:
        raise DataFormatError(str(exc), path=path) from None
