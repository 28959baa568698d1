"""Infection probabilities and log-likelihoods for spatial ILMs.

The probability that susceptible individual i is infected at time t is

    P(i, t) = 1 - exp(-[ omega_S(i) * g_A(a_t) *
                         sum_{j in I(t)} (d_ij + offset)^(-beta * g_B(a_t))
                         + epsilon ])

where omega_S(i) is a constant alpha or a binary-covariate form
alpha0 + alpha1 * z_i, and the alarm a_t enters either as a
susceptibility multiplier g_A = (1 - a_t) (form "type_a"), as an
inflation of the spatial decay g_B = (1 - a_t)^-1 (form "type_b"), or
not at all (form "baseline"). With a_t identically zero both alarmed
forms reduce bit-exactly to the baseline model.

The log-likelihood over a study window sums, for every step t with
t+1 still inside the window, log P(i, t) over individuals acquiring
infection at t and log(1 - P(i, t)) over those remaining susceptible.
log(1 - P) is taken directly from the exponent (-pressure - epsilon)
to avoid cancellation when P is close to 1. An observed infection with
P exactly 0 yields -inf, which samplers treat as an auto-reject.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Optional, Union

import numpy as np

from .alarm import AlarmSpec, HILL, alarm_values, resolve_signal
from .epidemic import SEIR, SIR, EpidemicHistory
from .errors import ConfigError
from .population import Population

__all__ = [
    "BASELINE",
    "TYPE_A",
    "TYPE_B",
    "Constant",
    "BinaryCovariate",
    "ModelSpec",
    "ParameterVector",
    "LikelihoodEvaluator",
    "infection_probability",
    "log_likelihood",
    "pointwise_log_terms",
    "parameter_domain",
]

BASELINE = "baseline"
TYPE_A = "type_a"
TYPE_B = "type_b"
FORMS = (BASELINE, TYPE_A, TYPE_B)


@dataclass(frozen=True)
class Constant:
    """Shared susceptibility level alpha > 0 for every individual."""

    alpha: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")

    parameter_names = ("alpha",)

    def values(self):
        return {"alpha": self.alpha}


@dataclass(frozen=True)
class BinaryCovariate:
    """Two-level susceptibility alpha0 + alpha1 * z_i for a 0/1 covariate."""

    alpha0: float
    alpha1: float
    column: int = 0

    def __post_init__(self):
        if self.alpha0 <= 0 or self.alpha1 <= 0:
            raise ConfigError(
                f"alpha0 and alpha1 must be > 0, got {self.alpha0}, {self.alpha1}")

    parameter_names = ("alpha0", "alpha1")

    def values(self):
        return {"alpha0": self.alpha0, "alpha1": self.alpha1}


_ALARM_PARAMS = {
    "threshold": ("delta1", "delta2"),
    "exponential": ("delta1",),
    "scaled_exponential": ("delta1", "delta2"),
    "hill": ("delta1", "delta2"),
}


@dataclass(frozen=True)
class ModelSpec:
    """Structure plus current parameter values for one ILM.

    Attributes:
        form: "baseline", "type_a" or "type_b".
        framework: "sir" or "seir".
        susceptibility: Constant or BinaryCovariate.
        beta: spatial decay power (> 0).
        alarm: AlarmSpec, required for the alarmed forms and forbidden
            for the baseline.
        epsilon: constant outside-pressure hazard (>= 0, never fitted).
        kernel_offset: the constant added to distances before the power
            kernel; 1 by default so alarm increases can never increase a
            pairwise contribution at short range.
    """

    form: str
    framework: str
    susceptibility: Union[Constant, BinaryCovariate]
    beta: float
    alarm: Optional[AlarmSpec] = None
    epsilon: float = 0.0
    kernel_offset: float = 1.0

    def __post_init__(self):
        if self.form not in FORMS:
            raise ConfigError(f"unknown model form {self.form!r}")
        if self.framework not in (SIR, SEIR):
            raise ConfigError(f"unknown framework {self.framework!r}")
        if self.beta <= 0:
            raise ConfigError(f"beta must be > 0, got {self.beta}")
        if self.epsilon < 0:
            raise ConfigError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.form == BASELINE and self.alarm is not None:
            raise ConfigError("baseline model does not take an alarm")
        if self.form != BASELINE and self.alarm is None:
            raise ConfigError(f"{self.form} model requires an alarm")

    def parameter_names(self) -> tuple[str, ...]:
        """Canonical order of the fittable parameters for this spec."""
        names = list(self.susceptibility.parameter_names) + ["beta"]
        if self.alarm is not None:
            names += list(_ALARM_PARAMS[self.alarm.family])
        return tuple(names)

    def default_params(self) -> dict[str, float]:
        params = dict(self.susceptibility.values())
        params["beta"] = self.beta
        if self.alarm is not None:
            params["delta1"] = self.alarm.delta1
            if self.alarm.delta2 is not None:
                params["delta2"] = self.alarm.delta2
        params["epsilon"] = self.epsilon
        return params

    def without_alarm(self) -> "ModelSpec":
        """The matched baseline spec (same kernel, susceptibility, framework)."""
        return replace(self, form=BASELINE, alarm=None)


def parameter_domain(spec: ModelSpec, name: str) -> tuple[float, float]:
    """Open interval of admissible values for one fittable parameter."""
    if name in ("alpha", "alpha0", "alpha1", "beta"):
        return (0.0, np.inf)
    if spec.alarm is None:
        raise ConfigError(f"{name} is not a parameter of a baseline model")
    if name == "delta1":
        return (0.0, 1.0)
    if name == "delta2":
        if spec.alarm.family == "scaled_exponential":
            return (0.0, 1.0)
        return (0.0, np.inf)
    raise ConfigError(f"unknown parameter {name!r}")


@dataclass
class ParameterVector:
    """Ordered parameter values with a fixed-vs-free mask."""

    names: tuple[str, ...]
    values: np.ndarray
    free: np.ndarray

    @classmethod
    def from_spec(cls, spec: ModelSpec, free_names=()) -> "ParameterVector":
        names = spec.parameter_names()
        unknown = [f for f in free_names if f not in names]
        if unknown:
            raise ConfigError(
                f"free parameters {unknown} not in model parameters {names}")
        defaults = spec.default_params()
        values = np.array([defaults[nm] for nm in names], dtype=float)
        free = np.array([nm in free_names for nm in names])
        return cls(names, values, free)

    @property
    def free_names(self) -> tuple[str, ...]:
        return tuple(nm for nm, fl in zip(self.names, self.free) if fl)

    def to_dict(self) -> dict[str, float]:
        return {nm: float(v) for nm, v in zip(self.names, self.values)}


class LikelihoodEvaluator:
    """Pre-indexed likelihood for repeated evaluation over one data set.

    Construction walks the history once, caching per-step susceptible and
    infectious index lists, the log-distance blocks between them, and the
    lagged alarm signal. Each call then costs one vectorised pass per
    step, which is the MCMC hot path.
    """

    def __init__(self, spec: ModelSpec, pop: Population,
                 history: EpidemicHistory):
        if spec.framework != history.framework:
            raise ConfigError(
                f"model framework {spec.framework!r} does not match "
                f"history framework {history.framework!r}")
        self.spec = spec
        self.pop = pop
        self.history = history
        self._defaults = spec.default_params()

        if isinstance(spec.susceptibility, BinaryCovariate):
            z = pop.covariate_column(spec.susceptibility.column)
            if not np.isin(z, (0.0, 1.0)).all():
                raise ConfigError(
                    f"covariate column {spec.susceptibility.column} must be "
                    "binary 0/1 for BinaryCovariate susceptibility")
            self._z = z
        else:
            self._z = None

        dist = pop.distance_matrix
        offset = spec.kernel_offset
        steps = np.arange(history.t_min, history.t_max)
        events = history.event_times

        self._steps = steps
        self._sus_idx = []
        self._logk = []
        self._event_mask = []
        for t in steps:
            sus = np.flatnonzero(history.susceptible_mask(int(t)))
            inf = history.infectious_at(int(t))
            self._sus_idx.append(sus)
            if sus.size and inf.size:
                self._logk.append(np.log(dist[np.ix_(sus, inf)] + offset))
            else:
                self._logk.append(None)
            self._event_mask.append(events[sus] == t)

        if spec.form == BASELINE:
            self._signal = None
        else:
            self._signal = resolve_signal(spec.alarm.signal, steps - 1,
                                          history=history, n=pop.n)

    @property
    def n_terms(self) -> int:
        """Number of per-(i, t) Bernoulli contributions."""
        return int(sum(s.size for s in self._sus_idx))

    def _merged(self, params) -> dict[str, float]:
        merged = dict(self._defaults)
        if params:
            for key, val in params.items():
                if key not in merged:
                    raise KeyError(f"unknown parameter {key!r} for this model")
                merged[key] = float(val)
        return merged

    def _alarm(self, params) -> Optional[np.ndarray]:
        if self._signal is None:
            return None
        fam = self.spec.alarm.family
        if fam == HILL and np.any(self._signal > 1.0):
            raise ValueError("proportion signal exceeds 1")
        return alarm_values(fam, params["delta1"], params.get("delta2"),
                            self._signal)

    def _omega(self, params) -> np.ndarray:
        if self._z is None:
            return np.full(self.pop.n, params["alpha"])
        return params["alpha0"] + params["alpha1"] * self._z

    def _exponents(self, k, params, alarm_vec, omega):
        """Per-step hazard exponents x(i, t) for all susceptibles at step k."""
        spec = self.spec
        sus = self._sus_idx[k]
        logk = self._logk[k]
        beta = params["beta"]
        if spec.form == TYPE_B:
            beta = beta / (1.0 - alarm_vec[k])
        if logk is None:
            pressure = np.zeros(sus.size)
        else:
            pressure = np.exp(-beta * logk).sum(axis=1)
        x = omega[sus] * pressure
        if spec.form == TYPE_A:
            x = x * (1.0 - alarm_vec[k])
        return x + params["epsilon"]

    def log_likelihood(self, params: Mapping[str, float] = None) -> float:
        params = self._merged(params)
        alarm_vec = self._alarm(params)
        omega = self._omega(params)
        total = 0.0
        for k in range(len(self._steps)):
            if self._sus_idx[k].size == 0:
                continue
            x = self._exponents(k, params, alarm_vec, omega)
            mask = self._event_mask[k]
            total -= x[~mask].sum()
            xi = x[mask]
            if xi.size:
                if np.any(xi == 0.0):
                    return float("-inf")
                total += np.log(-np.expm1(-xi)).sum()
        return float(total)

    def pointwise_log_terms(self, params: Mapping[str, float] = None) -> np.ndarray:
        """Per-(i, t) log Bernoulli contributions, ordered by (t, i).

        Their sum equals log_likelihood up to floating reassociation;
        this is the unit over which WAIC is computed.
        """
        params = self._merged(params)
        alarm_vec = self._alarm(params)
        omega = self._omega(params)
        chunks = []
        with np.errstate(divide="ignore"):
            for k in range(len(self._steps)):
                if self._sus_idx[k].size == 0:
                    continue
                x = self._exponents(k, params, alarm_vec, omega)
                mask = self._event_mask[k]
                terms = -x
                if mask.any():
                    terms[mask] = np.log(-np.expm1(-x[mask]))
                chunks.append(terms)
        if not chunks:
            return np.empty(0)
        return np.concatenate(chunks)


def infection_probability(spec: ModelSpec, pop: Population,
                          history: EpidemicHistory,
                          params: Mapping[str, float],
                          i: int, t: int) -> float:
    """P(i, t) for one susceptible individual at one time step."""
    if history.state_of(i, t) != "S":
        raise ValueError(
            f"individual {i} is not susceptible at time {t} "
            f"(state {history.state_of(i, t)})")
    merged = dict(spec.default_params())
    if params:
        merged.update({k: float(v) for k, v in params.items()})

    if spec.form == BASELINE:
        a_t = 0.0
    else:
        sig = resolve_signal(spec.alarm.signal, [t - 1], history=history,
                             n=pop.n)
        a_t = float(alarm_values(spec.alarm.family, merged["delta1"],
                                 merged.get("delta2"), sig)[0])
    if not 0.0 <= a_t < 1.0:
        raise AssertionError(f"alarm value {a_t} outside [0, 1)")

    if isinstance(spec.susceptibility, BinaryCovariate):
        z = pop.covariate_column(spec.susceptibility.column)[i]
        omega = merged["alpha0"] + merged["alpha1"] * z
    else:
        omega = merged["alpha"]

    beta = merged["beta"]
    if spec.form == TYPE_B:
        beta = beta / (1.0 - a_t)
    inf_idx = history.infectious_at(t)
    if inf_idx.size:
        d = pop.distance_matrix[i, inf_idx]
        pressure = float(np.exp(-beta * np.log(d + spec.kernel_offset)).sum())
    else:
        pressure = 0.0
    x = omega * pressure
    if spec.form == TYPE_A:
        x = x * (1.0 - a_t)
    x += merged["epsilon"]
    return float(-np.expm1(-x))


def log_likelihood(spec: ModelSpec, pop: Population, history: EpidemicHistory,
                   params: Mapping[str, float] = None) -> float:
    return LikelihoodEvaluator(spec, pop, history).log_likelihood(params)


def pointwise_log_terms(spec: ModelSpec, pop: Population,
                        history: EpidemicHistory,
                        params: Mapping[str, float] = None) -> np.ndarray:
    return LikelihoodEvaluator(spec, pop, history).pointwise_log_terms(params)
