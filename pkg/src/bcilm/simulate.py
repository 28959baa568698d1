"""Forward stochastic simulation of epidemics from a model specification.

Initial infectives start their infectious (SIR) or exposed (SEIR)
period at the first time point of the window; at each step t every
susceptible individual is infected independently with probability
P(i, t). Internal alarm signals follow the evolving simulated
trajectory, which is what makes prevalence-driven alarms forecastable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .alarm import EXTERNAL, HILL, alarm_values, resolve_signal
from .epidemic import SEIR, EpidemicHistory, PeriodSpec
from .errors import ConfigError
from .model import TYPE_A, TYPE_B, BinaryCovariate, ModelSpec
from .population import Population

__all__ = [
    "SimulationConfig",
    "simulate_epidemic",
    "simulate_batch",
    "resimulate_from_posterior",
]


@dataclass(frozen=True)
class SimulationConfig:
    """How to run one forward simulation.

    The observed window is [1, t_max]; transmission steps run at
    t = 1..t_max-1 so every simulated event is visible in the window.
    seed_selection is either "random" (n_seeds drawn without
    replacement) or an explicit id list (n_seeds then ignored).
    """

    t_max: int
    periods: PeriodSpec
    n_seeds: int = 3
    seed_selection: Union[str, Sequence[int]] = "random"
    rng_seed: int = 0

    def __post_init__(self):
        if self.t_max < 1:
            raise ConfigError(f"t_max must be >= 1, got {self.t_max}")
        if isinstance(self.seed_selection, str):
            if self.seed_selection != "random":
                raise ConfigError(
                    f"seed_selection must be 'random' or an id list, "
                    f"got {self.seed_selection!r}")
            if self.n_seeds < 1:
                raise ConfigError(f"n_seeds must be >= 1, got {self.n_seeds}")


def _schedule(framework: str, periods: PeriodSpec, i: int, event_t: int):
    """Exposure/infection/removal times implied by an infection event."""
    if framework == SEIR:
        if periods.exposed_period is None:
            raise ConfigError("SEIR simulation requires an exposed_period")
        infection = event_t + periods.exposed_period
        return event_t, infection, periods.removal_time(i, infection)
    return np.inf, event_t, periods.removal_time(i, event_t)


def _run_transmission(spec: ModelSpec, pop: Population, params, periods,
                      exposure, infection, removal, from_t, to_t, rng):
    """Simulate infection events at t = from_t..to_t-1 in place."""
    n = pop.n
    dist = pop.distance_matrix
    offset = spec.kernel_offset
    beta = params["beta"]
    eps = params["epsilon"]
    framework = spec.framework

    if isinstance(spec.susceptibility, BinaryCovariate):
        z = pop.covariate_column(spec.susceptibility.column)
        omega = params["alpha0"] + params["alpha1"] * z
    else:
        omega = np.full(n, params["alpha"])

    alarm = spec.alarm
    external_signal = None
    if alarm is not None and alarm.signal.kind == EXTERNAL:
        # Resolve (and smooth) the whole horizon up front so gaps fail fast.
        external_signal = resolve_signal(alarm.signal,
                                         np.arange(from_t - 1, to_t))

    event = exposure if framework == SEIR else infection

    for t in range(from_t, to_t):
        eligible = np.flatnonzero(~np.isfinite(event))
        if eligible.size == 0:
            break
        inf_idx = np.flatnonzero((infection < t) & (t <= removal))

        if alarm is None:
            a_t = 0.0
        else:
            if external_signal is not None:
                sig = external_signal[t - from_t]
            else:
                sig = float(((infection < t - 1) & (t - 1 <= removal)).sum())
                if alarm.signal.is_proportion:
                    sig /= n
            if alarm.family == HILL and alarm.signal.is_proportion and sig > 1.0:
                raise ValueError("proportion signal exceeds 1")
            a_t = float(alarm_values(alarm.family, params["delta1"],
                                     params.get("delta2"), sig))

        if inf_idx.size:
            b = beta / (1.0 - a_t) if spec.form == TYPE_B else beta
            logk = np.log(dist[np.ix_(eligible, inf_idx)] + offset)
            x = omega[eligible] * np.exp(-b * logk).sum(axis=1)
            if spec.form == TYPE_A:
                x = x * (1.0 - a_t)
            x = x + eps
        else:
            x = np.full(eligible.size, eps)

        prob = -np.expm1(-x)
        hits = eligible[rng.random(eligible.size) < prob]
        for i in hits:
            e, f, r = _schedule(framework, periods, int(i), t)
            exposure[i], infection[i], removal[i] = e, f, r


def simulate_epidemic(spec: ModelSpec, pop: Population,
                      config: SimulationConfig,
                      params: Mapping[str, float] = None,
                      rng: np.random.Generator = None) -> EpidemicHistory:
    """Simulate one epidemic over the window [1, t_max].

    params may override the parameter values stored in the spec (used
    when resimulating from posterior draws); rng overrides the seeded
    generator (used by batch simulation).
    """
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    merged = dict(spec.default_params())
    if params:
        merged.update({k: float(v) for k, v in params.items()})

    n = pop.n
    exposure = np.full(n, np.inf)
    infection = np.full(n, np.inf)
    removal = np.full(n, np.inf)

    if isinstance(config.seed_selection, str):
        seeds = np.sort(rng.choice(n, size=config.n_seeds, replace=False))
    else:
        seeds = np.asarray(list(config.seed_selection), dtype=int)
        if len(set(seeds.tolist())) != seeds.size:
            raise ConfigError("explicit seed list contains duplicates")
        if seeds.size == 0:
            raise ConfigError("explicit seed list is empty")
        if (seeds < 0).any() or (seeds >= n).any():
            raise ConfigError("seed id outside population")
    t_min = 1
    for i in seeds:
        e, f, r = _schedule(spec.framework, config.periods, int(i), t_min - 1)
        exposure[i], infection[i], removal[i] = e, f, r

    _run_transmission(spec, pop, merged, config.periods, exposure, infection,
                      removal, t_min, config.t_max, rng)
    return EpidemicHistory(
        spec.framework, n, t_min, config.t_max,
        infection_times=infection, removal_times=removal,
        exposure_times=exposure if spec.framework == SEIR else None)


def simulate_batch(spec: ModelSpec, pop_generator: Callable[[int], Population],
                   config: SimulationConfig, m: int):
    """m independent (population, epidemic) pairs.

    Each replicate gets its own RNG stream derived by counter from the
    master seed, so results are reproducible and order-independent.
    pop_generator maps an integer seed to a Population.
    """
    if m < 1:
        raise ConfigError(f"replicate count must be >= 1, got {m}")
    out = []
    for k in range(m):
        ss = np.random.SeedSequence(config.rng_seed, spawn_key=(k,))
        pop_ss, sim_ss = ss.spawn(2)
        pop = pop_generator(int(pop_ss.generate_state(1)[0]))
        rng = np.random.default_rng(sim_ss)
        out.append((pop, simulate_epidemic(spec, pop, config, rng=rng)))
    return out


def resimulate_from_posterior(spec: ModelSpec, pop: Population,
                              config: SimulationConfig, posterior,
                              history: EpidemicHistory, n_draws: int = 100,
                              t_cut: Optional[int] = None,
                              horizon: Optional[int] = None,
                              rng_seed: Optional[int] = None):
    """Simulate epidemics under parameter draws from a fitted posterior.

    With t_cut None, full epidemics are regenerated over the observed
    window, holding only the initial infectives fixed. With t_cut set,
    the observed history is held fixed for all events before t_cut and
    transmission is simulated from t_cut through horizon (forecast
    mode). Internal alarm signals beyond t_cut follow each simulated
    trajectory.
    """
    if t_cut is None:
        from_t, to_t = history.t_min, history.t_max
    else:
        if not history.t_min <= t_cut <= history.t_max:
            raise ValueError(
                f"t_cut {t_cut} outside observed window "
                f"[{history.t_min}, {history.t_max}]")
        if horizon is None or horizon <= t_cut:
            raise ValueError(f"horizon must exceed t_cut={t_cut}, got {horizon}")
        from_t, to_t = t_cut, horizon

    rows = posterior.posterior()
    if rows.shape[0] < 1:
        raise ValueError("posterior contains no post-burn-in draws")
    if n_draws < 1:
        raise ValueError(f"n_draws must be >= 1, got {n_draws}")
    base_seed = config.rng_seed if rng_seed is None else rng_seed
    rng = np.random.default_rng(np.random.SeedSequence(base_seed,
                                                       spawn_key=(0xD0A,)))
    replace = rows.shape[0] < n_draws
    draw_idx = rng.choice(rows.shape[0], size=n_draws, replace=replace)

    events = history.event_times
    keep = np.isfinite(events) & (events < from_t)
    names = posterior.param_names

    out = []
    for d, j in enumerate(draw_idx):
        params = dict(zip(names, rows[j]))
        exposure = np.full(pop.n, np.inf)
        infection = np.full(pop.n, np.inf)
        removal = np.full(pop.n, np.inf)
        for i in np.flatnonzero(keep):
            tr = history.transitions(int(i))
            if spec.framework == SEIR:
                exposure[i] = np.inf if tr.exposure_time is None else tr.exposure_time
            infection[i] = np.inf if tr.infection_time is None else tr.infection_time
            removal[i] = np.inf if tr.removal_time is None else tr.removal_time
        merged = dict(spec.default_params())
        merged.update(params)
        draw_rng = np.random.default_rng(
            np.random.SeedSequence(base_seed, spawn_key=(1, d)))
        _run_transmission(spec, pop, merged, config.periods, exposure,
                          infection, removal, from_t, to_t, draw_rng)
        out.append(EpidemicHistory(
            spec.framework, pop.n, history.t_min, to_t,
            infection_times=infection, removal_times=removal,
            exposure_times=exposure if spec.framework == SEIR else None))
    return out
