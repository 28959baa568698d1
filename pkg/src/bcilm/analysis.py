"""Posterior-predictive curves, forecasts, and WAIC model comparison.

The posterior predictive distribution of the epidemic curve is
estimated by resimulating epidemics under parameter draws from a
fitted posterior; per-time-point bands use the same shortest-interval
HPDI routine as parameter intervals. WAIC is computed over per-(i, t)
Bernoulli contributions (one per susceptible-exposure event), the
finest partition under which the likelihood factorises:

    lppd   = sum_points log mean_draws exp(term)
    p_waic = sum_points var_draws(term)
    waic   = -2 (lppd - p_waic)

Lower WAIC is better.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from .epidemic import EpidemicHistory
from .inference import PosteriorSample, hpdi
from .model import LikelihoodEvaluator, ModelSpec
from .population import Population
from .simulate import SimulationConfig, resimulate_from_posterior

__all__ = [
    "CurveBand",
    "WaicEntry",
    "WaicReport",
    "ppd_curve",
    "forecast_curve",
    "waic",
    "compare_models",
]


@dataclass
class CurveBand:
    """Per-time-point 95% band and median of incident-infection counts."""

    times: np.ndarray
    lower: np.ndarray
    median: np.ndarray
    upper: np.ndarray
    n_draws: int

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "t": self.times,
            "lower": self.lower,
            "median": self.median,
            "upper": self.upper,
        })

    def save_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False)


def _band_from_curves(curves: np.ndarray, times: np.ndarray,
                      mass: float) -> CurveBand:
    n_draws = curves.shape[0]
    lower = np.empty(times.size, dtype=int)
    upper = np.empty(times.size, dtype=int)
    median = np.empty(times.size, dtype=int)
    for k in range(times.size):
        col = curves[:, k]
        if n_draws < 2 or np.ptp(col) == 0:
            lower[k] = upper[k] = int(col[0])
        else:
            lo, hi = hpdi(col, mass)
            lower[k], upper[k] = int(lo), int(hi)
        # integer-valued median: take an actual simulated count
        median[k] = int(np.quantile(col, 0.5, method="lower"))
    return CurveBand(times.copy(), lower, median, upper, n_draws)


def ppd_curve(spec: ModelSpec, pop: Population, history: EpidemicHistory,
              posterior: PosteriorSample, config: SimulationConfig,
              n_draws: int = 100, mass: float = 0.95,
              rng_seed: Optional[int] = None) -> CurveBand:
    """Posterior predictive band for the epidemic curve over the full window."""
    sims = resimulate_from_posterior(spec, pop, config, posterior, history,
                                     n_draws=n_draws, rng_seed=rng_seed)
    curves = np.stack([h.epidemic_curve() for h in sims])
    times = np.arange(history.t_min, history.t_max)
    return _band_from_curves(curves, times, mass)


def forecast_curve(spec: ModelSpec, pop: Population,
                   history: EpidemicHistory, posterior: PosteriorSample,
                   config: SimulationConfig, t_cut: int = 8,
                   horizon: int = 21, mass: float = 0.95,
                   n_draws: int = 100,
                   rng_seed: Optional[int] = None) -> CurveBand:
    """Forecast band over onset times t_cut+1..horizon.

    The posterior should come from a fit to the history truncated at
    t_cut; observed events before t_cut are held fixed and transmission
    is resimulated beyond them.
    """
    if horizon <= t_cut:
        raise ValueError(f"horizon must exceed t_cut={t_cut}, got {horizon}")
    sims = resimulate_from_posterior(spec, pop, config, posterior, history,
                                     n_draws=n_draws, t_cut=t_cut,
                                     horizon=horizon, rng_seed=rng_seed)
    # events at t in [t_cut, horizon-1] become visible at t+1
    curves = []
    for h in sims:
        events = h.event_times
        finite = events[np.isfinite(events)].astype(int)
        counts = np.zeros(horizon - t_cut, dtype=int)
        for t in finite:
            if t_cut <= t <= horizon - 1:
                counts[t - t_cut] += 1
        curves.append(counts)
    times = np.arange(t_cut + 1, horizon + 1)
    return _band_from_curves(np.stack(curves), times, mass)


@dataclass
class WaicEntry:
    """WAIC decomposition for one fitted model."""

    name: str
    lppd: float
    p_waic: float
    waic: float
    n_points: int
    n_draws: int


def waic(spec: ModelSpec, pop: Population, history: EpidemicHistory,
         posterior: PosteriorSample, n_draws: int = 100,
         rng_seed: int = 0, name: str = "model") -> WaicEntry:
    """WAIC from pointwise log-likelihood terms under posterior draws.

    Uses a random subsample of n_draws post-burn-in draws. Requires at
    least 2 draws (the penalty is a variance across draws).
    """
    rows = posterior.posterior()
    if rows.shape[0] < 2 or n_draws < 2:
        raise ValueError("WAIC needs at least two posterior draws")
    rng = np.random.default_rng(rng_seed)
    take = min(n_draws, rows.shape[0])
    idx = rng.choice(rows.shape[0], size=take, replace=rows.shape[0] < n_draws)

    evaluator = LikelihoodEvaluator(spec, pop, history)
    names = posterior.param_names
    terms = np.empty((take, evaluator.n_terms))
    for s, j in enumerate(idx):
        terms[s] = evaluator.pointwise_log_terms(dict(zip(names, rows[j])))

    lppd = float(np.sum(logsumexp(terms, axis=0) - np.log(take)))
    # variance is shift-invariant; anchoring on the first draw makes the
    # penalty exactly zero for degenerate (constant) posteriors
    p_w = float(np.sum(np.var(terms - terms[0], axis=0, ddof=1)))
    return WaicEntry(name=name, lppd=lppd, p_waic=p_w,
                     waic=-2.0 * (lppd - p_w), n_points=evaluator.n_terms,
                     n_draws=take)


@dataclass
class WaicReport:
    """WAIC table over a set of fitted models, with pairwise deltas."""

    entries: list[WaicEntry]
    deltas: np.ndarray  # deltas[i, j] = waic_i - waic_j

    @property
    def best(self) -> str:
        values = [e.waic for e in self.entries]
        return self.entries[int(np.argmin(values))].name

    def to_frame(self) -> pd.DataFrame:
        best = self.best
        best_waic = min(e.waic for e in self.entries)
        return pd.DataFrame([{
            "model": e.name,
            "lppd": e.lppd,
            "p_waic": e.p_waic,
            "waic": e.waic,
            "delta_vs_best": e.waic - best_waic,
            "best": e.name == best,
        } for e in self.entries])

    def delta_frame(self) -> pd.DataFrame:
        names = [e.name for e in self.entries]
        return pd.DataFrame(self.deltas, index=names, columns=names)


def compare_models(models: Sequence[tuple[str, ModelSpec, PosteriorSample]],
                   pop: Population, history: EpidemicHistory,
                   n_draws: int = 100, rng_seed: int = 0) -> WaicReport:
    """Assemble a WAIC comparison across fitted models on shared data."""
    if not models:
        raise ValueError("need at least one fitted model")
    entries = [waic(spec, pop, history, post, n_draws=n_draws,
                    rng_seed=rng_seed, name=name)
               for name, spec, post in models]
    values = np.array([e.waic for e in entries])
    deltas = values[:, None] - values[None, :]
    return WaicReport(entries=entries, deltas=deltas)
