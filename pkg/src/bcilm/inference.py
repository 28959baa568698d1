"""Bayesian inference: priors, adaptive random-walk MH, and diagnostics.

The sampler proposes each free parameter in turn with a Gaussian
random-walk step in natural space; proposals outside the prior support
(or outside the parameter's structural domain) are rejected outright.
Per-component step sizes adapt toward a target acceptance rate during
burn-in only, in batches, with diminishing adaptation; after burn-in
the kernel is frozen, so post-burn-in draws come from a valid
Metropolis-Hastings chain.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
import pandas as pd
from scipy import special, stats

from .epidemic import EpidemicHistory
from .errors import ConfigError, InitializationError
from .model import LikelihoodEvaluator, ModelSpec, parameter_domain
from .population import Population

__all__ = [
    "UniformPrior",
    "BetaPrior",
    "GammaPrior",
    "parse_prior",
    "MCMCConfig",
    "PosteriorSample",
    "GewekeResult",
    "fit",
    "geweke_diagnostic",
    "hpdi",
    "posterior_summary",
]


# ---------------------------------------------------------------------------
# Priors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UniformPrior:
    low: float
    high: float

    def __post_init__(self):
        if not self.low < self.high:
            raise ConfigError(f"uniform prior needs low < high, "
                              f"got ({self.low}, {self.high})")

    def log_pdf(self, x: float) -> float:
        if self.low < x < self.high:
            return -np.log(self.high - self.low)
        return -np.inf

    def sample(self, rng) -> float:
        return float(rng.uniform(self.low, self.high))

    def median(self) -> float:
        return 0.5 * (self.low + self.high)

    def sd(self) -> float:
        return (self.high - self.low) / np.sqrt(12.0)


@dataclass(frozen=True)
class BetaPrior:
    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ConfigError(f"beta prior needs positive shapes, "
                              f"got ({self.a}, {self.b})")
        object.__setattr__(self, "_ln_norm",
                           float(special.betaln(self.a, self.b)))

    def log_pdf(self, x: float) -> float:
        if 0.0 < x < 1.0:
            return ((self.a - 1.0) * math.log(x)
                    + (self.b - 1.0) * math.log1p(-x) - self._ln_norm)
        return -np.inf

    def sample(self, rng) -> float:
        return float(rng.beta(self.a, self.b))

    def median(self) -> float:
        return float(stats.beta.median(self.a, self.b))

    def sd(self) -> float:
        return float(stats.beta.std(self.a, self.b))


@dataclass(frozen=True)
class GammaPrior:
    """Gamma distribution in shape-rate parameterisation (mean shape/rate)."""

    shape: float
    rate: float

    def __post_init__(self):
        if self.shape <= 0 or self.rate <= 0:
            raise ConfigError(f"gamma prior needs positive shape and rate, "
                              f"got ({self.shape}, {self.rate})")
        object.__setattr__(self, "_ln_norm",
                           self.shape * math.log(self.rate)
                           - math.lgamma(self.shape))

    def log_pdf(self, x: float) -> float:
        if x > 0.0:
            return ((self.shape - 1.0) * math.log(x) - self.rate * x
                    + self._ln_norm)
        return -np.inf

    def sample(self, rng) -> float:
        return float(rng.gamma(self.shape, 1.0 / self.rate))

    def median(self) -> float:
        return float(stats.gamma.median(self.shape, scale=1.0 / self.rate))

    def sd(self) -> float:
        return float(stats.gamma.std(self.shape, scale=1.0 / self.rate))


def parse_prior(value) -> object:
    """Build a prior from a config mapping like {dist: uniform, low: 0, high: 100}."""
    if not isinstance(value, Mapping) or "dist" not in value:
        raise ConfigError(f"prior must be a mapping with a 'dist' key, got {value!r}")
    dist = str(value["dist"]).lower()
    try:
        if dist == "uniform":
            return UniformPrior(float(value["low"]), float(value["high"]))
        if dist == "beta":
            return BetaPrior(float(value["a"]), float(value["b"]))
        if dist == "gamma":
            return GammaPrior(float(value["shape"]), float(value["rate"]))
    except KeyError as exc:
        raise ConfigError(f"prior {dist!r} missing field {exc}") from None
    raise ConfigError(f"unknown prior distribution {dist!r}")


# ---------------------------------------------------------------------------
# Sampler configuration and output
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MCMCConfig:
    n_iterations: int
    burn_in: int
    initial_values: Optional[Mapping[str, float]] = None
    target_acceptance: float = 0.44
    adapt_interval: int = 50
    freeze_after_burn_in: bool = True
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_iterations < 1:
            raise ConfigError(f"n_iterations must be >= 1, got {self.n_iterations}")
        if not 0 <= self.burn_in < self.n_iterations:
            raise ConfigError(
                f"burn_in must satisfy 0 <= burn_in < n_iterations, "
                f"got {self.burn_in} of {self.n_iterations}")
        if not 0.0 < self.target_acceptance < 1.0:
            raise ConfigError("target_acceptance must be in (0, 1)")
        if self.adapt_interval < 1:
            raise ConfigError("adapt_interval must be >= 1")


@dataclass
class PosteriorSample:
    """Stored MCMC output: one row per iteration, plus metadata."""

    param_names: tuple[str, ...]
    chain: np.ndarray
    log_posterior: np.ndarray
    burn_in: int
    acceptance_rates: dict[str, float] = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def posterior(self) -> np.ndarray:
        """Post-burn-in draws (iterations x parameters)."""
        return self.chain[self.burn_in:]

    def posterior_dict(self) -> dict[str, np.ndarray]:
        post = self.posterior()
        return {nm: post[:, j] for j, nm in enumerate(self.param_names)}

    def medians(self) -> dict[str, float]:
        post = self.posterior()
        return {nm: float(np.median(post[:, j]))
                for j, nm in enumerate(self.param_names)}

    def save_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", *self.param_names, "log_posterior"])
            for it in range(self.chain.shape[0]):
                writer.writerow([
                    it + 1,
                    *[repr(float(v)) for v in self.chain[it]],
                    repr(float(self.log_posterior[it])),
                ])

    @classmethod
    def load_csv(cls, path, burn_in: int) -> "PosteriorSample":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[0] != "iteration" or header[-1] != "log_posterior":
                raise ConfigError(
                    f"{path}: expected chain CSV header "
                    "iteration,<params...>,log_posterior")
            names = tuple(header[1:-1])
            rows, logp = [], []
            for row in reader:
                rows.append([float(v) for v in row[1:-1]])
                logp.append(float(row[-1]))
        chain = np.asarray(rows)
        if burn_in >= chain.shape[0]:
            raise ConfigError(
                f"burn_in {burn_in} >= chain length {chain.shape[0]}")
        return cls(names, chain, np.asarray(logp), burn_in)


# ---------------------------------------------------------------------------
# Adaptive random-walk Metropolis-Hastings
# ---------------------------------------------------------------------------

def _initial_step_sizes(priors, init):
    sizes = {}
    for name, prior in priors.items():
        scale = min(prior.sd(), max(abs(init[name]), 1e-3))
        sizes[name] = max(0.1 * scale, 1e-6)
    return sizes


def fit(spec: ModelSpec, pop: Population, history: EpidemicHistory,
        priors: Mapping[str, object], config: MCMCConfig) -> PosteriorSample:
    """Sample the posterior of the free parameters by adaptive RWMH.

    Free parameters are exactly those with priors; everything else is
    held at the value in the spec. Raises InitializationError when the
    log-posterior is not finite at the initial values.
    """
    names = [nm for nm in spec.parameter_names() if nm in priors]
    if not names:
        raise ConfigError("no free parameters: provide at least one prior")
    unknown = sorted(set(priors) - set(spec.parameter_names()))
    if unknown:
        raise ConfigError(
            f"priors given for parameters not in the model: {unknown} "
            f"(model parameters: {spec.parameter_names()})")

    evaluator = LikelihoodEvaluator(spec, pop, history)
    domains = {nm: parameter_domain(spec, nm) for nm in names}
    rng = np.random.default_rng(config.rng_seed)

    current = {}
    for nm in names:
        if config.initial_values and nm in config.initial_values:
            current[nm] = float(config.initial_values[nm])
        else:
            current[nm] = priors[nm].median()

    lp_by_name = {nm: priors[nm].log_pdf(current[nm]) for nm in names}
    lp_sum = sum(lp_by_name.values())
    ll = evaluator.log_likelihood(current) if np.isfinite(lp_sum) else -np.inf
    log_post = lp_sum + ll
    if not np.isfinite(log_post):
        raise InitializationError(
            f"log-posterior is not finite at the initial values {current}; "
            "adjust initial_values (or priors) so the chain can start")

    step = _initial_step_sizes({nm: priors[nm] for nm in names}, current)
    n_iter, burn = config.n_iterations, config.burn_in
    chain = np.empty((n_iter, len(names)))
    logp_trace = np.empty(n_iter)
    accepted_post = {nm: 0 for nm in names}
    batch_accepts = {nm: 0 for nm in names}
    batch_count = 0
    batch_no = 0

    for it in range(n_iter):
        adapting = it < burn or not config.freeze_after_burn_in
        for nm in names:
            proposal = current[nm] + step[nm] * rng.standard_normal()
            lo, hi = domains[nm]
            if not lo < proposal < hi:
                continue
            lp_prop = priors[nm].log_pdf(proposal)
            if not np.isfinite(lp_prop):
                continue
            trial = dict(current)
            trial[nm] = proposal
            ll_prop = evaluator.log_likelihood(trial)
            log_post_prop = ll_prop + lp_sum - lp_by_name[nm] + lp_prop
            if np.log(rng.random()) < log_post_prop - log_post:
                current = trial
                ll = ll_prop
                lp_sum = lp_sum - lp_by_name[nm] + lp_prop
                lp_by_name[nm] = lp_prop
                log_post = log_post_prop
                if adapting:
                    batch_accepts[nm] += 1
                if it >= burn:
                    accepted_post[nm] += 1

        if adapting:
            batch_count += 1
            if batch_count == config.adapt_interval:
                batch_no += 1
                gain = min(1.0, 2.0 / np.sqrt(batch_no))
                for nm in names:
                    rate = batch_accepts[nm] / config.adapt_interval
                    step[nm] *= np.exp(gain * (rate - config.target_acceptance))
                    batch_accepts[nm] = 0
                batch_count = 0

        chain[it] = [current[nm] for nm in names]
        logp_trace[it] = log_post

    n_post = n_iter - burn
    acc_rates = {nm: accepted_post[nm] / n_post for nm in names}

    diagnostics = {"step_sizes": dict(step)}
    post = chain[burn:]
    if n_post >= 100:
        geweke = {}
        stuck = {}
        for j, nm in enumerate(names):
            res = geweke_diagnostic(post[:, j])
            geweke[nm] = res.z
            stuck[nm] = res.stuck
        diagnostics["geweke_z"] = geweke
        diagnostics["stuck"] = stuck
    warn = [nm for nm, r in acc_rates.items() if not 0.15 <= r <= 0.7]
    if warn:
        diagnostics["acceptance_warnings"] = warn

    return PosteriorSample(tuple(names), chain, logp_trace, burn,
                           acc_rates, diagnostics)


# ---------------------------------------------------------------------------
# Diagnostics and interval estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GewekeResult:
    z: float
    stuck: bool = False


def _spectrum0(x: np.ndarray) -> float:
    """Spectral density at frequency zero via Bartlett-windowed
    autocovariances; the 2 n^(1/3) truncation keeps the z-score
    calibrated for iid and moderately autocorrelated chains alike."""
    n = x.size
    x = x - x.mean()
    gamma0 = float(x @ x) / n
    lags = max(1, min(int(2.0 * n ** (1.0 / 3.0)), n - 1))
    s = gamma0
    for k in range(1, lags + 1):
        gamma_k = float(x[k:] @ x[:-k]) / n
        s += 2.0 * (1.0 - k / (lags + 1.0)) * gamma_k
    return max(s, 0.0)


def geweke_diagnostic(chain: np.ndarray, first_frac: float = 0.1,
                      last_frac: float = 0.5) -> GewekeResult:
    """Convergence z-score comparing early and late chain means.

    z = (mean_first - mean_last) / sqrt(S_f(0)/n_f + S_l(0)/n_l) where
    S(0) is the spectral density at zero of each segment. A chain with
    zero variance is reported as stuck rather than raising.
    """
    x = np.asarray(chain, dtype=float)
    if x.ndim != 1:
        raise ValueError("geweke_diagnostic expects a 1-D chain")
    n = x.size
    if n < 100:
        raise ValueError(f"chain too short for the diagnostic ({n} < 100)")
    if not 0 < first_frac < 1 or not 0 < last_frac < 1 or first_frac + last_frac >= 1:
        raise ValueError("window fractions must be positive and sum below 1")
    if np.ptp(x) == 0.0:
        return GewekeResult(z=np.nan, stuck=True)
    n1 = int(np.floor(first_frac * n))
    n2 = int(np.floor(last_frac * n))
    first = x[:n1]
    last = x[n - n2:]
    denom = _spectrum0(first) / n1 + _spectrum0(last) / n2
    if denom == 0.0:
        return GewekeResult(z=np.nan, stuck=True)
    z = (first.mean() - last.mean()) / np.sqrt(denom)
    return GewekeResult(z=float(z), stuck=False)


def hpdi(samples, mass: float = 0.95) -> tuple[float, float]:
    """Shortest contiguous interval containing ceil(mass * n) sorted samples."""
    if not 0.0 < mass < 1.0:
        raise ValueError(f"mass must be in (0, 1), got {mass}")
    x = np.asarray(samples, dtype=float).ravel()
    x = x[np.isfinite(x)]
    if x.size < 2:
        raise ValueError("need at least 2 finite samples")
    x = np.sort(x)
    n_in = min(int(np.ceil(mass * x.size)), x.size)
    if n_in < 1:
        n_in = 1
    widths = x[n_in - 1:] - x[: x.size - n_in + 1]
    k = int(np.argmin(widths))
    return float(x[k]), float(x[k + n_in - 1])


def posterior_summary(sample: PosteriorSample, mass: float = 0.95) -> pd.DataFrame:
    """Per-parameter median, HPDI, acceptance rate and Geweke z."""
    post = sample.posterior()
    rows = []
    for j, nm in enumerate(sample.param_names):
        draws = post[:, j]
        if np.ptp(draws) == 0.0:
            lo = hi = float(draws[0])
        else:
            lo, hi = hpdi(draws, mass)
        gz = sample.diagnostics.get("geweke_z", {}).get(nm, np.nan)
        rows.append({
            "parameter": nm,
            "median": float(np.median(draws)),
            "hpdi_lower": lo,
            "hpdi_upper": hi,
            "acceptance_rate": sample.acceptance_rates.get(nm, np.nan),
            "geweke_z": gz,
        })
    return pd.DataFrame(rows)
