"""Spike-and-slab screening for the presence of a behavioural-change effect.

A single Bernoulli indicator z gates all alarm parameters jointly: when
z = 0 both delta parameters are exactly zero and the likelihood equals
the matched baseline model's bit-for-bit; when z = 1 the alarm runs at
the current slab values. Alarm parameters are refreshed by independence
sampling from their slab priors, z by its full conditional, the
inclusion weight by its Beta conjugate update, and the susceptibility
and spatial parameters by adaptive random-walk MH. The posterior mean
of z (after warm-up) estimates the probability that an alarm effect is
present, which drives the baseline-vs-alarmed model choice.

Joint gating is required because the alarm parameters are not
separately identified when the effect is absent: with a threshold above
the observed prevalence range, or a zero rate, the other parameter can
move freely without changing the likelihood. Families without an
exact-zero representation (the hill alarm) cannot be screened this way.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np
from scipy.special import expit

from .alarm import has_exact_zero_form
from .epidemic import EpidemicHistory
from .errors import ConfigError, InitializationError, UnsupportedFamilyError
from .inference import (MCMCConfig, PosteriorSample, UniformPrior,
                        _initial_step_sizes, fit)
from .model import (BASELINE, LikelihoodEvaluator, ModelSpec,
                    parameter_domain)
from .population import Population

__all__ = ["SpikeSlabConfig", "ScreeningResult", "screen", "screen_then_fit"]

BC_ILM = "bc_ilm"


@dataclass(frozen=True)
class SpikeSlabConfig:
    """Settings for the screening run and the follow-up fit.

    slab_priors supplies the continuous slab for each alarm parameter
    of the spec's family. inclusion_prior is either a fixed probability
    or (a, b) hyperparameters of a Beta prior on it. baseline_priors
    covers the susceptibility/spatial parameters; vague Uniform(0, 100)
    is used for any left unset.
    """

    slab_priors: Mapping[str, object]
    inclusion_prior: Union[float, tuple[float, float]] = (5.0, 5.0)
    n_iterations: int = 25_000
    final_iterations: int = 75_000
    selection_threshold: float = 0.5
    warmup_frac: float = 0.2
    baseline_priors: Optional[Mapping[str, object]] = None
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.selection_threshold < 1.0:
            raise ConfigError("selection_threshold must be in (0, 1)")
        if self.n_iterations < 1_000 or self.final_iterations < 1_000:
            raise ConfigError("screening and final-fit runs need >= 1000 "
                              "iterations")
        if not 0.0 < self.warmup_frac < 1.0:
            raise ConfigError("warmup_frac must be in (0, 1)")
        if isinstance(self.inclusion_prior, (int, float)):
            if not 0.0 < float(self.inclusion_prior) < 1.0:
                raise ConfigError("fixed inclusion probability must be in (0, 1)")
        else:
            a, b = self.inclusion_prior
            if a <= 0 or b <= 0:
                raise ConfigError("Beta inclusion prior needs positive "
                                  "hyperparameters")


@dataclass
class ScreeningResult:
    """Outcome of one spike-and-slab screening run."""

    indicator_chain: np.ndarray
    inclusion_probability: float
    selected: str  # "baseline" or "bc_ilm"
    medians: dict[str, float]
    chains: dict[str, np.ndarray] = field(default_factory=dict)
    warmup: int = 0

    @property
    def alarm_selected(self) -> bool:
        return self.selected == BC_ILM


def _vague(names, provided):
    priors = dict(provided or {})
    for nm in names:
        priors.setdefault(nm, UniformPrior(0.0, 100.0))
    return priors


def screen(spec: ModelSpec, pop: Population, history: EpidemicHistory,
           config: SpikeSlabConfig) -> ScreeningResult:
    """Run the spike-and-slab screener for one alarmed model spec."""
    if spec.form == BASELINE or spec.alarm is None:
        raise ConfigError("screening needs an alarmed (type_a/type_b) model")
    family = spec.alarm.family
    if not has_exact_zero_form(family):
        raise UnsupportedFamilyError(
            f"the {family} alarm has no parameter values that keep it at "
            "zero for every prevalence, so spike-and-slab screening does "
            "not apply")

    all_names = spec.parameter_names()
    delta_names = [nm for nm in all_names if nm.startswith("delta")]
    base_names = [nm for nm in all_names if not nm.startswith("delta")]
    missing = [nm for nm in delta_names if nm not in config.slab_priors]
    if missing:
        raise ConfigError(f"slab priors missing for {missing}")
    slab = {nm: config.slab_priors[nm] for nm in delta_names}
    base_priors = _vague(base_names, config.baseline_priors)

    evaluator = LikelihoodEvaluator(spec, pop, history)
    rng = np.random.default_rng(config.rng_seed)
    n_iter = config.n_iterations
    warmup = int(np.floor(config.warmup_frac * n_iter))

    fixed_pi = isinstance(config.inclusion_prior, (int, float))
    if fixed_pi:
        pi = float(config.inclusion_prior)
        pi_a = pi_b = None
    else:
        pi_a, pi_b = map(float, config.inclusion_prior)
        pi = pi_a / (pi_a + pi_b)

    theta = {nm: base_priors[nm].median() for nm in base_names}
    delta_star = {nm: slab[nm].sample(rng) for nm in delta_names}
    zeros = {nm: 0.0 for nm in delta_names}
    z = 1

    def loglik(base_values, deltas):
        return evaluator.log_likelihood({**base_values, **deltas})

    ll = loglik(theta, delta_star if z else zeros)
    if not np.isfinite(ll):
        # Fall back to the no-alarm branch, which a data set consistent
        # with the baseline model always supports.
        z = 0
        ll = loglik(theta, zeros)
        if not np.isfinite(ll):
            raise InitializationError(
                "log-likelihood is not finite at the screening start; the "
                "data contain infections the model deems impossible")

    lp = {nm: base_priors[nm].log_pdf(theta[nm]) for nm in base_names}
    step = _initial_step_sizes(base_priors, theta)
    domains = {nm: parameter_domain(spec, nm) for nm in base_names}
    batch_accepts = {nm: 0 for nm in base_names}

    chains = {nm: np.empty(n_iter) for nm in (*base_names, *delta_names)}
    z_chain = np.empty(n_iter, dtype=np.int8)
    pi_chain = np.empty(n_iter)
    delta_given_z1 = {nm: [] for nm in delta_names}

    for it in range(n_iter):
        active = delta_star if z else zeros

        # susceptibility / spatial parameters: adaptive RWMH
        for nm in base_names:
            proposal = theta[nm] + step[nm] * rng.standard_normal()
            lo, hi = domains[nm]
            if not lo < proposal < hi:
                continue
            lp_prop = base_priors[nm].log_pdf(proposal)
            if not np.isfinite(lp_prop):
                continue
            trial = dict(theta)
            trial[nm] = proposal
            ll_prop = loglik(trial, active)
            if np.log(rng.random()) < (ll_prop + lp_prop) - (ll + lp[nm]):
                theta = trial
                ll = ll_prop
                lp[nm] = lp_prop
                if it < warmup:
                    batch_accepts[nm] += 1

        if it < warmup and (it + 1) % 50 == 0:
            gain = min(1.0, 2.0 / np.sqrt((it + 1) // 50))
            for nm in base_names:
                rate = batch_accepts[nm] / 50.0
                step[nm] *= np.exp(gain * (rate - 0.44))
                batch_accepts[nm] = 0

        # alarm parameters: joint independence proposal from the slab.
        # Prior and proposal densities cancel, so the ratio is pure
        # likelihood; with z = 0 the likelihood is unchanged and the
        # refresh is always accepted.
        candidate = {nm: slab[nm].sample(rng) for nm in delta_names}
        if z == 0:
            delta_star = candidate
        else:
            ll_prop = loglik(theta, candidate)
            if np.log(rng.random()) < ll_prop - ll:
                delta_star = candidate
                ll = ll_prop

        # indicator: full conditional given the current slab values (the
        # active branch's likelihood is already cached in ll)
        if z:
            ll_on, ll_off = ll, loglik(theta, zeros)
        else:
            ll_on, ll_off = loglik(theta, delta_star), ll
        p_on = expit((np.log(pi) + ll_on) - (np.log1p(-pi) + ll_off))
        z = 1 if rng.random() < p_on else 0
        ll = ll_on if z else ll_off

        # inclusion weight: Beta conjugate update from the indicator
        if not fixed_pi:
            pi = rng.beta(pi_a + z, pi_b + 1 - z)

        for nm in base_names:
            chains[nm][it] = theta[nm]
        for nm in delta_names:
            chains[nm][it] = delta_star[nm] if z else 0.0
            if z and it >= warmup:
                delta_given_z1[nm].append(delta_star[nm])
        z_chain[it] = z
        pi_chain[it] = pi

    inclusion = float(z_chain[warmup:].mean())
    selected = BC_ILM if inclusion > config.selection_threshold else BASELINE

    medians = {nm: float(np.median(chains[nm][warmup:])) for nm in base_names}
    for nm in delta_names:
        conditional = delta_given_z1[nm]
        if conditional:
            medians[nm] = float(np.median(conditional))
        else:
            medians[nm] = float(slab[nm].median())

    chains["pi"] = pi_chain
    return ScreeningResult(
        indicator_chain=z_chain,
        inclusion_probability=inclusion,
        selected=selected,
        medians=medians,
        chains=chains,
        warmup=warmup,
    )


def screen_then_fit(spec: ModelSpec, pop: Population,
                    history: EpidemicHistory, config: SpikeSlabConfig,
                    mcmc_seed: Optional[int] = None
                    ) -> tuple[ScreeningResult, PosteriorSample]:
    """Screen, then fit the selected model class with standard priors.

    The final chain is initialised at the screening medians (for alarm
    parameters, the medians of the included draws) and run for
    config.final_iterations with a 10% burn-in; only that chain should
    feed estimates and prediction.
    """
    result = screen(spec, pop, history, config)

    all_names = spec.parameter_names()
    delta_names = [nm for nm in all_names if nm.startswith("delta")]
    base_names = [nm for nm in all_names if not nm.startswith("delta")]
    priors = _vague(base_names, config.baseline_priors)

    if result.alarm_selected:
        fit_spec = spec
        priors.update({nm: config.slab_priors[nm] for nm in delta_names})
        init = {nm: result.medians[nm] for nm in all_names}
    else:
        fit_spec = spec.without_alarm()
        init = {nm: result.medians[nm] for nm in base_names}

    mcmc = MCMCConfig(
        n_iterations=config.final_iterations,
        burn_in=config.final_iterations // 10,
        initial_values=init,
        rng_seed=config.rng_seed + 1 if mcmc_seed is None else mcmc_seed,
    )
    sample = fit(fit_spec, pop, history, priors, mcmc)
    return result, sample
