"""Spatial individual-level epidemic models with behavioural-change alarms.

Simulation, adaptive-MCMC fitting, spike-and-slab screening, posterior
prediction, forecasting and WAIC comparison for SIR/SEIR models whose
transmission responds to lagged prevalence (or an external signal)
through a parametric alarm function.
"""

__version__ = "0.1.0"

from .alarm import AlarmSignal, AlarmSpec, alarm_series, alarm_value
from .analysis import (CurveBand, WaicEntry, WaicReport, compare_models,
                       forecast_curve, ppd_curve, waic)
from .epidemic import (SEIR, SIR, EpidemicHistory, PeriodSpec,
                       TransitionTimes, load_events, save_events)
from .errors import (BcilmError, ConfigError, DataFormatError,
                     InitializationError, UnsupportedFamilyError)
from .inference import (BetaPrior, GammaPrior, MCMCConfig, PosteriorSample,
                        UniformPrior, fit, geweke_diagnostic, hpdi,
                        posterior_summary)
from .model import (BinaryCovariate, Constant, LikelihoodEvaluator, ModelSpec,
                    ParameterVector, infection_probability, log_likelihood,
                    pointwise_log_terms)
from .population import (Individual, Population, generate_population,
                         load_population, rescale_min_distance,
                         write_population)
from .screening import ScreeningResult, SpikeSlabConfig, screen, screen_then_fit
from .simulate import (SimulationConfig, resimulate_from_posterior,
                       simulate_batch, simulate_epidemic)

__all__ = [name for name in dir() if not name.startswith("_")]
