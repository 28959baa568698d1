import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bcilm import (AlarmSignal, AlarmSpec, Constant, EpidemicHistory,
                   ModelSpec, PeriodSpec, Population, SimulationConfig,
                   generate_population, simulate_epidemic)

# Desk-scale square with the same spatial density as the full-scale
# protocol (1000 individuals over a 200 x 200 square).
DESK_RANGE = (100.0, 100.0 + 200.0 / np.sqrt(2.0))


def density_square(n):
    """Coordinate range that keeps the full-scale spatial density at
    population size n."""
    return (100.0, 100.0 + 200.0 * np.sqrt(n / 1000.0))


def desk_population(n=500, seed=0):
    rng = density_square(n)
    return generate_population(n, rng, rng, rng_seed=seed)


@pytest.fixture
def tiny_pop():
    """Five individuals on a small grid."""
    coords = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, 4.0],
                       [5.0, 5.0], [8.0, 1.0]])
    return Population(coords)


@pytest.fixture
def tiny_history():
    """Hand-built SIR history on 5 individuals over [1, 6].

    Individual 0 seeds the epidemic (infectious from t=1), 1 infected
    at t=2, 3 infected at t=4; 2 and 4 stay susceptible.
    """
    return EpidemicHistory(
        "sir", 5, 1, 6,
        infection_times=[0, 2, None, 4, None],
        removal_times=[3, 5, None, 7, None])


def exponential_spec(delta1=0.01, alpha=2.4, beta=2.0, form="type_a"):
    return ModelSpec(
        form=form, framework="sir", susceptibility=Constant(alpha), beta=beta,
        alarm=AlarmSpec("exponential", delta1=delta1,
                        signal=AlarmSignal(kind="count")))


def baseline_spec(alpha=2.4, beta=2.0):
    return ModelSpec(form="baseline", framework="sir",
                     susceptibility=Constant(alpha), beta=beta)


def quick_epidemic(spec=None, n=60, t_max=12, seed=3, lam=3, n_seeds=2):
    spec = spec or baseline_spec(alpha=1.5)
    pop = generate_population(n, (0.0, 30.0), (0.0, 30.0), rng_seed=seed)
    config = SimulationConfig(t_max=t_max, periods=PeriodSpec(lam),
                              n_seeds=n_seeds, rng_seed=seed)
    return pop, simulate_epidemic(spec, pop, config), config
