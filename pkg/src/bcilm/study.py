"""Deterministic simulate-fit-compare experiment grids.

A study manifest describes generating scenarios, the models to fit to
every simulated data set, and a shared scale (population size,
replicates, iteration counts). Cells (scenario x replicate) are
independent and run in a bounded process pool; every cell derives its
RNG streams from the master seed and its own indices, so results do
not depend on scheduling. Failed cells are recorded and skipped in the
aggregate tables rather than aborting the study.

Outputs:
    selection_proportions.csv  fraction of replicates each fitted model
                               achieved the lowest WAIC, per scenario
    mean_delta_waic.csv        mean WAIC difference to the scenario's
                               designated true model
    cells.csv                  per-cell WAIC values
    failures.csv               cells that raised, with the error
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from .analysis import waic
from .config import build_model_spec, build_periods, build_priors
from .errors import ConfigError
from .inference import MCMCConfig, fit
from .population import generate_population
from .simulate import SimulationConfig, simulate_epidemic

__all__ = ["run_study"]


def _cell_seeds(master: int, scenario_idx: int, replicate: int):
    root = np.random.SeedSequence(master, spawn_key=(scenario_idx, replicate))
    pop_ss, sim_ss, fit_ss = root.spawn(3)
    return (int(pop_ss.generate_state(1)[0]),
            sim_ss,
            fit_ss)


def _run_cell(args):
    """One (scenario, replicate) cell; module-level so it can be pickled."""
    study_cfg, scenario_idx, replicate = args
    study = study_cfg["study"]
    master = int(study_cfg.get("seed", 0))
    scenario = study["scenarios"][scenario_idx]

    pop_seed, sim_ss, fit_ss = _cell_seeds(master, scenario_idx, replicate)
    pop_block = study["population"]
    pop = generate_population(int(pop_block["n"]),
                              tuple(pop_block.get("x_range", (100, 300))),
                              tuple(pop_block.get("y_range", (100, 300))),
                              rng_seed=pop_seed)

    gen_spec = build_model_spec({"model": scenario["model"]})
    periods = build_periods({"periods": study["periods"]})
    sim_block = study["simulation"]
    sim_config = SimulationConfig(
        t_max=int(sim_block["t_max"]),
        periods=periods,
        n_seeds=int(sim_block.get("n_seeds", 3)),
        rng_seed=0)
    rng = np.random.default_rng(sim_ss)
    history = simulate_epidemic(gen_spec, pop, sim_config, rng=rng)

    mcmc_block = study["mcmc"]
    waic_draws = int(study.get("waic_draws", 100))
    results = {}
    for model_idx, fit_model in enumerate(study["fit_models"]):
        spec = build_model_spec({"model": fit_model["model"]})
        priors = build_priors({"priors": fit_model["priors"]}, spec)
        fit_seed = int(np.random.SeedSequence(
            master, spawn_key=(scenario_idx, replicate, model_idx)
        ).generate_state(1)[0])
        iterations = int(mcmc_block["iterations"])
        mcmc = MCMCConfig(
            n_iterations=iterations,
            burn_in=int(mcmc_block.get("burn_in", iterations // 10)),
            rng_seed=fit_seed)
        posterior = fit(spec, pop, history, priors, mcmc)
        entry = waic(spec, pop, history, posterior, n_draws=waic_draws,
                     rng_seed=fit_seed, name=fit_model["name"])
        results[fit_model["name"]] = entry.waic

    return {
        "scenario": scenario["name"],
        "replicate": replicate,
        "waics": results,
        "epidemic_size": history.total_infected(),
    }


def _validate_study(study_cfg):
    study = study_cfg.get("study")
    if not isinstance(study, dict):
        raise ConfigError("study manifest needs a 'study' block")
    for key in ("scenarios", "fit_models", "population", "periods",
                "simulation", "mcmc", "replicates"):
        if key not in study:
            raise ConfigError(f"study block missing '{key}'")
    names = [m["name"] for m in study["fit_models"]]
    if len(set(names)) != len(names):
        raise ConfigError("fit_models names must be unique")
    for sc in study["scenarios"]:
        if "name" not in sc or "model" not in sc:
            raise ConfigError("each scenario needs 'name' and 'model'")
        true_model = sc.get("true_model")
        if true_model is not None and true_model not in names:
            raise ConfigError(
                f"scenario {sc['name']}: true_model {true_model!r} not in "
                f"fit_models {names}")


def run_study(study_cfg: dict, out_dir, threads: int = 1) -> pd.DataFrame:
    """Run the whole grid and write aggregate tables; returns the
    selection-proportion table."""
    _validate_study(study_cfg)
    study = study_cfg["study"]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    n_rep = int(study["replicates"])
    cells = [(study_cfg, si, ri)
             for si in range(len(study["scenarios"]))
             for ri in range(n_rep)]

    outcomes = {}
    failures = []
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for (args, res) in zip(cells, pool.map(_run_cell_safe, cells)):
                _collect(args, res, outcomes, failures)
    else:
        for args in cells:
            _collect(args, _run_cell_safe(args), outcomes, failures)

    model_names = [m["name"] for m in study["fit_models"]]
    scenario_rows = []
    delta_rows = []
    cell_rows = []
    for si, sc in enumerate(study["scenarios"]):
        ok = [outcomes[(si, ri)] for ri in range(n_rep)
              if (si, ri) in outcomes]
        wins = {nm: 0 for nm in model_names}
        for res in ok:
            waics = res["waics"]
            best = min(waics, key=waics.get)
            wins[best] += 1
            cell_rows.append({"scenario": sc["name"],
                              "replicate": res["replicate"],
                              "epidemic_size": res["epidemic_size"],
                              **{f"waic_{nm}": waics[nm] for nm in model_names}})
        total = max(len(ok), 1)
        scenario_rows.append({"true_model": sc["name"],
                              **{nm: wins[nm] / total for nm in model_names},
                              "n_ok": len(ok)})
        truth = sc.get("true_model")
        if truth is not None and ok:
            deltas = {
                nm: float(np.mean([r["waics"][nm] - r["waics"][truth]
                                   for r in ok]))
                for nm in model_names
            }
            delta_rows.append({"true_model": sc["name"], **deltas})

    selection = pd.DataFrame(scenario_rows)
    selection.to_csv(out_dir / "selection_proportions.csv", index=False)
    if delta_rows:
        pd.DataFrame(delta_rows).to_csv(out_dir / "mean_delta_waic.csv",
                                        index=False)
    if cell_rows:
        pd.DataFrame(cell_rows).to_csv(out_dir / "cells.csv", index=False)
    if failures:
        pd.DataFrame(failures).to_csv(out_dir / "failures.csv", index=False)
    return selection


def _run_cell_safe(args):
    try:
        return _run_cell(args)
    except Exception as exc:  # cell failures must not kill the study
        return {"error": f"{type(exc).__name__}: {exc}"}


def _collect(args, res, outcomes, failures):
    _, si, ri = args
    if "error" in res:
        failures.append({"scenario_index": si, "replicate": ri,
                         "error": res["error"]})
    else:
        outcomes[(si, ri)] = res
