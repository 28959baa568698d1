"""Command-line interface.

Commands: simulate, fit, screen, ppd, forecast, compare, study.
Exit codes: 0 success, 1 runtime failure, 2 configuration or I/O
problem, 3 unsupported feature.

Every output directory receives a manifest.json recording the config
hash, package version and all RNG seeds; reruns with an identical
manifest produce byte-identical numeric outputs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import compare_models, forecast_curve, ppd_curve
from .config import (build_mcmc_config, build_model_spec,
                     build_population, build_priors, build_screening_config,
                     build_simulation_config, load_config, master_seed,
                     write_manifest)
from .epidemic import load_events, save_events
from .errors import (BcilmError, ConfigError, DataFormatError,
                     UnsupportedFamilyError)
from .inference import PosteriorSample, fit, posterior_summary
from .population import load_population, write_population
from .screening import screen, screen_then_fit
from .simulate import simulate_batch, simulate_epidemic
from .study import run_study

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_UNSUPPORTED = 3


def _file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _out_dir(args, cfg) -> Path:
    out = args.out or (cfg.get("output") or {}).get("directory")
    if not out:
        raise ConfigError("no output directory: pass --out or set "
                          "output.directory in the config")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_chain(args, cfg) -> PosteriorSample:
    mcmc = cfg.get("mcmc") or {}
    iterations = int(mcmc.get("iterations", 0))
    burn_in = int(mcmc.get("burn_in", iterations // 10 if iterations else 0))
    sample = PosteriorSample.load_csv(args.chain, burn_in)
    _check_chain_manifest(Path(args.chain), args)
    return sample


def _check_chain_manifest(chain_path: Path, args) -> None:
    """Detect mismatched population/events/chain triplets when the chain
    directory carries a manifest with data hashes."""
    manifest_path = chain_path.parent / "manifest.json"
    if not manifest_path.exists():
        return
    with open(manifest_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    hashes = manifest.get("data_hashes", {})
    for label, file_path in (("population", getattr(args, "population", None)),
                             ("events", getattr(args, "events", None))):
        recorded = hashes.get(label)
        if recorded and file_path and _file_sha256(file_path) != recorded:
            raise ConfigError(
                f"{label} file {file_path} does not match the one the chain "
                f"was fitted on (manifest {manifest_path})")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    seed = master_seed(cfg, args.seed)
    base_dir = Path(args.config).parent
    out = _out_dir(args, cfg)
    spec = build_model_spec(cfg, base_dir)
    sim_config = build_simulation_config(cfg, seed)
    m = int((cfg.get("simulation") or {}).get("replicates", 1))

    pop_block = cfg["population"]
    if pop_block.get("source") == "file":
        pop = build_population(cfg, seed, base_dir)
        runs = []
        for k in range(m):
            ss = np.random.SeedSequence(seed, spawn_key=(k,))
            rng = np.random.default_rng(ss.spawn(2)[1])
            runs.append((pop, simulate_epidemic(spec, pop, sim_config, rng=rng)))
    else:
        def make_pop(s):
            return build_population(cfg, s, base_dir)

        runs = simulate_batch(spec, make_pop, sim_config, m)

    curves = []
    for k, (pop, history) in enumerate(runs):
        write_population(pop, out / f"population_{k:03d}.csv")
        save_events(history, out / f"events_{k:03d}.csv")
        curves.append(history.epidemic_curve())

    with open(out / "curves.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        t0 = 1
        writer.writerow(["replicate", *[f"t{t0 + j}" for j in
                                        range(len(curves[0]))]])
        for k, curve in enumerate(curves):
            writer.writerow([k, *curve.tolist()])

    write_manifest(out, "simulate", cfg, seed,
                   extra={"replicates": m,
                          "t_max": sim_config.t_max})
    print(f"simulated {m} replicate(s) into {out}")
    return EXIT_OK


def _load_data(args, cfg, base_dir):
    pop = load_population(args.population)
    model_block = cfg.get("model") or {}
    framework = model_block.get("framework", "sir")
    sim_block = cfg.get("simulation") or {}
    t_min = int(sim_block.get("t_min", 1))
    t_max = int(sim_block.get("t_max", 0))
    if t_max <= 0:
        raise ConfigError("simulation.t_max must declare the study window")
    history = load_events(args.events, pop.n, framework, t_min, t_max)
    return pop, history


def cmd_fit(args) -> int:
    cfg = load_config(args.config)
    seed = master_seed(cfg, args.seed)
    base_dir = Path(args.config).parent
    out = _out_dir(args, cfg)
    spec = build_model_spec(cfg, base_dir)
    pop, history = _load_data(args, cfg, base_dir)
    priors = build_priors(cfg, spec)
    mcmc = build_mcmc_config(cfg, seed)

    sample = fit(spec, pop, history, priors, mcmc)
    sample.save_csv(out / "chain.csv")
    posterior_summary(sample).to_csv(out / "summary.csv", index=False)
    with open(out / "geweke.json", "w", encoding="utf-8") as fh:
        json.dump({
            "geweke_z": sample.diagnostics.get("geweke_z", {}),
            "stuck": sample.diagnostics.get("stuck", {}),
            "acceptance_rates": sample.acceptance_rates,
            "acceptance_warnings": sample.diagnostics.get(
                "acceptance_warnings", []),
        }, fh, sort_keys=True, indent=2)
        fh.write("\n")
    write_manifest(out, "fit", cfg, seed, extra={
        "data_hashes": {
            "population": _file_sha256(args.population),
            "events": _file_sha256(args.events),
        },
        "mcmc_seed": mcmc.rng_seed,
    })
    print(posterior_summary(sample).to_string(index=False))
    return EXIT_OK


def cmd_screen(args) -> int:
    cfg = load_config(args.config)
    seed = master_seed(cfg, args.seed)
    base_dir = Path(args.config).parent
    out = _out_dir(args, cfg)
    spec = build_model_spec(cfg, base_dir)
    pop, history = _load_data(args, cfg, base_dir)
    ss_config = build_screening_config(cfg, spec, seed)

    if args.then_fit:
        result, sample = screen_then_fit(spec, pop, history, ss_config)
        sample.save_csv(out / "chain.csv")
        posterior_summary(sample).to_csv(out / "summary.csv", index=False)
    else:
        result = screen(spec, pop, history, ss_config)

    report = {
        "inclusion_probability": result.inclusion_probability,
        "selected": result.selected,
        "selection_threshold": ss_config.selection_threshold,
        "medians": result.medians,
        "screening_iterations": ss_config.n_iterations,
        "warmup": result.warmup,
    }
    with open(out / "screening.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    write_manifest(out, "screen", cfg, seed, extra={
        "data_hashes": {
            "population": _file_sha256(args.population),
            "events": _file_sha256(args.events),
        },
    })
    print(f"inclusion probability {result.inclusion_probability:.4f} -> "
          f"selected {result.selected}")
    return EXIT_OK


def cmd_ppd(args) -> int:
    cfg = load_config(args.config)
    seed = master_seed(cfg, args.seed)
    base_dir = Path(args.config).parent
    out = _out_dir(args, cfg)
    spec = build_model_spec(cfg, base_dir)
    pop, history = _load_data(args, cfg, base_dir)
    sim_config = build_simulation_config(cfg, seed)
    sample = _load_chain(args, cfg)
    n_draws = int((cfg.get("ppd") or {}).get("draws", 100))

    band = ppd_curve(spec, pop, history, sample, sim_config,
                     n_draws=n_draws, rng_seed=seed)
    band.save_csv(out / "band.csv")
    from .plots import plot_band_svg
    plot_band_svg(band, out / "band.svg", observed=history.epidemic_curve(),
                  observed_times=np.arange(history.t_min, history.t_max))
    write_manifest(out, "ppd", cfg, seed, extra={"n_draws": n_draws})
    print(f"wrote {out / 'band.csv'} and {out / 'band.svg'}")
    return EXIT_OK


def cmd_forecast(args) -> int:
    cfg = load_config(args.config)
    seed = master_seed(cfg, args.seed)
    base_dir = Path(args.config).parent
    out = _out_dir(args, cfg)
    spec = build_model_spec(cfg, base_dir)
    pop, history = _load_data(args, cfg, base_dir)
    sim_config = build_simulation_config(cfg, seed)
    sample = _load_chain(args, cfg)

    fc = cfg.get("forecast") or {}
    t_cut = int(args.t_cut if args.t_cut is not None else fc.get("t_cut", 8))
    horizon = args.horizon if args.horizon is not None else fc.get("horizon")
    if horizon is None:
        raise ConfigError("forecast requires a horizon (--horizon or "
                          "forecast.horizon)")
    horizon = int(horizon)
    if horizon <= t_cut:
        raise ConfigError(f"horizon {horizon} must exceed t_cut {t_cut}")
    n_draws = int(fc.get("draws", 100))

    band = forecast_curve(spec, pop, history, sample, sim_config,
                          t_cut=t_cut, horizon=horizon, n_draws=n_draws,
                          rng_seed=seed)
    band.save_csv(out / "band.csv")
    from .plots import plot_band_svg
    plot_band_svg(band, out / "band.svg",
                  title=f"Forecast from t={t_cut}")
    write_manifest(out, "forecast", cfg, seed,
                   extra={"t_cut": t_cut, "horizon": horizon,
                          "n_draws": n_draws})
    print(f"wrote {out / 'band.csv'} and {out / 'band.svg'}")
    return EXIT_OK


def cmd_compare(args) -> int:
    if not args.model:
        raise ConfigError("compare needs at least one --model NAME=CONFIG:CHAIN")
    entries = []
    pop = load_population(args.population)
    history = None
    seed = args.seed if args.seed is not None else 0
    for item in args.model:
        try:
            name, rest = item.split("=", 1)
            config_path, chain_path = rest.rsplit(":", 1)
        except ValueError:
            raise ConfigError(
                f"--model must look like NAME=CONFIG:CHAIN, got {item!r}"
            ) from None
        cfg = load_config(config_path)
        spec = build_model_spec(cfg, Path(config_path).parent)
        if history is None:
            sim_block = cfg.get("simulation") or {}
            t_max = int(sim_block.get("t_max", 0))
            if t_max <= 0:
                raise ConfigError("simulation.t_max must declare the study "
                                  "window")
            history = load_events(args.events, pop.n, spec.framework,
                                  int(sim_block.get("t_min", 1)), t_max)
        mcmc = cfg.get("mcmc") or {}
        iterations = int(mcmc.get("iterations", 0))
        burn_in = int(mcmc.get("burn_in",
                               iterations // 10 if iterations else 0))
        sample = PosteriorSample.load_csv(chain_path, burn_in)
        _check_chain_manifest(Path(chain_path), args)
        entries.append((name, spec, sample))

    out = Path(args.out or "compare_out")
    out.mkdir(parents=True, exist_ok=True)
    report = compare_models(entries, pop, history,
                            n_draws=int(args.waic_draws), rng_seed=seed)
    report.to_frame().to_csv(out / "waic_table.csv", index=False)
    report.delta_frame().to_csv(out / "waic_deltas.csv")
    from .config import version_string
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump({
            "command": "compare",
            "version": version_string(),
            "master_seed": seed,
            "models": [m.split("=", 1)[0] for m in args.model],
        }, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(report.to_frame().to_string(index=False))
    print(f"best model: {report.best}")
    return EXIT_OK


def cmd_study(args) -> int:
    study_cfg = load_config(args.config)
    if args.seed is not None:
        study_cfg["seed"] = int(args.seed)
    out = Path(args.out or (study_cfg.get("output") or {}).get(
        "directory", "study_out"))
    out.mkdir(parents=True, exist_ok=True)
    selection = run_study(study_cfg, out, threads=int(args.threads))
    write_manifest(out, "study", study_cfg,
                   int(study_cfg.get("seed", 0)))
    print(selection.to_string(index=False))
    print(f"study tables written to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bcilm",
        description="Spatial epidemic models with behavioural-change alarms")
    parser.add_argument("--version", action="version",
                        version=f"bcilm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML run config")
    common.add_argument("--seed", type=int, default=None,
                        help="override the master seed")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--threads", type=int, default=1,
                        help="worker processes for batch commands")

    p = sub.add_parser("simulate", parents=[common],
                       help="simulate replicate epidemics")
    p.set_defaults(func=cmd_simulate)

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--population", required=True, help="population CSV")
    data.add_argument("--events", required=True, help="events CSV")

    p = sub.add_parser("fit", parents=[common, data],
                       help="fit a model by adaptive RWMH")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("screen", parents=[common, data],
                       help="spike-and-slab alarm screening")
    p.add_argument("--then-fit", action="store_true",
                   help="fit the selected model class after screening")
    p.set_defaults(func=cmd_screen)

    chain = argparse.ArgumentParser(add_help=False)
    chain.add_argument("--chain", required=True, help="fitted chain CSV")

    p = sub.add_parser("ppd", parents=[common, data, chain],
                       help="posterior predictive epidemic curve")
    p.set_defaults(func=cmd_ppd)

    p = sub.add_parser("forecast", parents=[common, data, chain],
                       help="forecast the epidemic curve beyond a cut point")
    p.add_argument("--t-cut", type=int, default=None)
    p.add_argument("--horizon", type=int, default=None)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("compare",
                       help="WAIC comparison across fitted models")
    p.add_argument("--population", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--model", action="append", default=[],
                   metavar="NAME=CONFIG:CHAIN",
                   help="fitted model to include (repeatable)")
    p.add_argument("--waic-draws", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("study", parents=[common],
                       help="simulate-fit-compare over a scenario grid")
    p.set_defaults(func=cmd_study)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UnsupportedFamilyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (ConfigError, DataFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BcilmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
