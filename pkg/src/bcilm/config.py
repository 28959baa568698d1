"""Run configuration: YAML schema, validation, and object builders.

A run config is one YAML document with these blocks (commands read the
blocks they need):

    seed:        master seed (int)
    population:  {source: generate, n, x_range, y_range}
                 or {source: file, path}
    model:       form, framework, susceptibility, beta, epsilon,
                 kernel_offset, alarm {family, delta1, delta2, signal}
    periods:     infectious_period, exposed_period, removal_overrides
    simulation:  t_max, n_seeds, seeds (explicit list), replicates
    priors:      parameter name -> {dist, ...}; listed parameters are
                 the free ones in a fit
    mcmc:        iterations, burn_in, seed, target_acceptance,
                 initial_values
    screening:   iterations, final_iterations, threshold,
                 inclusion_prior ({a, b} or {fixed: p})
    ppd:         draws
    forecast:    t_cut, horizon, draws
    output:      directory
"""

from __future__ import annotations

import functools
import hashlib
import json
import subprocess
from pathlib import Path
from typing import Mapping, Optional

import yaml

from . import __version__
from .alarm import EXTERNAL, AlarmSignal, AlarmSpec
from .epidemic import SEIR, SIR, PeriodSpec
from .errors import ConfigError
from .inference import MCMCConfig, parse_prior
from .model import BinaryCovariate, Constant, ModelSpec
from .population import Population, generate_population, load_population
from .screening import SpikeSlabConfig
from .simulate import SimulationConfig

__all__ = [
    "load_config",
    "config_hash",
    "build_population",
    "build_model_spec",
    "build_periods",
    "build_simulation_config",
    "build_priors",
    "build_mcmc_config",
    "build_screening_config",
    "write_manifest",
]


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"could not parse {path}: {exc}") from None
    if not isinstance(cfg, Mapping):
        raise ConfigError(f"{path}: top level must be a mapping")
    return dict(cfg)


def config_hash(cfg: Mapping) -> str:
    canonical = json.dumps(cfg, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _require(cfg: Mapping, key: str, context: str):
    if key not in cfg:
        raise ConfigError(f"missing '{key}' in {context} block")
    return cfg[key]


def master_seed(cfg: Mapping, override: Optional[int] = None) -> int:
    if override is not None:
        return int(override)
    return int(cfg.get("seed", 0))


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def build_population(cfg: Mapping, seed: int, base_dir: Path = None) -> Population:
    block = _require(cfg, "population", "top-level")
    source = _require(block, "source", "population")
    if source == "generate":
        return generate_population(
            int(_require(block, "n", "population")),
            tuple(_require(block, "x_range", "population")),
            tuple(_require(block, "y_range", "population")),
            rng_seed=seed)
    if source == "file":
        path = Path(_require(block, "path", "population"))
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"population file not found: {path}")
        return load_population(path)
    raise ConfigError(f"population source must be 'generate' or 'file', "
                      f"got {source!r}")


def _build_signal(block: Optional[Mapping], base_dir: Path = None) -> AlarmSignal:
    if block is None:
        return AlarmSignal()
    kind = block.get("kind", "count")
    series = None
    if kind == EXTERNAL:
        path = Path(_require(block, "path", "alarm signal"))
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        if not path.exists():
            raise ConfigError(f"signal series file not found: {path}")
        series = {}
        import csv as _csv
        with open(path, newline="", encoding="utf-8") as fh:
            reader = _csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["t", "value"]:
                raise ConfigError(f"{path}: expected CSV header t,value")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    series[int(row[0])] = float(row[1])
                except (ValueError, IndexError):
                    raise ConfigError(
                        f"{path}:{lineno}: bad signal row {row!r}") from None
    return AlarmSignal(kind=kind, series=series,
                       window=block.get("window"),
                       presmoothed=bool(block.get("presmoothed", False)))


def build_model_spec(cfg: Mapping, base_dir: Path = None) -> ModelSpec:
    block = _require(cfg, "model", "top-level")
    form = _require(block, "form", "model")
    framework = block.get("framework", SIR)
    if framework not in (SIR, SEIR):
        raise ConfigError(f"framework must be sir or seir, got {framework!r}")

    sus = _require(block, "susceptibility", "model")
    sus_type = _require(sus, "type", "susceptibility")
    if sus_type == "constant":
        susceptibility = Constant(float(_require(sus, "alpha", "susceptibility")))
    elif sus_type == "binary_covariate":
        susceptibility = BinaryCovariate(
            float(_require(sus, "alpha0", "susceptibility")),
            float(_require(sus, "alpha1", "susceptibility")),
            int(sus.get("column", 0)))
    else:
        raise ConfigError(f"susceptibility type must be constant or "
                          f"binary_covariate, got {sus_type!r}")

    alarm = None
    if block.get("alarm") is not None:
        ab = block["alarm"]
        delta2 = ab.get("delta2")
        alarm = AlarmSpec(
            family=_require(ab, "family", "alarm"),
            delta1=float(ab.get("delta1", 0.0)),
            delta2=None if delta2 is None else float(delta2),
            signal=_build_signal(ab.get("signal"), base_dir))

    return ModelSpec(
        form=form,
        framework=framework,
        susceptibility=susceptibility,
        beta=float(_require(block, "beta", "model")),
        alarm=alarm,
        epsilon=float(block.get("epsilon", 0.0)),
        kernel_offset=float(block.get("kernel_offset", 1.0)))


def build_periods(cfg: Mapping) -> PeriodSpec:
    block = _require(cfg, "periods", "top-level")
    overrides = block.get("removal_overrides") or {}
    return PeriodSpec(
        infectious_period=int(_require(block, "infectious_period", "periods")),
        exposed_period=(None if block.get("exposed_period") is None
                        else int(block["exposed_period"])),
        removal_overrides={int(k): int(v) for k, v in overrides.items()})


def build_simulation_config(cfg: Mapping, seed: int) -> SimulationConfig:
    block = _require(cfg, "simulation", "top-level")
    selection = block.get("seeds", "random")
    if selection != "random":
        selection = [int(v) for v in selection]
    return SimulationConfig(
        t_max=int(_require(block, "t_max", "simulation")),
        periods=build_periods(cfg),
        n_seeds=int(block.get("n_seeds", 3)),
        seed_selection=selection,
        rng_seed=seed)


def build_priors(cfg: Mapping, spec: ModelSpec) -> dict:
    block = cfg.get("priors")
    if not block:
        raise ConfigError("fit requires a 'priors' block naming the free "
                          "parameters")
    if "epsilon" in block:
        raise ConfigError("epsilon is a fixed constant and cannot be given "
                          "a prior")
    priors = {}
    valid = spec.parameter_names()
    for name, val in block.items():
        if name not in valid:
            raise ConfigError(
                f"prior given for {name!r}, which is not a parameter of "
                f"this model (parameters: {valid})")
        priors[name] = parse_prior(val)
    return priors


def build_mcmc_config(cfg: Mapping, seed: int) -> MCMCConfig:
    block = _require(cfg, "mcmc", "top-level")
    iterations = int(_require(block, "iterations", "mcmc"))
    return MCMCConfig(
        n_iterations=iterations,
        burn_in=int(block.get("burn_in", iterations // 10)),
        initial_values=block.get("initial_values"),
        target_acceptance=float(block.get("target_acceptance", 0.44)),
        rng_seed=int(block.get("seed", seed)))


def build_screening_config(cfg: Mapping, spec: ModelSpec, seed: int) -> SpikeSlabConfig:
    block = cfg.get("screening") or {}
    priors_block = cfg.get("priors") or {}
    slab = {nm: parse_prior(priors_block[nm])
            for nm in ("delta1", "delta2") if nm in priors_block}
    baseline = {nm: parse_prior(priors_block[nm])
                for nm in ("alpha", "alpha0", "alpha1", "beta")
                if nm in priors_block}
    inclusion = block.get("inclusion_prior") or {"a": 5.0, "b": 5.0}
    if "fixed" in inclusion:
        inclusion_prior = float(inclusion["fixed"])
    else:
        inclusion_prior = (float(inclusion.get("a", 5.0)),
                           float(inclusion.get("b", 5.0)))
    return SpikeSlabConfig(
        slab_priors=slab,
        inclusion_prior=inclusion_prior,
        n_iterations=int(block.get("iterations", 25_000)),
        final_iterations=int(block.get("final_iterations", 75_000)),
        selection_threshold=float(block.get("threshold", 0.5)),
        baseline_priors=baseline or None,
        rng_seed=int(block.get("seed", seed)))


# ---------------------------------------------------------------------------
# Output manifest
# ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=1)
def version_string() -> str:
    """Package version, refined with `git describe` when running from a
    checkout; stable within one source state."""
    try:
        described = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).parent, capture_output=True, text=True,
            timeout=5)
        if described.returncode == 0 and described.stdout.strip():
            return f"bcilm {__version__}+g{described.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"bcilm {__version__}"


def write_manifest(out_dir: Path, command: str, cfg: Mapping, seed: int,
                   extra: Mapping = None) -> Path:
    """Record what produced an output directory.

    The manifest is deterministic: identical configs and seeds yield
    identical manifests, and identical manifests imply byte-identical
    numeric outputs.
    """
    manifest = {
        "command": command,
        "version": version_string(),
        "config_hash": config_hash(cfg),
        "master_seed": seed,
    }
    if extra:
        manifest.update(extra)
    path = Path(out_dir) / "manifest.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path
