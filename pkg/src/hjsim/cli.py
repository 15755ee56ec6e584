"""Command-line front end: simulate, check-stability, ergodic-test, mixing-test.

Models are JSON files (schema in :mod:`hjsim.model`); run-shape parameters
come from flags, optionally defaulted by a "run" object in the same file.
Every run writes a manifest next to its outputs recording digests, seeds
and the produced files.  All files are written atomically (temp file plus
rename).  The environment variable HJS_THREADS overrides the worker count.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass

from . import __version__
from .diagnostics import invariant_histogram, mixing_curve, time_average
from .diffusion import EulerMaruyama, ExactOU, IntegratorConfig
from .engine import simulate_ensemble
from .model import (ConfigError, ModelSpec, canonical_json, model_digest,
                    model_from_dict, model_to_dict, state_from_dict)
from .pathio import dumps_binary, dumps_jsonl
from .rng import derive_path_seed
from .stability import stability_report

__all__ = ["RunConfig", "parse_config", "serialize_config", "config_digest", "main"]

_MAX_SEED = 2 ** 64 - 1

_RUN_DEFAULTS = {
    "horizon": None,
    "n_paths": 1,
    "seed": 0,
    "grid_dt": 0.01,
    "integrator": "em",
    "em_step": None,
    "burn_in": None,
    "format": "jsonl",
    "g": "x",
    "bins": 30,
    "times": None,
    "scan_radius": 20.0,
    "points": 10_000,
}


@dataclass
class RunConfig:
    """Model plus run-shape parameters; unset fields fall back to defaults
    (burn_in defaults to 10% of the horizon at use time)."""

    model: ModelSpec
    model_path: str | None = None
    horizon: float | None = None
    n_paths: int = 1
    seed: int = 0
    grid_dt: float = 0.01
    integrator: str = "em"
    em_step: float | None = None
    burn_in: float | None = None
    format: str = "jsonl"
    g: str = "x"
    bins: int = 30
    times: list[float] | None = None
    scan_radius: float = 20.0
    points: int = 10_000

    def validate(self) -> None:
        if not (0 <= self.seed <= _MAX_SEED):
            raise ConfigError("run.seed", "must be a 64-bit unsigned integer")
        if self.horizon is not None and not self.horizon > 0:
            raise ConfigError("run.horizon", "must be > 0")
        if self.n_paths < 1:
            raise ConfigError("run.n_paths", "must be >= 1")
        if not self.grid_dt > 0:
            raise ConfigError("run.grid_dt", "must be > 0")
        if self.integrator not in ("em", "exact-ou"):
            raise ConfigError("run.integrator", "must be 'em' or 'exact-ou'")
        if self.em_step is not None and not self.em_step > 0:
            raise ConfigError("run.em_step", "must be > 0")
        if self.burn_in is not None and self.burn_in < 0:
            raise ConfigError("run.burn_in", "must be >= 0")
        if self.format not in ("jsonl", "bin"):
            raise ConfigError("run.format", "must be 'jsonl' or 'bin'")
        if self.bins < 2:
            raise ConfigError("run.bins", "must be >= 2")
        if self.points < 2:
            raise ConfigError("run.points", "must be >= 2")
        if not self.scan_radius > 0:
            raise ConfigError("run.scan_radius", "must be > 0")

    def integrator_config(self) -> IntegratorConfig:
        if self.integrator == "exact-ou":
            scheme = ExactOU()
        else:
            scheme = EulerMaruyama(self.em_step if self.em_step is not None else self.grid_dt)
        return IntegratorConfig(scheme, self.grid_dt)

    def effective_burn_in(self) -> float:
        if self.burn_in is not None:
            return self.burn_in
        return 0.1 * (self.horizon or 0.0)

    def __eq__(self, other):
        if not isinstance(other, RunConfig):
            return NotImplemented
        return serialize_config(self) == serialize_config(other)


def serialize_config(config: RunConfig) -> dict:
    run = {}
    for key, default in _RUN_DEFAULTS.items():
        value = getattr(config, key)
        if value != default:
            run[key] = value
    d = model_to_dict(config.model)
    if run:
        d["run"] = run
    return d


def config_digest(config: RunConfig) -> str:
    return hashlib.sha256(canonical_json(serialize_config(config)).encode()).hexdigest()


def parse_config(path: str) -> RunConfig:
    """Load and validate a model config file, filling run-shape defaults.

    Raises :class:`ConfigError` naming the first invalid field.
    """
    if not os.path.exists(path):
        raise ConfigError("<config>", f"no such file: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    known_model = {"M", "rates", "kernel", "coefficients", "initial"}
    for key in raw:
        if key not in known_model | {"run"}:
            raise ConfigError(key, "unknown top-level field")
    model = model_from_dict({k: v for k, v in raw.items() if k in known_model})
    config = RunConfig(model=model, model_path=path)
    run = raw.get("run", {})
    if not isinstance(run, dict):
        raise ConfigError("run", "must be an object")
    for key, value in run.items():
        if key not in _RUN_DEFAULTS:
            raise ConfigError(f"run.{key}", "unknown run parameter")
        setattr(config, key, value)
    config.validate()
    return config


# ---------------------------------------------------------------------------
# Output plumbing
# ---------------------------------------------------------------------------


def _atomic_write_bytes(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_json(path: str, obj) -> None:
    _atomic_write_bytes(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode())


def _write_manifest(directory_or_file: str, command: str, config: RunConfig,
                    outputs: list[str], wall_clock: float,
                    per_path_seeds: list[int] | None = None) -> str:
    manifest = {
        "tool": "hjsim",
        "version": __version__,
        "command": command,
        "config_digest": config_digest(config),
        "model_digest": model_digest(config.model),
        "master_seed": config.seed,
        "per_path_seeds": per_path_seeds,
        "wall_clock_s": wall_clock,
        "outputs": outputs,
    }
    if os.path.isdir(directory_or_file):
        target = os.path.join(directory_or_file, "manifest.json")
    else:
        target = directory_or_file + ".manifest.json"
    _atomic_write_json(target, manifest)
    return target


def _resolve_workers(flag_value: int | None) -> int:
    env = os.environ.get("HJS_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError("HJS_THREADS", "must be an integer") from exc
    return max(1, flag_value or 1)


def _merge_flags(config: RunConfig, args: argparse.Namespace) -> None:
    for key in _RUN_DEFAULTS:
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            setattr(config, key, flag)
    config.validate()


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = parse_config(args.config)
    _merge_flags(config, args)
    if config.horizon is None:
        raise ConfigError("run.horizon", "missing (set --horizon or run.horizon)")
    integ = config.integrator_config()
    workers = _resolve_workers(args.workers)
    started = time.monotonic()
    paths = simulate_ensemble(config.model, config.horizon, integ, config.seed,
                              config.n_paths, workers=workers)
    os.makedirs(args.out, exist_ok=True)
    outputs = []
    for i, path in enumerate(paths):
        if config.format == "jsonl":
            name, data = f"path_{i:05d}.jsonl", dumps_jsonl(path)
        else:
            name, data = f"path_{i:05d}.hjsm", dumps_binary(path)
        _atomic_write_bytes(os.path.join(args.out, name), data)
        outputs.append(name)
    seeds = [derive_path_seed(config.seed, i) for i in range(config.n_paths)]
    _write_manifest(args.out, "simulate", config, outputs,
                    time.monotonic() - started, per_path_seeds=seeds)
    return 0


def _cmd_check_stability(args: argparse.Namespace) -> int:
    config = parse_config(args.config)
    _merge_flags(config, args)
    started = time.monotonic()
    report = stability_report(config.model, scan_radius=config.scan_radius,
                              n_points=config.points, seed=config.seed)
    _atomic_write_json(args.out, report)
    _write_manifest(args.out, "check-stability", config,
                    [os.path.basename(args.out)], time.monotonic() - started)
    return 0


def _cmd_ergodic_test(args: argparse.Namespace) -> int:
    config = parse_config(args.config)
    _merge_flags(config, args)
    if config.horizon is None:
        raise ConfigError("run.horizon", "missing (set --horizon or run.horizon)")
    integ = config.integrator_config()
    started = time.monotonic()
    paths = simulate_ensemble(config.model, config.horizon, integ,
                              config.seed, 1, workers=1)
    estimate = time_average(paths[0], config.g, burn_in=config.effective_burn_in(),
                            model=config.model)
    density = invariant_histogram(paths, bins=config.bins, compact=(-1.0, 1.0),
                                  grid_dt=config.grid_dt,
                                  burn_in=config.effective_burn_in())
    report = {
        "command": "ergodic-test",
        "g": config.g,
        "horizon": config.horizon,
        "estimate": estimate.to_dict(),
        "histogram": density.to_dict(),
        "n_events": paths[0].n_events,
    }
    _atomic_write_json(args.out, report)
    _write_manifest(args.out, "ergodic-test", config,
                    [os.path.basename(args.out)], time.monotonic() - started)
    return 0


def _parse_state(text: str, m: int, which: str):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(which, f"not valid JSON: {exc}") from exc
    return state_from_dict(d, m, field=which)


def _cmd_mixing_test(args: argparse.Namespace) -> int:
    config = parse_config(args.config)
    _merge_flags(config, args)
    if config.times is None:
        raise ConfigError("run.times", "missing (set --times or run.times)")
    start_a = _parse_state(args.start_a, config.model.n_components, "start-a")
    start_b = _parse_state(args.start_b, config.model.n_components, "start-b")
    integ = config.integrator_config()
    started = time.monotonic()
    curve = mixing_curve(config.model, start_a, start_b, config.times,
                         config.n_paths, config.bins, integ, master_seed=config.seed)
    report = {
        "command": "mixing-test",
        "n_paths": config.n_paths,
        "bins": config.bins,
        "curve": curve.to_dict(),
    }
    _atomic_write_json(args.out, report)
    csv_path = os.path.splitext(args.out)[0] + ".csv"
    lines = ["t,tv,fit"]
    fit = curve.fitted_values()
    for k, t in enumerate(curve.times):
        lines.append(f"{float(t)!r},{float(curve.tv_estimates[k])!r},{float(fit[k])!r}")
    _atomic_write_bytes(csv_path, ("\n".join(lines) + "\n").encode())
    _write_manifest(args.out, "mixing-test", config,
                    [os.path.basename(args.out), os.path.basename(csv_path)],
                    time.monotonic() - started)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _times_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad times list {text!r}") from exc


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hjsim",
        description="Simulator and long-run diagnostics for diffusions with "
                    "jumps driven by a mutually exciting point process.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate trajectories")
    sim.add_argument("--config", required=True)
    sim.add_argument("--horizon", type=float, default=None)
    sim.add_argument("--paths", dest="n_paths", type=int, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--grid-dt", dest="grid_dt", type=float, default=None)
    sim.add_argument("--format", choices=["jsonl", "bin"], default=None)
    sim.add_argument("--integrator", choices=["em", "exact-ou"], default=None)
    sim.add_argument("--em-step", dest="em_step", type=float, default=None)
    sim.add_argument("--workers", type=int, default=None)
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=_cmd_simulate)

    chk = sub.add_parser("check-stability", help="stability report")
    chk.add_argument("--config", required=True)
    chk.add_argument("--scan-radius", dest="scan_radius", type=float, default=None)
    chk.add_argument("--points", type=int, default=None)
    chk.add_argument("--seed", type=int, default=None)
    chk.add_argument("--out", required=True)
    chk.set_defaults(func=_cmd_check_stability)

    erg = sub.add_parser("ergodic-test", help="time-average diagnostics")
    erg.add_argument("--config", required=True)
    erg.add_argument("--horizon", type=float, default=None)
    erg.add_argument("--burn-in", dest="burn_in", type=float, default=None)
    erg.add_argument("--g", choices=["x", "x2", "rate", "one"], default=None)
    erg.add_argument("--seed", type=int, default=None)
    erg.add_argument("--grid-dt", dest="grid_dt", type=float, default=None)
    erg.add_argument("--integrator", choices=["em", "exact-ou"], default=None)
    erg.add_argument("--out", required=True)
    erg.set_defaults(func=_cmd_ergodic_test)

    mix = sub.add_parser("mixing-test", help="two-start mixing decay")
    mix.add_argument("--config", required=True)
    mix.add_argument("--times", type=_times_list, default=None)
    mix.add_argument("--paths", dest="n_paths", type=int, default=None)
    mix.add_argument("--bins", type=int, default=None)
    mix.add_argument("--start-a", dest="start_a", required=True)
    mix.add_argument("--start-b", dest="start_b", required=True)
    mix.add_argument("--seed", type=int, default=None)
    mix.add_argument("--grid-dt", dest="grid_dt", type=float, default=None)
    mix.add_argument("--integrator", choices=["em", "exact-ou"], default=None)
    mix.add_argument("--out", required=True)
    mix.set_defaults(func=_cmd_mixing_test)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        payload = {"error": "ConfigError", "field": exc.field, "message": str(exc)}
    except (ValueError, RuntimeError, OSError) as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
    sys.stderr.write(json.dumps(payload) + "\n")
    return 1


if __name__ == "__main__":
    sys.exit(main())
