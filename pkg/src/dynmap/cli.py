"""Command-line front end: classify maps, run witness scans, simulate
tomography, export model matrices.

Commands::

    dynmap classify     --model ... [grid flags]        -> JSON verdict
    dynmap scan WHICH   --model ... [grid flags]        -> CSV report
    dynmap tomo         --model ... --t T [--noise-sigma S] -> JSON verdict
    dynmap export-model --model ... --t T [--what W]    -> matrix JSON

Reports go to ``--out`` when given (the resolved configuration is then
echoed to stdout), otherwise to stdout (configuration echo on stderr).
Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import models, superop, tomography, witness
from .models import MapFamily, SingularGeneratorError
from .propagate import TimeGrid
from .superop import SingularMapError
from .witness import ResidualTooLargeError, StepTooLargeError, ToleranceConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

SCAN_KINDS = ("invertibility", "cpdiv", "blp", "smoothness")
MODEL_NAMES = ("amplitude-damping", "mixed-pauli", "dephasing", "decay-g", "identity", "semigroup")

# pairwise scans cost O(n^2) eigensolves, per-point scans O(n)
DEFAULT_STEPS_PAIRWISE = 128
DEFAULT_STEPS_POINTWISE = 512

_NUMERIC_ERRORS = (
    SingularMapError,
    SingularGeneratorError,
    ResidualTooLargeError,
    StepTooLargeError,
    OverflowError,
    FloatingPointError,
    np.linalg.LinAlgError,
)


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", choices=MODEL_NAMES, help="model family to run")
    common.add_argument("--gamma", type=float, help="amplitude-damping decay rate")
    common.add_argument("--a", type=float, help="mixed-pauli mixing probability in (0,1)")
    common.add_argument("--r", type=float, help="mixed-pauli flip rate")
    common.add_argument("--preset", help="dephasing / decay-g preset name")
    common.add_argument("--lambda", dest="lam", type=float, help="decay-g exponential rate")
    common.add_argument("--tstar", type=float, help="decay-g linear-cutoff time")
    common.add_argument("--generator-file", help="matrix JSON with a constant generator (semigroup)")
    common.add_argument("--t-min", type=float, help="grid start (default 0)")
    common.add_argument("--t-max", type=float, help="grid end (default: model domain)")
    common.add_argument("--steps", type=int, help="grid step count")
    common.add_argument("--seed", type=int, help="RNG seed (default 0)")
    common.add_argument("--threads", type=int, help="worker pool size for pairwise scans")
    common.add_argument("--out", help="report file (default: stdout)")
    common.add_argument("--config", help="JSON file with the same keys; flags override it")
    common.add_argument("--eig-tol", type=float, help="eigenvalue tolerance")
    common.add_argument("--sv-threshold", type=float, help="relative singular-value cutoff")
    common.add_argument("--fd-step", type=float, help="finite-difference step")
    common.add_argument("--generator-norm-cap", type=float, help="generator-norm blowup cap")
    common.add_argument("--smoothness-mismatch", type=float, help="difference-quotient mismatch cap")

    parser = argparse.ArgumentParser(
        prog="dynmap",
        description="Classify time-parametrized quantum dynamical maps and run the underlying witnesses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("classify", parents=[common], help="full region classification")
    scan = sub.add_parser("scan", parents=[common], help="single witness scan to CSV")
    scan.add_argument("which", choices=SCAN_KINDS)
    tomo = sub.add_parser("tomo", parents=[common], help="tomography-based invertibility verdict")
    tomo.add_argument("--t", type=float, help="probe time")
    tomo.add_argument("--noise-sigma", type=float, help="Gaussian tomography noise width")
    export = sub.add_parser("export-model", parents=[common], help="export a model matrix as JSON")
    export.add_argument("--t", type=float, help="evaluation time")
    export.add_argument(
        "--what", choices=("process", "choi", "generator"), help="matrix to export (default process)"
    )
    return parser


# ---------------------------------------------------------------------------
# Configuration resolution
# ---------------------------------------------------------------------------

_CONFIG_KEYS = (
    "model", "gamma", "a", "r", "preset", "lam", "tstar", "generator_file",
    "t_min", "t_max", "steps", "seed", "threads", "out",
    "eig_tol", "sv_threshold", "fd_step", "generator_norm_cap", "smoothness_mismatch",
    "t", "noise_sigma", "what",
)


def _merge_config(args: argparse.Namespace) -> dict:
    merged: dict = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(file_cfg) - set(_CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_cfg)
    for key in _CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _require(cfg: dict, key: str, model: str):
    if cfg.get(key) is None:
        flag = "--lambda" if key == "lam" else "--" + key.replace("_", "-")
        raise ConfigError(f"model {model!r} requires {flag}")
    return cfg[key]


def _coerce(value, kind, what: str):
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must be a {kind.__name__}, got {value!r}") from exc


def _build_family(cfg: dict, t_max: float | None) -> MapFamily:
    model = cfg.get("model")
    if model is None:
        raise ConfigError("--model is required")
    try:
        if model == "amplitude-damping":
            return models.amplitude_damping(float(_require(cfg, "gamma", model)), t_max=t_max)
        if model == "mixed-pauli":
            return models.mixed_pauli(
                float(_require(cfg, "a", model)), float(_require(cfg, "r", model)), t_max=t_max
            )
        if model == "dephasing":
            return models.dephasing(str(_require(cfg, "preset", model)), t_max=t_max or 10.0)
        if model == "decay-g":
            preset = str(_require(cfg, "preset", model))
            if preset == "exponential":
                return models.decay_g(preset, lam=float(_require(cfg, "lam", model)), t_max=t_max)
            if preset == "linear-cutoff":
                return models.decay_g(preset, t_star=float(_require(cfg, "tstar", model)), t_max=t_max)
            raise ConfigError(f"unknown decay-g preset {preset!r}")
        if model == "identity":
            return models.identity_family(t_max=t_max or 10.0)
        if model == "semigroup":
            path = str(_require(cfg, "generator_file", model))
            try:
                with open(path) as fh:
                    gen = superop.matrix_from_json_dict(json.load(fh))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read generator file {path}: {exc}") from exc
            return models.semigroup(gen, t_max=t_max or 10.0)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown model {model!r}")


def _tolerances(cfg: dict) -> ToleranceConfig:
    defaults = ToleranceConfig()
    try:
        return ToleranceConfig(
            eig_tol=float(cfg.get("eig_tol", defaults.eig_tol)),
            sv_threshold=float(cfg.get("sv_threshold", defaults.sv_threshold)),
            fd_step=float(cfg.get("fd_step", defaults.fd_step)),
            generator_norm_cap=float(cfg.get("generator_norm_cap", defaults.generator_norm_cap)),
            smoothness_mismatch=float(cfg.get("smoothness_mismatch", defaults.smoothness_mismatch)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _resolve(cfg: dict, default_steps: int) -> tuple[MapFamily, TimeGrid, ToleranceConfig, dict]:
    t_max = cfg.get("t_max")
    if t_max is not None:
        t_max = _coerce(t_max, float, "t_max")
    family = _build_family(cfg, t_max)
    t_min = _coerce(cfg.get("t_min", 0.0), float, "t_min")
    steps = _coerce(cfg.get("steps", default_steps), int, "steps")
    if t_min < 0.0:
        raise ConfigError(f"t_min must be >= 0, got {t_min}")
    if steps < 1:
        raise ConfigError(f"steps must be >= 1, got {steps}")
    try:
        grid = TimeGrid(t_min, t_max if t_max is not None else family.t_max, steps)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    tol = _tolerances(cfg)
    seed = _coerce(cfg.get("seed", 0), int, "seed")
    threads = _coerce(cfg.get("threads", os.cpu_count() or 1), int, "threads")
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    echo = {
        "model": family.name,
        "params": dict(sorted(family.params.items())),
        "grid": {"t_min": grid.t0, "t_max": grid.t1, "steps": grid.n},
        "tolerances": {
            "eig_tol": tol.eig_tol,
            "sv_threshold": tol.sv_threshold,
            "fd_step": tol.fd_step,
            "generator_norm_cap": tol.generator_norm_cap,
            "smoothness_mismatch": tol.smoothness_mismatch,
        },
        "seed": seed,
        "threads": threads,
    }
    return family, grid, tol, echo


def _emit(report_text: str, out_path: str | None, echo: dict) -> None:
    echo_text = json.dumps({"config_echo": echo}, indent=2) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(report_text)
        sys.stdout.write(echo_text)
    else:
        sys.stdout.write(report_text)
        sys.stderr.write(echo_text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_classify(cfg: dict) -> int:
    family, grid, tol, echo = _resolve(cfg, DEFAULT_STEPS_POINTWISE)
    result = witness.classify(family, grid, tol)
    payload = result.to_json_dict()
    payload["config_echo"] = echo
    text = json.dumps(payload, indent=2) + "\n"
    out = cfg.get("out")
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_scan(cfg: dict, which: str) -> int:
    default_steps = DEFAULT_STEPS_PAIRWISE if which == "cpdiv" else DEFAULT_STEPS_POINTWISE
    family, grid, tol, echo = _resolve(cfg, default_steps)
    echo["scan"] = which
    if which == "invertibility":
        text = witness.invertibility_scan(family, grid, tol).to_csv()
    elif which == "cpdiv":
        text = witness.cp_divisibility_scan(family, grid, tol, workers=echo["threads"]).to_csv()
    elif which == "blp":
        text = witness.blp_scan(family, grid, tol=tol).to_csv()
    elif which == "smoothness":
        text = witness.smoothness_probe(family, grid, tol).to_csv()
    else:
        raise ConfigError(f"unknown scan kind {which!r}")
    _emit(text, cfg.get("out"), echo)
    return EXIT_OK


def cmd_tomo(cfg: dict) -> int:
    family, _, tol, echo = _resolve(cfg, DEFAULT_STEPS_POINTWISE)
    if cfg.get("t") is None:
        raise ConfigError("tomo requires --t")
    t = _coerce(cfg["t"], float, "t")
    if not (0.0 <= t <= family.t_max):
        raise ConfigError(f"--t {t} outside the domain [0, {family.t_max}]")
    noise = _coerce(cfg.get("noise_sigma", 0.0), float, "noise_sigma")
    if noise < 0:
        raise ConfigError(f"--noise-sigma must be >= 0, got {noise}")
    echo["t"] = t
    echo["noise_sigma"] = noise
    run = tomography.simulate_outputs(family, t, noise_sigma=noise, seed=echo["seed"])
    a_rec = tomography.reconstruct_process(run)
    verdict = tomography.invertibility_verdict(a_rec, noise, tol.sv_threshold)
    payload = {
        "t": t,
        "noise_sigma": noise,
        "seed": echo["seed"],
        "A_rec": superop.matrix_to_json_dict(a_rec),
        **verdict.to_json_dict(),
        "config_echo": echo,
    }
    text = json.dumps(payload, indent=2) + "\n"
    out = cfg.get("out")
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_export_model(cfg: dict) -> int:
    family, _, _, echo = _resolve(cfg, DEFAULT_STEPS_POINTWISE)
    if cfg.get("t") is None:
        raise ConfigError("export-model requires --t")
    t = _coerce(cfg["t"], float, "t")
    if not (0.0 <= t <= family.t_max):
        raise ConfigError(f"--t {t} outside the domain [0, {family.t_max}]")
    what = str(cfg.get("what", "process"))
    echo["t"] = t
    echo["what"] = what
    if what == "process":
        mat = models.eval_family(family, t)
    elif what == "choi":
        mat = superop.reshuffle(models.eval_family(family, t))
    elif what == "generator":
        if family.liouvillian is None:
            raise ConfigError(f"model {family.name} has no closed-form generator to export")
        mat = models.analytic_liouvillian(family, t)
    else:
        raise ConfigError(f"unknown export kind {what!r}")
    text = json.dumps(superop.matrix_to_json_dict(mat), indent=2) + "\n"
    _emit(text, cfg.get("out"), echo)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        if args.command == "classify":
            return cmd_classify(cfg)
        if args.command == "scan":
            return cmd_scan(cfg, args.which)
        if args.command == "tomo":
            return cmd_tomo(cfg)
        if args.command == "export-model":
            return cmd_export_model(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        sys.stderr.write(f"dynmap: configuration error: {exc}\n")
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        sys.stderr.write(f"dynmap: numerical failure: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERIC


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
