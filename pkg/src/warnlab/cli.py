"""Command line front end.

Subcommands:
    analytic   closed-form sweep of the configured quantities
    simulate   Monte Carlo sweep (config must declare an empirical engine)
    weyl       Weyl-vector pairing probe for multiplication models
    validate   parse the config, build the model, and sanity-check the grid

Exit codes: 0 success, 2 configuration error, 3 numerical failure. The
WARNLAB_LOG environment variable (error, info, debug) controls verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
import time
from dataclasses import replace
from pathlib import Path

from .config import ExperimentConfig, load_config
from .errors import ConfigError, NumericalError
from .lyapunov import noise_limit_xi
from .scaling import (
    classify_warning_sign,
    fit_quantity,
    make_p_grid,
    run_parameter_sweep,
    weyl_divergence_probe,
    write_sweep_csv,
)
from .sde import splitmix64
from .spectrum import (
    MultiplicationSymbolModel,
    SpectralModel,
    bifurcation_parameter,
    build_weyl_sequence,
    curve_continuity_violations,
    spectral_abscissa,
    weyl_defect,
)

_SCHEMA_VERSION = 1

log = logging.getLogger("warnlab")


def _setup_logging() -> None:
    level_name = os.environ.get("WARNLAB_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level_name not in levels:
        level_name = "error"
    logging.basicConfig(level=levels[level_name], format="%(levelname)s %(name)s: %(message)s")


def _sanitize(name: str) -> str:
    return re.sub(r"[:,]", "_", name)


def _resolve_formats(args, cfg: ExperimentConfig) -> tuple:
    if args.format is None:
        return cfg.output_formats
    if args.format == "both":
        return ("csv", "json")
    return (args.format,)


def _materialize_grid(cfg: ExperimentConfig, p_star: float):
    s = cfg.sweep
    try:
        return make_p_grid(p_star, s.start, s.count, factor=s.factor, stop=s.stop,
                           spacing=s.spacing)
    except ValueError as exc:
        raise ConfigError(f"sweep: {exc}") from exc


def _fit_payload(fit) -> dict:
    return {
        "exponent": fit.exponent,
        "log_prefactor": fit.log_prefactor,
        "r_squared": fit.r_squared,
        "window": list(fit.window),
        "residual_std": fit.residual_std,
    }


def _verdict_payload(verdict) -> dict:
    return {
        "classification": verdict.classification,
        "fitted_exponent": verdict.fitted_exponent,
        "rationale": verdict.rationale,
    }


def _write_outputs(cfg, args, sweep, report: dict) -> Path:
    outdir = Path(args.out) if args.out else Path(cfg.output_directory)
    outdir.mkdir(parents=True, exist_ok=True)
    formats = _resolve_formats(args, cfg)
    if "csv" in formats:
        for name in sweep.quantities:
            path = outdir / f"sweep_{_sanitize(name)}.csv"
            write_sweep_csv(sweep, name, path)
            log.info("wrote %s", path)
    if "json" in formats:
        path = outdir / "report.json"
        with open(path, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
        log.info("wrote %s", path)
    return outdir


def _base_report(command: str, cfg: ExperimentConfig, p_star: float, elapsed: float) -> dict:
    return {
        "schema_version": _SCHEMA_VERSION,
        "command": command,
        "name": cfg.name,
        "config_echo": cfg.echo,
        "p_star": p_star,
        "timing": {"seconds": elapsed},
    }


def _sweep_report(command, cfg, args, sweep, xi, elapsed, seed_record=None) -> dict:
    results = {}
    for name in sweep.quantities:
        window = cfg.fit_windows.get(name, "last_decade")
        # a failed fit (zero noise, degenerate series) must not discard the data
        try:
            fit = fit_quantity(sweep, name, window)
            verdict = classify_warning_sign(sweep, name, xi=xi, window=window)
        except NumericalError as exc:
            fit = verdict = None
            fit_error = str(exc)
        errs = sweep.stderrs.get(name)
        results[name] = {
            "p_values": [float(p) for p in sweep.p_values],
            "values": [float(v) for v in sweep.quantities[name]],
            "stderr": None if errs is None else [float(e) for e in errs],
            "provenance": sweep.provenance[name],
            "fit": None if fit is None else _fit_payload(fit),
            "verdict": None if verdict is None else _verdict_payload(verdict),
        }
        if fit is None:
            results[name]["fit_error"] = fit_error
            print(f"{name}: no power-law fit ({fit_error})")
        else:
            print(f"{name}: exponent {fit.exponent:.6g} (r^2 {fit.r_squared:.6g}) "
                  f"-> {verdict.classification}")
    report = _base_report(command, cfg, sweep.p_star, elapsed)
    report["results"] = results
    report["mixing_warning"] = sweep.mixing_warning
    if xi is not None:
        val = complex(xi.value)
        report["noise_limit_xi"] = {
            "value": [val.real, val.imag],
            "converged": xi.converged,
            "samples": [[float(p), complex(v).real, complex(v).imag]
                        for p, v in xi.samples],
        }
    if seed_record is not None:
        report["seed_record"] = seed_record
    return report


def _maybe_xi(model, grid):
    if isinstance(model, SpectralModel) and model.sigma_depends_on_p:
        return noise_limit_xi(model, grid)
    return None


def cmd_analytic(args) -> int:
    start = time.perf_counter()
    cfg = load_config(args.config)
    p_star = bifurcation_parameter(cfg.model, cfg.p_star_bracket)
    log.info("bifurcation parameter p* = %r", p_star)
    grid = _materialize_grid(cfg, p_star)
    sweep = run_parameter_sweep(cfg.model, grid, cfg.quantities, engine="analytic",
                                p_star=p_star, threads=args.threads)
    xi = _maybe_xi(cfg.model, grid)
    elapsed = time.perf_counter() - start
    report = _sweep_report("analytic", cfg, args, sweep, xi, elapsed)
    outdir = _write_outputs(cfg, args, sweep, report)
    print(f"outputs in {outdir}")
    return 0


def cmd_simulate(args) -> int:
    start = time.perf_counter()
    cfg = load_config(args.config)
    if cfg.engine != "empirical" or cfg.ensemble is None:
        raise ConfigError("engine.kind: command 'simulate' requires an empirical engine")
    ensemble = cfg.ensemble
    if args.seed is not None:
        ensemble = replace(ensemble, master_seed=args.seed & 0xFFFFFFFFFFFFFFFF)
    p_star = bifurcation_parameter(cfg.model, cfg.p_star_bracket)
    grid = _materialize_grid(cfg, p_star)
    log.info("simulating %d grid points, %d trajectories each",
             grid.size, ensemble.n_trajectories)
    sweep = run_parameter_sweep(cfg.model, grid, cfg.quantities, engine="empirical",
                                config=ensemble, p_star=p_star, threads=args.threads)
    xi = _maybe_xi(cfg.model, grid)
    elapsed = time.perf_counter() - start
    seed_record = {
        "master_seed": ensemble.master_seed,
        "point_seeds": [splitmix64(ensemble.master_seed, i) for i in range(grid.size)],
    }
    report = _sweep_report("simulate", cfg, args, sweep, xi, elapsed, seed_record)
    if sweep.mixing_warning:
        print("warning: horizon is short against the slowest relaxation time "
              "(horizon * |spectral abscissa| < 5)", file=sys.stderr)
    outdir = _write_outputs(cfg, args, sweep, report)
    print(f"outputs in {outdir}")
    return 0


def cmd_weyl(args) -> int:
    start = time.perf_counter()
    cfg = load_config(args.config)
    model = cfg.model
    if not isinstance(model, MultiplicationSymbolModel):
        raise ConfigError("model.kind: command 'weyl' requires a multiplication model")
    if not cfg.weyl_k_values:
        raise ConfigError("weyl.k_values: required for the weyl command")
    p_star = bifurcation_parameter(model, cfg.p_star_bracket)
    grid = _materialize_grid(cfg, p_star)
    sweep = weyl_divergence_probe(model, cfg.weyl_k_values, grid)
    center = float(model.argmax_points[0])
    defects = {}
    print(f"{'k':>6} {'defect':>14} {'exponent':>10} {'r^2':>8}")
    weyl_results = {}
    for k in cfg.weyl_k_values:
        name = f"weyl_pairing:{k}"
        vector = build_weyl_sequence(model, k, center)
        defect = weyl_defect(model, vector, model.esssup)
        defects[k] = defect
        window = cfg.fit_windows.get(name, "last_decade")
        try:
            fit = fit_quantity(sweep, name, window)
            verdict = classify_warning_sign(sweep, name, window=window)
        except NumericalError:
            fit = verdict = None
        weyl_results[name] = {
            "p_values": [float(p) for p in sweep.p_values],
            "values": [float(v) for v in sweep.quantities[name]],
            "stderr": None,
            "provenance": "analytic",
            "fit": None if fit is None else _fit_payload(fit),
            "verdict": None if verdict is None else _verdict_payload(verdict),
            "defect": defect,
        }
        exp_col = "nan" if fit is None else f"{fit.exponent:.4f}"
        r2_col = "nan" if fit is None else f"{fit.r_squared:.5f}"
        print(f"{k:>6} {defect:>14.6e} {exp_col:>10} {r2_col:>8}")
    elapsed = time.perf_counter() - start
    report = _base_report("weyl", cfg, p_star, elapsed)
    report["results"] = weyl_results
    report["weyl"] = {
        "k_values": list(cfg.weyl_k_values),
        "center": center,
        "defects": {str(k): v for k, v in defects.items()},
    }
    outdir = _write_outputs(cfg, args, sweep, report)
    print(f"outputs in {outdir}")
    return 0


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    model = cfg.model
    p_star = bifurcation_parameter(model, cfg.p_star_bracket)
    grid = _materialize_grid(cfg, p_star)
    if isinstance(model, SpectralModel):
        violations = curve_continuity_violations(model, grid, cfg.lipschitz_budget)
        if violations:
            for cid, p_lo, p_hi, jump in violations:
                print(f"curve {cid}: jump {jump:.3e} between p={p_lo!r} and p={p_hi!r}",
                      file=sys.stderr)
            raise NumericalError(
                f"{len(violations)} eigenvalue curve continuity violations on the sweep grid"
            )
        # one critical mode only: every other curve must sit below -spectral_gap at p*
        for c in model.curves:
            if c.id == model.critical_index:
                continue
            re = model.lambda_at(c.id, p_star).real
            if re > -cfg.spectral_gap:
                raise ConfigError(
                    f"model.curves: curve {c.id} has Re(lambda) = {re:.6g} at p* = "
                    f"{p_star!r}, inside the spectral gap {cfg.spectral_gap:g} "
                    f"reserved for the critical curve {model.critical_index}"
                )
        kind = "spectral"
        modes = model.total_dim
    else:
        kind = "multiplication"
        modes = model.grid.size
    if cfg.engine == "empirical" and cfg.ensemble is not None \
            and isinstance(model, SpectralModel):
        absc = spectral_abscissa(model, float(grid[-1]))
        if cfg.ensemble.horizon * abs(absc) < 5.0:
            print("warning: horizon may be too short for mixing near the top of "
                  "the grid", file=sys.stderr)
    absc_lo = spectral_abscissa(model, float(grid[0]))
    absc_hi = spectral_abscissa(model, float(grid[-1]))
    print(f"config OK: {kind} model with {modes} modes, {len(cfg.quantities)} "
          f"quantities, p* = {p_star!r}, grid of {grid.size} points in "
          f"[{float(grid[0])!r}, {float(grid[-1])!r}], spectral abscissa "
          f"{absc_lo:.6g} -> {absc_hi:.6g} across the sweep")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="warnlab",
        description="Covariance scaling diagnostics for stochastic linear systems "
                    "near bifurcation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = [
        ("analytic", cmd_analytic, "closed-form covariance sweep"),
        ("simulate", cmd_simulate, "Monte Carlo covariance sweep"),
        ("weyl", cmd_weyl, "Weyl-vector pairing probe"),
        ("validate", cmd_validate, "check a config without running a sweep"),
    ]
    for name, func, help_text in specs:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to a JSON experiment config")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                       help="worker threads for sweep points (default: all cores)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the ensemble master seed")
        p.add_argument("--format", choices=["csv", "json", "both"], default=None,
                       help="output formats (overrides config)")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    _setup_logging()
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
