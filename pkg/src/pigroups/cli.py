"""Command-line entry point.

Commands: ``pi-basis``, ``analyze``, ``ridge-check``, ``fd-convergence``,
``moody-data``, ``predict``. Options merge as defaults < config file <
flags. Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 subprocess failure. Every analysis writes a manifest next to its
results; with a fixed seed and config the result JSON is byte-identical
across runs and worker counts.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, jsonio
from .algorithms import (
    AlgorithmConfig,
    CountingExperiment,
    algorithm1,
    algorithm2,
    full_space_C,
    predict_dependent,
)
from .dimension import (
    QuantitySystem,
    build_dimension_matrix,
    nullspace_basis,
    pi_basis,
    solve_output_exponents,
)
from .errors import (
    ExperimentTimeout,
    ExponentOverflow,
    ParseFailure,
    SubprocessFailure,
    ToolkitError,
    UnitSyntaxError,
    UnknownBaseUnit,
    UnknownRegime,
)
from .external import ExternalExperiment
from .pipeflow import (
    RE_CRITICAL,
    PipeFlowExperiment,
    moody_grid,
    pipe_quantity_system,
    regime_box,
    regime_names,
)
from .quadrature import RegimeBox
from .subspace import result_to_csv, rotation_angle
from .surrogate import ResponseSurface

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_SUBPROCESS = 4

_CONFIG_ERRORS = (UnknownBaseUnit, UnitSyntaxError, ExponentOverflow, UnknownRegime)
_SUBPROCESS_ERRORS = (SubprocessFailure, ParseFailure, ExperimentTimeout)

_DEFAULTS = {
    "algorithm": 2,
    "h": 1e-6,
    "degree": 2,
    "quad": "tensor:11",
    "seed": 0,
    "design": 1000,
    "holdout": 200,
    "re_crit": None,
    "pressure_formula": "fanning",
    "timeout": None,
    "batch_size": 20000,
    "workers": 1,
}


def entry() -> None:
    sys.exit(main())


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG
    try:
        return args.func(args)
    except _SUBPROCESS_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SUBPROCESS
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pigroups",
        description="Unique, relevance-ranked dimensionless groups from computer experiments",
    )
    parser.add_argument("--version", action="version", version=f"pigroups {__version__}")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("pi-basis", help="dimension matrix, output exponents and null-space basis")
    p.add_argument("system", help="quantity-system JSON file")
    p.add_argument("--json", dest="json_out", help="also write the result as JSON")
    p.set_defaults(func=_cmd_pi_basis)

    p = sub.add_parser("analyze", help="run one of the two group-estimation algorithms")
    _common_experiment_args(p)
    p.add_argument("--algorithm", type=int, choices=(1, 2))
    p.add_argument("--h", type=float, help="finite-difference step in the group coordinates")
    p.add_argument("--degree", type=int, help="surrogate polynomial degree (algorithm 1)")
    p.add_argument("--design", type=int, help="design size for algorithm 1")
    p.add_argument("--holdout", type=int, help="fresh points for the hold-out error report")
    p.add_argument("--trace", action="store_true", help="write an evaluation-trace CSV")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("ridge-check", help="full-space eigenvalue decay against the step size")
    _common_experiment_args(p)
    p.add_argument("--h-sweep", default="1e-2,1e-3,1e-4,1e-5",
                   help="comma-separated step sizes")
    p.add_argument("--points-per-dim", type=int, default=11)
    p.set_defaults(func=_cmd_ridge_check)

    p = sub.add_parser("fd-convergence", help="group-exponent error against the step size")
    _common_experiment_args(p)
    p.add_argument("--h-sweep", default="1e-2,1e-3,1e-4,1e-5,1e-6,1e-7",
                   help="comma-separated step sizes; the smallest is the reference")
    p.set_defaults(func=_cmd_fd_convergence)

    p = sub.add_parser("moody-data", help="friction-factor grid for external plotting")
    p.add_argument("--out", default="moody.csv")
    p.add_argument("--re-crit", type=float, default=RE_CRITICAL)
    p.set_defaults(func=_cmd_moody_data)

    p = sub.add_parser("predict", help="evaluate a saved semi-empirical model at a point")
    p.add_argument("--surface", required=True, help="surface JSON written by analyze")
    p.add_argument("--point", required=True,
                   help="comma-separated values in independent-variable order")
    p.set_defaults(func=_cmd_predict)
    return parser


def _common_experiment_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--experiment", default="pipe",
                   help="built-in experiment name (built-ins: pipe)")
    p.add_argument("--experiment-cmd",
                   help="external experiment command speaking CSV on stdin/stdout")
    p.add_argument("--system", help="quantity-system JSON (defaults to the built-in's)")
    p.add_argument("--regime", help=f"built-in pipe regime: {', '.join(regime_names())}")
    p.add_argument("--box", help="bounds JSON file")
    p.add_argument("--quad", help="integration rule, tensor:<p> or mc:<N>")
    p.add_argument("--seed", type=int)
    p.add_argument("--re-crit", dest="re_crit",
                   help="pipe branch switch Reynolds number, or 'none' for Colebrook everywhere")
    p.add_argument("--pressure-formula", choices=("fanning", "darcy"),
                   help="pipe pressure-gradient formula (default fanning)")
    p.add_argument("--timeout", type=float, help="per-batch timeout for external experiments")
    p.add_argument("--batch-size", type=int, help="rows per external batch")
    p.add_argument("--workers", type=int, help="concurrent external processes")
    p.add_argument("--config", help="JSON file of option defaults")
    p.add_argument("--out-dir", default=".", help="directory for result files")


def _merge_config(args) -> dict:
    cfg = dict(_DEFAULTS)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(file_cfg)
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if isinstance(cfg["re_crit"], str):
        cfg["re_crit"] = None if cfg["re_crit"].lower() == "none" else float(cfg["re_crit"])
    if cfg.get("quad") is None:
        cfg["quad"] = _DEFAULTS["quad"]
    return cfg


def _load_system(args) -> QuantitySystem:
    if getattr(args, "system", None):
        return QuantitySystem.from_file(args.system)
    if args.experiment == "pipe":
        return pipe_quantity_system()
    raise ValueError("--system is required unless the experiment is a built-in")


def _load_box(args, system: QuantitySystem) -> RegimeBox:
    if getattr(args, "box", None):
        return RegimeBox.from_file(args.box, symbols=system.symbols)
    if getattr(args, "regime", None):
        return regime_box(args.regime)
    raise ValueError("either --box or --regime is required")


def _make_experiment(args, cfg, system: QuantitySystem):
    if getattr(args, "experiment_cmd", None):
        return ExternalExperiment(
            command=tuple(shlex.split(args.experiment_cmd)),
            symbols=system.symbols,
            timeout=cfg["timeout"],
            batch_size=cfg["batch_size"],
            n_workers=cfg["workers"],
        )
    if args.experiment == "pipe":
        return PipeFlowExperiment(
            re_crit=cfg["re_crit"], pressure_formula=cfg["pressure_formula"]
        )
    raise ValueError(f"unknown experiment {args.experiment!r}")


def _write_manifest(out_dir: Path, command: str, args, cfg: dict,
                    evaluations: int, started: float, **extra) -> None:
    doc = {
        "command": command,
        "config_paths": [p for p in (getattr(args, "config", None),
                                     getattr(args, "system", None),
                                     getattr(args, "box", None)) if p],
        "seed": cfg.get("seed"),
        "output_dir": str(out_dir),
        "toolkit_version": __version__,
        "duration_seconds": time.monotonic() - started,
        "evaluations": evaluations,
        **extra,
    }
    jsonio.dump(doc, out_dir / "manifest.json")


def _cmd_pi_basis(args) -> int:
    try:
        system = QuantitySystem.from_file(args.system)
        D = build_dimension_matrix(system)
        v_q = system.dependent.dims.as_array()
        w_min = solve_output_exponents(D, v_q)
        W = nullspace_basis(D)
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    print(f"base units: {', '.join(system.base_units)}")
    print(f"independents ({system.m}): {', '.join(system.symbols)}")
    print("dimension matrix D:")
    for unit, row in zip(system.base_units, D):
        print(f"  {unit:>6s}  " + "  ".join(f"{v:6.0f}" for v in row))
    print(f"rank(D) = {system.k}")
    print("output exponents w (minimum norm): "
          + " ".join(f"{v:.3f}" for v in w_min))
    if system.pinned_w is not None:
        print("output exponents w (pinned):       "
              + " ".join(f"{v:.3f}" for v in system.pinned_w))
    print(f"null-space basis W ({system.m} x {W.shape[1]}):")
    for sym, row in zip(system.symbols, W):
        print(f"  {sym:>6s}  " + "  ".join(f"{v:7.3f}" for v in row))
    if args.json_out:
        jsonio.dump({
            "D": D, "rank": system.k, "w_min_norm": w_min,
            "pinned_w": list(system.pinned_w) if system.pinned_w else None,
            "W": W,
        }, args.json_out)
    return EXIT_OK


def _cmd_analyze(args) -> int:
    started = time.monotonic()
    cfg = _merge_config(args)
    for key in ("algorithm", "h", "degree", "design", "holdout"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    system = _load_system(args)
    box = _load_box(args, system)
    basis = pi_basis(system)
    experiment = CountingExperiment(_make_experiment(args, cfg, system))
    config = AlgorithmConfig(
        h=cfg["h"], degree=cfg["degree"], quad=cfg["quad"],
        seed=cfg["seed"], design=cfg["design"], holdout=cfg["holdout"],
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_cb = _make_trace(out_dir, system, basis.n) if args.trace else None

    surface = None
    if cfg["algorithm"] == 1:
        result, surface = algorithm1(
            experiment, system, basis, box, config,
            return_surface=True, trace=trace_cb,
        )
    else:
        result = algorithm2(experiment, system, basis, box, config, trace=trace_cb)

    (out_dir / "result.json").write_text(result.to_json())
    result_to_csv(result, system.symbols, out_dir / "exponents.csv")
    if surface is not None:
        jsonio.dump(
            {"surface": surface.to_dict(), "w": basis.w, "W": basis.W},
            out_dir / "surface.json",
        )
    holdout = result.metadata.get("holdout_evaluations", 0)
    _write_manifest(
        out_dir, "analyze", args, cfg,
        evaluations=result.metadata["evaluations"], started=started,
        holdout_evaluations=holdout, total_experiment_calls=experiment.count,
    )
    _print_result(system, result)
    return EXIT_OK


def _print_result(system, result) -> None:
    n = result.Z.shape[1]
    header = "variable  " + "  ".join(f"{f'z_{j + 1}':>8s}" for j in range(n))
    print(header)
    for sym, row in zip(system.symbols, result.Z):
        print(f"{sym:<8s}  " + "  ".join(f"{v:8.3f}" for v in row))
    print("eigenvalue  " + "  ".join(f"{v:.2e}" for v in result.eigenvalues))
    if n == 2:
        print(f"rotation angle: {rotation_angle(result.U):.1f} degrees")
    if result.metadata.get("holdout_rmse") is not None:
        print(f"hold-out rmse: {result.metadata['holdout_rmse']:.3e}")
    if not result.metadata.get("unique", True):
        print(f"warning: {result.metadata['flag']}")


def _make_trace(out_dir: Path, system, n: int):
    path = out_dir / "trace.csv"

    def write(points, pi, grads):
        header = ",".join(list(system.symbols) + ["pi"] + [f"g_{j + 1}" for j in range(n)])
        data = np.column_stack([points, pi, grads])
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.17g")

    return write


def _parse_sweep(text: str) -> list[float]:
    hs = [float(tok) for tok in text.split(",") if tok.strip()]
    if len(hs) < 2:
        raise ValueError("the step-size sweep needs at least two values")
    return sorted(hs, reverse=True)


def fit_loglog_slope(hs, values) -> float:
    """Least-squares slope of log|value| against log h."""
    x = np.log(np.asarray(hs, dtype=float))
    y = np.log(np.maximum(np.abs(np.asarray(values, dtype=float)), 1e-300))
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[0])


def _cmd_ridge_check(args) -> int:
    started = time.monotonic()
    cfg = _merge_config(args)
    system = _load_system(args)
    box = _load_box(args, system)
    basis = pi_basis(system)
    experiment = CountingExperiment(_make_experiment(args, cfg, system))
    hs = _parse_sweep(args.h_sweep)
    m = system.m
    rows = []
    for h in hs:
        res = full_space_C(experiment, box, args.points_per_dim, h)
        rows.append([h] + list(res.eigenvalues))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    header = ",".join(["h"] + [f"lambda_{i + 1}" for i in range(m)])
    np.savetxt(out_dir / "ridge.csv", np.array(rows), delimiter=",",
               header=header, comments="", fmt="%.17g")
    table = np.array(rows)
    # eigenvalues below eps * lambda_1 are indistinguishable from zero;
    # floor them there so fitted slopes describe the resolvable decay
    floor = np.finfo(float).eps * table[:, 1]
    n_keep = basis.n + 1
    slopes = {}
    for idx in range(n_keep, m):
        vals = np.maximum(table[:, idx + 1], floor)
        slopes[f"lambda_{idx + 1}"] = fit_loglog_slope(table[:, 0], vals)
    for name, slope in slopes.items():
        print(f"decay slope of {name}: {slope:.3f}")
    _write_manifest(out_dir, "ridge-check", args, cfg,
                    evaluations=experiment.count, started=started,
                    decay_slopes=slopes)
    return EXIT_OK


def _cmd_fd_convergence(args) -> int:
    started = time.monotonic()
    cfg = _merge_config(args)
    system = _load_system(args)
    box = _load_box(args, system)
    basis = pi_basis(system)
    experiment = CountingExperiment(_make_experiment(args, cfg, system))
    hs = _parse_sweep(args.h_sweep)
    results = {}
    for h in hs:
        config = AlgorithmConfig(h=h, quad=cfg["quad"], seed=cfg["seed"])
        results[h] = algorithm2(experiment, system, basis, box, config)
    reference = results[hs[-1]].Z
    rows = []
    for h in hs[:-1]:
        rows.append([h, signed_column_distance(results[h].Z, reference)])
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    np.savetxt(out_dir / "fdconv.csv", np.array(rows), delimiter=",",
               header="h,max_abs_z_error", comments="", fmt="%.17g")
    table = np.array(rows)
    slope = fit_loglog_slope(table[:, 0], table[:, 1])
    print(f"exponent-error decay slope: {slope:.3f} "
          f"(reference h = {hs[-1]:.1e})")
    _write_manifest(out_dir, "fd-convergence", args, cfg,
                    evaluations=experiment.count, started=started,
                    error_slope=slope)
    return EXIT_OK


def signed_column_distance(Z: np.ndarray, reference: np.ndarray) -> float:
    """Max-abs column difference after aligning each column's sign."""
    worst = 0.0
    for j in range(Z.shape[1]):
        col, ref = Z[:, j], reference[:, j]
        if np.dot(col, ref) < 0:
            col = -col
        worst = max(worst, float(np.max(np.abs(col - ref))))
    return worst


def _cmd_moody_data(args) -> int:
    grid = moody_grid(re_crit=args.re_crit)
    np.savetxt(args.out, grid, delimiter=",",
               header="log10_re,log10_rel_rough,lambda", comments="", fmt="%.17g")
    print(f"wrote {grid.shape[0]} rows to {args.out}")
    return EXIT_OK


def _cmd_predict(args) -> int:
    with open(args.surface) as fh:
        doc = json.load(fh)
    surface = ResponseSurface.from_dict(doc["surface"])
    w = np.asarray(doc["w"], dtype=float)
    W = np.asarray(doc["W"], dtype=float)
    point = np.array([float(tok) for tok in args.point.split(",")])
    if point.shape[0] != W.shape[0]:
        raise ValueError(f"point has {point.shape[0]} entries, expected {W.shape[0]}")
    value = predict_dependent(surface, w, W, point)
    print("%.17g" % value)
    return EXIT_OK
