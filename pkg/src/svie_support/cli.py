"""Command-line entry point.

    svie-support simulate|flow|converge|support|print-config [--config PATH]
        [--seed N] [--workers N] [--out DIR] [--format csv|json]

Exit codes: 0 ok, 2 configuration error, 3 runtime failure or blow-up
budget exceeded.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .coeffs import custom_setup, get_coefficients, girsanov_setup, support_setup
from .config import ConfigError, RunConfig
from .engine import BlowUpError
from .experiments import run_convergence_study, run_support_diagnostic
from .io import (
    read_driver_csv,
    write_json,
    write_path_binary,
    write_path_csv,
    write_rows_csv,
)
from .paths import DriverPath, GridPath
from .stats import MCEstimate
from .timegrid import GridError, make_dyadic_sequence
from .volterra_det import LatticeTooLarge, driver_lattice, flow_map
from .volterra_sde import sample_brownian, solve_svie

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class RuntimeBudgetError(RuntimeError):
    pass


def _report_config(cfg: RunConfig) -> dict:
    d = cfg.to_dict()
    d.pop("out")  # keeps reports byte-identical across output directories
    return d


def _build(cfg: RunConfig):
    c = get_coefficients(cfg.coefficients.name, **cfg.coefficients.params)
    g = cfg.grid
    pseq = make_dyadic_sequence(g.r, g.T, g.levels, g.base_intervals, g.oversampling)
    xhat = GridPath.constant(pseq.grid, cfg.xhat)
    return c, pseq, xhat


def _drivers(cfg: RunConfig, grid, d: int) -> list[DriverPath]:
    ds = cfg.drivers
    if ds.kind == "none":
        return []
    if ds.kind == "linear":
        return [DriverPath.linear(grid, ds.slope)]
    if ds.kind == "file":
        try:
            return [read_driver_csv(ds.path, grid)]
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read driver file: {exc}") from None
    try:
        out = driver_lattice(grid, ds.coarse_knots, ds.slope_levels, d, ds.cap)
    except (LatticeTooLarge, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if not out:
        raise ConfigError("driver lattice is empty")
    return out


def _setup(cfg: RunConfig, c, grid):
    kind = cfg.setup.kind
    if kind == "support":
        return support_setup(c)
    h = _drivers(cfg, grid, c.d)[0] if cfg.drivers.kind in ("linear", "file") else None
    if kind == "girsanov":
        return girsanov_setup(c, h)
    try:
        return custom_setup(c, cfg.setup.weights, h)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _check_budget(cfg: RunConfig, censored: int, total: int):
    if total and censored / total > cfg.max_censored_fraction:
        raise RuntimeBudgetError(
            f"{censored} of {total} paths blew up, above the budget {cfg.max_censored_fraction}"
        )


def _emit(cfg: RunConfig, out: Path, stem: str, report: dict, rows: list[dict], long_rows=None):
    if cfg.format == "json":
        write_json(out / f"{stem}.json", report)
    else:
        write_rows_csv(out / f"{stem}.csv", rows)
        if long_rows is not None:
            write_rows_csv(out / f"{stem}_long.csv", long_rows)
    (out / "config.yaml").write_text(RunConfig.from_dict(_report_config(cfg)).to_yaml())


def cmd_simulate(cfg: RunConfig) -> int:
    cfg.validate("simulate")
    c, pseq, xhat = _build(cfg)
    W = sample_brownian(pseq.grid, c.d, cfg.seed, cfg.paths)
    X = solve_svie(c, xhat, W, cfg.blowup_threshold)
    ok = X.is_finite()
    censored = int((~ok).sum())
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.dump_paths:
        write_path_binary(out / "paths.bin", X)
    good = X.values[ok]
    rows = []
    for k in range(c.m):
        col = good[:, -1, k]
        est = MCEstimate.from_samples(col, censored) if col.size else None
        rows.append({
            "component": k + 1,
            "mean_T": est.mean if est else float("nan"),
            "std_error_T": est.std_error if est else float("nan"),
            "var_T": float(col.var(ddof=1)) if col.size > 1 else float("nan"),
            "max_abs": float(np.abs(good[..., k]).max()) if col.size else float("nan"),
        })
    report = {
        "command": "simulate",
        "config": _report_config(cfg),
        "paths": cfg.paths,
        "censored": censored,
        "censored_ids": [int(i) for i in np.flatnonzero(~ok)],
        "summary": rows,
    }
    _emit(cfg, out, "simulate", report, rows)
    _check_budget(cfg, censored, cfg.paths)
    return EXIT_OK


def cmd_flow(cfg: RunConfig) -> int:
    cfg.validate("flow")
    c, pseq, xhat = _build(cfg)
    drivers = _drivers(cfg, pseq.grid, c.d)
    res = flow_map(c, xhat, drivers, cfg.p)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, x in enumerate(res.paths):
        write_path_csv(out / f"x_h_{i:04d}.csv", x)
    rows = [{"driver": i, **{f"x_{k + 1}_T": float(x.values[-1, k]) for k in range(c.m)}}
            for i, x in enumerate(res.paths)]
    report = {"command": "flow", "config": _report_config(cfg), "flow": res.to_dict(), "terminal": rows}
    _emit(cfg, out, "flow", report, rows)
    return EXIT_OK


def cmd_converge(cfg: RunConfig) -> int:
    cfg.validate("converge")
    c, pseq, xhat = _build(cfg)
    g = _setup(cfg, c, pseq.grid)
    rep = run_convergence_study(g, xhat, pseq, cfg.alpha, cfg.paths, cfg.seed, cfg.chunk_size, cfg.workers)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {"command": "converge", "config": _report_config(cfg), "report": rep.to_dict(),
              "trend_to_zero": rep.trend_to_zero()}
    _emit(cfg, out, "converge", report, rep.rows(), rep.long_rows())
    _check_budget(cfg, rep.censored, cfg.paths)
    return EXIT_OK


def cmd_support(cfg: RunConfig) -> int:
    cfg.validate("support")
    c, pseq, xhat = _build(cfg)
    drivers = _drivers(cfg, pseq.grid, c.d) if cfg.reverse else []
    if cfg.reverse and not drivers:
        raise ConfigError("reverse diagnostic needs drivers")
    rep = run_support_diagnostic(c, xhat, pseq, cfg.alpha, cfg.eps, cfg.paths, drivers, cfg.seed,
                                 cfg.reverse, cfg.chunk_size, cfg.workers)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {"command": "support", "config": _report_config(cfg), "report": rep.to_dict()}
    _emit(cfg, out, "support", report, rep.rows())
    _check_budget(cfg, rep.censored, cfg.paths)
    return EXIT_OK


def cmd_print_config(cfg: RunConfig) -> int:
    sys.stdout.write(cfg.to_yaml())
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "flow": cmd_flow,
    "converge": cmd_converge,
    "support": cmd_support,
    "print-config": cmd_print_config,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="svie-support", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, help="YAML run configuration")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out", type=str)
    ap.add_argument("--format", choices=["csv", "json"])
    return ap


def load_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    for name in ("seed", "workers", "out", "format"):
        val = getattr(args, name)
        if val is not None:
            setattr(cfg, name, val)
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, GridError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BlowUpError, RuntimeBudgetError, FloatingPointError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
