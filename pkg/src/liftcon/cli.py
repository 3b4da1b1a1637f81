"""Command line front end: ``liftcon {lift,constrain,run,check}``.

Exit codes: 0 success, 1 solver or check failure, 2 annulus violation.
Failures also print one JSON object on stderr and leave ``error.json`` in the
output directory.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from .checks import run_checks
from .config import RunConfig
from .curves import Curve, read_curve_csv, write_curve_csv
from .errors import AnnulusViolation, LiftconError, StageFailure
from .lifting import LiftReport, QuasiStatic, lift0
from .strategy import StrategyReport, lift_and_constrain, run_lift, run_with_dynamic_extension

LIFT_CSV = "lift.csv"
LIFT_JSON = "lift_report.json"
LOG_NAME = "iterations.jsonl"


def write_plot_csv(xi: Curve, qs: QuasiStatic, path) -> None:
    """Plot-ready columns: t, y, z, phi, phi_qs, u1, u2."""
    t = xi.t
    data = np.column_stack([t, xi.states[:, 0], xi.states[:, 1], xi.states[:, 2], qs.phi(t), xi.inputs[:, 0], xi.inputs[:, 1]])
    with open(path, "w") as fh:
        fh.write("t,y,z,phi,phi_qs,u1,u2\n")
        for row in data:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _lift(cfg: RunConfig, out: Path, log):
    grid = cfg.make_grid()
    c = cfg.make_curve(grid)
    params = cfg.params()
    qs = QuasiStatic(c, params.g, grid)
    write_curve_csv(lift0(c, grid, params.g, qs), out / "lift0.csv")
    lift_rep, reps = run_lift(c, params, grid, cfg.make_schedule(), cfg.make_strategy_config(), log)
    for r in reps:
        r.csv_path = f"lift_eps={r.eps:.6g}.csv"
        write_curve_csv(r.trajectory, out / r.csv_path)
    write_curve_csv(lift_rep.trajectory, out / LIFT_CSV)
    summary = {**lift_rep.to_dict(), "steps": [r.to_dict() for r in reps]}
    (out / LIFT_JSON).write_text(json.dumps(summary, indent=2))
    write_plot_csv(lift_rep.trajectory, qs, out / "lift_plot.csv")
    return lift_rep, reps


def _load_lift(out: Path):
    path = out / LIFT_CSV
    if not path.exists() or not (out / LIFT_JSON).exists():
        raise FileNotFoundError(f"lift artifacts missing in {out}; run `liftcon lift` first")
    xi = read_curve_csv(path, 6)
    d = json.loads((out / LIFT_JSON).read_text())
    ep0 = math.inf if d["eps_p0"] is None else d["eps_p0"]
    rep = LiftReport(xi, d["eps"], ep0, d["theta_sup"], d["residual"], d["position_error"], d["velocity_error"], csv_path=LIFT_CSV)
    return rep, [rep]


def _constrain(cfg: RunConfig, out: Path, log, lift) -> StrategyReport:
    grid = cfg.make_grid()
    if lift[0].trajectory.grid.N != grid.N:
        raise ValueError("lift artifacts were produced on a different grid")
    c = cfg.make_curve(grid)
    params = cfg.params()
    args = dict(schedule=cfg.make_schedule(), cfg=cfg.make_strategy_config(), log=log, lift=lift)
    if cfg.dynamic_extension:
        rep = run_with_dynamic_extension(c, params, grid, cfg.make_bounds(), cfg.make_rate_bounds(), **args)
    else:
        rep = lift_and_constrain(c, params, grid, cfg.make_bounds(), **args)
    rep.write(out)
    write_plot_csv(rep.final, QuasiStatic(c, params.g, grid), out / "final_plot.csv")
    return rep


def _error_payload(exc: BaseException) -> dict:
    d = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, AnnulusViolation):
        d.update(t=exc.t, a_norm=exc.a_norm)
    if isinstance(exc, StageFailure):
        d.update(stage=exc.stage, param=exc.param, value=exc.value)
        cause = exc.cause
        if isinstance(cause, AnnulusViolation):
            d.update(t=cause.t, a_norm=cause.a_norm)
    return d


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="liftcon", description="Feasible PVTOL trajectories by lift-and-constrain continuation.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in [
        ("lift", "unconstrained lift with eps continuation"),
        ("constrain", "rho and eps_c continuation from saved lift artifacts"),
        ("run", "lift followed by constrain"),
        ("check", "run the self-verification suite"),
    ]:
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, help="JSON run configuration (defaults built in)")
        p.add_argument("--out", type=Path, help="output directory (overrides config out_dir)")
        p.add_argument("--seed", type=int, help="RNG seed for the check suite (overrides config seed)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
    except (OSError, ValueError, TypeError, KeyError) as e:
        print(json.dumps({"error": "ConfigError", "message": str(e)}), file=sys.stderr)
        return 1
    if args.seed is not None:
        cfg.seed = args.seed
    out = Path(args.out if args.out is not None else cfg.out_dir)

    if args.command == "check":
        results = run_checks(cfg)
        for r in results:
            print(r.row())
        failed = [r.name for r in results if not r.passed]
        if failed:
            print(f"failed: {', '.join(failed)}")
            return 1
        return 0

    out.mkdir(parents=True, exist_ok=True)
    (out / "error.json").unlink(missing_ok=True)
    cfg.save(out / "config.json")
    try:
        with open(out / LOG_NAME, "a" if args.command == "constrain" else "w") as log, warnings.catch_warnings():
            warnings.simplefilter("always")
            if args.command in ("lift", "run"):
                lift = _lift(cfg, out, log)
                print(lift[0].to_json())
            if args.command in ("constrain", "run"):
                lift = lift if args.command == "run" else _load_lift(out)
                rep = _constrain(cfg, out, log, lift)
                print(json.dumps({k: rep.to_dict()[k] for k in ("position_error", "velocity_error", "min_margin")}, indent=2))
    except (LiftconError, FileNotFoundError, ValueError) as e:
        payload = _error_payload(e)
        (out / "error.json").write_text(json.dumps(payload, indent=2))
        print(json.dumps(payload), file=sys.stderr)
        annulus = isinstance(e, AnnulusViolation) or isinstance(getattr(e, "cause", None), AnnulusViolation)
        return 2 if annulus else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
