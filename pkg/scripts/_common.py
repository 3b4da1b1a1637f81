"""Helpers shared by the experiment scripts."""
from __future__ import annotations

import json
import time
import warnings

import numpy as np

from liftcon.config import RunConfig
from liftcon.strategy import lift_and_constrain, run_lift


def lift_violation(lift, cfg: RunConfig) -> dict:
    """Range of the lift's inputs and the fraction of nodes outside the box."""
    lo, hi = np.array(cfg.make_bounds().u1), np.array(cfg.make_bounds().u2)
    u = lift.inputs
    out = {}
    for j, (name, box) in enumerate([("u1", lo), ("u2", hi)]):
        out[name] = {
            "min": float(u[:, j].min()),
            "max": float(u[:, j].max()),
            "outside": float(np.mean((u[:, j] < box[0]) | (u[:, j] > box[1]))),
        }
    return out


def timed_pipeline(cfg: RunConfig):
    grid = cfg.make_grid()
    c = cfg.make_curve(grid)
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lift = run_lift(c, cfg.params(), grid, cfg.make_schedule(), cfg.make_strategy_config())
        rep = lift_and_constrain(c, cfg.params(), grid, cfg.make_bounds(), cfg.make_schedule(), cfg.make_strategy_config(), lift=lift)
    return rep, time.perf_counter() - t0


def stage_summary(rep) -> list:
    return [
        {"stage": s.name, "value": round(s.value, 6), "solves": [r.iterations for r in s.solves], "converged": s.all_converged, "delta_c": s.delta_c}
        for s in rep.stages
    ]


def print_json(obj) -> None:
    print(json.dumps(obj, indent=2, default=float), flush=True)
