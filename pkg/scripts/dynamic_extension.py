"""Dynamic extension experiment: input-rate bounds, and the unbounded-rate comparison.

    python scripts/dynamic_extension.py --u1-rate 50 --u2-rate 20
"""
import argparse
import warnings

import numpy as np

from _common import print_json, stage_summary
from liftcon.config import RunConfig
from liftcon.strategy import lift_and_constrain, run_lift, run_with_dynamic_extension


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--u1-rate", type=float, default=50.0, help="m/s^3")
    ap.add_argument("--u2-rate", type=float, default=20.0, help="rad/s^3")
    args = ap.parse_args()
    cfg = RunConfig()
    grid = cfg.make_grid()
    c = cfg.make_curve(grid)
    sched, scfg, bounds = cfg.make_schedule(), cfg.make_strategy_config(), cfg.make_bounds()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lift = run_lift(c, cfg.params(), grid, sched, scfg)
        base = lift_and_constrain(c, cfg.params(), grid, bounds, sched, scfg, lift=lift)
        lift_rate = np.max(np.abs(np.diff(lift[0].trajectory.inputs, axis=0)) / grid.h, axis=0)
        for rates in (((-args.u1_rate, args.u1_rate), (-args.u2_rate, args.u2_rate)), None):
            rep = run_with_dynamic_extension(c, cfg.params(), grid, bounds, rates, sched, scfg, lift=lift)
            w = rep.final.states[:, 6:]
            print_json(
                {
                    "rate_bounds": rates,
                    "lift_max_rate": lift_rate.tolist(),
                    "max_rate": (np.max(np.abs(np.diff(w, axis=0)) / grid.h, axis=0)).tolist(),
                    "margins": rep.to_dict()["margins_by_constraint"],
                    "position_error": rep.position_error,
                    "velocity_error": rep.velocity_error,
                    "input_gap_vs_unextended": np.max(np.abs(w - base.final.inputs), axis=0).tolist(),
                    "stages": stage_summary(rep),
                }
            )


if __name__ == "__main__":
    main()
