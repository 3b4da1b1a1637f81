"""Effect of the rho continuation step on Newton iterations and warm-start jumps per stage.

    python scripts/rho_step_study.py --steps 0.2 0.1
"""
import argparse
import dataclasses

from _common import print_json, stage_summary, timed_pipeline
from liftcon.config import RunConfig


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=float, nargs="+", default=[0.2, 0.1])
    ap.add_argument("--radius", type=float, default=12.0)
    args = ap.parse_args()
    for step in args.steps:
        cfg = RunConfig()
        cfg.maneuver.params["loop_radius"] = args.radius
        cfg.schedule = dataclasses.replace(cfg.schedule, rho_step=step)
        rep, secs = timed_pipeline(cfg)
        print_json(
            {
                "rho_step": step,
                "seconds": secs,
                "total_iterations": sum(r.iterations for s in rep.stages for r in s.solves),
                "max_iterations": max(s.max_iterations for s in rep.stages),
                "position_error": rep.position_error,
                "warm_start_jumps": [round((b.trajectory - a.trajectory).sup_norm(), 6) for a, b in zip(rep.stages, rep.stages[1:])],
                "stages": stage_summary(rep),
            }
        )


if __name__ == "__main__":
    main()
