"""Loop-radius scan: how hard the lift violates the input box versus solver effort.

    python scripts/radius_scan.py --radii 12 14 16 18 --out runs/radius_scan.jsonl
"""
import argparse
import json
from pathlib import Path

from _common import lift_violation, stage_summary, timed_pipeline
from liftcon.config import RunConfig


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--radii", type=float, nargs="+", default=[12, 13, 14, 16, 18])
    ap.add_argument("--lead", type=float, default=20.0)
    ap.add_argument("--blend", type=float, default=0.25)
    ap.add_argument("--out", type=Path, default=Path("runs/radius_scan.jsonl"))
    args = ap.parse_args()
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w") as fh:
        for r in args.radii:
            cfg = RunConfig()
            cfg.maneuver.params.update(loop_radius=r, lead_length=args.lead, blend_fraction=args.blend)
            try:
                rep, secs = timed_pipeline(cfg)
            except Exception as e:  # record the failure and move on
                row = {"radius": r, "error": f"{type(e).__name__}: {e}"}
            else:
                row = {
                    "radius": r,
                    "lift": lift_violation(rep.lift.trajectory, cfg),
                    "position_error": rep.position_error,
                    "velocity_error": rep.velocity_error,
                    "min_margin": rep.min_margin,
                    "max_iterations": max(s.max_iterations for s in rep.stages),
                    "stages": stage_summary(rep),
                    "seconds": secs,
                }
            fh.write(json.dumps(row) + "\n")
            fh.flush()
            brief = {k: row[k] for k in ("radius", "position_error", "max_iterations", "seconds", "error") if k in row}
            print(json.dumps(brief), flush=True)


if __name__ == "__main__":
    main()
