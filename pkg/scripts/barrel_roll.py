"""Full lift-and-constrain run on the default barrel roll, with a per-stage table.

    python scripts/barrel_roll.py --out runs/barrel_roll [--config cfg.json]
"""
import argparse
import json
from pathlib import Path

from liftcon.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, default=Path("runs/barrel_roll"))
    ap.add_argument("--config", type=Path)
    args = ap.parse_args()
    argv = ["run", "--out", str(args.out)] + (["--config", str(args.config)] if args.config else [])
    code = cli_main(argv)
    if code:
        raise SystemExit(code)
    rep = json.loads((args.out / "strategy_report.json").read_text())
    print(f"{'stage':6} {'value':>8} {'solves':>12} {'delta_c':>8} {'pos err':>8} {'vel err':>8} {'margin':>9}")
    for s in rep["stages"]:
        print(
            f"{s['name']:6} {s['value']:8.4g} {str(s['solve_iterations']):>12} {s['delta_c']:8.0e} "
            f"{s['position_error']:8.3f} {s['velocity_error']:8.3f} {s['min_margin']:9.2e}"
        )


if __name__ == "__main__":
    main()
