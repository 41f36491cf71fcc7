#!/usr/bin/env python3
"""Stage-by-stage mutual information trajectories for the turbo loop."""

import argparse
import pathlib

from turbokal.runner import ExperimentConfig, run_experiment


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/exit_chart")
    ap.add_argument("--snr", type=float, default=14.0)
    ap.add_argument("--estimator", default="perfect")
    ap.add_argument("--packets", type=int, default=100)
    ap.add_argument("--seed", type=int, default=1234)
    args = ap.parse_args()

    cfg = ExperimentConfig(
        kind="exit-chart",
        estimators=(args.estimator,),
        snr_db=(args.snr,),
        n_packets=args.packets,
        seed=args.seed,
    )
    out = pathlib.Path(args.out)
    records = run_experiment(cfg, out)
    for series in ("mi_in", "mi_out"):
        traj = [r.y for r in records if r.series == series]
        print(f"{args.estimator:9s} {series:6s}  " + " ".join(f"{v:.4f}" for v in traj))
    print(f"wrote {out / 'results.csv'}")


if __name__ == "__main__":
    main()
