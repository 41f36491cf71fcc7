#!/usr/bin/env python3
"""Open-loop estimator MSE against the closed-form error laws.

Feeds the tracker synthetic unbiased soft decisions (no turbo loop) and
prints the measured convergence point next to eps_opt for each batch size.
The closed form is a large-batch law; at small N_d the measured curve sits
above it by roughly n_tx/N_d from Gram-matrix fluctuation, so the gap column
is expected to shrink as N_d grows.
"""

import argparse
import pathlib

import numpy as np

from turbokal.analysis import eps_opt, open_loop_mse
from turbokal.channel import snr_to_n0
from turbokal.runner import ExperimentConfig, run_experiment


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/mse_openloop")
    ap.add_argument("--snr", type=float, default=14.0)
    ap.add_argument("--sigma-s2", type=float, default=0.1)
    ap.add_argument("--nd", default="6,12,24,48")
    ap.add_argument("--reps", type=int, default=40)
    ap.add_argument("--seed", type=int, default=1234)
    args = ap.parse_args()

    n0 = snr_to_n0(args.snr)
    rho = np.ones((2, 2))
    print(f"snr {args.snr} dB, sigma_s2 {args.sigma_s2}")
    print(f"{'N_d':>4} {'measured':>10} {'closed':>10} {'gap':>7}")
    for n_d in (int(s) for s in args.nd.split(",")):
        res = open_loop_mse(n_d, args.sigma_s2, n0, rho,
                            np.random.default_rng(args.seed + n_d), n_reps=args.reps)
        ref = eps_opt(n_d, args.sigma_s2, n0, rho)
        print(f"{n_d:4d} {res.final_mse:10.5f} {ref:10.5f} {res.final_mse / ref - 1:+7.1%}")

    cfg = ExperimentConfig(
        kind="mse-openloop",
        snr_db=(args.snr,),
        open_loop_sigma_s2=args.sigma_s2,
        seed=args.seed,
    )
    out = pathlib.Path(args.out)
    run_experiment(cfg, out)
    print(f"wrote {out / 'results.csv'}")


if __name__ == "__main__":
    main()
