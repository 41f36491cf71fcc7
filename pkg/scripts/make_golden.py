#!/usr/bin/env python3
"""Regenerate the plotting frontend's golden CSV fixtures.

Small seeded runs of each experiment kind, written to frontend/golden/.
The frontend's rendering tests pin hashes of figures built from these files,
so regenerating them invalidates those hashes on purpose.
"""

import pathlib
import shutil

from turbokal.runner import ExperimentConfig, run_experiment

ROOT = pathlib.Path(__file__).resolve().parents[1]
GOLDEN = ROOT / "frontend" / "golden"

RUNS = {
    "per.csv": ExperimentConfig(
        kind="per-sweep",
        estimators=("perfect", "initial", "proposed", "song"),
        info_bytes=12,
        n_sc=8,
        mod_order=4,
        n_itr=2,
        snr_db=(2.0, 4.0, 6.0, 8.0),
        n_packets=80,
        max_errors=80,
        seed=4001,
    ),
    "exit.csv": ExperimentConfig(
        kind="exit-chart",
        estimators=("perfect",),
        snr_db=(14.0,),
        n_packets=60,
        min_good_packets=20,
        seed=4002,
    ),
    "mse.csv": ExperimentConfig(
        kind="mse-openloop",
        snr_db=(14.0,),
        open_loop_nd=12,
        open_loop_sigma_s2=0.1,
        seed=4003,
    ),
    "corr.csv": ExperimentConfig(
        kind="corr-probe",
        estimators=("proposed",),
        snr_db=(8.0,),
        n_itr=3,
        n_packets=300,
        corr_target_packets=50,
        seed=60601,
    ),
}


def main() -> None:
    GOLDEN.mkdir(parents=True, exist_ok=True)
    for name, cfg in RUNS.items():
        out = ROOT / "out" / "golden" / name.removesuffix(".csv")
        run_experiment(cfg, out)
        shutil.copyfile(out / "results.csv", GOLDEN / name)
        print(f"wrote {GOLDEN / name}")


if __name__ == "__main__":
    main()
