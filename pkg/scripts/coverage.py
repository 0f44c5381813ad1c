"""Coverage of the boundary-safe mixture confidence region at weights 0 and 0.5."""

import argparse

import numpy as np

from dualphi.config import ExperimentConfig
from dualphi.experiments import run

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--seed", type=int, default=5000)
    p.add_argument("--out", default="results/confreg")
    args = p.parse_args()
    for t in (0.0, 0.5):
        # the grid holds the truth only: coverage needs just that point
        cfg = ExperimentConfig.from_dict(
            {"theta_true": [t], "grid": [t], "replications": args.reps, "seed": args.seed,
             "out": f"{args.out}/theta{t:g}"}, "confreg")
        _, summary = run(cfg)
        n, reps, cov = summary[0]
        print(f"theta_T={t:g}  n={n}  reps={reps}  coverage={cov:.3f}")
