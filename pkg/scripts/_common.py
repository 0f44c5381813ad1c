"""Shared argument handling for the reproduction scripts."""

import argparse
import logging

from dualphi.config import ExperimentConfig
from dualphi.experiments import run


def main(kind: str, description: str, **defaults):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=1000)
    p.add_argument("--out", default=f"results/{kind}")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    cfg = ExperimentConfig.from_dict(
        {**defaults, "replications": args.reps, "seed": args.seed, "out": args.out}, kind)
    out, summary = run(cfg)
    for row in summary:
        print(*row, sep="\t")
    print(f"render with: python3 {out}/plot.py")
