"""``dualphi`` command line.

Each subcommand runs one experiment kind.  ``--config`` takes either a TOML
file (grammar in the README) or the ``manifest.json`` of an earlier run,
which reruns it exactly.  Flags override the corresponding config keys.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import KINDS, ConfigError, ExperimentConfig
from .experiments import ExperimentError, config_from_manifest, read_csv, run


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dualphi", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")
    sub = p.add_subparsers(dest="kind", required=True, metavar="command")
    for kind in KINDS:
        s = sub.add_parser(kind, help=f"run the {kind} experiment")
        s.add_argument("--config", type=Path, help="TOML config or manifest.json")
        s.add_argument("--seed", type=int, help="base seed (replication i uses seed + i)")
        s.add_argument("--out", type=str, help="output directory")
        s.add_argument("--reps", type=int, help="replications per design point")
        s.add_argument("--level", type=float, help="test level in (0, 1)")
    return p


def load_config(args) -> ExperimentConfig:
    raw = {}
    if args.config is not None:
        if args.config.suffix == ".json":
            raw = config_from_manifest(args.config).to_dict()
            if raw["kind"] != args.kind:
                raise ConfigError(f"manifest is for {raw['kind']!r}, not {args.kind!r}")
        else:
            raw = ExperimentConfig.load(args.config, args.kind).to_dict()
    overrides = {"seed": args.seed, "out": args.out, "replications": args.reps, "level": args.level}
    raw.update({k: v for k, v in overrides.items() if v is not None})
    raw.setdefault("out", f"out/{args.kind}")
    return ExperimentConfig.from_dict(raw, args.kind)


def _report(out: Path, kind: str) -> None:
    main_csv = {
        "estimate": "estimate.csv",
        "power-plan": "power_plan.csv",
        "power-curve": "power_curve.csv",
        "glr-ecdf": "glr_ecdf_summary.csv",
        "dualchi2-ecdf": "dualchi2_ecdf_summary.csv",
        "confreg": "confreg_summary.csv",
        "test-simple": "test_simple_summary.csv",
        "test-composite": "test_composite_summary.csv",
        "mixture-test": "mixture_test_summary.csv",
    }[kind]
    rows = read_csv(out / main_csv)
    if kind == "estimate" and len(rows) > 20:
        rows = rows[:20]
    if kind in ("test-simple", "test-composite", "mixture-test"):
        name = main_csv.replace("_summary", "")
        detail = read_csv(out / name)
        if len(detail) == 1:
            rows = detail
    if rows:
        keys = list(rows[0])
        print("\t".join(keys))
        for r in rows:
            print("\t".join(r[k] for k in keys))
    print(f"outputs written to {out}", file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        cfg = load_config(args)
    except (ConfigError, ExperimentError, OSError) as exc:
        print(f"dualphi: invalid configuration: {exc}", file=sys.stderr)
        return 2
    try:
        out, _ = run(cfg)
    except (ExperimentError, OSError) as exc:
        print(f"dualphi: {exc}", file=sys.stderr)
        return 1
    _report(out, cfg.kind)
    return 0


if __name__ == "__main__":
    sys.exit(main())
