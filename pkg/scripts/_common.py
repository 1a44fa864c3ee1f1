"""Shared argument handling for the experiment scripts."""

import argparse
import json
import logging
from pathlib import Path

from unrolled_jadce.config import load_config, parse_assignment


def parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--preset", default="desk")
    p.add_argument("--config")
    p.add_argument("--out", default="results")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, help="Adam steps per phase (both phases)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    return p


def setup(args, **forced):
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    overrides = dict(parse_assignment(a) for a in args.set)
    overrides.update(forced)
    overrides.update(seed=args.seed, out=args.out)
    if args.steps is not None:
        overrides.update(steps_phase_a=args.steps, steps_phase_b=args.steps)
    cfg = load_config(args.config, args.preset, overrides)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    print(path)
