"""Command line entry point ``dislo``.

Exit codes: 0 success, 1 failed verdict, 2 usage or configuration error,
3 missing profile file, 4 other numerical error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, DisloError, MissingProfileError
from .config import EXPERIMENTS, load_config
from .experiments import run_experiment

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_PROFILE, EXIT_ERROR = 0, 1, 2, 3, 4


def build_parser():
    p = argparse.ArgumentParser(prog="dislo", description="Nonlocal dislocation energy experiments.")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", type=Path, default=None, help="INI run configuration")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory (default: current)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides the config)")
    p.add_argument("--sweep-theta", action="store_true", help="relax: sweep the normal angle")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_artifacts(out, cfg, result):
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "experiment": result.name,
        "config": cfg.to_dict(),
        "passed": result.passed,
        "records": result.records,
    }
    (out / "results.json").write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    with (out / "table.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if result.header:
            w.writerow(result.header)
        w.writerows(result.rows)
    (out / "log.txt").write_text("".join(line + "\n" for line in result.lines))


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.experiment, args.seed)
    except FileNotFoundError as exc:
        print(f"dislo: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"dislo: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = run_experiment(cfg, sweep_theta=args.sweep_theta)
    except MissingProfileError as exc:
        print(f"dislo: {exc}", file=sys.stderr)
        return EXIT_PROFILE
    except ConfigurationError as exc:
        print(f"dislo: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DisloError as exc:
        print(f"dislo: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    write_artifacts(args.out, cfg, result)
    print(f"{result.name}: {'PASS' if result.passed else 'FAIL'}")
    return EXIT_OK if result.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
