#!/usr/bin/env python3
"""Run one or more example configurations end to end and summarize them.

    python3 scripts/run_example.py configs/smooth_fc_mixed.ini configs/three_inclusions_fc_mixed.ini
    python3 scripts/run_example.py --all

Output of each run lands in its config's ``output_dir`` (the same files the
``elastinv invert`` command writes), plus a table on stdout.
"""

import argparse
import json
import sys
import time
from pathlib import Path

from elastinv.cli import main as cli_main
from elastinv.config import load_config

ROOT = Path(__file__).resolve().parents[1]


def run(path: Path, overrides: list[str]) -> dict:
    cfg = load_config(path).with_overrides(dict(kv.split("=", 1) for kv in overrides))
    t0 = time.perf_counter()
    code = cli_main(["invert", "--config", str(path), *(a for kv in overrides for a in ("--override", kv))])
    summary = json.loads((Path(cfg.output_dir) / "summary.json").read_text())
    summary.update(config=path.name, exit_code=code, wall_s=time.perf_counter() - t0)
    return summary


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("configs", nargs="*", type=Path)
    p.add_argument("--all", action="store_true", help="every configs/*.ini except quick.ini")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    args = p.parse_args(argv)
    configs = sorted(c for c in (ROOT / "configs").glob("*.ini") if c.name != "quick.ini") if args.all else args.configs
    if not configs:
        p.error("give config files or --all")
    rows = [run(c, args.override) for c in configs]
    print(f"\n{'config':<32}{'reason':<13}{'k':>6}{'mu err':>9}{'lam err':>9}{'time/s':>9}")
    for r in rows:
        print(f"{r['config']:<32}{r['reason']:<13}{r['iterations']:>6}{r['mu_rel_error']:>9.3f}"
              f"{r['lambda_rel_error']:>9.3f}{r['wall_s']:>9.1f}")
    return 0 if all(r["exit_code"] == 0 for r in rows) else 1


if __name__ == "__main__":
    sys.exit(main())
