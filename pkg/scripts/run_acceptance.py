#!/usr/bin/env python3
"""Run every acceptance config into one ledger and print the outcome table.

Usage: python scripts/run_acceptance.py [--out DIR] [--threads N] [--strict]

The strict flag doubles grid resolution everywhere (slower, tighter); the
spectral config is always run on both profiles so the doubling drift is
visible in the printed table.
"""

import argparse
import sys
from pathlib import Path

from cknlab.cli import run_experiment

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs" / "acceptance"


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="acceptance_results")
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("--strict", action="store_true")
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ledger = out / "ledger.jsonl"

    base_profile = "strict" if args.strict else "fast"
    rows = []
    failed = 0
    for cfg in sorted(CONFIG_DIR.glob("*.json")):
        profiles = (base_profile,)
        if cfg.stem.startswith("c06"):
            profiles = ("fast", "strict")
        for profile in profiles:
            rec = run_experiment(
                str(cfg), ledger_path=str(ledger), threads=args.threads,
                tol_profile=profile,
            )
            bad = rec.outputs["violations"]
            failed += bool(bad)
            rows.append((cfg.stem, profile, rec.outputs_digest[:12], len(bad)))
            for v in bad:
                print(f"  VIOLATION {cfg.stem}: {v}", file=sys.stderr)

    width = max(len(r[0]) for r in rows)
    print(f"{'config':<{width}}  profile  outputs_digest  violations")
    for stem, profile, digest, nbad in rows:
        print(f"{stem:<{width}}  {profile:<7}  {digest}    {nbad}")
    print(f"\nledger: {ledger}")
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
