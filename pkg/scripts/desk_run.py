"""Train every stage at desk scale, evaluate three modes and print the headline checks.

    python3 scripts/desk_run.py --out runs/desk

Finished stages with an unchanged config are reused; pass --fresh to retrain.
"""

import argparse
import json
import logging

from bipo.pipeline import PipelineConfig, desk_run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="pipeline config JSON (default: the desk config)")
    ap.add_argument("--out", default="runs/desk")
    ap.add_argument("--fresh", action="store_true", help="ignore finished stages")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s: %(message)s")
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    summary = desk_run(cfg, args.out, reuse=not args.fresh)
    print(json.dumps(summary.to_dict(), indent=2, sort_keys=True))
    for name, check in summary.checks.items():
        print(f"{'PASS' if check['holds'] else 'FAIL'}  {name}")
    raise SystemExit(0 if summary.passed else 1)


if __name__ == "__main__":
    main()
