"""Baseline / +BA / +PO / +BA+PO comparison on an existing desk run.

    python3 scripts/ablation.py --out runs/desk --steps 600 --po 0.2 --po 0.4

Needs the corpus, train-vq and train-extractors stages of the run directory.
The ordering check is soft: a reversal is reported as a warning.
"""

import argparse
import json
import logging
from dataclasses import replace
from pathlib import Path

from bipo.pipeline import PipelineConfig, Workspace
from bipo.pipeline.stages import run_ablate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/desk")
    ap.add_argument("--steps", type=int, help="transformer steps per variant")
    ap.add_argument("--repetitions", type=int)
    ap.add_argument("--po", type=float, action="append", help="occlusion probability (repeatable)")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s: %(message)s")
    saved = Path(args.out) / "config.json"
    cfg = PipelineConfig.load(saved) if saved.exists() else PipelineConfig(out_dir=args.out)
    if args.po:
        cfg.ablation = replace(cfg.ablation, po_values=tuple(args.po))
    doc = run_ablate(Workspace(cfg, args.out), args.steps, args.repetitions)
    for r in doc["rows"]:
        print(f"{r['row']:<16} FID {r['fid']:.4f} +- {r['fid_ci95']:.4f}  R@3 {r['r_precision_top3']:.3f}")
    check = doc["check"]
    print(("OK  " if check["holds"] else "WARN ") + check["name"])


if __name__ == "__main__":
    main()
