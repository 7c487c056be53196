"""The end-to-end desk run: every stage, three evaluation modes and the headline checks.

Stage wall-clock times are kept in ``desk_timings.json`` so an interrupted or
repeated run can reuse finished stages (same config hash) without losing the
training-time budget check.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from ..evaluation import EvalReport
from .config import STAGES, PipelineConfig, PipelineError
from . import stages as st

log = logging.getLogger(__name__)

TRAIN_BUDGET_SECONDS = 45 * 60
RANDOM_FID_RATIO = 0.25
MIN_R_PRECISION_TOP3 = 0.5
DESK_MODES = ("generation", "reconstruction", "random")

# metric -> True when larger is better; diversity has no preferred direction and is left out
ORDERED_METRICS = {"fid": False, "r_precision_top1": True, "r_precision_top2": True, "r_precision_top3": True,
                   "mm_dist": False}

_RUNNERS = {"corpus": st.run_corpus, "train-vq": st.run_train_vq, "train-t2m": st.run_train_t2m,
            "train-extractors": st.run_train_extractors}


@dataclass
class DeskSummary:
    config_hash: str
    stage_seconds: dict
    eval_seconds: dict
    metrics: dict                 # mode -> metric -> mean
    checks: dict                  # name -> {"holds": bool, ...}
    reused: list = field(default_factory=list)

    @property
    def train_seconds(self) -> float:
        return sum(self.stage_seconds.values())

    @property
    def passed(self) -> bool:
        return all(c["holds"] for c in self.checks.values())

    def to_dict(self) -> dict:
        return {"config_hash": self.config_hash, "stage_seconds": self.stage_seconds,
                "train_seconds": self.train_seconds, "eval_seconds": self.eval_seconds, "metrics": self.metrics,
                "checks": self.checks, "passed": self.passed, "reused": self.reused}


def desk_checks(reports: dict[str, EvalReport], train_seconds: float) -> dict:
    """The desk-run acceptance checks computed from the saved evaluation reports."""
    gen, rec, rnd = (reports[m] for m in DESK_MODES)
    checks = {
        "train_time": {"holds": train_seconds < TRAIN_BUDGET_SECONDS, "seconds": train_seconds,
                       "budget": TRAIN_BUDGET_SECONDS},
        "r_precision_top3": {"holds": gen.mean("r_precision_top3") >= MIN_R_PRECISION_TOP3,
                             "value": gen.mean("r_precision_top3"), "threshold": MIN_R_PRECISION_TOP3},
        "fid_vs_random": {"holds": gen.mean("fid") < RANDOM_FID_RATIO * rnd.mean("fid"),
                          "generation": gen.mean("fid"), "random": rnd.mean("fid"),
                          "ratio": gen.mean("fid") / rnd.mean("fid")},
    }
    worse = [name for name, larger in ORDERED_METRICS.items()
             if (rec.mean(name) < gen.mean(name) if larger else rec.mean(name) > gen.mean(name))]
    checks["reconstruction_vs_generation"] = {"holds": not worse, "worse": worse}
    return checks


def _load_timings(path: Path, config: PipelineConfig) -> dict:
    if not path.exists():
        return {}
    doc = json.loads(path.read_text())
    keep = {s: v for s, v in doc.items() if s in STAGES and v.get("hash") == config.stage_hash(s)}
    if doc.get("eval", {}).get("hash") == config.config_hash():
        keep["eval"] = doc["eval"]
    return keep


def desk_run(config: PipelineConfig | None = None, out_dir=None, reuse: bool = True) -> DeskSummary:
    """Run (or resume) every stage, evaluate the three modes and write ``desk_summary.json``."""
    config = config or PipelineConfig()
    ws = st.Workspace(config, out_dir)
    timings_path = ws.path("desk_timings.json")
    timings = _load_timings(timings_path, config) if reuse else {}
    reused = []
    for stage in STAGES:
        if reuse and stage in timings:
            try:
                ws.require(stage)
                reused.append(stage)
                continue
            except PipelineError:
                pass
        t0 = time.perf_counter()
        _RUNNERS[stage](ws)
        timings[stage] = {"hash": config.stage_hash(stage), "seconds": time.perf_counter() - t0}
        timings_path.write_text(json.dumps(timings, indent=2, sort_keys=True) + "\n")
        log.info("desk: %s done in %.1f s", stage, timings[stage]["seconds"])

    reports, eval_seconds = {}, {}
    for mode in DESK_MODES:
        path = ws.path(f"eval_{mode}.json")
        if reuse and f"eval_{mode}" in ws.manifest.reports and path.exists() and mode in timings.get("eval", {}):
            reports[mode] = EvalReport.load(path)
            eval_seconds[mode] = timings["eval"][mode]
            reused.append(f"eval_{mode}")
            continue
        t0 = time.perf_counter()
        reports[mode] = st.run_eval(ws, mode)
        eval_seconds[mode] = time.perf_counter() - t0
        timings.setdefault("eval", {"hash": config.config_hash()})[mode] = eval_seconds[mode]
        timings_path.write_text(json.dumps(timings, indent=2, sort_keys=True) + "\n")
        log.info("desk: eval %s done in %.1f s", mode, eval_seconds[mode])

    stage_seconds = {s: timings[s]["seconds"] for s in STAGES}
    summary = DeskSummary(config.config_hash(), stage_seconds, eval_seconds,
                          {m: {k: v["mean"] for k, v in r.metrics.items()} for m, r in reports.items()},
                          desk_checks(reports, sum(stage_seconds.values())), reused)
    st.write_json(ws.path("desk_summary.json"), summary.to_dict())
    return summary
