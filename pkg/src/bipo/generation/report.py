"""Per-run generation reports (JSON)."""

from __future__ import annotations

import json
from pathlib import Path

REPORT_FORMAT = "bipo-generation-report"

REPORT_SCHEMA = {
    "type": "object",
    "required": ["format", "version", "config", "runs"],
    "properties": {
        "format": {"const": REPORT_FORMAT},
        "version": {"const": 1},
        "config": {"type": "object", "required": ["refine", "sampler"]},
        "runs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["text", "seed", "length", "end_steps", "truncated", "refined"],
                "properties": {
                    "text": {"type": "string", "minLength": 1},
                    "seed": {"type": "integer"},
                    "length": {"type": "integer", "minimum": 1},
                    "end_steps": {"type": "array", "minItems": 6, "maxItems": 6,
                                  "items": {"type": ["integer", "null"]}},
                    "truncated": {"type": "boolean"},
                    "refined": {"type": "boolean"},
                    "mode": {"type": "string"},
                    "tokens": {"type": "array", "minItems": 6, "maxItems": 6},
                    "motion_file": {"type": "string"},
                },
            },
        },
    },
}


def generation_report(runs, config: dict) -> dict:
    return {"format": REPORT_FORMAT, "version": 1, "config": config,
            "runs": [r if isinstance(r, dict) else r.record() for r in runs]}


def export_generation_report(runs, config: dict, path) -> dict:
    """Write the report with sorted keys so equal inputs give identical bytes."""
    doc = generation_report(runs, config)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc
