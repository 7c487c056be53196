"""Self-describing JSON motion files.

    {
      "format": "bipo-motion", "version": 1,
      "fps": 20, "feature_dim": 263, "n_frames": L,
      "layout": {"root_ang_vel": [0, 1], ...},
      "parts": [{"name": "Root", "columns": [...]}, ...],
      "frames": [f_0_0, f_0_1, ..., f_{L-1}_262]      # row-major
    }

Floats are written with ``repr`` precision, so export/import is lossless.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .features import FEATURE_DIM, FPS, LAYOUT, PoseSequence
from .parts import PART_COLUMNS, PART_NAMES

FORMAT = "bipo-motion"
VERSION = 1


class MotionFileError(ValueError):
    pass


def motion_to_dict(pose: PoseSequence, extra: dict | None = None) -> dict:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "fps": pose.fps,
        "feature_dim": FEATURE_DIM,
        "n_frames": len(pose),
        "layout": {k: list(v) for k, v in LAYOUT.items()},
        "parts": [{"name": n, "columns": PART_COLUMNS[n].tolist()} for n in PART_NAMES],
        "frames": pose.frames.reshape(-1).tolist(),
    }
    if extra:
        doc["meta"] = extra
    return doc


def motion_from_dict(doc: dict) -> PoseSequence:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise MotionFileError("not a motion document")
    try:
        n, dim, fps = int(doc["n_frames"]), int(doc["feature_dim"]), int(doc["fps"])
        flat = np.asarray(doc["frames"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise MotionFileError(f"malformed motion document: {exc}") from exc
    if dim != FEATURE_DIM:
        raise MotionFileError(f"feature_dim {dim} != {FEATURE_DIM}")
    if fps != FPS:
        raise MotionFileError(f"frame rate {fps} != {FPS}")
    if flat.ndim != 1 or flat.size != n * dim:
        raise MotionFileError(f"expected {n * dim} values, found {flat.size}")
    return PoseSequence(flat.reshape(n, dim), fps=fps)


def export_motion(pose: PoseSequence, path, extra: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(motion_to_dict(pose, extra)))


def import_motion(path) -> PoseSequence:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MotionFileError(f"{path}: cannot parse motion file ({exc.msg})") from exc
    return motion_from_dict(doc)
