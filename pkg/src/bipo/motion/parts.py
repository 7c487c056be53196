"""Six-part body division and the inverse merge.

Each part owns the position, velocity and rotation columns of its joint chain.
Joint 9 (spine3, where the collars attach) belongs to R.Arm, L.Arm and
Backbone; merging averages the three predictions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FEATURE_DIM, PoseSequence, jp_cols, jr_cols, jv_cols

PART_NAMES = ("Root", "R.Leg", "L.Leg", "R.Arm", "L.Arm", "Backbone")
N_PARTS = len(PART_NAMES)

PART_JOINTS = {
    "Root": (0,),
    "R.Leg": (2, 5, 8, 11),
    "L.Leg": (1, 4, 7, 10),
    "R.Arm": (9, 14, 17, 19, 21),
    "L.Arm": (9, 13, 16, 18, 20),
    "Backbone": (3, 6, 9, 12, 15),
}
SHARED_JOINT = 9


def _part_columns(name: str) -> list[int]:
    joints = PART_JOINTS[name]
    if name == "Root":
        return [0, 1, 2, 3] + jv_cols(0)
    cols = [c for j in joints for c in jp_cols(j)]
    cols += [c for j in joints for c in jv_cols(j)]
    cols += [c for j in joints for c in jr_cols(j)]
    if name == "L.Leg":
        cols += [259, 260]
    elif name == "R.Leg":
        cols += [261, 262]
    return cols


PART_COLUMNS: dict[str, np.ndarray] = {n: np.array(_part_columns(n)) for n in PART_NAMES}
PART_DIMS: dict[str, int] = {n: len(c) for n, c in PART_COLUMNS.items()}
_CLAIMS = np.zeros(FEATURE_DIM)
for _c in PART_COLUMNS.values():
    _CLAIMS[_c] += 1.0


@dataclass(frozen=True)
class PartMotion:
    part: str
    frames: np.ndarray  # L x D_part

    def __post_init__(self):
        if self.part not in PART_COLUMNS:
            raise ValueError(f"unknown part {self.part!r}")
        f = np.asarray(self.frames, dtype=np.float64)
        if f.ndim != 2 or f.shape[1] != PART_DIMS[self.part]:
            raise ValueError(f"{self.part} frames must be L x {PART_DIMS[self.part]}, got {f.shape}")
        object.__setattr__(self, "frames", f)

    @property
    def provenance(self) -> np.ndarray:
        """Whole-body column index for each part-local column."""
        return PART_COLUMNS[self.part]

    def __len__(self) -> int:
        return self.frames.shape[0]


def split_parts(pose: PoseSequence) -> list[PartMotion]:
    return [PartMotion(n, pose.frames[:, PART_COLUMNS[n]]) for n in PART_NAMES]


def merge_parts(parts: list[PartMotion]) -> PoseSequence:
    """Whole-body frames; columns claimed by several parts get the mean of the claimants."""
    if [p.part for p in parts] != list(PART_NAMES):
        raise ValueError(f"expected parts in order {PART_NAMES}")
    lengths = {len(p) for p in parts}
    if len(lengths) != 1:
        raise ValueError(f"part lengths differ: {sorted(lengths)}")
    frames = merge_arrays([p.frames for p in parts])
    # raw decoder output may leave the contact range
    frames[:, 259:263] = np.clip(frames[:, 259:263], 0.0, 1.0)
    return PoseSequence(frames)


def split_array(frames: np.ndarray) -> list[np.ndarray]:
    """Array-level split for (..., 263) inputs."""
    return [frames[..., PART_COLUMNS[n]] for n in PART_NAMES]


def merge_arrays(parts: list[np.ndarray]) -> np.ndarray:
    """Array-level merge. The mean is taken as ``anchor + sum(p - anchor) / n`` with the
    first claimant as anchor, so agreeing claimants reproduce their value bit-exactly."""
    shape = parts[0].shape[:-1]
    anchor = np.zeros(shape + (FEATURE_DIM,))
    owned = np.zeros(FEATURE_DIM, dtype=bool)
    for n, p in zip(PART_NAMES, parts):
        cols = PART_COLUMNS[n]
        fresh = ~owned[cols]
        anchor[..., cols[fresh]] = p[..., fresh]
        owned[cols] = True
    dev = np.zeros_like(anchor)
    for n, p in zip(PART_NAMES, parts):
        cols = PART_COLUMNS[n]
        dev[..., cols] += p - anchor[..., cols]
    return anchor + dev / _CLAIMS


def describe_parts() -> dict:
    """Column tables per part, for auditing (``parts describe``)."""
    return {
        "feature_dim": FEATURE_DIM,
        "shared_joint": SHARED_JOINT,
        "parts": [
            {"name": n, "joints": list(PART_JOINTS[n]), "dim": PART_DIMS[n],
             "columns": PART_COLUMNS[n].tolist()}
            for n in PART_NAMES
        ],
        "claim_counts": {str(i): int(c) for i, c in enumerate(_CLAIMS) if c != 1},
    }
