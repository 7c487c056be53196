"""Left/right mirroring of pose features and captions (reflection x -> -x)."""

from __future__ import annotations

import numpy as np

from .features import FEATURE_DIM, PoseSequence
from .skeleton import MIRROR_PERM, N_JOINTS

_SWAP_WORDS = {"left": "right", "right": "left"}


def _build_tables():
    perm = np.arange(FEATURE_DIM)
    sign = np.ones(FEATURE_DIM)
    sign[0] = -1.0  # yaw rate reverses
    sign[1] = -1.0  # lateral root velocity
    for j in range(1, N_JOINTS):
        src = 4 + 3 * (MIRROR_PERM[j] - 1)
        dst = 4 + 3 * (j - 1)
        perm[dst:dst + 3] = np.arange(src, src + 3)
        sign[dst] = -1.0
    for j in range(N_JOINTS):
        src = 67 + 3 * MIRROR_PERM[j]
        dst = 67 + 3 * j
        perm[dst:dst + 3] = np.arange(src, src + 3)
        sign[dst] = -1.0
    # rotation R -> S R S with S = diag(-1, 1, 1); columns: c0 -> -S c0, c1 -> S c1
    for j in range(1, N_JOINTS):
        src = 133 + 6 * (MIRROR_PERM[j] - 1)
        dst = 133 + 6 * (j - 1)
        perm[dst:dst + 6] = np.arange(src, src + 6)
        sign[dst:dst + 6] = [1.0, -1.0, -1.0, -1.0, 1.0, 1.0]
    perm[259:263] = [261, 262, 259, 260]
    return perm, sign


MIRROR_COLUMN_PERM, MIRROR_COLUMN_SIGN = _build_tables()


def mirror_frames(frames: np.ndarray) -> np.ndarray:
    return frames[..., MIRROR_COLUMN_PERM] * MIRROR_COLUMN_SIGN


def mirror_pose(pose: PoseSequence) -> PoseSequence:
    return PoseSequence(mirror_frames(pose.frames), fps=pose.fps)


def mirror_positions(positions: np.ndarray) -> np.ndarray:
    """Reflect world joint positions through the x = 0 plane and swap sides."""
    out = positions[:, MIRROR_PERM].copy()
    out[..., 0] *= -1.0
    return out


def mirror_tokens(tokens: list[str]) -> list[str]:
    return [_SWAP_WORDS.get(t, t) for t in tokens]
