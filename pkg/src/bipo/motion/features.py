"""263-dim pose features and their inverse.

Per-frame layout (column offsets):

    [0, 1)     root angular velocity about Y            (1)
    [1, 3)     root linear velocity x, z, facing frame   (2)
    [3, 4)     root height                               (1)
    [4, 67)    joint positions 1..21, facing frame       (63)
    [67, 133)  joint velocities 0..21, facing frame      (66)
    [133, 259) joint rotations 1..21, 6-D                (126)
    [259, 263) foot contacts l_heel, l_toe, r_heel, r_toe (4)

``n`` position frames produce ``n - 1`` feature frames: frame t uses positions
t and t+1 for every velocity-type block. The facing frame at t rotates the
world about Y so the body's forward direction maps to +Z.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .skeleton import FACE_JOINTS, FOOT_JOINTS, N_JOINTS, OFFSETS, PARENTS, rot_y

FEATURE_DIM = 263
FPS = 20
CONTACT_THRESHOLD = 0.002  # squared per-frame displacement, m^2

LAYOUT = {
    "root_ang_vel": (0, 1),
    "root_lin_vel": (1, 3),
    "root_height": (3, 4),
    "joint_pos": (4, 67),
    "joint_vel": (67, 133),
    "joint_rot": (133, 259),
    "foot_contact": (259, 263),
}
# order of the source representation names these blocks by
LAYOUT_SYMBOLS = {
    "root_ang_vel": "r_a_dot", "root_lin_vel": "r_x_dot,r_z_dot", "root_height": "r_y",
    "joint_pos": "j_p", "joint_vel": "j_v", "joint_rot": "j_r", "foot_contact": "c_f",
}


def jp_cols(j: int) -> list[int]:
    if not 1 <= j < N_JOINTS:
        raise ValueError(f"joint {j} has no position columns")
    s = 4 + 3 * (j - 1)
    return [s, s + 1, s + 2]


def jv_cols(j: int) -> list[int]:
    s = 67 + 3 * j
    return [s, s + 1, s + 2]


def jr_cols(j: int) -> list[int]:
    if not 1 <= j < N_JOINTS:
        raise ValueError(f"joint {j} has no rotation columns")
    s = 133 + 6 * (j - 1)
    return list(range(s, s + 6))


class PoseError(ValueError):
    pass


@dataclass(frozen=True)
class PoseSequence:
    """L x 263 feature frames at 20 fps."""

    frames: np.ndarray
    fps: int = FPS
    layout: dict = field(default_factory=lambda: dict(LAYOUT))

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=np.float64)
        if f.ndim != 2 or f.shape[1] != FEATURE_DIM:
            raise PoseError(f"pose frames must be L x {FEATURE_DIM}, got {f.shape}")
        c = f[:, 259:263]
        if np.any((c < 0) | (c > 1)):
            raise PoseError("foot-contact values must lie in [0, 1]")
        object.__setattr__(self, "frames", f)

    def __len__(self) -> int:
        return self.frames.shape[0]

    def validate_length(self, min_frames: int, max_frames: int) -> None:
        if not min_frames <= len(self) <= max_frames:
            raise PoseError(f"length {len(self)} outside [{min_frames}, {max_frames}]")

    def __eq__(self, other) -> bool:
        return isinstance(other, PoseSequence) and self.fps == other.fps and \
            np.array_equal(self.frames, other.frames)


def facing_angles(positions: np.ndarray) -> np.ndarray:
    """Yaw of the body's forward direction per frame, ``atan2(f_x, f_z)``."""
    r_hip, l_hip, r_sh, l_sh = FACE_JOINTS
    across = (positions[:, r_hip] - positions[:, l_hip]) + (positions[:, r_sh] - positions[:, l_sh])
    # forward = up x across
    fx = across[:, 2]
    fz = -across[:, 0]
    return np.arctan2(fx, fz)


def _wrap(a: np.ndarray) -> np.ndarray:
    return (a + np.pi) % (2 * np.pi) - np.pi


def _align_rotation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimal rotation taking unit vectors ``a`` to ``b`` (both (..., 3))."""
    v = np.cross(a, b)
    c = np.sum(a * b, axis=-1)
    K = np.zeros(v.shape[:-1] + (3, 3))
    K[..., 0, 1], K[..., 0, 2] = -v[..., 2], v[..., 1]
    K[..., 1, 0], K[..., 1, 2] = v[..., 2], -v[..., 0]
    K[..., 2, 0], K[..., 2, 1] = -v[..., 1], v[..., 0]
    near_flip = c < -1.0 + 1e-9
    denom = np.where(near_flip, 1.0, 1.0 + c)
    R = np.eye(3) + K + (K @ K) / denom[..., None, None]
    if np.any(near_flip):
        # half-turn about an axis perpendicular to a
        aa = a[near_flip]
        helper = np.where(np.abs(aa[:, :1]) < 0.9, np.array([1.0, 0, 0]), np.array([0, 0, 1.0]))
        axis = np.cross(aa, helper)
        axis /= np.linalg.norm(axis, axis=-1, keepdims=True)
        R[near_flip] = 2 * axis[:, :, None] * axis[:, None, :] - np.eye(3)
    return R


def compute_pose_features(joint_positions: np.ndarray) -> PoseSequence:
    """(n, 22, 3) world joint positions -> PoseSequence with n - 1 frames."""
    P = np.asarray(joint_positions, dtype=np.float64)
    if P.ndim != 3 or P.shape[1:] != (N_JOINTS, 3):
        raise PoseError(f"expected (n, 22, 3) joint positions, got {P.shape}")
    if P.shape[0] < 2:
        raise PoseError("need at least 2 frames of joint positions")
    n = P.shape[0] - 1
    theta = facing_angles(P)
    R = rot_y(-theta[:n])  # world -> facing frame, (n, 3, 3)

    feats = np.zeros((n, FEATURE_DIM))
    feats[:, 0] = _wrap(theta[1:] - theta[:-1])
    root_delta = np.einsum("tij,tj->ti", R, P[1:, 0] - P[:-1, 0])
    feats[:, 1] = root_delta[:, 0]
    feats[:, 2] = root_delta[:, 2]
    feats[:, 3] = P[:n, 0, 1]

    ground = P[:n, 0].copy()
    ground[:, 1] = 0.0
    local = np.einsum("tij,tkj->tki", R, P[:n, 1:] - ground[:, None, :])
    feats[:, 4:67] = local.reshape(n, 63)

    vel = np.einsum("tij,tkj->tki", R, P[1:] - P[:-1])
    feats[:, 67:133] = vel.reshape(n, 66)

    bones = P[:n, 1:] - P[:n, PARENTS[1:]]
    bones = np.einsum("tij,tkj->tki", R, bones)
    bones /= np.linalg.norm(bones, axis=-1, keepdims=True)
    rest = OFFSETS[1:] / np.linalg.norm(OFFSETS[1:], axis=-1, keepdims=True)
    rot = _align_rotation(np.broadcast_to(rest, bones.shape), bones)  # (n, 21, 3, 3)
    feats[:, 133:259] = np.concatenate([rot[..., :, 0], rot[..., :, 1]], axis=-1).reshape(n, 126)

    disp2 = ((P[1:] - P[:-1]) ** 2).sum(axis=-1)  # (n, 22)
    (lh, lt), (rh, rt) = FOOT_JOINTS
    for k, j in enumerate((lh, lt, rh, rt)):
        feats[:, 259 + k] = (disp2[:, j] < CONTACT_THRESHOLD).astype(np.float64)
    return PoseSequence(feats)


def recover_positions(pose: PoseSequence) -> np.ndarray:
    """Invert the position blocks: world joint positions (L, 22, 3) in a canonical
    frame (initial yaw 0, root starting over the origin)."""
    f = pose.frames
    L = f.shape[0]
    theta = np.concatenate([[0.0], np.cumsum(f[:-1, 0])])
    Rinv = rot_y(theta)  # facing -> world
    step = np.zeros((L, 3))
    step[:, 0] = f[:, 1]
    step[:, 2] = f[:, 2]
    world_step = np.einsum("tij,tj->ti", Rinv, step)
    root = np.zeros((L, 3))
    root[1:] = np.cumsum(world_step[:-1], axis=0)
    out = np.empty((L, N_JOINTS, 3))
    out[:, 1:] = np.einsum("tij,tkj->tki", Rinv, f[:, 4:67].reshape(L, 21, 3)) + root[:, None, :]
    out[:, 0] = root
    out[:, 0, 1] = f[:, 3]
    return out


def velocity_consistency_error(pose: PoseSequence) -> float:
    """Max |j_v - R_t (p[t+1] - p[t])| using positions recovered from the same frames."""
    if len(pose) < 2:
        return 0.0
    P = recover_positions(pose)
    f = pose.frames
    theta = np.concatenate([[0.0], np.cumsum(f[:-1, 0])])
    R = rot_y(-theta[:-1])
    vel = np.einsum("tij,tkj->tki", R, P[1:] - P[:-1]).reshape(-1, 66)
    return float(np.max(np.abs(vel - f[:-1, 67:133])))
