"""22-joint SMPL-style skeleton (Y up, rest pose facing +Z, the body's left on +X)
and vectorized forward kinematics."""

from __future__ import annotations

import numpy as np

JOINT_NAMES = [
    "pelvis", "l_hip", "r_hip", "spine1", "l_knee", "r_knee", "spine2", "l_ankle",
    "r_ankle", "spine3", "l_foot", "r_foot", "neck", "l_collar", "r_collar", "head",
    "l_shoulder", "r_shoulder", "l_elbow", "r_elbow", "l_wrist", "r_wrist",
]
N_JOINTS = 22
PARENTS = np.array([-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19])

# rest-pose offsets from the parent joint, metres
OFFSETS = np.array([
    [0.0, 0.0, 0.0],
    [0.06, -0.09, 0.0], [-0.06, -0.09, 0.0], [0.0, 0.11, 0.0],
    [0.0, -0.38, 0.0], [0.0, -0.38, 0.0], [0.0, 0.13, 0.0],
    [0.0, -0.40, 0.0], [0.0, -0.40, 0.0], [0.0, 0.05, 0.0],
    [0.0, -0.05, 0.12], [0.0, -0.05, 0.12], [0.0, 0.21, 0.0],
    [0.08, 0.12, 0.0], [-0.08, 0.12, 0.0], [0.0, 0.09, 0.05],
    [0.10, 0.03, 0.0], [-0.10, 0.03, 0.0],
    [0.26, 0.0, 0.0], [-0.26, 0.0, 0.0],
    [0.25, 0.0, 0.0], [-0.25, 0.0, 0.0],
])
PELVIS_HEIGHT = 0.93

# index pairs swapped by left/right mirroring
MIRROR_PAIRS = [(1, 2), (4, 5), (7, 8), (10, 11), (13, 14), (16, 17), (18, 19), (20, 21)]
MIRROR_PERM = np.arange(N_JOINTS)
for _a, _b in MIRROR_PAIRS:
    MIRROR_PERM[_a], MIRROR_PERM[_b] = _b, _a

# facing is derived from hips and shoulders: (right, left) pairs
FACE_JOINTS = (2, 1, 17, 16)
# (heel, toe) per foot, left first
FOOT_JOINTS = ((7, 10), (8, 11))


def rot_x(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(a), np.zeros_like(a)
    return np.stack([np.stack([o, z, z], -1), np.stack([z, c, -s], -1), np.stack([z, s, c], -1)], -2)


def rot_y(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(a), np.zeros_like(a)
    return np.stack([np.stack([c, z, s], -1), np.stack([z, o, z], -1), np.stack([-s, z, c], -1)], -2)


def rot_z(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    c, s = np.cos(a), np.sin(a)
    o, z = np.ones_like(a), np.zeros_like(a)
    return np.stack([np.stack([c, -s, z], -1), np.stack([s, c, z], -1), np.stack([z, z, o], -1)], -2)


def euler_to_matrix(angles: np.ndarray) -> np.ndarray:
    """(..., 3) angles (x, y, z) in radians -> (..., 3, 3), applied as Ry @ Rx @ Rz."""
    return rot_y(angles[..., 1]) @ rot_x(angles[..., 0]) @ rot_z(angles[..., 2])


def forward_kinematics(local_euler: np.ndarray, root_pos: np.ndarray, root_yaw: np.ndarray) -> np.ndarray:
    """Joint positions from per-joint local rotations.

    local_euler: (L, 22, 3); root_pos: (L, 3); root_yaw: (L,). Returns (L, 22, 3).
    """
    L = local_euler.shape[0]
    local = euler_to_matrix(local_euler)
    glob = np.empty((L, N_JOINTS, 3, 3))
    pos = np.empty((L, N_JOINTS, 3))
    glob[:, 0] = rot_y(root_yaw) @ local[:, 0]
    pos[:, 0] = root_pos
    for j in range(1, N_JOINTS):
        p = PARENTS[j]
        glob[:, j] = glob[:, p] @ local[:, j]
        pos[:, j] = pos[:, p] + glob[:, p] @ OFFSETS[j]
    return pos


def rest_positions() -> np.ndarray:
    return forward_kinematics(np.zeros((1, N_JOINTS, 3)), np.array([[0.0, PELVIS_HEIGHT, 0.0]]),
                              np.zeros(1))[0]
