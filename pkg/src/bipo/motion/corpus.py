"""Procedural text-motion corpus standing in for a captured motion dataset.

Each template pairs caption patterns with a kinematic generator that drives the
skeleton through forward kinematics; features are then computed from the joint
positions, so every velocity block is an exact frame difference. Sided
templates (left/right) generate the left variant and obtain the right one by
exact reflection of the joint angles.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from ..autodiff.rng import make_rng
from .features import FPS, PoseSequence, compute_pose_features
from .mirror import mirror_pose, mirror_tokens
from .skeleton import MIRROR_PERM, N_JOINTS, PELVIS_HEIGHT, forward_kinematics

SPLITS = ("train", "val", "test")
SPLIT_RATIO = (80, 5, 15)
MIN_TEXT_TOKENS = 5

SUBJECTS = (("a", "person"), ("a", "man"), ("a", "woman"), ("someone",))
POSSESSIVE = {"person": "their", "man": "his", "woman": "her", "someone": "their"}
SPEEDS = (("slowly", 0.7), (None, 1.0), ("quickly", 1.4))

# joint indices used below
PELVIS, L_HIP, R_HIP, SPINE1, L_KNEE, R_KNEE, SPINE2, L_ANKLE, R_ANKLE, SPINE3 = range(10)
NECK, L_COLLAR, R_COLLAR, HEAD, L_SHOULDER, R_SHOULDER, L_ELBOW, R_ELBOW = 12, 13, 14, 15, 16, 17, 18, 19
ARM_DOWN = 1.4  # shoulder roll that brings the T-pose arm down by the side


@dataclass
class Motion:
    """Raw kinematic drive before features: local euler (n, 22, 3), root (n, 3), yaw (n,)."""

    angles: np.ndarray
    root: np.ndarray
    yaw: np.ndarray

    def mirrored(self) -> "Motion":
        ang = self.angles[:, MIRROR_PERM].copy()
        ang[..., 1] *= -1.0
        ang[..., 2] *= -1.0
        root = self.root.copy()
        root[:, 0] *= -1.0
        return Motion(ang, root, -self.yaw)

    def positions(self) -> np.ndarray:
        return forward_kinematics(self.angles, self.root, self.yaw)


def _base(n: int) -> Motion:
    ang = np.zeros((n, N_JOINTS, 3))
    ang[:, L_SHOULDER, 2] = -ARM_DOWN
    ang[:, R_SHOULDER, 2] = ARM_DOWN
    ang[:, L_ELBOW, 1] = -0.15
    ang[:, R_ELBOW, 1] = 0.15
    root = np.zeros((n, 3))
    root[:, 1] = PELVIS_HEIGHT
    return Motion(ang, root, np.zeros(n))


def _envelope(n: int, rise: float = 0.3, fall: float = 0.2) -> np.ndarray:
    u = np.linspace(0.0, 1.0, n)
    a = np.clip(u / rise, 0, 1)
    b = np.clip((1 - u) / fall, 0, 1)
    s = lambda x: x * x * (3 - 2 * x)  # noqa: E731
    return s(a) * s(b)


def _ramp(n: int, rise: float) -> np.ndarray:
    u = np.clip(np.linspace(0.0, 1.0, n) / rise, 0, 1)
    return u * u * (3 - 2 * u)


def _integrate_heading(speed: np.ndarray, yaw: np.ndarray, lateral: np.ndarray | None = None) -> np.ndarray:
    """Root xz from per-frame forward (and optional leftward) speed in m/s along the heading."""
    dt = 1.0 / FPS
    fwd = np.stack([np.sin(yaw), np.cos(yaw)], -1)
    left = np.stack([np.cos(yaw), -np.sin(yaw)], -1)
    step = fwd * speed[:, None] * dt
    if lateral is not None:
        step = step + left * lateral[:, None] * dt
    xz = np.concatenate([[[0.0, 0.0]], np.cumsum(step[:-1], axis=0)])
    return xz


# --- kinematic generators: (n frames, t seconds, speed factor, amplitude, phase) -> Motion ---

def _gait(n, t, spd, amp, ph, freq, hip, knee, arm, velocity, bob=0.02, lean=0.0, yaw_rate=0.0):
    m = _base(n)
    phi = 2 * np.pi * freq * spd * t + ph
    m.angles[:, L_HIP, 0] = -hip * amp * np.sin(phi)
    m.angles[:, R_HIP, 0] = hip * amp * np.sin(phi)
    m.angles[:, L_KNEE, 0] = knee * amp * np.maximum(0, np.sin(phi - 1.2))
    m.angles[:, R_KNEE, 0] = knee * amp * np.maximum(0, np.sin(phi + np.pi - 1.2))
    m.angles[:, L_SHOULDER, 0] = arm * amp * np.sin(phi)
    m.angles[:, R_SHOULDER, 0] = -arm * amp * np.sin(phi)
    m.angles[:, SPINE1, 0] = lean
    m.yaw = yaw_rate * spd * t
    xz = _integrate_heading(np.full(n, velocity * spd), m.yaw)
    m.root[:, 0], m.root[:, 2] = xz[:, 0], xz[:, 1]
    m.root[:, 1] = PELVIS_HEIGHT - bob + bob * np.cos(2 * phi)
    return m


def walk_forward(n, t, spd, amp, ph):
    return _gait(n, t, spd, amp, ph, 0.9, 0.45, 0.7, 0.3, 1.2)


def walk_backward(n, t, spd, amp, ph):
    return _gait(n, t, spd, amp, ph, 0.8, -0.35, 0.5, 0.2, -0.6)


def run_forward(n, t, spd, amp, ph):
    return _gait(n, t, spd, amp, ph, 1.4, 0.75, 1.4, 0.7, 3.0, bob=0.05, lean=0.2)


def walk_circle(n, t, spd, amp, ph):
    return _gait(n, t, spd, amp, ph, 0.9, 0.4, 0.6, 0.25, 1.0, yaw_rate=1.0)


def march(n, t, spd, amp, ph):
    m = _base(n)
    phi = 2 * np.pi * 1.0 * spd * t + ph
    up_l, up_r = np.maximum(0, np.sin(phi)), np.maximum(0, -np.sin(phi))
    m.angles[:, L_HIP, 0] = -1.0 * amp * up_l
    m.angles[:, R_HIP, 0] = -1.0 * amp * up_r
    m.angles[:, L_KNEE, 0] = 1.5 * amp * up_l
    m.angles[:, R_KNEE, 0] = 1.5 * amp * up_r
    m.angles[:, L_SHOULDER, 0] = 0.5 * amp * np.sin(phi)
    m.angles[:, R_SHOULDER, 0] = -0.5 * amp * np.sin(phi)
    return m


def _jump(n, t, spd, amp, ph, forward):
    m = _base(n)
    phi = 2 * np.pi * 1.1 * spd * t + ph
    air, crouch = np.maximum(0, np.sin(phi)), np.maximum(0, -np.sin(phi))
    for hip, knee, ankle in ((L_HIP, L_KNEE, L_ANKLE), (R_HIP, R_KNEE, R_ANKLE)):
        m.angles[:, hip, 0] = -0.7 * amp * crouch
        m.angles[:, knee, 0] = 1.2 * amp * crouch
        m.angles[:, ankle, 0] = -0.5 * amp * crouch
    m.angles[:, L_SHOULDER, 0] = -1.2 * amp * air + 0.4 * crouch
    m.angles[:, R_SHOULDER, 0] = -1.2 * amp * air + 0.4 * crouch
    m.angles[:, SPINE1, 0] = 0.3 * crouch
    m.root[:, 1] = PELVIS_HEIGHT - 0.22 * amp * crouch + 0.35 * amp * air
    if forward:
        xz = _integrate_heading(1.6 * spd * air, m.yaw)
        m.root[:, 0], m.root[:, 2] = xz[:, 0], xz[:, 1]
    return m


def jump_in_place(n, t, spd, amp, ph):
    return _jump(n, t, spd, amp, ph, False)


def jump_forward(n, t, spd, amp, ph):
    return _jump(n, t, spd, amp, ph, True)


def wave_left(n, t, spd, amp, ph):
    m = _base(n)
    env = _envelope(n, 0.25, 0.15)
    m.angles[:, L_SHOULDER, 2] = -ARM_DOWN + env * (ARM_DOWN + 0.4 * amp)
    m.angles[:, L_ELBOW, 2] = env * (1.1 + 0.5 * amp * np.sin(2 * np.pi * 1.8 * spd * t + ph))
    return m


def raise_left_arm(n, t, spd, amp, ph):
    m = _base(n)
    env = _envelope(n, 0.35 / spd, 0.2)
    m.angles[:, L_SHOULDER, 2] = -ARM_DOWN + env * (ARM_DOWN + 1.3 * amp)
    return m


def raise_both_arms(n, t, spd, amp, ph):
    m = _base(n)
    env = _envelope(n, 0.35 / spd, 0.2)
    m.angles[:, L_SHOULDER, 2] = -ARM_DOWN + env * (ARM_DOWN + 1.3 * amp)
    m.angles[:, R_SHOULDER, 2] = ARM_DOWN - env * (ARM_DOWN + 1.3 * amp)
    return m


def t_pose(n, t, spd, amp, ph):
    m = _base(n)
    env = _envelope(n, 0.3 / spd, 0.2)
    m.angles[:, L_SHOULDER, 2] = -ARM_DOWN + env * ARM_DOWN * amp
    m.angles[:, R_SHOULDER, 2] = ARM_DOWN - env * ARM_DOWN * amp
    m.angles[:, L_ELBOW, 1] = -0.15 * (1 - env)
    m.angles[:, R_ELBOW, 1] = 0.15 * (1 - env)
    return m


def kick_left(n, t, spd, amp, ph):
    m = _base(n)
    phi = 2 * np.pi * 0.9 * spd * t + ph
    k = np.maximum(0, np.sin(phi)) ** 2
    m.angles[:, L_HIP, 0] = -1.3 * amp * k
    m.angles[:, L_KNEE, 0] = 1.4 * amp * k * (1 - k)
    m.angles[:, SPINE1, 0] = -0.15 * k
    m.angles[:, R_SHOULDER, 0] = -0.4 * k
    m.angles[:, L_SHOULDER, 0] = 0.3 * k
    return m


def punch_left(n, t, spd, amp, ph):
    m = _base(n)
    phi = 2 * np.pi * 1.4 * spd * t + ph
    p = np.maximum(0, np.sin(phi)) ** 2 * amp
    p = np.minimum(p, 1.0)
    m.angles[:, L_SHOULDER] = np.stack([np.zeros(n), -np.pi / 2 * p, -ARM_DOWN * (1 - p)], -1)
    m.angles[:, L_ELBOW, 1] = -1.6 * (1 - p)
    m.angles[:, SPINE2, 1] = -0.25 * p
    return m


def clap(n, t, spd, amp, ph):
    m = _base(n)
    env = _envelope(n, 0.2, 0.15)
    opening = 0.6 * amp * (1 + np.cos(2 * np.pi * 2.0 * spd * t + ph)) / 2
    m.angles[:, L_SHOULDER] = np.stack([np.zeros(n), env * (-np.pi / 2 + opening), -ARM_DOWN * (1 - env)], -1)
    m.angles[:, R_SHOULDER] = np.stack([np.zeros(n), env * (np.pi / 2 - opening), ARM_DOWN * (1 - env)], -1)
    return m


def arm_circles(n, t, spd, amp, ph):
    m = _base(n)
    env = _envelope(n, 0.2, 0.15)
    phi = 2 * np.pi * 1.2 * spd * t + ph
    for sh, sgn in ((L_SHOULDER, 1.0), (R_SHOULDER, -1.0)):
        m.angles[:, sh, 0] = env * 0.5 * amp * np.sin(phi)
        m.angles[:, sh, 1] = sgn * env * 0.5 * amp * np.cos(phi)
        m.angles[:, sh, 2] = -sgn * ARM_DOWN * (1 - env)
    return m


def squat(n, t, spd, amp, ph):
    m = _base(n)
    s = amp * (1 - np.cos(2 * np.pi * 0.6 * spd * t + ph)) / 2
    for hip, knee, ankle in ((L_HIP, L_KNEE, L_ANKLE), (R_HIP, R_KNEE, R_ANKLE)):
        m.angles[:, hip, 0] = -1.2 * s
        m.angles[:, knee, 0] = 2.0 * s
        m.angles[:, ankle, 0] = -0.8 * s
    m.angles[:, SPINE1, 0] = 0.5 * s
    m.angles[:, L_SHOULDER, 0] = -1.0 * s
    m.angles[:, R_SHOULDER, 0] = -1.0 * s
    m.root[:, 1] = PELVIS_HEIGHT - 0.42 * s
    return m


def bow(n, t, spd, amp, ph):
    m = _base(n)
    env = _envelope(n, 0.4 / spd, 0.35)
    m.angles[:, SPINE1, 0] = 0.7 * amp * env
    m.angles[:, SPINE2, 0] = 0.3 * amp * env
    m.angles[:, NECK, 0] = 0.2 * env
    return m


def pick_up(n, t, spd, amp, ph):
    m = _base(n)
    env = np.sin(np.pi * np.linspace(0, 1, n)) ** 2
    m.angles[:, SPINE1, 0] = 0.9 * amp * env
    m.angles[:, SPINE2, 0] = 0.3 * amp * env
    for hip, knee in ((L_HIP, L_KNEE), (R_HIP, R_KNEE)):
        m.angles[:, hip, 0] = -0.6 * env
        m.angles[:, knee, 0] = 0.9 * env
    m.angles[:, L_SHOULDER, 0] = -0.9 * env
    m.angles[:, R_SHOULDER, 0] = -0.9 * env
    m.root[:, 1] = PELVIS_HEIGHT - 0.2 * env
    return m


def turn_left(n, t, spd, amp, ph):
    m = _base(n)
    m.yaw = 0.5 * np.pi * amp * _ramp(n, 0.9 / spd)
    phi = 2 * np.pi * 1.2 * spd * t + ph
    m.angles[:, L_HIP, 0] = -0.3 * np.maximum(0, np.sin(phi))
    m.angles[:, R_HIP, 0] = -0.3 * np.maximum(0, -np.sin(phi))
    m.angles[:, L_KNEE, 0] = 0.5 * np.maximum(0, np.sin(phi))
    m.angles[:, R_KNEE, 0] = 0.5 * np.maximum(0, -np.sin(phi))
    return m


def side_step_left(n, t, spd, amp, ph):
    m = _base(n)
    phi = 2 * np.pi * 1.0 * spd * t + ph
    m.angles[:, L_HIP, 2] = 0.35 * amp * np.maximum(0, np.sin(phi))
    m.angles[:, R_HIP, 2] = -0.2 * amp * np.maximum(0, -np.sin(phi))
    xz = _integrate_heading(np.zeros(n), m.yaw, lateral=np.full(n, 0.5 * spd))
    m.root[:, 0], m.root[:, 2] = xz[:, 0], xz[:, 1]
    return m


def hop_left(n, t, spd, amp, ph):
    m = _base(n)
    phi = 2 * np.pi * 1.5 * spd * t + ph
    air = np.abs(np.sin(phi))
    m.angles[:, R_HIP, 0] = -0.5
    m.angles[:, R_KNEE, 0] = 1.3
    m.angles[:, L_KNEE, 0] = 0.4 * amp * (1 - air)
    m.angles[:, L_HIP, 0] = -0.2 * amp * (1 - air)
    m.angles[:, L_SHOULDER, 2] = -ARM_DOWN + 0.6
    m.angles[:, R_SHOULDER, 2] = ARM_DOWN - 0.6
    m.root[:, 1] = PELVIS_HEIGHT - 0.06 + 0.14 * amp * air
    return m


def jumping_jacks(n, t, spd, amp, ph):
    m = _base(n)
    j = amp * (1 - np.cos(2 * np.pi * 1.0 * spd * t + ph)) / 2
    m.angles[:, L_SHOULDER, 2] = -ARM_DOWN + j * (ARM_DOWN + 1.2)
    m.angles[:, R_SHOULDER, 2] = ARM_DOWN - j * (ARM_DOWN + 1.2)
    m.angles[:, L_HIP, 2] = 0.3 * j
    m.angles[:, R_HIP, 2] = -0.3 * j
    m.root[:, 1] = PELVIS_HEIGHT - 0.04 * j + 0.1 * np.abs(np.sin(2 * np.pi * 1.0 * spd * t + ph))
    return m


def sway(n, t, spd, amp, ph):
    m = _base(n)
    phi = 2 * np.pi * 0.7 * spd * t + ph
    m.root[:, 0] = 0.08 * amp * np.sin(phi)
    m.angles[:, SPINE1, 2] = 0.15 * amp * np.sin(phi)
    m.angles[:, L_SHOULDER, 2] = -ARM_DOWN + 0.2 * np.sin(phi)
    m.angles[:, R_SHOULDER, 2] = ARM_DOWN + 0.2 * np.sin(phi)
    return m


def stand_still(n, t, spd, amp, ph):
    m = _base(n)
    m.angles[:, SPINE1, 0] = 0.02 * np.sin(2 * np.pi * 0.4 * t + ph)
    return m


@dataclass(frozen=True)
class Template:
    name: str
    patterns: tuple[str, ...]
    generate: Callable
    sided: bool = False
    speed_words: bool = True


TEMPLATES: tuple[Template, ...] = (
    Template("walk_forward", ("{s} walks forward in a line {adv}", "{s} is walking straight ahead {adv}"), walk_forward),
    Template("walk_backward", ("{s} walks backward a few steps {adv}", "{s} takes some steps backward {adv}"), walk_backward),
    Template("run_forward", ("{s} runs forward in a line {adv}", "{s} is running straight ahead {adv}"), run_forward),
    Template("walk_circle", ("{s} walks in a circle to the {side}", "{s} walks forward while turning {side}"),
             walk_circle, sided=True, speed_words=False),
    Template("march", ("{s} marches on the spot {adv}", "{s} lifts both knees high in place"), march),
    Template("jump_in_place", ("{s} jumps up in place {adv}", "{s} jumps up and down on the spot"), jump_in_place),
    Template("jump_forward", ("{s} jumps forward {adv} with both feet", "{s} leaps forward with both feet"), jump_forward),
    Template("hop", ("{s} hops on {p} {side} leg", "{s} hops up and down on {p} {side} foot"), hop_left, sided=True,
             speed_words=False),
    Template("wave", ("{s} waves {p} {side} hand {adv}", "{s} raises {p} {side} hand and waves"), wave_left, sided=True),
    Template("raise_arm", ("{s} raises {p} {side} arm up high", "{s} lifts {p} {side} arm over the head"), raise_left_arm,
             sided=True, speed_words=False),
    Template("raise_both_arms", ("{s} raises both arms above {p} head", "{s} lifts both arms up high"), raise_both_arms,
             speed_words=False),
    Template("t_pose", ("{s} stretches both arms out sideways", "{s} holds both arms out to the sides"), t_pose,
             speed_words=False),
    Template("kick", ("{s} kicks something with {p} {side} leg", "{s} kicks forward with {p} {side} foot"), kick_left,
             sided=True, speed_words=False),
    Template("punch", ("{s} punches forward with {p} {side} arm", "{s} throws a punch with {p} {side} hand"), punch_left,
             sided=True, speed_words=False),
    Template("clap", ("{s} claps {p} hands in front {adv}", "{s} claps both hands several times"), clap),
    Template("arm_circles", ("{s} makes circles with both arms", "{s} rotates both arms in circles {adv}"), arm_circles),
    Template("squat", ("{s} squats down and stands up {adv}", "{s} does a deep squat {adv}"), squat),
    Template("bow", ("{s} bows forward at the waist", "{s} bends forward in a polite bow"), bow, speed_words=False),
    Template("pick_up", ("{s} bends down to pick something up", "{s} picks something up from the ground"), pick_up,
             speed_words=False),
    Template("turn", ("{s} turns to {p} {side} in place", "{s} turns around to the {side}"), turn_left, sided=True,
             speed_words=False),
    Template("side_step", ("{s} side steps to the {side} {adv}", "{s} steps sideways to the {side}"), side_step_left,
             sided=True),
    Template("jumping_jacks", ("{s} does a few jumping jacks {adv}", "{s} performs several jumping jacks {adv}"), jumping_jacks),
    Template("sway", ("{s} sways from side to side {adv}", "{s} rocks the body side to side"), sway),
    Template("stand_still", ("{s} stands still and breathes", "{s} is standing in one place"), stand_still,
             speed_words=False),
)
TEMPLATE_BY_NAME = {t.name: t for t in TEMPLATES}


def template_variants(names=None) -> list[tuple[Template, str | None]]:
    """(template, side) pairs; sided templates contribute a left and a right variant."""
    out = []
    for t in TEMPLATES:
        if names is not None and t.name not in names:
            continue
        for side in (("left", "right") if t.sided else (None,)):
            out.append((t, side))
    return out


def variant_id(template: Template, side: str | None) -> str:
    return template.name if side is None else f"{template.name}_{side}"


def render_text(pattern: str, subject: tuple[str, ...], adverb: str | None, side: str | None) -> list[str]:
    poss = POSSESSIVE[subject[-1]]
    text = pattern.format(s=" ".join(subject), adv=adverb or "", side=side or "", p=poss)
    return text.split()


def _all_texts():
    for t in TEMPLATES:
        for pat in t.patterns:
            for subj in SUBJECTS:
                for adv, _ in SPEEDS:
                    for side in ("left", "right", None):
                        yield render_text(pat, subj, adv, side)


TEXT_VOCAB: tuple[str, ...] = tuple(sorted({w for toks in _all_texts() for w in toks}))


@dataclass(frozen=True)
class TextMotionPair:
    id: int
    text: tuple[str, ...]
    motion: PoseSequence
    template: str
    split: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        if len(self.text) < MIN_TEXT_TOKENS:
            raise ValueError(f"caption shorter than {MIN_TEXT_TOKENS} tokens: {' '.join(self.text)!r}")

    @property
    def caption(self) -> str:
        return " ".join(self.text)


def mirror_pair(pair: TextMotionPair) -> TextMotionPair:
    tpl = pair.template
    if tpl.endswith("_left"):
        tpl = tpl[:-5] + "_right"
    elif tpl.endswith("_right"):
        tpl = tpl[:-6] + "_left"
    return TextMotionPair(pair.id, tuple(mirror_tokens(list(pair.text))), mirror_pose(pair.motion), tpl,
                          pair.split, dict(pair.params, mirrored=not pair.params.get("mirrored", False)))


@dataclass
class CorpusConfig:
    n_sequences: int = 2000
    min_frames: int = 16
    max_frames: int = 64
    frame_step: int = 4
    templates: list[str] | None = None
    variation: float = 1.0


def split_counts(n: int) -> tuple[int, int, int]:
    n_train = round(n * SPLIT_RATIO[0] / 100)
    n_val = round(n * SPLIT_RATIO[1] / 100)
    return n_train, n_val, n - n_train - n_val


def synthesize(template: Template, side: str | None, n_frames: int, speed: float, amp: float,
               phase: float) -> PoseSequence:
    """Feature sequence with ``n_frames`` frames (one more position frame is simulated)."""
    n = n_frames + 1
    t = np.arange(n) / FPS
    motion = template.generate(n, t, speed, amp, phase)
    if side == "right":
        motion = motion.mirrored()
    return compute_pose_features(motion.positions())


def generate_corpus(seed: int, n_sequences: int | None = None,
                    config: CorpusConfig | None = None) -> list[TextMotionPair]:
    cfg = config or CorpusConfig()
    n = cfg.n_sequences if n_sequences is None else n_sequences
    if n < 100:
        raise ValueError("corpus needs at least 100 sequences")
    rng = make_rng(seed, "corpus")
    variants = template_variants(cfg.templates)
    if not variants:
        raise ValueError("no templates selected")
    lengths = np.arange(cfg.min_frames, cfg.max_frames + 1, cfg.frame_step)
    v = cfg.variation
    order = rng.permutation(n)
    n_train, n_val, _ = split_counts(n)
    split_of = np.empty(n, dtype=object)
    split_of[order[:n_train]] = "train"
    split_of[order[n_train:n_train + n_val]] = "val"
    split_of[order[n_train + n_val:]] = "test"

    pairs = []
    for i in range(n):
        tpl, side = variants[i % len(variants)]
        subj = SUBJECTS[rng.integers(len(SUBJECTS))]
        pattern = tpl.patterns[rng.integers(len(tpl.patterns))]
        if tpl.speed_words and "{adv}" in pattern:
            adv, spd = SPEEDS[rng.integers(len(SPEEDS))]
        else:
            adv, spd = None, 1.0
        amp = 1.0 + v * rng.uniform(-0.15, 0.15)
        phase = v * rng.uniform(0, 2 * np.pi)
        n_frames = int(lengths[rng.integers(len(lengths))]) if v > 0 else int(lengths[len(lengths) // 2])
        pose = synthesize(tpl, side, n_frames, spd, amp, phase)
        pairs.append(TextMotionPair(
            id=i, text=tuple(render_text(pattern, subj, adv, side)), motion=pose,
            template=variant_id(tpl, side), split=str(split_of[i]),
            params={"speed": spd, "amplitude": amp, "phase": phase, "frames": n_frames},
        ))
    return pairs


def augment_with_mirrors(pairs: list[TextMotionPair]) -> list[TextMotionPair]:
    return list(pairs) + [mirror_pair(p) for p in pairs]


def by_split(pairs: list[TextMotionPair], split: str) -> list[TextMotionPair]:
    return [p for p in pairs if p.split == split]


def corpus_manifest(pairs: list[TextMotionPair], seed: int, config: CorpusConfig) -> dict:
    return {
        "seed": seed,
        "config": asdict(config),
        "fps": FPS,
        "templates": sorted({p.template for p in pairs}),
        "splits": {s: sum(p.split == s for p in pairs) for s in SPLITS},
        "vocabulary": list(TEXT_VOCAB),
        "pairs": [
            {"id": p.id, "text": p.caption, "template": p.template, "split": p.split,
             "frames": len(p.motion), "params": p.params}
            for p in pairs
        ],
    }


__all__ = [
    "CorpusConfig", "TEMPLATES", "TEXT_VOCAB", "TextMotionPair", "augment_with_mirrors", "by_split",
    "corpus_manifest", "generate_corpus", "mirror_pair", "split_counts", "synthesize", "template_variants",
]

