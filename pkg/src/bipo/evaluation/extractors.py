"""Text and motion feature extractors trained with a margin contrastive loss.

Both encoders map into a shared ``feature_dim`` space where a caption lies
close to the motions it describes. Motion encoder: per-column standardization,
two temporal convolutions, mean pooling over frames and a linear projection.
Text encoder: mean of word embeddings followed by a two-layer MLP.
"""

from __future__ import annotations

import logging
import time
from collections import defaultdict
from dataclasses import asdict, dataclass

import numpy as np

from ..autodiff import (AdamW, Linear, Module, NonFiniteError, Tensor, concat, load_checkpoint, make_rng,
                        no_grad, save_checkpoint, take)
from ..autodiff.module import init_normal
from ..motion import FEATURE_DIM, TEXT_VOCAB, PoseSequence, TextMotionPair
from ..vq.model import STD_FLOOR, Conv

log = logging.getLogger(__name__)


@dataclass
class ExtractorConfig:
    feature_dim: int = 32
    width: int = 64
    text_dim: int = 64
    margin: float = 5.0
    steps: int = 600
    batch_size: int = 64
    lr: float = 2e-3
    weight_decay: float = 0.0
    grad_clip: float | None = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.feature_dim < 1 or self.width < 1 or self.text_dim < 1:
            raise ValueError("extractor sizes must be positive")
        if self.margin <= 0:
            raise ValueError("margin must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExtractorConfig":
        return cls(**d)


class MotionEncoder(Module):
    def __init__(self, rng, cfg: ExtractorConfig):
        self.c1 = Conv(rng, FEATURE_DIM, cfg.width, 3)
        self.c2 = Conv(rng, cfg.width, cfg.width, 4, stride=2, padding=1)
        self.proj = Linear(rng, cfg.width, cfg.feature_dim)
        self.mean = np.zeros(FEATURE_DIM)
        self.std = np.ones(FEATURE_DIM)

    def __call__(self, frames: np.ndarray) -> Tensor:
        """``(B, T, 263)`` equal-length feature frames -> ``(B, feature_dim)``."""
        x = Tensor(((frames - self.mean) / self.std).transpose(0, 2, 1))
        h = self.c2(self.c1(x).relu()).relu()
        return self.proj(h.mean(axis=2))


class TextFeatureEncoder(Module):
    def __init__(self, rng, cfg: ExtractorConfig, vocab: tuple = TEXT_VOCAB):
        self.vocab = {w: i for i, w in enumerate(vocab)}
        self.embed = init_normal(rng, (len(vocab), cfg.text_dim), 1.0)
        self.fc1 = Linear(rng, cfg.text_dim, cfg.width)
        self.fc2 = Linear(rng, cfg.width, cfg.feature_dim)

    def __call__(self, texts: list) -> Tensor:
        rows = []
        for words in texts:
            if not words:
                raise ValueError("empty text")
            try:
                rows.append([self.vocab[w] for w in words])
            except KeyError as exc:
                raise ValueError(f"unknown token {exc.args[0]!r}") from None
        width = max(len(r) for r in rows)
        ids = np.zeros((len(rows), width), dtype=np.int64)
        weight = np.zeros((len(rows), width, 1))
        for b, r in enumerate(rows):
            ids[b, :len(r)] = r
            weight[b, :len(r)] = 1.0 / len(r)
        pooled = (take(self.embed, ids) * Tensor(weight)).sum(axis=1)
        return self.fc2(self.fc1(pooled).relu())


class FeatureExtractorPair(Module):
    """Motion and text encoders sharing one feature space."""

    def __init__(self, cfg: ExtractorConfig | None = None, rng: np.random.Generator | None = None):
        self.cfg = cfg or ExtractorConfig()
        rng = rng if rng is not None else make_rng(self.cfg.seed, "extractor-init")
        self.motion = MotionEncoder(rng, self.cfg)
        self.text = TextFeatureEncoder(rng, self.cfg)

    @property
    def feature_dim(self) -> int:
        return self.cfg.feature_dim

    def set_normalizer(self, poses: list[PoseSequence]) -> None:
        frames = np.concatenate([p.frames for p in poses])
        self.motion.mean = frames.mean(axis=0)
        self.motion.std = np.maximum(frames.std(axis=0), STD_FLOOR)

    def motion_tensor(self, poses: list[PoseSequence]) -> Tensor:
        """Features for poses of any lengths, in input order (grouped by length internally)."""
        groups = defaultdict(list)
        for i, p in enumerate(poses):
            groups[len(p)].append(i)
        if min(groups) < 2:
            raise ValueError("motion too short for the feature extractor (need >= 2 frames)")
        order, parts = [], []
        for _, idx in sorted(groups.items()):
            parts.append(self.motion(np.stack([poses[i].frames for i in idx])))
            order.extend(idx)
        feats = concat(parts, axis=0) if len(parts) > 1 else parts[0]
        return take(feats, np.argsort(order))

    def encode_motions(self, poses: list[PoseSequence]) -> np.ndarray:
        with no_grad():
            return self.motion_tensor(poses).data.copy()

    def encode_texts(self, texts: list) -> np.ndarray:
        with no_grad():
            return self.text([tuple(t) for t in texts]).data.copy()

    def state(self) -> dict:
        s = self.state_dict()
        s["norm.mean"], s["norm.std"] = self.motion.mean, self.motion.std
        return s

    def load_state(self, state: dict) -> None:
        state = dict(state)
        self.motion.mean, self.motion.std = state.pop("norm.mean"), state.pop("norm.std")
        self.load_state_dict(state)

    def save(self, path) -> None:
        save_checkpoint(path, self.state(), {"kind": "extractors", "config": self.cfg.to_dict()})

    @classmethod
    def load(cls, path) -> "FeatureExtractorPair":
        tensors, meta = load_checkpoint(path)
        if meta.get("kind") != "extractors":
            raise ValueError(f"{path} is not an extractor checkpoint")
        pair = cls(ExtractorConfig.from_dict(meta["config"]))
        pair.load_state(tensors)
        return pair


def contrastive_loss(m: Tensor, t: Tensor, negatives: np.ndarray, margin: float) -> Tensor:
    """Pull matched pairs together, push allowed mismatched pairs beyond ``margin``.

    ``negatives[i, j]`` marks motion ``i`` / text ``j`` as a true mismatch; pairs
    whose captions describe the same motion class are left out rather than
    pushed apart.
    """
    diff = m.reshape(m.shape[0], 1, m.shape[1]) - t.reshape(1, t.shape[0], t.shape[1])
    dist = ((diff * diff).sum(axis=2) + 1e-9).sqrt()
    eye = np.eye(m.shape[0])
    pos = (dist * dist * Tensor(eye)).sum() * (1.0 / m.shape[0])
    n_neg = max(int(negatives.sum()), 1)
    neg = ((margin - dist).relu() ** 2 * Tensor(negatives.astype(np.float64))).sum() * (1.0 / n_neg)
    return pos + neg


@dataclass
class ExtractorReport:
    steps: int
    final_loss: float
    matched_distance: float      # held-out mean distance of true pairs
    mismatched_distance: float   # held-out mean distance of all other pairs
    seconds: float

    def to_dict(self) -> dict:
        return asdict(self)


def pair_distances(motion_feats: np.ndarray, text_feats: np.ndarray) -> tuple[float, float]:
    """(mean matched distance, mean mismatched distance) over all motion/text combinations."""
    diff = motion_feats[:, None, :] - text_feats[None, :, :]
    D = np.sqrt((diff ** 2).sum(axis=2))
    n = len(D)
    off = ~np.eye(n, dtype=bool)
    return float(np.diag(D).mean()), float(D[off].mean())


def train_extractors(train: list[TextMotionPair], held_out: list[TextMotionPair] | None = None,
                     cfg: ExtractorConfig | None = None) -> tuple[FeatureExtractorPair, ExtractorReport]:
    cfg = cfg or ExtractorConfig()
    if len(train) < 2:
        raise ValueError("need at least two training pairs")
    t0 = time.perf_counter()
    pair = FeatureExtractorPair(cfg, make_rng(cfg.seed, "extractor-init"))
    pair.set_normalizer([p.motion for p in train])
    rng = make_rng(cfg.seed, "extractor-train")
    opt = AdamW(pair.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay, grad_clip=cfg.grad_clip)
    templates = np.array([p.template for p in train])
    loss_value = float("nan")
    for step in range(1, cfg.steps + 1):
        idx = rng.choice(len(train), size=min(cfg.batch_size, len(train)), replace=False)
        m = pair.motion_tensor([train[i].motion for i in idx])
        t = pair.text([train[i].text for i in idx])
        negatives = templates[idx][:, None] != templates[idx][None, :]
        loss = contrastive_loss(m, t, negatives, cfg.margin)
        loss_value = loss.item()
        if not np.isfinite(loss_value):
            raise NonFiniteError(f"extractor loss became {loss_value} at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        if step % 100 == 0:
            log.info("extractors step %d: loss %.4f", step, loss_value)
    check = held_out if held_out else train
    matched, mismatched = pair_distances(pair.encode_motions([p.motion for p in check]),
                                         pair.encode_texts([p.text for p in check]))
    report = ExtractorReport(cfg.steps, loss_value, matched, mismatched, time.perf_counter() - t0)
    return pair, report
