"""Training and persistence for the six part tokenizers."""

from __future__ import annotations

import logging
import time
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import AdamW, NonFiniteError, load_checkpoint, make_rng, mse, no_grad, save_checkpoint, step_decay_lr
from ..motion import PART_NAMES, PoseSequence, TextMotionPair, merge_arrays, split_array
from .model import PartVQVAE, VqConfig, pad_to_multiple
from .quantizer import codebook_stats, quantize

log = logging.getLogger(__name__)


class PartVQVAESet:
    """The six part tokenizers, addressed in canonical part order."""

    def __init__(self, config: VqConfig, seed: int | None = None):
        self.config = config
        seed = config.seed if seed is None else seed
        self.models = {p: PartVQVAE(p, config, make_rng(seed, "vq-init", p)) for p in PART_NAMES}

    def __getitem__(self, part: str) -> PartVQVAE:
        return self.models[part]

    @property
    def r(self) -> int:
        return self.config.downsample

    @property
    def codebook_size(self) -> int:
        return self.config.codebook_size

    def tokenize(self, pose: PoseSequence) -> list[np.ndarray]:
        arrays = split_array(pose.frames)
        return [self.models[p].tokenize(a) for p, a in zip(PART_NAMES, arrays)]

    def decode(self, tokens: list[np.ndarray], n_frames: int | None = None) -> PoseSequence:
        """Per-part token lists (equal length) -> whole-body pose via part merging."""
        lengths = {len(t) for t in tokens}
        if len(tokens) != len(PART_NAMES) or len(lengths) != 1:
            raise ValueError("decode needs six token sequences of equal length")
        arrays = [self.models[p].decode(t, n_frames).frames for p, t in zip(PART_NAMES, tokens)]
        return _as_pose(merge_arrays(arrays))

    def reconstruct(self, pose: PoseSequence) -> PoseSequence:
        """Tokenize then decode, trimmed back to the input length."""
        return self.decode(self.tokenize(pose), n_frames=len(pose))

    def state(self) -> dict[str, np.ndarray]:
        out = {}
        for m in self.models.values():
            out.update(m.state())
        return out

    def save(self, path) -> None:
        save_checkpoint(path, self.state(), {"kind": "vqvae", "config": self.config.to_dict()})

    @classmethod
    def load(cls, path) -> "PartVQVAESet":
        tensors, meta = load_checkpoint(path)
        if meta.get("kind") != "vqvae":
            raise ValueError(f"{path} is not a VQ-VAE checkpoint")
        obj = cls(VqConfig.from_dict(meta["config"]))
        for m in obj.models.values():
            m.load_state(tensors)
        return obj


def _as_pose(frames: np.ndarray) -> PoseSequence:
    frames = frames.copy()
    frames[:, 259:263] = np.clip(frames[:, 259:263], 0.0, 1.0)
    return PoseSequence(frames)


@dataclass
class PartReport:
    part: str
    init_val_mse: float
    best_val_mse: float
    best_step: int
    final_val_mse: float
    train_loss: list = field(default_factory=list)      # (step, recon, vq, commit)
    val_curve: list = field(default_factory=list)       # (step, mse)
    codebook: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def improvement(self) -> float:
        return self.init_val_mse / max(self.best_val_mse, 1e-300)


def _part_arrays(pairs: list[TextMotionPair]) -> list[list[np.ndarray]]:
    """[part][sequence] -> (T, C) frames."""
    per_part = [[] for _ in PART_NAMES]
    for pair in pairs:
        for k, a in enumerate(split_array(pair.motion.frames)):
            per_part[k].append(a)
    return per_part


def reconstruction_mse(model: PartVQVAE, sequences: list[np.ndarray], track_usage: bool = False) -> float:
    """Mean squared error in standardized units over all frames, full sequences."""
    by_len = defaultdict(list)
    for s in sequences:
        padded, pad = pad_to_multiple(s, model.r)
        by_len[len(padded)].append((padded, len(s)))
    total, count = 0.0, 0
    with no_grad():
        for _, group in sorted(by_len.items()):
            batch = np.stack([g[0] for g in group])
            q = quantize(model.encode_batch(batch), model.codebook, track_usage=track_usage)
            recon = model.decode_latents(q.quantized).data
            target = model.normalize(batch)
            for i, (_, n) in enumerate(group):
                d = recon[i, :n] - target[i, :n]
                total += float((d * d).sum())
                count += d.size
    return total / count


def _sample_windows(sequences, batch, window, rng) -> np.ndarray:
    idx = rng.integers(0, len(sequences), size=batch)
    out = []
    for i in idx:
        s = sequences[i]
        if len(s) < window:
            s = np.concatenate([s, np.repeat(s[-1:], window - len(s), axis=0)])
        start = rng.integers(0, len(s) - window + 1)
        out.append(s[start:start + window])
    return np.stack(out)


def train_part(model: PartVQVAE, train_seqs: list[np.ndarray], val_seqs: list[np.ndarray],
               config: VqConfig, rng: np.random.Generator, steps: int | None = None) -> PartReport:
    steps = config.steps if steps is None else steps
    if not train_seqs:
        raise ValueError("empty training corpus")
    t0 = time.perf_counter()
    model.set_normalizer(np.concatenate(train_seqs, axis=0))
    val_seqs = val_seqs or train_seqs

    # codebook initialised from encoder outputs so every code starts near the data
    init_batch = _sample_windows(train_seqs, max(config.batch_size, 4), config.window, rng)
    with no_grad():
        z = model.encode_batch(init_batch).data.reshape(-1, model.codebook.dim)
    pick = rng.choice(len(z), size=model.codebook.size, replace=len(z) < model.codebook.size)
    model.codebook.entries.data = z[pick] + rng.normal(0, 1e-3, size=model.codebook.entries.shape)

    init_mse = reconstruction_mse(model, val_seqs)
    report = PartReport(model.part, init_mse, init_mse, 0, init_mse, val_curve=[(0, init_mse)])
    best_state = model.state()
    opt = AdamW(model.parameters(), lr=config.lr, weight_decay=config.weight_decay, grad_clip=config.grad_clip)
    recent = np.zeros(model.codebook.size, dtype=np.int64)

    for step in range(1, steps + 1):
        opt.state.lr = step_decay_lr(step, config.lr, config.lr_decay_step, config.lr_decayed)
        batch = _sample_windows(train_seqs, config.batch_size, config.window, rng)
        recon, q = model.forward(batch)
        rec_loss = mse(recon, model.normalize(batch))
        loss = rec_loss + q.vq_loss + config.beta * q.commit_loss
        if not np.isfinite(loss.data):
            raise NonFiniteError(f"VQ-VAE {model.part}: loss became {loss.item()} at step {step} "
                                 f"(recon {rec_loss.item():.4g}, vq {q.vq_loss.item():.4g})")
        opt.zero_grad()
        loss.backward()
        opt.step()
        recent += np.bincount(q.tokens.reshape(-1), minlength=model.codebook.size)
        report.train_loss.append((step, rec_loss.item(), q.vq_loss.item(), q.commit_loss.item()))

        if config.dead_code_every and step % config.dead_code_every == 0 and step < 0.8 * steps:
            dead = np.flatnonzero(recent == 0)
            if dead.size:
                with no_grad():
                    enc = model.encode_batch(batch).data.reshape(-1, model.codebook.dim)
                src = rng.choice(len(enc), size=dead.size, replace=len(enc) < dead.size)
                noise = rng.normal(0, 1e-3, size=(dead.size, model.codebook.dim))
                model.codebook.entries.data[dead] = enc[src] + noise
            recent[:] = 0

        if step % config.eval_every == 0 or step == steps:
            val = reconstruction_mse(model, val_seqs)
            report.val_curve.append((step, val))
            report.final_val_mse = val
            if val < report.best_val_mse:
                report.best_val_mse, report.best_step = val, step
                best_state = model.state()

    model.load_state(best_state)
    model.codebook.reset_usage()
    reconstruction_mse(model, val_seqs, track_usage=True)
    report.codebook = codebook_stats(model.codebook)
    report.seconds = time.perf_counter() - t0
    log.info("vq %s: val mse %.4g -> %.4g (step %d), perplexity %.1f", model.part, init_mse,
             report.best_val_mse, report.best_step, report.codebook["perplexity"])
    return report


def train_vqvae(corpus: list[TextMotionPair], config: VqConfig | None = None,
                steps: int | None = None) -> tuple[PartVQVAESet, dict[str, PartReport]]:
    """Train all configured part tokenizers on the train split, selecting on val."""
    config = config or VqConfig()
    if not corpus:
        raise ValueError("empty corpus")
    train = [p for p in corpus if p.split == "train"] or list(corpus)
    val = [p for p in corpus if p.split == "val"]
    train_arrays, val_arrays = _part_arrays(train), _part_arrays(val)
    vqs = PartVQVAESet(config)
    reports = {}
    for k, part in enumerate(PART_NAMES):
        if part not in config.parts:
            continue
        rng = make_rng(config.seed, "vq-train", part)
        reports[part] = train_part(vqs[part], train_arrays[k], val_arrays[k], config, rng, steps)
    return vqs, reports
