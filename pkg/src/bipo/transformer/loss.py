"""Token batches and the hybrid causal / bidirectional objective."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor, concat, cross_entropy, no_grad
from ..motion import N_PARTS
from .masks import build_bp_mask, build_causal_mask, padded_mask, sample_bp_unmask_set
from .model import BiPartTransformer, T2MConfig, sample_po_mask


@dataclass(frozen=True)
class TokenExample:
    """One caption with its six aligned token sequences (no text slot, no END)."""
    text: tuple
    tokens: np.ndarray  # (6, L) codebook ids
    template: str = ""

    @property
    def length(self) -> int:
        return self.tokens.shape[1]


@dataclass(frozen=True)
class HybridLossConfig:
    lam: float = 0.5
    rho_lo: float = 0.5
    rho_hi: float = 1.0
    po_prob: float = 0.4
    strict_mask: bool = False

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if not 0.0 <= self.rho_lo <= self.rho_hi <= 1.0:
            raise ValueError("mask-ratio interval must satisfy 0 <= lo <= hi <= 1")

    @classmethod
    def from_model(cls, cfg: T2MConfig) -> "HybridLossConfig":
        return cls(cfg.lam, cfg.rho_lo, cfg.rho_hi, cfg.po_prob, cfg.strict_mask)


def full_sequences(examples: list[TokenExample], cfg: T2MConfig) -> tuple[np.ndarray, np.ndarray]:
    """(6, B, T) ids laid out as [text slot, c_1..c_L, END, PAD...] and lengths (B,)."""
    lengths = np.array([e.length for e in examples])
    T = int(lengths.max()) + 2
    seq = np.full((N_PARTS, len(examples), T), cfg.pad_id, dtype=np.int64)
    for b, e in enumerate(examples):
        L = e.length
        if e.tokens.shape[0] != N_PARTS:
            raise ValueError("each example needs six part sequences")
        seq[:, b, 1:L + 1] = e.tokens
        seq[:, b, L + 1] = cfg.end_id
    return seq, lengths


@dataclass
class SampledMasks:
    """Randomness for one batch, drawn once and reusable across lambda values."""
    unmask: list            # frozenset per example
    occ: np.ndarray | None  # (B, 6, 6, T)


def sample_masks(examples: list[TokenExample], loss_cfg: HybridLossConfig, rng: np.random.Generator) -> SampledMasks:
    T = max(e.length for e in examples) + 2
    unmask = [sample_bp_unmask_set(e.length, (loss_cfg.rho_lo, loss_cfg.rho_hi), rng) for e in examples]
    occ = None
    if loss_cfg.po_prob > 0:
        occ = sample_po_mask(N_PARTS, T, loss_cfg.po_prob, rng, batch=len(examples))
    return SampledMasks(unmask, occ)


@dataclass
class LossParts:
    total: Tensor
    causal: Tensor
    bidirectional: Tensor
    causal_positions: int
    bp_positions: int
    causal_per_position: float   # mean over parts of the per-position causal NLL
    bp_per_position: float


def _part_nll(logits: Tensor, targets: np.ndarray, select: np.ndarray) -> tuple[Tensor, list[float]]:
    total, per = None, []
    for i in range(N_PARTS):
        ce = cross_entropy(logits[i], targets[i], select[i])
        per.append(ce.item())
        total = ce if total is None else total + ce
    return total, per


def hybrid_loss(model: BiPartTransformer, examples: list[TokenExample], loss_cfg: HybridLossConfig,
                rng: np.random.Generator | None = None, masks: SampledMasks | None = None,
                c0: Tensor | None = None) -> LossParts:
    """``lam * causal NLL + (1 - lam) * bidirectional NLL``, each summed over the six parts.

    The causal term predicts token ``t+1`` from position ``t`` (text slot through
    ``c_L``, the last target being END). The bidirectional term replaces every
    position outside the unmask set with the MASK token and predicts it in place.
    Both terms are mean NLLs over their selected positions, per part.
    """
    cfg = model.cfg
    if masks is None:
        if rng is None:
            raise ValueError("hybrid_loss needs an rng or pre-sampled masks")
        masks = sample_masks(examples, loss_cfg, rng)
    seq, lengths = full_sequences(examples, cfg)
    P, B, T = seq.shape
    pos = np.arange(T)

    # causal half: inputs as is, target at t is the token at t+1
    c_targets = np.concatenate([seq[:, :, 1:], np.full((P, B, 1), cfg.pad_id)], axis=2)
    c_select = np.broadcast_to((pos[None, :] <= lengths[:, None])[None], (P, B, T))
    c_masks = np.stack([padded_mask(build_causal_mask(L), T) for L in lengths])

    # bidirectional half: hide positions outside U, predict them in place
    hidden = np.ones((B, T), dtype=bool)
    for b, U in enumerate(masks.unmask):
        hidden[b, list(U)] = False
        hidden[b, lengths[b] + 2:] = False
    bp_inputs = np.where(hidden[None], cfg.mask_id, seq)
    b_select = np.broadcast_to(hidden[None], (P, B, T))
    b_masks = np.stack([padded_mask(build_bp_mask(L, U, strict=loss_cfg.strict_mask), T)
                        for L, U in zip(lengths, masks.unmask)])

    # one forward pass over both halves
    inputs = np.concatenate([seq, bp_inputs], axis=1)
    all_masks = np.concatenate([c_masks, b_masks], axis=0)
    occ = None if masks.occ is None else np.concatenate([masks.occ, masks.occ], axis=0)
    c0 = model.encode_text([e.text for e in examples]) if c0 is None else c0
    logits = model(inputs, concat([c0, c0], axis=0), all_masks, occ)

    causal, c_per = _part_nll(logits[:, :B], np.where(c_select, c_targets, 0), c_select)
    bidir, b_per = _part_nll(logits[:, B:], np.where(b_select, seq, 0), b_select)
    total = causal * loss_cfg.lam + bidir * (1.0 - loss_cfg.lam)
    return LossParts(total, causal, bidir, int(c_select[0].sum()), int(b_select[0].sum()),
                     float(np.mean(c_per)), float(np.mean(b_per)))


def next_token_accuracy(model: BiPartTransformer, examples: list[TokenExample]) -> float:
    """Teacher-forced greedy accuracy of the causal predictions (all parts, END included)."""
    cfg = model.cfg
    seq, lengths = full_sequences(examples, cfg)
    P, B, T = seq.shape
    masks = np.stack([padded_mask(build_causal_mask(L), T) for L in lengths])
    with no_grad():
        logits = model(seq, model.encode_text([e.text for e in examples]), masks).data
    pred = logits.argmax(-1)
    valid = np.arange(T)[None, :] <= lengths[:, None]
    hits = (pred[:, :, :-1] == seq[:, :, 1:]) & valid[None, :, :-1]
    return float(hits.sum() / (P * valid[:, :-1].sum()))
