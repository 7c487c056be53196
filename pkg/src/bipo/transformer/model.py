"""Six coordinated part transformers conditioned on a text embedding.

All per-part weights are stacked along a leading axis of size 6, so hidden
states have shape ``(parts, batch, positions, dim)`` and a single batched
matmul serves every part. Coordination layers sit in front of every block
except the first and mix each part with the other five at the same position.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..autodiff import LayerNorm, Linear, Module, Tensor, make_rng, masked_softmax, matmul, param, take, where
from ..autodiff.module import init_normal
from ..motion import N_PARTS, TEXT_VOCAB

# canonical order of the five source parts seen by each observer part
OTHER_PARTS = np.array([[j for j in range(N_PARTS) if j != i] for i in range(N_PARTS)])


@dataclass
class T2MConfig:
    codebook_size: int = 64
    max_tokens: int = 16           # longest motion-token sequence (64 frames at r = 4)
    n_layers: int = 2
    dim: int = 64
    n_heads: int = 4
    ff_mult: int = 4
    coord_hidden: int = 64
    coordination: bool = True
    lam: float = 0.5               # weight of the causal term in the hybrid loss
    rho_lo: float = 0.5
    rho_hi: float = 1.0
    po_prob: float = 0.4           # partial-occlusion probability
    strict_mask: bool = False
    text_vocab: tuple = field(default_factory=lambda: tuple(TEXT_VOCAB))
    head_std: float = 0.02
    activation: str = "relu"       # "relu" or "gelu" for the feed-forward and coordination MLPs
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if not 0.0 <= self.rho_lo <= self.rho_hi <= 1.0:
            raise ValueError("mask-ratio interval must satisfy 0 <= lo <= hi <= 1")
        if not 0.0 <= self.po_prob <= 1.0:
            raise ValueError("occlusion probability must lie in [0, 1]")
        if self.dim % self.n_heads:
            raise ValueError("dim must be divisible by n_heads")
        if self.n_layers < 1:
            raise ValueError("need at least one layer")
        if self.activation not in ("relu", "gelu"):
            raise ValueError(f"unknown activation {self.activation!r}")
        self.text_vocab = tuple(self.text_vocab)

    # special token ids follow the K codebook entries
    @property
    def end_id(self) -> int:
        return self.codebook_size

    @property
    def mask_id(self) -> int:
        return self.codebook_size + 1

    @property
    def pad_id(self) -> int:
        return self.codebook_size + 2

    @property
    def input_vocab(self) -> int:
        return self.codebook_size + 3

    @property
    def output_vocab(self) -> int:
        """Codebook entries plus END."""
        return self.codebook_size + 1

    @property
    def max_positions(self) -> int:
        return self.max_tokens + 2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["text_vocab"] = list(self.text_vocab)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "T2MConfig":
        return cls(**d)


def activate(x: Tensor, name: str) -> Tensor:
    return x.gelu() if name == "gelu" else x.relu()


class TextEncoder(Module):
    """Bag-of-words text encoder: word embeddings, mean pooling, two-layer projection."""

    def __init__(self, rng, vocab: tuple, dim: int):
        self.vocab = {w: i for i, w in enumerate(vocab)}
        self.embed = init_normal(rng, (len(vocab), dim), 1.0)
        self.proj1 = Linear(rng, dim, dim)
        self.proj2 = Linear(rng, dim, dim)

    def ids(self, words) -> list[int]:
        words = list(words)
        if not words:
            raise ValueError("empty text")
        try:
            return [self.vocab[w] for w in words]
        except KeyError as exc:
            raise ValueError(f"unknown token {exc.args[0]!r}") from None

    def __call__(self, texts: list) -> Tensor:
        ids = [self.ids(t) for t in texts]
        width = max(len(i) for i in ids)
        mat = np.zeros((len(ids), width), dtype=np.int64)
        weight = np.zeros((len(ids), width, 1))
        for b, row in enumerate(ids):
            mat[b, :len(row)] = row
            weight[b, :len(row)] = 1.0 / len(row)
        pooled = (take(self.embed, mat) * Tensor(weight)).sum(axis=1)
        return self.proj2(self.proj1(pooled).gelu())


class Block(Module):
    """Pre-norm transformer block with one weight set per part."""

    def __init__(self, rng, cfg: T2MConfig):
        d, s = cfg.dim, N_PARTS
        self.n_heads = cfg.n_heads
        self.act = cfg.activation
        self.ln1 = LayerNorm(d, stack=s)
        self.qkv = Linear(rng, d, 3 * d, stack=s)
        self.out = Linear(rng, d, d, stack=s, std=0.02)
        self.ln2 = LayerNorm(d, stack=s)
        self.ff1 = Linear(rng, d, cfg.ff_mult * d, stack=s)
        self.ff2 = Linear(rng, cfg.ff_mult * d, d, stack=s, std=0.02)

    def __call__(self, x: Tensor, mask: np.ndarray) -> Tensor:
        P, B, T, d = x.shape
        h, dk = self.n_heads, d // self.n_heads
        qkv = self.qkv(self.ln1(x)).reshape(P, B, T, 3, h, dk)
        q = qkv[:, :, :, 0].transpose(0, 1, 3, 2, 4)
        k = qkv[:, :, :, 1].transpose(0, 1, 3, 2, 4)
        v = qkv[:, :, :, 2].transpose(0, 1, 3, 2, 4)
        scores = matmul(q, k.swapaxes(-1, -2)) * (1.0 / np.sqrt(dk))
        attn = masked_softmax(scores, mask[None, :, None])
        ctx = matmul(attn, v).transpose(0, 1, 3, 2, 4).reshape(P, B, T, d)
        x = x + self.out(ctx)
        return x + self.ff2(activate(self.ff1(self.ln2(x)), self.act))


class CoordinationLayer(Module):
    """``out_i = LN_i(h_i + MLP([h_j for j != i]))`` with one MLP shared by all parts.

    Source tokens flagged by the occlusion mask are swapped for a learned
    occlusion embedding before the MLP, so their values cannot reach the output.
    The last MLP layer starts at zero, making the layer ``LN_i(h_i)`` at init.
    """

    def __init__(self, rng, cfg: T2MConfig):
        d, hid = cfg.dim, cfg.coord_hidden
        self.act = cfg.activation
        self.occlusion = init_normal(rng, (d,), 0.02)
        self.fc1 = Linear(rng, (N_PARTS - 1) * d, hid)
        self.fc2 = Linear(rng, hid, hid)
        self.fc3 = Linear(rng, hid, d, zero=True)
        self.ln = LayerNorm(d, stack=N_PARTS)

    def gather_sources(self, h: Tensor, occ: np.ndarray | None) -> Tensor:
        """(P, B, T, d) -> (P, B, T, 5d): each observer's five sources, occlusions applied."""
        P, B, T, d = h.shape
        src = take(h, OTHER_PARTS, axis=0)                       # (P, 5, B, T, d)
        if occ is not None:
            # occ[b, i, j, t]: observer i cannot see source j at position t
            sel = occ[:, np.arange(P)[:, None], OTHER_PARTS]      # (B, P, 5, T)
            sel = np.transpose(sel, (1, 2, 0, 3))[..., None]       # (P, 5, B, T, 1)
            src = where(np.broadcast_to(sel, src.shape), self.occlusion, src)
        return src.transpose(0, 2, 3, 1, 4).reshape(P, B, T, (P - 1) * d)

    def __call__(self, h: Tensor, occ: np.ndarray | None) -> Tensor:
        m = self.fc3(activate(self.fc2(activate(self.fc1(self.gather_sources(h, occ)), self.act)), self.act))
        return self.ln(h + m)


class BiPartTransformer(Module):
    def __init__(self, cfg: T2MConfig, rng: np.random.Generator | None = None):
        self.cfg = cfg
        rng = rng if rng is not None else make_rng(cfg.seed, "t2m-init")
        d = cfg.dim
        self.text = TextEncoder(rng, cfg.text_vocab, d)
        self.tok_emb = init_normal(rng, (N_PARTS * cfg.input_vocab, d), 0.02 * np.sqrt(d))
        self.pos_emb = init_normal(rng, (N_PARTS, 1, cfg.max_positions, d), 0.02 * np.sqrt(d))
        self.blocks = [Block(rng, cfg) for _ in range(cfg.n_layers)]
        n_coord = cfg.n_layers - 1 if cfg.coordination else 0
        self.coords = [CoordinationLayer(rng, cfg) for _ in range(n_coord)]
        self.ln_f = LayerNorm(d, stack=N_PARTS)
        self.head = Linear(rng, d, cfg.output_vocab, stack=N_PARTS, std=cfg.head_std)

    def encode_text(self, texts) -> Tensor:
        """Texts (lists of words) -> (B, dim) conditioning vectors ``c0``.

        A float array of shape (B, dim) is taken as precomputed conditioning
        vectors (e.g. embeddings from an external text model, projected to ``dim``)
        and bypasses the built-in encoder.
        """
        if isinstance(texts, np.ndarray) and texts.dtype.kind == "f":
            if texts.ndim != 2 or texts.shape[1] != self.cfg.dim:
                raise ValueError(f"precomputed text embeddings must have shape (B, {self.cfg.dim})")
            return Tensor(texts)
        return self.text(texts)

    def embed(self, tokens: np.ndarray, c0: Tensor) -> Tensor:
        """tokens (P, B, T) input ids; index 0 of every sequence is overwritten by ``c0``."""
        P, B, T = tokens.shape
        if T > self.cfg.max_positions:
            raise ValueError(f"sequence of {T} positions exceeds max {self.cfg.max_positions}")
        if tokens.min() < 0 or tokens.max() >= self.cfg.input_vocab:
            raise ValueError("input token id out of range")
        offset = (np.arange(P) * self.cfg.input_vocab)[:, None, None]
        tok = take(self.tok_emb, tokens + offset)                  # (P, B, T, d)
        slot0 = np.zeros((1, 1, T, 1))
        slot0[..., 0, :] = 1.0
        text = c0.reshape(1, B, 1, self.cfg.dim) * Tensor(slot0)
        return tok * Tensor(1.0 - slot0) + text + self.pos_emb[:, :, :T]

    def forward(self, tokens: np.ndarray, c0: Tensor, masks: np.ndarray,
                occ: np.ndarray | None = None) -> Tensor:
        """Per-part logits ``(P, B, T, K+1)``.

        ``masks``: additive ``(B, T, T)``. ``occ``: boolean ``(B, P, P, T)`` occlusion
        pattern shared by every coordination layer, or None for full visibility.
        """
        tokens = np.asarray(tokens, dtype=np.int64)
        P, B, T = tokens.shape
        if P != N_PARTS:
            raise ValueError(f"expected {N_PARTS} part sequences, got {P}")
        if masks.shape != (B, T, T):
            raise ValueError(f"mask shape {masks.shape} != {(B, T, T)}")
        if occ is not None and occ.shape != (B, P, P, T):
            raise ValueError(f"occlusion shape {occ.shape} != {(B, P, P, T)}")
        h = self.embed(tokens, c0)
        for depth, block in enumerate(self.blocks):
            if depth > 0 and self.coords:
                h = self.coords[depth - 1](h, occ)
            h = block(h, masks)
        return self.head(self.ln_f(h))

    __call__ = forward


def sample_po_mask(n_parts: int, length: int, p: float, rng: np.random.Generator,
                   batch: int | None = None) -> np.ndarray:
    """Boolean occlusion pattern ``[observer, source, position]`` (optionally batched).

    Every off-diagonal entry is occluded independently with probability ``p``; a
    part never occludes itself.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("occlusion probability must lie in [0, 1]")
    lead = () if batch is None else (batch,)
    occ = rng.random(lead + (n_parts, n_parts, length)) < p
    occ[..., np.arange(n_parts), np.arange(n_parts), :] = False
    return occ


def coordination_layer(layer: CoordinationLayer, states: Tensor, occ: np.ndarray | None) -> Tensor:
    return layer(states, occ)
