"""Two-pass decoding of part token sequences.

Pass 1 decodes all six parts in lockstep under the causal mask: at step ``t``
every part predicts its token ``t`` from text plus all parts' tokens through
``t - 1``. A part's END step is the number of motion tokens it produced
before emitting END; the sequence length ``L*`` is the earliest step by which
``end_quorum`` parts (default 4 of 6) have ended. Parts that end early keep
producing codebook tokens (END excluded) so every part has ``L*`` tokens.

Pass 2 hides the even positions ``2, 4, ...`` and re-predicts them in one
parallel pass with the odd positions, text slot and END left visible.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..autodiff import make_rng, no_grad
from ..motion import N_PARTS, PoseSequence
from ..transformer import BiPartTransformer, build_bp_mask, build_causal_mask, padded_mask

DEFAULT_QUORUM = 4


@dataclass(frozen=True)
class SamplerConfig:
    mode: str = "temperature"      # "greedy" or "temperature"
    temperature: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("greedy", "temperature"):
            raise ValueError(f"unknown sampler mode {self.mode!r}")
        if self.temperature <= 0:
            raise ValueError("temperature must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)


def sample_from_logits(logits: np.ndarray, sampler: SamplerConfig, rng: np.random.Generator,
                       allowed: np.ndarray | None = None) -> np.ndarray:
    """Pick one id per row of ``logits`` (last axis = vocabulary).

    ``allowed`` (broadcastable boolean) restricts the choice. Greedy takes the
    first maximal id; temperature sampling draws by inverse CDF from one uniform
    per row, so the rng is consumed identically for every vocabulary size.
    """
    z = np.array(logits, dtype=np.float64)
    if allowed is not None:
        z = np.where(allowed, z, -np.inf)
    if sampler.mode == "greedy":
        return z.argmax(axis=-1)
    z = z / sampler.temperature
    z = z - z.max(axis=-1, keepdims=True)
    p = np.exp(z)
    cdf = np.cumsum(p, axis=-1)
    u = rng.random(z.shape[:-1])[..., None] * cdf[..., -1:]
    idx = (cdf <= u).sum(axis=-1)
    return np.minimum(idx, z.shape[-1] - 1)


def majority_length(end_steps, max_tokens: int, quorum: int = DEFAULT_QUORUM) -> tuple[int, bool]:
    """Earliest step by which ``quorum`` parts have ended; ``(max_tokens, True)`` if none.

    ``end_steps`` holds one entry per part (None for a part that never ended).
    """
    steps = sorted(s for s in end_steps if s is not None)
    if len(steps) >= quorum:
        return min(steps[quorum - 1], max_tokens), False
    return max_tokens, True


@dataclass
class Pass1Result:
    tokens: list                 # per example: (6, L*) codebook ids
    lengths: list                # L* per example
    end_steps: list              # per example: six END steps (None if never ended)
    truncated: list              # per example: True when max_tokens was hit without a quorum


def generate_pass1(model: BiPartTransformer, texts: list, max_tokens: int | None = None,
                   sampler: SamplerConfig | None = None, rng: np.random.Generator | None = None,
                   quorum: int = DEFAULT_QUORUM) -> Pass1Result:
    cfg = model.cfg
    sampler = sampler or SamplerConfig(mode="greedy")
    rng = rng if rng is not None else make_rng(sampler.seed, "sample")
    max_tokens = cfg.max_tokens if max_tokens is None else min(max_tokens, cfg.max_tokens)
    B, K = len(texts), cfg.codebook_size
    seq = np.full((N_PARTS, B, max_tokens + 1), cfg.pad_id, dtype=np.int64)
    end_steps = [[None] * N_PARTS for _ in range(B)]
    done = np.zeros(B, dtype=bool)
    lengths = [max_tokens] * B
    truncated = [True] * B
    allowed_all = np.ones(cfg.output_vocab, dtype=bool)
    codes_only = allowed_all.copy()
    codes_only[K] = False
    with no_grad():
        c0 = model.encode_text(texts)
        for t in range(1, max_tokens + 2):
            causal = build_causal_mask(t - 2).additive if t >= 2 else np.zeros((1, 1))
            masks = np.broadcast_to(causal, (B, t, t)).copy()
            logits = model(seq[:, :, :t], c0, masks).data[:, :, t - 1]       # (6, B, V)
            ended = np.array([[end_steps[b][i] is not None for b in range(B)] for i in range(N_PARTS)])
            last = t == max_tokens + 1
            # END is not allowed as the first token; an ended part only draws codebook ids
            allowed = np.where((ended | (t == 1))[..., None], codes_only, allowed_all)
            pick = sample_from_logits(logits, sampler, rng, allowed)
            fallback = sample_from_logits(logits, sampler, rng, codes_only)
            for i in range(N_PARTS):
                for b in range(B):
                    if pick[i, b] == K:
                        end_steps[b][i] = t - 1
                        pick[i, b] = fallback[i, b]
            if not last:
                seq[:, :, t] = pick
            for b in range(B):
                if not done[b]:
                    L, trunc = majority_length(end_steps[b], max_tokens, quorum)
                    if not trunc:
                        done[b], lengths[b], truncated[b] = True, L, False
            if done.all() or last:
                break
    tokens = [seq[:, b, 1:lengths[b] + 1].copy() for b in range(B)]
    return Pass1Result(tokens, lengths, end_steps, truncated)


def refine_unmask_set(L: int) -> frozenset:
    """Positions kept visible in pass 2: text slot, END and every odd position."""
    return frozenset({0, L + 1} | set(range(1, L + 1, 2)))


def refine_pass2(model: BiPartTransformer, texts: list, tokens: list, sampler: SamplerConfig | None = None,
                 rng: np.random.Generator | None = None) -> list:
    """Re-predict even positions of each ``(6, L)`` token array in a single masked pass."""
    cfg = model.cfg
    sampler = sampler or SamplerConfig(mode="greedy")
    rng = rng if rng is not None else make_rng(sampler.seed, "refine")
    B = len(tokens)
    lengths = [t.shape[1] for t in tokens]
    if max(lengths) < 2:
        return [t.copy() for t in tokens]
    T = max(lengths) + 2
    seq = np.full((N_PARTS, B, T), cfg.pad_id, dtype=np.int64)
    masks = np.empty((B, T, T))
    for b, (tok, L) in enumerate(zip(tokens, lengths)):
        seq[:, b, 1:L + 1] = tok
        seq[:, b, L + 1] = cfg.end_id
        seq[:, b, 2:L + 1:2] = cfg.mask_id
        masks[b] = padded_mask(build_bp_mask(L, refine_unmask_set(L)), T)
    codes_only = np.arange(cfg.output_vocab) < cfg.codebook_size
    with no_grad():
        logits = model(seq, model.encode_text(texts), masks).data
    pick = sample_from_logits(logits, sampler, rng, codes_only)
    out = []
    for b, (tok, L) in enumerate(zip(tokens, lengths)):
        new = tok.copy()
        new[:, 1::2] = pick[:, b, 2:L + 1:2]   # 0-based column j holds position j + 1
        out.append(new)
    return out


@dataclass
class GenerationConfig:
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    refine: bool = True
    max_tokens: int | None = None
    quorum: int = DEFAULT_QUORUM

    def to_dict(self) -> dict:
        return {"sampler": self.sampler.to_dict(), "refine": self.refine, "max_tokens": self.max_tokens,
                "quorum": self.quorum}


@dataclass
class GenerationRun:
    text: tuple
    seed: int
    length: int
    end_steps: list
    truncated: bool
    refined: bool
    tokens: np.ndarray          # (6, L*)
    pose: PoseSequence | None = None

    def record(self) -> dict:
        return {"text": " ".join(self.text), "seed": self.seed, "length": self.length,
                "end_steps": list(self.end_steps), "truncated": self.truncated, "refined": self.refined,
                "tokens": self.tokens.tolist()}


def generate_tokens(model: BiPartTransformer, texts: list, config: GenerationConfig | None = None,
                    rng: np.random.Generator | None = None) -> list[GenerationRun]:
    config = config or GenerationConfig()
    rng = rng if rng is not None else make_rng(config.sampler.seed, "generate")
    texts = [tuple(t) for t in texts]
    p1 = generate_pass1(model, texts, config.max_tokens, config.sampler, rng, config.quorum)
    tokens = refine_pass2(model, texts, p1.tokens, config.sampler, rng) if config.refine else p1.tokens
    return [GenerationRun(t, config.sampler.seed, L, e, tr, config.refine, tok)
            for t, L, e, tr, tok in zip(texts, p1.lengths, p1.end_steps, p1.truncated, tokens)]


def generate(model: BiPartTransformer, vqs, texts: list, config: GenerationConfig | None = None,
             rng: np.random.Generator | None = None) -> list[GenerationRun]:
    """Text -> tokens (pass 1, optional pass 2) -> per-part decoding -> merged pose."""
    runs = generate_tokens(model, texts, config, rng)
    for run in runs:
        run.pose = vqs.decode(list(run.tokens))
    return runs
