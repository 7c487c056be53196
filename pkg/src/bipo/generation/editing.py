"""Motion editing by masked token prediction.

Region arithmetic for ``L`` motion tokens (positions ``1..L``), with
``q = floor(L / 4)`` and ``h = floor(L / 2)``:

=========  ===================================  ==========================
mode       given (kept from the source)         generated
=========  ===================================  ==========================
inpaint    ``1..q`` and ``L-q+1..L``            the middle
outpaint   ``q+1..L-q``                          both outer ends
prefix     ``1..h``                              ``h+1..L``
suffix     ``h+1..L``                            ``1..h``
=========  ===================================  ==========================

For odd ``L`` the floor puts the extra token in the later region (prefix and
suffix) or in the middle (inpaint and outpaint).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import make_rng, no_grad
from ..motion import N_PARTS
from ..transformer import BiPartTransformer, build_bp_mask
from .decoding import SamplerConfig, sample_from_logits

EDIT_MODES = ("inpaint", "outpaint", "prefix", "suffix")
MIN_EDIT_TOKENS = 4


def edit_regions(mode: str, L: int) -> tuple[list[int], list[int]]:
    """(given, generated) 1-based positions; together they partition ``1..L``."""
    if mode not in EDIT_MODES:
        raise ValueError(f"unknown edit mode {mode!r}; expected one of {EDIT_MODES}")
    if L < MIN_EDIT_TOKENS:
        raise ValueError(f"motion too short to edit: {L} tokens (need >= {MIN_EDIT_TOKENS})")
    q, h = L // 4, L // 2
    positions = range(1, L + 1)
    if mode == "inpaint":
        given = [p for p in positions if p <= q or p > L - q]
    elif mode == "outpaint":
        given = [p for p in positions if q < p <= L - q]
    elif mode == "prefix":
        given = [p for p in positions if p <= h]
    else:
        given = [p for p in positions if p > h]
    generated = [p for p in positions if p not in set(given)]
    return given, generated


@dataclass(frozen=True)
class EditSpec:
    mode: str
    source: np.ndarray        # (6, L) source tokens

    def __post_init__(self):
        if self.source.ndim != 2 or self.source.shape[0] != N_PARTS:
            raise ValueError("edit source must be a (6, L) token array")
        edit_regions(self.mode, self.length)

    @property
    def length(self) -> int:
        return self.source.shape[1]

    @property
    def given(self) -> list[int]:
        return edit_regions(self.mode, self.length)[0]

    @property
    def generated(self) -> list[int]:
        return edit_regions(self.mode, self.length)[1]

    @property
    def unmask(self) -> frozenset:
        return frozenset({0, self.length + 1} | set(self.given))


def edit_tokens(model: BiPartTransformer, spec: EditSpec, text, sampler: SamplerConfig | None = None,
                rng: np.random.Generator | None = None) -> np.ndarray:
    """Fill the generated region in one masked pass; given tokens are copied verbatim."""
    cfg = model.cfg
    sampler = sampler or SamplerConfig(mode="greedy")
    rng = rng if rng is not None else make_rng(sampler.seed, "edit")
    L = spec.length
    if L > cfg.max_tokens:
        raise ValueError(f"source has {L} tokens, model supports at most {cfg.max_tokens}")
    seq = np.empty((N_PARTS, 1, L + 2), dtype=np.int64)
    seq[:, 0, 1:L + 1] = spec.source
    seq[:, 0, 0] = cfg.pad_id
    seq[:, 0, L + 1] = cfg.end_id
    gen = np.array(spec.generated)
    seq[:, 0, gen] = cfg.mask_id
    mask = build_bp_mask(L, spec.unmask).additive[None]
    codes_only = np.arange(cfg.output_vocab) < cfg.codebook_size
    with no_grad():
        logits = model(seq, model.encode_text([tuple(text)]), mask).data[:, 0]
    pick = sample_from_logits(logits, sampler, rng, codes_only)
    out = spec.source.copy()
    out[:, gen - 1] = pick[:, gen]
    return out


def edit(model: BiPartTransformer, vqs, spec: EditSpec, text, sampler: SamplerConfig | None = None,
         rng: np.random.Generator | None = None):
    """Edited pose plus the edited token array."""
    tokens = edit_tokens(model, spec, text, sampler, rng)
    return vqs.decode(list(tokens)), tokens
