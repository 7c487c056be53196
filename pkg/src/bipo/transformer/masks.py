"""Attention masks over a part token sequence.

A sequence of ``L`` motion tokens occupies indices ``0..L+1``: index 0 is the
text slot, ``1..L`` are motion tokens and ``L+1`` is END. Masks are additive
(0 = allowed, -inf = forbidden) with shape ``(L+2, L+2)``, rows are queries.

Bidirectional rule, for an unmask set ``U``::

    allowed(q, k)  <=>  (q >= k and q not in U)  or  k in U

The causal mask is the same rule with ``U`` empty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NEG_INF = -np.inf


@dataclass(frozen=True)
class AttentionMask:
    additive: np.ndarray
    unmasked: frozenset
    strict: bool = False

    def __post_init__(self):
        a = self.additive
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("attention mask must be square")
        if not np.all((a == 0.0) | (a == NEG_INF)):
            raise ValueError("attention mask entries must be 0 or -inf")
        a.setflags(write=False)

    @property
    def length(self) -> int:
        """Number of motion tokens ``L``."""
        return self.additive.shape[0] - 2

    @property
    def allowed(self) -> np.ndarray:
        return self.additive == 0.0

    def __eq__(self, other) -> bool:
        return (isinstance(other, AttentionMask) and self.unmasked == other.unmasked
                and self.strict == other.strict and np.array_equal(self.additive, other.additive))

    def __hash__(self) -> int:
        return hash((self.additive.shape, self.unmasked, self.strict))


def _check_unmask(L: int, U) -> frozenset:
    if L < 0:
        raise ValueError("sequence length must be >= 0")
    U = frozenset(int(u) for u in U)
    bad = [u for u in U if not 0 <= u <= L + 1]
    if bad:
        raise ValueError(f"unmask index {min(bad)} outside 0..{L + 1}")
    return U


def build_bp_mask(L: int, U=(), strict: bool = False) -> AttentionMask:
    """Bidirectional mask for unmask set ``U``.

    With ``strict=True`` a masked query may see only unmasked keys and itself
    (masked tokens never attend to other masked tokens, even earlier ones).
    """
    U = _check_unmask(L, U)
    n = L + 2
    in_u = np.zeros(n, dtype=bool)
    in_u[list(U)] = True
    q = np.arange(n)[:, None]
    k = np.arange(n)[None, :]
    if strict:
        allowed = ((q == k) & ~in_u[:, None]) | in_u[None, :]
    else:
        allowed = ((q >= k) & ~in_u[:, None]) | in_u[None, :]
    return AttentionMask(np.where(allowed, 0.0, NEG_INF), U, strict)


def build_causal_mask(L: int) -> AttentionMask:
    return build_bp_mask(L, ())


def masked_count(L: int, rho: float) -> int:
    """Motion tokens hidden for mask ratio ``rho``: ``ceil(rho * L)``, clipped to ``[0, L]``."""
    # round before ceil so 0.3 * 10 = 3.0000000000000004 does not become 4
    return int(min(L, max(0, math.ceil(round(rho * L, 9)))))


def sample_bp_unmask_set(L: int, rho_range=(0.5, 1.0), rng: np.random.Generator | None = None,
                         rho: float | None = None) -> frozenset:
    """Draw ``rho ~ U[rho_lo, rho_hi]``, hide ``ceil(rho L)`` motion tokens uniformly at
    random and return the unmask set (always containing the text slot 0 and END ``L+1``)."""
    if L < 1:
        raise ValueError("need at least one motion token")
    lo, hi = rho_range
    if not 0.0 <= lo <= hi <= 1.0:
        raise ValueError("mask-ratio interval must satisfy 0 <= lo <= hi <= 1")
    rng = rng if rng is not None else np.random.default_rng()
    if rho is None:
        rho = float(rng.uniform(lo, hi))
    hidden = set(rng.choice(np.arange(1, L + 1), size=masked_count(L, rho), replace=False).tolist())
    return frozenset({0, L + 1} | (set(range(1, L + 1)) - hidden))


def padded_mask(mask: AttentionMask, size: int) -> np.ndarray:
    """Embed an ``(L+2)``-square mask in a ``size``-square one for batching.

    Padding keys are forbidden for every real query; padding queries see only
    themselves so each softmax row stays well defined. Their outputs are ignored.
    """
    n = mask.additive.shape[0]
    if size < n:
        raise ValueError("padded size smaller than mask")
    out = np.full((size, size), NEG_INF)
    out[:n, :n] = mask.additive
    idx = np.arange(n, size)
    out[idx, idx] = 0.0
    return out
