"""Nearest-codeword vector quantization with a straight-through estimator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import Module, Tensor, param, take


class Codebook(Module):
    """``K`` learnable code vectors of dimension ``D`` plus a running usage count."""

    def __init__(self, size: int, dim: int, rng: np.random.Generator | None = None):
        if size < 1 or dim < 1:
            raise ValueError("codebook size and dim must be positive")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.entries = param(rng.uniform(-1.0 / size, 1.0 / size, size=(size, dim)))
        self.usage = np.zeros(size, dtype=np.int64)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def dim(self) -> int:
        return self.entries.shape[1]

    def reset_usage(self) -> None:
        self.usage[:] = 0


def squared_distances(latents: np.ndarray, entries: np.ndarray) -> np.ndarray:
    """(N, D) x (K, D) -> (N, K) squared Euclidean distances.

    Computed as an explicit difference rather than the expanded
    ``|z|^2 - 2 z.e + |e|^2`` form so equal distances compare equal bit for bit,
    which keeps the lowest-index tie-break meaningful.
    """
    diff = latents[:, None, :] - entries[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def nearest_codes(latents: np.ndarray, entries: np.ndarray) -> np.ndarray:
    """Index of the closest codeword per row; ties go to the lowest index."""
    if latents.shape[-1] != entries.shape[-1]:
        raise ValueError(f"latent dim {latents.shape[-1]} != code dim {entries.shape[-1]}")
    flat = latents.reshape(-1, latents.shape[-1])
    return np.argmin(squared_distances(flat, entries), axis=1).reshape(latents.shape[:-1])


@dataclass
class Quantized:
    tokens: np.ndarray
    quantized: Tensor      # straight-through output, same shape as the latents
    vq_loss: Tensor        # ||sg(z) - e||^2, trains the codebook
    commit_loss: Tensor    # ||z - sg(e)||^2, trains the encoder


def quantize(latents: Tensor, codebook: Codebook, track_usage: bool = False) -> Quantized:
    """Snap each latent (last axis) to its nearest codeword.

    The forward value equals the selected codewords; the backward pass routes
    the output gradient to ``latents`` unchanged (straight-through) and to the
    codebook only through ``vq_loss``.
    """
    tokens = nearest_codes(latents.data, codebook.entries.data)
    chosen = take(codebook.entries, tokens, axis=0)
    z_const = Tensor(latents.data)
    diff_vq = z_const - chosen
    vq_loss = (diff_vq * diff_vq).mean()
    diff_commit = latents - Tensor(chosen.data)
    commit_loss = (diff_commit * diff_commit).mean()
    quantized = latents + Tensor(chosen.data - latents.data)
    if track_usage:
        codebook.usage += np.bincount(tokens.reshape(-1), minlength=codebook.size)
    return Quantized(tokens, quantized, vq_loss, commit_loss)


def lookup(tokens: np.ndarray, codebook: Codebook) -> Tensor:
    tokens = np.asarray(tokens)
    if tokens.size and (tokens.min() < 0 or tokens.max() >= codebook.size):
        bad = tokens[(tokens < 0) | (tokens >= codebook.size)][0]
        raise ValueError(f"token id {int(bad)} outside codebook of size {codebook.size}")
    return take(codebook.entries, tokens.astype(np.int64), axis=0)


def perplexity(counts: np.ndarray) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(np.exp(-(p * np.log(p)).sum()))


def codebook_stats(codebook: Codebook | np.ndarray) -> dict:
    """Usage histogram and perplexity (``exp`` of the usage entropy, in [1, K])."""
    counts = codebook.usage if isinstance(codebook, Codebook) else np.asarray(codebook)
    return {
        "usage": [int(c) for c in counts],
        "total": int(np.sum(counts)),
        "used_entries": int(np.count_nonzero(counts)),
        "perplexity": perplexity(counts),
    }
