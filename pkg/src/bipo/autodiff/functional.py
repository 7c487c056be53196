"""Fused differentiable ops used by the networks: masked softmax, layer norm,
cross entropy and strided 1-D convolution."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor

# Stand-in for -inf added before the softmax; disallowed entries are zeroed exactly afterwards.
MASK_SENTINEL = -1e9
LN_EPS = 1e-8


def masked_softmax(scores: Tensor, mask) -> Tensor:
    """Softmax over the last axis where ``mask`` is an additive 0/-inf array.

    ``mask`` may be an ``AttentionMask``-like object exposing ``.additive`` or a plain
    array broadcastable to ``scores``. Disallowed keys get probability exactly 0.
    """
    additive = getattr(mask, "additive", mask)
    additive = np.asarray(additive, dtype=np.float64)
    allowed = np.isfinite(additive) & (additive > MASK_SENTINEL / 2)
    allowed = np.broadcast_to(allowed, scores.shape)
    if not np.all(allowed.any(axis=-1)):
        raise ValueError("masked_softmax: a row has no allowed key")
    z = scores.data + np.where(allowed, np.where(np.isfinite(additive), additive, 0.0), MASK_SENTINEL)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z) * allowed
    p = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        scores._accum(p * (g - (g * p).sum(axis=-1, keepdims=True)))

    return Tensor._make(p, (scores,), "masked_softmax", bw)


def softmax(x: Tensor) -> Tensor:
    return masked_softmax(x, np.zeros(x.shape[-1]))


def log_softmax(x: Tensor) -> Tensor:
    z = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    out = z - lse
    sm = np.exp(out)

    def bw(g):
        x._accum(g - sm * g.sum(axis=-1, keepdims=True))

    return Tensor._make(out, (x,), "log_softmax", bw)


def layer_norm(x: Tensor, gain: Tensor | None = None, bias: Tensor | None = None,
               eps: float = LN_EPS) -> Tensor:
    """Normalize over the last axis, then apply an optional affine map."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    n = x.shape[-1]
    g_data = gain.data if gain is not None else None
    out = xhat * g_data if g_data is not None else xhat.copy()
    if bias is not None:
        out = out + bias.data
    parents = tuple(t for t in (x, gain, bias) if t is not None)

    def bw(g):
        if gain is not None and gain.requires_grad:
            gain._accum((g * xhat).reshape(-1, n).sum(axis=0).reshape(gain.shape))
        if bias is not None and bias.requires_grad:
            bias._accum(g.reshape(-1, n).sum(axis=0).reshape(bias.shape))
        if x.requires_grad:
            gx = g * g_data if g_data is not None else g
            x._accum(inv * (gx - gx.mean(axis=-1, keepdims=True)
                            - xhat * (gx * xhat).mean(axis=-1, keepdims=True)))

    return Tensor._make(out, parents, "layer_norm", bw)


def cross_entropy(logits: Tensor, targets, mask=None) -> Tensor:
    """Mean negative log-likelihood of ``targets`` under ``logits`` (positions x vocab).

    Leading dims of ``logits`` are flattened. ``mask`` selects which positions count;
    the mean is over selected positions only.
    """
    vocab = logits.shape[-1]
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    flat = logits.data.reshape(-1, vocab)
    if flat.shape[0] != targets.shape[0]:
        raise ValueError(f"cross_entropy: {flat.shape[0]} positions but {targets.shape[0]} targets")
    sel = np.ones(targets.shape, dtype=bool) if mask is None else np.asarray(mask, bool).reshape(-1)
    if np.any((targets[sel] < 0) | (targets[sel] >= vocab)):
        raise ValueError("cross_entropy: target index out of vocabulary")
    count = int(sel.sum())
    if count == 0:
        return Tensor._make(np.array(0.0), (logits,), "cross_entropy", lambda g: None)
    safe_t = np.where(sel, targets, 0)
    z = flat - flat.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1))
    nll = lse - z[np.arange(len(safe_t)), safe_t]
    loss = float((nll * sel).sum() / count)

    def bw(g):
        p = np.exp(z - lse[:, None])
        p[np.arange(len(safe_t)), safe_t] -= 1.0
        p *= (sel / count)[:, None] * float(g)
        logits._accum(p.reshape(logits.shape))

    return Tensor._make(np.array(loss), (logits,), "cross_entropy", bw)


def conv1d_output_length(length: int, kernel: int, stride: int = 1, padding: int = 0) -> int:
    """``floor((length + 2*padding - kernel) / stride) + 1``."""
    return (length + 2 * padding - kernel) // stride + 1


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1,
           padding: int = 0) -> Tensor:
    """1-D cross-correlation. ``x``: (B, C_in, T); ``weight``: (C_out, C_in, k).

    Zero padding on both ends; output length per ``conv1d_output_length``.
    """
    if stride < 1:
        raise ValueError("conv1d: stride must be >= 1")
    B, cin, T = x.shape
    cout, cin_w, k = weight.shape
    if cin != cin_w:
        raise ValueError(f"conv1d: input has {cin} channels, kernel expects {cin_w}")
    if k > T + 2 * padding:
        raise ValueError("conv1d: kernel longer than padded input")
    tout = conv1d_output_length(T, k, stride, padding)
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding))) if padding else x.data
    win = np.lib.stride_tricks.sliding_window_view(xp, k, axis=2)[:, :, ::stride, :][:, :, :tout]
    cols = win.transpose(0, 2, 1, 3).reshape(B, tout, cin * k)
    wmat = weight.data.reshape(cout, cin * k)
    out = cols @ wmat.T
    if bias is not None:
        out = out + bias.data
    out = out.transpose(0, 2, 1)
    parents = tuple(t for t in (x, weight, bias) if t is not None)

    def bw(g):
        gt = g.transpose(0, 2, 1)  # B, tout, cout
        if weight.requires_grad:
            gw = gt.reshape(-1, cout).T @ cols.reshape(-1, cin * k)
            weight._accum(gw.reshape(weight.shape))
        if bias is not None and bias.requires_grad:
            bias._accum(gt.reshape(-1, cout).sum(axis=0))
        if x.requires_grad:
            gcols = (gt @ wmat).reshape(B, tout, cin, k)
            gxp = np.zeros_like(xp)
            span = stride * (tout - 1) + 1
            for j in range(k):
                gxp[:, :, j:j + span:stride] += gcols[:, :, :, j].transpose(0, 2, 1)
            x._accum(gxp[:, :, padding:padding + T] if padding else gxp)

    return Tensor._make(out, parents, "conv1d", bw)


def upsample_nearest(x: Tensor, factor: int) -> Tensor:
    """Repeat every time step ``factor`` times along the last axis."""
    idx = np.repeat(np.arange(x.shape[-1]), factor)
    out = x.data[..., idx]

    def bw(g):
        x._accum(g.reshape(*g.shape[:-1], x.shape[-1], factor).sum(axis=-1))

    return Tensor._make(out, (x,), "upsample", bw)


def mse(a: Tensor, b) -> Tensor:
    d = a - b
    return (d * d).mean()
