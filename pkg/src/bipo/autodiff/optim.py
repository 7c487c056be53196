from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


@dataclass
class OptimizerState:
    """AdamW moments and hyperparameters. ``step`` counts completed updates."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.99
    weight_decay: float = 0.0
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adamw_step(params: list[np.ndarray], grads: list[np.ndarray | None],
               state: OptimizerState) -> list[np.ndarray]:
    """One bias-corrected AdamW update with decoupled weight decay, in place.

    A ``None`` gradient is treated as zero.
    """
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(state.m) != len(params):
        raise ValueError("optimizer state does not match the parameter list")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if m.shape != p.shape:
            raise ValueError("moment buffer shape does not match its parameter")
        if state.weight_decay:
            p *= 1.0 - state.lr * state.weight_decay
        if g is None:
            g = 0.0
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


class AdamW:
    def __init__(self, params: list[Tensor], lr: float = 1e-3, betas=(0.9, 0.99),
                 weight_decay: float = 0.0, eps: float = 1e-8, grad_clip: float | None = None):
        self.params = list(params)
        self.state = OptimizerState(lr=lr, beta1=betas[0], beta2=betas[1],
                                    weight_decay=weight_decay, eps=eps)
        self.grad_clip = grad_clip

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(float((p.grad**2).sum()) for p in self.params if p.grad is not None)))

    def step(self) -> None:
        grads = [p.grad for p in self.params]
        if self.grad_clip is not None:
            norm = self.grad_norm()
            if norm > self.grad_clip:
                scale = self.grad_clip / norm
                grads = [None if g is None else g * scale for g in grads]
        adamw_step([p.data for p in self.params], grads, self.state)


def step_decay_lr(step: int, base_lr: float, decay_step: int | None, decayed_lr: float) -> float:
    """Piecewise-constant schedule: ``base_lr`` until ``decay_step``, then ``decayed_lr``."""
    if decay_step is not None and step >= decay_step:
        return decayed_lr
    return base_lr
