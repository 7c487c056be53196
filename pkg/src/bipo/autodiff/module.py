"""Parameter containers: a minimal ``Module`` base plus the layers the networks share."""

from __future__ import annotations

from typing import Iterator

import numpy as np

from .functional import layer_norm
from .tensor import Tensor, matmul


class Module:
    """Collects ``Tensor`` parameters and sub-modules from instance attributes.

    Parameter names are dotted attribute paths; lists of modules get integer
    components (``blocks.0.attn.wq``).
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(full + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")
                    elif isinstance(item, Tensor) and item.requires_grad:
                        yield f"{full}.{i}", item

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        if missing:
            raise KeyError(f"checkpoint is missing parameters: {sorted(missing)[:5]}")
        for name, p in own.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise ValueError(f"{name}: checkpoint shape {arr.shape} != {p.shape}")
            p.data = arr.copy()

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


def param(data) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def init_normal(rng: np.random.Generator, shape, std: float) -> Tensor:
    return param(rng.normal(0.0, std, size=shape))


class Linear(Module):
    """``y = x @ W + b``. With ``stack`` set, holds one weight per leading index
    (e.g. one per body part) and expects inputs of shape (stack, ..., d_in)."""

    def __init__(self, rng, d_in: int, d_out: int, bias: bool = True, std: float | None = None,
                 stack: int | None = None, zero: bool = False):
        std = (1.0 / np.sqrt(d_in)) if std is None else std
        lead = () if stack is None else (stack,)
        self.stack = stack
        self.weight = param(np.zeros(lead + (d_in, d_out))) if zero else init_normal(rng, lead + (d_in, d_out), std)
        self.bias = param(np.zeros(lead + (d_out,))) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        if self.stack is None:
            y = x @ self.weight
            return y + self.bias if self.bias is not None else y
        lead = x.shape
        flat = x.reshape(lead[0], -1, lead[-1])
        y = matmul(flat, self.weight)
        if self.bias is not None:
            y = y + self.bias.reshape(lead[0], 1, -1)
        return y.reshape(*lead[:-1], y.shape[-1])


class LayerNorm(Module):
    def __init__(self, dim: int, stack: int | None = None):
        lead = () if stack is None else (stack,)
        self.stack = stack
        self.gain = param(np.ones(lead + (dim,)))
        self.bias = param(np.zeros(lead + (dim,)))

    def __call__(self, x: Tensor) -> Tensor:
        if self.stack is None:
            return layer_norm(x, self.gain, self.bias)
        shape = (self.stack,) + (1,) * (x.ndim - 2) + (x.shape[-1],)
        return layer_norm(x) * self.gain.reshape(shape) + self.bias.reshape(shape)
