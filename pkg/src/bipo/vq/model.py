"""Per-part convolutional VQ-VAE.

Encoder: conv(k3) -> n_down x [strided conv(k4, s2) + residual block] -> conv to code dim.
Decoder mirrors it with nearest-neighbour upsampling. ``n_down = log2(r)``.
Inputs are standardized with per-column statistics measured on the training
split; decoded frames are mapped back to feature units.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..autodiff import Module, Tensor, conv1d, no_grad, param, upsample_nearest
from ..autodiff.module import init_normal
from ..motion import PART_DIMS, PART_NAMES, PartMotion
from .quantizer import Codebook, Quantized, lookup, quantize

STD_FLOOR = 1e-2


@dataclass
class VqConfig:
    downsample: int = 4            # r
    beta: float = 1.0              # commitment weight
    codebook_size: int = 64        # K
    code_dim: int = 32             # D for limb / backbone parts
    root_code_dim: int = 16        # D for the root part
    width: int = 64
    batch_size: int = 32
    window: int = 16               # training crop length in frames
    steps: int = 1500
    lr: float = 2e-3
    lr_decay_step: int | None = 1000
    lr_decayed: float = 5e-4
    weight_decay: float = 0.0
    grad_clip: float | None = 5.0
    eval_every: int = 250
    dead_code_every: int = 100
    seed: int = 0
    parts: tuple = field(default_factory=lambda: tuple(PART_NAMES))

    def __post_init__(self):
        if self.downsample < 1 or self.downsample & (self.downsample - 1):
            raise ValueError("downsample rate must be a power of two >= 1")
        if self.beta < 0:
            raise ValueError("commitment weight must be >= 0")
        if self.window % self.downsample:
            raise ValueError("training window must be a multiple of the downsample rate")
        self.parts = tuple(self.parts)

    def code_dim_for(self, part: str) -> int:
        return self.root_code_dim if part == "Root" else self.code_dim

    def to_dict(self) -> dict:
        d = asdict(self)
        d["parts"] = list(self.parts)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VqConfig":
        return cls(**d)


class Conv(Module):
    def __init__(self, rng, c_in: int, c_out: int, k: int, stride: int = 1, padding: int | None = None):
        self.stride = stride
        self.padding = (k - 1) // 2 if padding is None else padding
        self.weight = init_normal(rng, (c_out, c_in, k), math.sqrt(2.0 / (c_in * k)))
        self.bias = param(np.zeros(c_out))

    def __call__(self, x: Tensor) -> Tensor:
        return conv1d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class ResBlock(Module):
    def __init__(self, rng, width: int):
        self.c1 = Conv(rng, width, width, 3)
        self.c2 = Conv(rng, width, width, 1)
        self.c2.weight.data *= 0.1

    def __call__(self, x: Tensor) -> Tensor:
        return x + self.c2(self.c1(x.relu()).relu())


class Encoder(Module):
    def __init__(self, rng, c_in: int, width: int, code_dim: int, n_down: int):
        self.stem = Conv(rng, c_in, width, 3)
        self.down = [Conv(rng, width, width, 4, stride=2, padding=1) for _ in range(n_down)]
        self.res = [ResBlock(rng, width) for _ in range(n_down)]
        self.head = Conv(rng, width, code_dim, 3)

    def __call__(self, x: Tensor) -> Tensor:
        h = self.stem(x).relu()
        for down, res in zip(self.down, self.res):
            h = res(down(h))
        return self.head(h.relu())


class Decoder(Module):
    def __init__(self, rng, c_out: int, width: int, code_dim: int, n_up: int):
        self.stem = Conv(rng, code_dim, width, 3)
        self.res = [ResBlock(rng, width) for _ in range(n_up)]
        self.up = [Conv(rng, width, width, 3) for _ in range(n_up)]
        self.head = Conv(rng, width, c_out, 3)
        self.head.weight.data *= 0.1  # start near the per-column mean

    def __call__(self, z: Tensor) -> Tensor:
        h = self.stem(z)
        for res, up in zip(self.res, self.up):
            h = up(upsample_nearest(res(h), 2))
        return self.head(h.relu())


def pad_to_multiple(frames: np.ndarray, r: int) -> tuple[np.ndarray, int]:
    """Right-pad (T, C) frames by repeating the last frame up to a multiple of ``r``."""
    if len(frames) == 0:
        raise ValueError("cannot encode an empty motion")
    pad = (-len(frames)) % r
    if pad:
        frames = np.concatenate([frames, np.repeat(frames[-1:], pad, axis=0)], axis=0)
    return frames, pad


class PartVQVAE(Module):
    """Tokenizer for one body part."""

    def __init__(self, part: str, config: VqConfig, rng: np.random.Generator):
        if part not in PART_DIMS:
            raise ValueError(f"unknown part {part!r}")
        self.part = part
        self.config = config
        dim = PART_DIMS[part]
        n_down = int(round(math.log2(config.downsample)))
        code_dim = config.code_dim_for(part)
        self.encoder = Encoder(rng, dim, config.width, code_dim, n_down)
        self.decoder = Decoder(rng, dim, config.width, code_dim, n_down)
        self.codebook = Codebook(config.codebook_size, code_dim, rng)
        self.mean = np.zeros(dim)
        self.std = np.ones(dim)

    @property
    def r(self) -> int:
        return self.config.downsample

    def set_normalizer(self, frames: np.ndarray) -> None:
        self.mean = frames.mean(axis=0)
        self.std = np.maximum(frames.std(axis=0), STD_FLOOR)

    def normalize(self, frames: np.ndarray) -> np.ndarray:
        return (frames - self.mean) / self.std

    def denormalize(self, frames: np.ndarray) -> np.ndarray:
        return frames * self.std + self.mean

    # -- batched tensor paths (B, T, C) ------------------------------------

    def encode_batch(self, frames: np.ndarray) -> Tensor:
        """(B, T, C) raw features, T a multiple of r -> (B, T/r, D) latents."""
        x = Tensor(self.normalize(frames).transpose(0, 2, 1))
        return self.encoder(x).swapaxes(1, 2)

    def decode_latents(self, z: Tensor) -> Tensor:
        """(B, N, D) -> (B, N*r, C) in normalized units."""
        return self.decoder(z.swapaxes(1, 2)).swapaxes(1, 2)

    def forward(self, frames: np.ndarray) -> tuple[Tensor, Quantized]:
        q = quantize(self.encode_batch(frames), self.codebook)
        return self.decode_latents(q.quantized), q

    # -- single-motion API ----------------------------------------------------

    def encode(self, motion: PartMotion | np.ndarray) -> np.ndarray:
        """Latents (ceil(L/r), D) for one motion, padding by last-frame repetition."""
        frames = motion.frames if isinstance(motion, PartMotion) else np.asarray(motion)
        padded, _ = pad_to_multiple(frames, self.r)
        with no_grad():
            return self.encode_batch(padded[None]).data[0]

    def tokenize(self, motion: PartMotion | np.ndarray) -> np.ndarray:
        frames = motion.frames if isinstance(motion, PartMotion) else np.asarray(motion)
        padded, _ = pad_to_multiple(frames, self.r)
        with no_grad():
            return quantize(self.encode_batch(padded[None]), self.codebook).tokens[0]

    def decode(self, tokens, n_frames: int | None = None) -> PartMotion:
        """Tokens -> ``r * len(tokens)`` frames (optionally trimmed to ``n_frames``)."""
        tokens = np.asarray(tokens, dtype=np.int64).reshape(-1)
        if tokens.size == 0:
            raise ValueError("cannot decode an empty token sequence")
        with no_grad():
            z = lookup(tokens[None], self.codebook)
            out = self.denormalize(self.decode_latents(z).data[0])
        if n_frames is not None:
            out = out[:n_frames]
        return PartMotion(self.part, out)

    def decode_batch(self, tokens: np.ndarray) -> np.ndarray:
        """(B, N) tokens -> (B, N*r, C) feature frames."""
        with no_grad():
            z = lookup(np.asarray(tokens, dtype=np.int64), self.codebook)
            return self.denormalize(self.decode_latents(z).data)

    def state(self) -> dict[str, np.ndarray]:
        s = {f"{self.part}/{k}": v for k, v in self.state_dict().items()}
        s[f"{self.part}/norm.mean"] = self.mean.copy()
        s[f"{self.part}/norm.std"] = self.std.copy()
        return s

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        prefix = f"{self.part}/"
        own = {k[len(prefix):]: v for k, v in state.items() if k.startswith(prefix)}
        self.mean = np.asarray(own.pop("norm.mean"), dtype=np.float64)
        self.std = np.asarray(own.pop("norm.std"), dtype=np.float64)
        self.load_state_dict(own)
