"""Training loop for the part transformers."""

from __future__ import annotations

import csv
import json
import logging
import time
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..autodiff import AdamW, NonFiniteError, load_checkpoint, make_rng, no_grad, save_checkpoint
from ..motion import TextMotionPair
from .loss import HybridLossConfig, TokenExample, hybrid_loss, next_token_accuracy, sample_masks
from .model import BiPartTransformer, T2MConfig

log = logging.getLogger(__name__)


@dataclass
class T2MTrainConfig:
    steps: int = 1200
    batch_size: int = 32
    lr: float = 1e-3
    warmup: int = 100
    min_lr: float = 1e-4            # cosine floor
    weight_decay: float = 0.01
    grad_clip: float | None = 1.0
    eval_every: int = 100
    seed: int = 0
    mirror_augment: bool = False    # add the left/right mirror of every training pair

    def to_dict(self) -> dict:
        return asdict(self)


def tokenize_corpus(pairs: list[TextMotionPair], vqs) -> list[TokenExample]:
    out = []
    for p in pairs:
        toks = np.stack(vqs.tokenize(p.motion))
        out.append(TokenExample(p.text, toks, p.template))
    return out


def length_buckets(examples: list[TokenExample]) -> dict[int, list[int]]:
    buckets = defaultdict(list)
    for i, e in enumerate(examples):
        buckets[e.length].append(i)
    return dict(sorted(buckets.items()))


def sample_batch(examples, buckets, batch_size: int, rng: np.random.Generator) -> list[TokenExample]:
    """Draw a batch of equal-length examples; buckets are picked in proportion to size."""
    keys = list(buckets)
    sizes = np.array([len(buckets[k]) for k in keys], dtype=np.float64)
    bucket = buckets[keys[rng.choice(len(keys), p=sizes / sizes.sum())]]
    idx = rng.choice(bucket, size=batch_size, replace=len(bucket) < batch_size)
    return [examples[i] for i in idx]


def lr_at(step: int, cfg: T2MTrainConfig) -> float:
    if step <= cfg.warmup:
        return cfg.lr * step / max(cfg.warmup, 1)
    frac = (step - cfg.warmup) / max(cfg.steps - cfg.warmup, 1)
    return cfg.min_lr + 0.5 * (cfg.lr - cfg.min_lr) * (1.0 + np.cos(np.pi * min(frac, 1.0)))


def evaluate_loss(model: BiPartTransformer, examples: list[TokenExample], loss_cfg: HybridLossConfig,
                  seed: int = 0, chunk: int = 64) -> dict:
    """Hybrid loss on a fixed set with fixed mask draws, averaged over length buckets."""
    rng = make_rng(seed, "eval-masks")
    totals = defaultdict(float)
    weight = 0
    with no_grad():
        for _, idx in length_buckets(examples).items():
            for s in range(0, len(idx), chunk):
                batch = [examples[i] for i in idx[s:s + chunk]]
                out = hybrid_loss(model, batch, loss_cfg, masks=sample_masks(batch, loss_cfg, rng))
                totals["hybrid"] += out.total.item() * len(batch)
                totals["causal"] += out.causal.item() * len(batch)
                totals["bidirectional"] += out.bidirectional.item() * len(batch)
                weight += len(batch)
    return {k: v / weight for k, v in totals.items()}


@dataclass
class TrainResult:
    model: BiPartTransformer
    curves: list            # dict rows: step, lr, train_*, val_* (val only at eval steps)
    best_step: int
    best_val: float
    seconds: float
    train_accuracy: float | None = None


def train_t2m(train: list[TokenExample], val: list[TokenExample], cfg: T2MConfig,
              tcfg: T2MTrainConfig | None = None, out_dir: Path | None = None) -> TrainResult:
    """Optimize the hybrid objective; keep the parameters with the best validation loss."""
    tcfg = tcfg or T2MTrainConfig()
    if not train:
        raise ValueError("empty training set")
    t0 = time.perf_counter()
    model = BiPartTransformer(cfg, make_rng(cfg.seed, "t2m-init"))
    loss_cfg = HybridLossConfig.from_model(cfg)
    rng = make_rng(tcfg.seed, "t2m-train")
    buckets = length_buckets(train)
    val = val or train[: min(len(train), 64)]
    opt = AdamW(model.parameters(), lr=tcfg.lr, weight_decay=tcfg.weight_decay, grad_clip=tcfg.grad_clip)
    curves = []
    best_val, best_step, best_state = np.inf, 0, model.state_dict()

    for step in range(1, tcfg.steps + 1):
        opt.state.lr = lr_at(step, tcfg)
        batch = sample_batch(train, buckets, tcfg.batch_size, rng)
        out = hybrid_loss(model, batch, loss_cfg, rng)
        if not np.isfinite(out.total.data):
            raise NonFiniteError(f"transformer loss became {out.total.item()} at step {step}")
        opt.zero_grad()
        out.total.backward()
        opt.step()
        row = {"step": step, "lr": opt.state.lr, "train_hybrid": out.total.item(),
               "train_causal": out.causal.item(), "train_bidirectional": out.bidirectional.item()}
        if step % tcfg.eval_every == 0 or step == tcfg.steps:
            v = evaluate_loss(model, val, loss_cfg, seed=tcfg.seed)
            row.update({f"val_{k}": x for k, x in v.items()})
            if v["hybrid"] < best_val:
                best_val, best_step, best_state = v["hybrid"], step, model.state_dict()
            log.info("t2m step %d: train %.3f val %.3f", step, out.total.item(), v["hybrid"])
        curves.append(row)

    model.load_state_dict(best_state)
    result = TrainResult(model, curves, best_step, float(best_val), time.perf_counter() - t0)
    if out_dir is not None:
        write_training_artifacts(result, cfg, tcfg, Path(out_dir))
    return result


CURVE_FIELDS = ["step", "lr", "train_hybrid", "train_causal", "train_bidirectional",
                "val_hybrid", "val_causal", "val_bidirectional"]


def write_curves(curves: list, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CURVE_FIELDS)
        writer.writeheader()
        for row in curves:
            writer.writerow({k: (repr(row[k]) if isinstance(row.get(k), float) else row.get(k, ""))
                             for k in CURVE_FIELDS})


def write_training_artifacts(result: TrainResult, cfg: T2MConfig, tcfg: T2MTrainConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    save_model(result.model, out / "t2m.ckpt")
    write_curves(result.curves, out / "t2m_curves.csv")
    (out / "t2m_config.json").write_text(json.dumps({"model": cfg.to_dict(), "train": tcfg.to_dict(),
                                                     "best_step": result.best_step}, indent=2, sort_keys=True))


def save_model(model: BiPartTransformer, path) -> None:
    save_checkpoint(path, model.state_dict(), {"kind": "t2m", "config": model.cfg.to_dict()})


def load_model(path) -> BiPartTransformer:
    tensors, meta = load_checkpoint(path)
    if meta.get("kind") != "t2m":
        raise ValueError(f"{path} is not a transformer checkpoint")
    model = BiPartTransformer(T2MConfig.from_dict(meta["config"]))
    model.load_state_dict(tensors)
    return model


def smoothed_decreasing(values: list[float], window: int = 3) -> bool:
    """True when the moving average of ``values`` never increases."""
    v = np.asarray(values, dtype=np.float64)
    if len(v) < window + 1:
        return bool(np.all(np.diff(v) <= 0))
    avg = np.convolve(v, np.ones(window) / window, mode="valid")
    return bool(np.all(np.diff(avg) <= 1e-12))


__all__ = ["T2MTrainConfig", "TrainResult", "evaluate_loss", "length_buckets", "load_model", "lr_at",
           "next_token_accuracy", "sample_batch", "save_model", "smoothed_decreasing", "tokenize_corpus",
           "train_t2m", "write_curves"]
