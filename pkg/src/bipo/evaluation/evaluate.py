"""Repeated-measurement evaluation of generated or reconstructed motions."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..autodiff import load_checkpoint, make_rng, save_checkpoint
from ..generation import GenerationConfig, SamplerConfig, generate
from ..motion import N_PARTS, TextMotionPair
from .extractors import FeatureExtractorPair
from .metrics import diversity, fid_details, mean_ci, mm_dist, mmodality, r_precision

log = logging.getLogger(__name__)

EVAL_MODES = ("generation", "reconstruction", "random", "real")
METRICS = ("fid", "r_precision_top1", "r_precision_top2", "r_precision_top3", "mm_dist", "diversity",
           "mmodality")


@dataclass
class EvalProtocol:
    repetitions: int = 20
    mm_repetitions: int = 5
    pool: int = 32
    top_k: int = 3
    s_dis: int = 300
    mm_texts: int = 32            # captions used for the within-caption diversity measurement
    mm_generations: int = 30
    mm_subset: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.repetitions < 2:
            raise ValueError("confidence intervals need at least two repetitions")
        if self.mm_repetitions < 2:
            raise ValueError("confidence intervals need at least two repetitions")
        if self.mm_generations < self.mm_subset:
            raise ValueError("mm_generations must be >= mm_subset")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalProtocol":
        return cls(**d)


@dataclass
class EvalReport:
    mode: str
    metrics: dict                  # name -> {"mean", "ci95"}; mmodality only in generation mode
    repetitions: int
    mm_repetitions: int
    protocol: dict
    per_repetition: dict           # name -> list of values
    fid_regularized: bool = False
    fid_clamped: int = 0
    notes: list = field(default_factory=list)

    def nonfinite(self) -> list[str]:
        return [k for k, v in self.metrics.items() if not (math.isfinite(v["mean"]) and math.isfinite(v["ci95"]))]

    def mean(self, name: str) -> float:
        return self.metrics[name]["mean"]

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "EvalReport":
        with open(path) as fh:
            return cls(**json.load(fh))


def random_token_poses(vqs, lengths: list[int], rng: np.random.Generator) -> list:
    """Decode uniformly random token sequences (one per requested token length)."""
    K = vqs.codebook_size
    return [vqs.decode(list(rng.integers(0, K, size=(N_PARTS, L))), n_frames=L * vqs.r) for L in lengths]


def _generate_poses(model, vqs, texts, gen: GenerationConfig, seed: int, chunk: int = 256) -> list:
    cfg = replace(gen, sampler=replace(gen.sampler, seed=seed))
    rng = make_rng(seed, "eval-generate")
    poses = []
    for s in range(0, len(texts), chunk):
        poses.extend(run.pose for run in generate(model, vqs, texts[s:s + chunk], cfg, rng))
    return poses


def evaluate_model(model, vqs, extractors: FeatureExtractorPair, test: list[TextMotionPair],
                   protocol: EvalProtocol | None = None, mode: str = "generation",
                   generation: GenerationConfig | None = None) -> EvalReport:
    """Metrics over ``protocol.repetitions`` repetitions with 95% half-widths.

    Modes: ``generation`` (text -> tokens -> poses), ``reconstruction`` (real
    motion -> tokens -> poses), ``random`` (uniform random tokens decoded at the
    real token lengths) and ``real`` (the test motions themselves).
    """
    if mode not in EVAL_MODES:
        raise ValueError(f"unknown evaluation mode {mode!r}; expected one of {EVAL_MODES}")
    protocol = protocol or EvalProtocol()
    generation = generation or GenerationConfig(sampler=SamplerConfig(mode="temperature"))
    if len(test) < max(protocol.pool, 2 * protocol.s_dis):
        raise ValueError(f"evaluation needs {max(protocol.pool, 2 * protocol.s_dis)} test pairs, got {len(test)}")
    if mode in ("generation", "reconstruction", "random") and vqs is None:
        raise ValueError(f"mode {mode!r} needs the VQ tokenizers")
    if mode == "generation" and model is None:
        raise ValueError("generation mode needs a transformer")
    texts = [p.text for p in test]
    real = extractors.encode_motions([p.motion for p in test])
    text_feats = extractors.encode_texts(texts)

    fixed = None
    if mode == "reconstruction":
        fixed = extractors.encode_motions([vqs.reconstruct(p.motion) for p in test])
    elif mode == "real":
        fixed = real

    values = {k: [] for k in METRICS if k != "mmodality"}
    regularized, clamped = False, 0
    for rep in range(protocol.repetitions):
        seed = protocol.seed + rep
        if fixed is not None:
            feats = fixed
        elif mode == "generation":
            feats = extractors.encode_motions(_generate_poses(model, vqs, texts, generation, seed))
        else:
            lengths = [len(p.motion) // vqs.r for p in test]
            feats = extractors.encode_motions(random_token_poses(vqs, lengths, make_rng(seed, "eval-random")))
        mrng = make_rng(seed, "eval-metrics")
        f = fid_details(real, feats)
        regularized |= f.regularized
        clamped += f.clamped
        values["fid"].append(f.value)
        r = r_precision(feats, text_feats, protocol.top_k, protocol.pool, mrng)
        for k in range(protocol.top_k):
            if f"r_precision_top{k + 1}" in values:
                values[f"r_precision_top{k + 1}"].append(float(r[k]))
        values["mm_dist"].append(mm_dist(feats, text_feats))
        values["diversity"].append(diversity(feats, protocol.s_dis, mrng))
        log.info("eval %s rep %d: fid %.4f r@3 %.3f", mode, rep, f.value, r[-1])

    values = {k: v for k, v in values.items() if v}
    mm_reps = 0
    if mode == "generation":
        values["mmodality"] = [
            _mmodality_repetition(model, vqs, extractors, texts, generation, protocol, rep)
            for rep in range(protocol.mm_repetitions)
        ]
        mm_reps = protocol.mm_repetitions
    metrics = {}
    for k, v in values.items():
        mean, ci = mean_ci(v)
        metrics[k] = {"mean": mean, "ci95": ci}
    notes = []
    if regularized:
        notes.append("covariance regularized with eps*I in FID")
    if clamped:
        notes.append(f"negative FID residue clamped to 0 in {clamped} repetitions")
    return EvalReport(mode, metrics, protocol.repetitions, mm_reps, protocol.to_dict(), values,
                      regularized, clamped, notes)


def _mmodality_repetition(model, vqs, extractors, texts, generation, protocol, rep) -> float:
    rng = make_rng(protocol.seed + rep, "eval-mmodality")
    unique = sorted(set(texts))
    chosen = [unique[i] for i in rng.choice(len(unique), size=min(protocol.mm_texts, len(unique)), replace=False)]
    batch = [t for t in chosen for _ in range(protocol.mm_generations)]
    feats = extractors.encode_motions(_generate_poses(model, vqs, batch, generation, 10_000 + protocol.seed + rep))
    per_text = feats.reshape(len(chosen), protocol.mm_generations, -1)
    return mmodality(list(per_text), protocol.mm_subset, rng)


def dump_features(path, features: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Persist named feature matrices for reuse across runs."""
    save_checkpoint(path, {k: np.asarray(v, dtype=np.float64) for k, v in features.items()},
                    dict(meta or {}, kind="features"))


def load_features(path) -> dict[str, np.ndarray]:
    tensors, meta = load_checkpoint(path)
    if meta.get("kind") != "features":
        raise ValueError(f"{path} is not a feature dump")
    return tensors
