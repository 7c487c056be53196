"""Pipeline configuration, stage hashing and the run manifest."""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..evaluation import EvalProtocol, ExtractorConfig
from ..generation import SamplerConfig
from ..motion import CorpusConfig
from ..transformer import T2MConfig
from ..transformer.train import T2MTrainConfig
from ..vq import VqConfig

STAGES = ("corpus", "train-vq", "train-t2m", "train-extractors")
# stage -> upstream stages whose artifacts it consumes
PREREQUISITES = {"corpus": (), "train-vq": ("corpus",), "train-t2m": ("corpus", "train-vq"),
                 "train-extractors": ("corpus",)}


def _desk_eval() -> EvalProtocol:
    # the 300-pair test split supports at most 150 disjoint diversity pairs
    return EvalProtocol(repetitions=20, mm_repetitions=5, s_dis=100, mm_texts=16)


@dataclass
class GenerationSettings:
    refine: bool = True
    quorum: int = 4
    max_tokens: int | None = None

    def __post_init__(self):
        if not 1 <= self.quorum <= 6:
            raise ValueError("END quorum must lie in 1..6")


@dataclass
class AblationSettings:
    po_values: tuple = (0.4,)
    t2m_steps: int | None = None          # None: same schedule as the main run
    repetitions: int = 5
    mm_repetitions: int = 2

    def __post_init__(self):
        self.po_values = tuple(float(p) for p in self.po_values)
        if not self.po_values or any(not 0.0 < p <= 1.0 for p in self.po_values):
            raise ValueError("ablation occlusion probabilities must lie in (0, 1]")


@dataclass
class PipelineConfig:
    seed: int = 0
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    vq: VqConfig = field(default_factory=VqConfig)
    t2m: T2MConfig = field(default_factory=T2MConfig)
    t2m_train: T2MTrainConfig = field(default_factory=T2MTrainConfig)
    extractor: ExtractorConfig = field(default_factory=ExtractorConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    generation: GenerationSettings = field(default_factory=GenerationSettings)
    eval: EvalProtocol = field(default_factory=_desk_eval)
    ablation: AblationSettings = field(default_factory=AblationSettings)
    out_dir: str = "runs/desk"

    _SECTIONS = {"corpus": CorpusConfig, "vq": VqConfig, "t2m": T2MConfig, "t2m_train": T2MTrainConfig,
                 "extractor": ExtractorConfig, "sampler": SamplerConfig, "generation": GenerationSettings,
                 "eval": EvalProtocol, "ablation": AblationSettings}

    def __post_init__(self):
        if self.t2m.codebook_size != self.vq.codebook_size:
            raise ValueError("transformer codebook size must equal the VQ codebook size")
        if self.t2m.max_tokens * self.vq.downsample < self.corpus.max_frames:
            raise ValueError("transformer max_tokens too small for the longest corpus motion")

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.to_dict() if hasattr(v, "to_dict") else (asdict(v) if f.name in self._SECTIONS else v)
        out["ablation"]["po_values"] = list(self.ablation.po_values)
        out["vq"]["parts"] = list(self.vq.parts)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        for k, v in d.items():
            if k in cls._SECTIONS:
                section = cls._SECTIONS[k]
                allowed = {f.name for f in fields(section)}
                bad = set(v) - allowed
                if bad:
                    raise ValueError(f"unknown keys in [{k}]: {sorted(bad)}")
                v = dict(v)
                if k == "vq" and "parts" in v:
                    v["parts"] = tuple(v["parts"])
                kw[k] = section(**v)
            else:
                kw[k] = v
        return cls(**kw)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def stage_inputs(self, stage: str) -> dict:
        """The configuration a stage's artifacts depend on (including upstream stages)."""
        d = self.to_dict()
        corpus = {"seed": self.seed, "corpus": d["corpus"]}
        if stage == "corpus":
            return corpus
        if stage == "train-vq":
            return {**corpus, "vq": d["vq"]}
        if stage == "train-t2m":
            return {**corpus, "vq": d["vq"], "t2m": d["t2m"], "t2m_train": d["t2m_train"]}
        if stage == "train-extractors":
            return {**corpus, "extractor": d["extractor"]}
        raise ValueError(f"unknown stage {stage!r}")

    def stage_hash(self, stage: str) -> str:
        return digest(self.stage_inputs(stage))

    def config_hash(self) -> str:
        d = self.to_dict()
        d.pop("out_dir")
        return digest(d)


def digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


def timestamp() -> int:
    """Seconds since the epoch, pinned by ``SOURCE_DATE_EPOCH`` when set (reproducible manifests)."""
    return int(os.environ.get("SOURCE_DATE_EPOCH", int(time.time())))


class PipelineError(RuntimeError):
    kind = "pipeline_error"


class MissingPrerequisiteError(PipelineError):
    kind = "missing_prerequisite"


class StaleArtifactError(PipelineError):
    kind = "stale_artifact"


@dataclass
class RunManifest:
    config_hash: str = ""
    corpus_manifest: str | None = None
    stages: dict = field(default_factory=dict)    # stage -> {"hash", "artifacts", "completed_at"}
    reports: dict = field(default_factory=dict)   # name -> report path

    FILENAME = "manifest.json"

    @classmethod
    def load(cls, out_dir) -> "RunManifest":
        path = Path(out_dir) / cls.FILENAME
        if not path.exists():
            return cls()
        return cls(**json.loads(path.read_text()))

    def save(self, out_dir) -> None:
        path = Path(out_dir) / self.FILENAME
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")

    def record(self, stage: str, stage_hash: str, artifacts: dict) -> None:
        self.stages[stage] = {"hash": stage_hash, "artifacts": dict(sorted(artifacts.items())),
                              "completed_at": timestamp()}

    def require(self, stage: str, config: PipelineConfig, out_dir) -> dict:
        """Artifacts of a completed upstream stage, checked against the current config."""
        entry = self.stages.get(stage)
        if entry is None:
            raise MissingPrerequisiteError(f"stage {stage!r} has not been run; run `bipo {stage}` first")
        expected = config.stage_hash(stage)
        if entry["hash"] != expected:
            raise StaleArtifactError(f"stage {stage!r} artifacts were built with config {entry['hash']}, "
                                     f"current config hashes to {expected}; rerun `bipo {stage}`")
        for name, rel in entry["artifacts"].items():
            if not (Path(out_dir) / rel).exists():
                raise MissingPrerequisiteError(f"artifact {rel} of stage {stage!r} is missing")
        return entry["artifacts"]
