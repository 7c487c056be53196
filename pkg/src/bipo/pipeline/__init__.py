"""Stage-gated orchestration: config, manifest, stages and the CLI."""

from .config import (PREREQUISITES, STAGES, AblationSettings, GenerationSettings, MissingPrerequisiteError,
                     PipelineConfig, PipelineError, RunManifest, StaleArtifactError)
from .desk import DESK_MODES, DeskSummary, desk_checks, desk_run
from .stages import ABLATION_FIELDS, Workspace, ablation_variants

__all__ = [
    "ABLATION_FIELDS", "AblationSettings", "DESK_MODES", "DeskSummary", "GenerationSettings", "MissingPrerequisiteError", "PREREQUISITES",
    "PipelineConfig", "PipelineError", "RunManifest", "STAGES", "StaleArtifactError", "Workspace",
    "ablation_variants", "desk_checks", "desk_run",
]
