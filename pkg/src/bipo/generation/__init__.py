from .decoding import (DEFAULT_QUORUM, GenerationConfig, GenerationRun, Pass1Result, SamplerConfig, generate,
                       generate_pass1, generate_tokens, majority_length, refine_pass2, refine_unmask_set,
                       sample_from_logits)
from .editing import EDIT_MODES, MIN_EDIT_TOKENS, EditSpec, edit, edit_regions, edit_tokens
from .report import REPORT_SCHEMA, export_generation_report, generation_report

__all__ = [
    "DEFAULT_QUORUM", "EDIT_MODES", "EditSpec", "GenerationConfig", "GenerationRun", "MIN_EDIT_TOKENS",
    "Pass1Result", "REPORT_SCHEMA", "SamplerConfig", "edit", "edit_regions", "edit_tokens",
    "export_generation_report", "generate", "generate_pass1", "generate_tokens", "generation_report",
    "majority_length", "refine_pass2", "refine_unmask_set", "sample_from_logits",
]
