from .corpus import (TEMPLATES, TEXT_VOCAB, CorpusConfig, TextMotionPair, augment_with_mirrors, by_split,
                     corpus_manifest, generate_corpus, mirror_pair, split_counts)
from .features import (FEATURE_DIM, FPS, LAYOUT, PoseError, PoseSequence, compute_pose_features,
                       recover_positions, velocity_consistency_error)
from .io import MotionFileError, export_motion, import_motion
from .mirror import mirror_pose, mirror_positions, mirror_tokens
from .parts import (N_PARTS, PART_COLUMNS, PART_DIMS, PART_NAMES, PartMotion, describe_parts, merge_arrays,
                    merge_parts, split_array, split_parts)

__all__ = [
    "CorpusConfig", "FEATURE_DIM", "FPS", "LAYOUT", "MotionFileError", "N_PARTS", "PART_COLUMNS", "PART_DIMS",
    "PART_NAMES", "PartMotion", "PoseError", "PoseSequence", "TEMPLATES", "TEXT_VOCAB", "TextMotionPair",
    "augment_with_mirrors", "by_split", "compute_pose_features", "corpus_manifest", "describe_parts",
    "export_motion", "generate_corpus", "import_motion", "merge_arrays", "merge_parts", "mirror_pair",
    "mirror_pose", "mirror_positions", "mirror_tokens", "recover_positions", "split_array", "split_counts",
    "split_parts", "velocity_consistency_error",
]
