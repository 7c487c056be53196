"""Feature extractors, metrics and the repeated evaluation protocol."""

from .evaluate import (EVAL_MODES, METRICS, EvalProtocol, EvalReport, dump_features, evaluate_model,
                       load_features, random_token_poses)
from .extractors import (ExtractorConfig, ExtractorReport, FeatureExtractorPair, contrastive_loss,
                         pair_distances, train_extractors)
from .metrics import (COV_EPS, FidResult, diversity, fid, fid_details, matrix_sqrt_psd, mean_ci, mm_dist,
                      mmodality, r_precision)

__all__ = [
    "COV_EPS", "EVAL_MODES", "METRICS", "EvalProtocol", "EvalReport", "ExtractorConfig", "ExtractorReport",
    "FeatureExtractorPair", "FidResult", "contrastive_loss", "diversity", "dump_features", "evaluate_model",
    "fid", "fid_details", "load_features", "matrix_sqrt_psd", "mean_ci", "mm_dist", "mmodality",
    "pair_distances", "r_precision", "random_token_poses", "train_extractors",
]
