from .loss import (HybridLossConfig, LossParts, SampledMasks, TokenExample, full_sequences, hybrid_loss,
                   next_token_accuracy, sample_masks)
from .masks import (AttentionMask, build_bp_mask, build_causal_mask, masked_count, padded_mask,
                    sample_bp_unmask_set)
from .model import (OTHER_PARTS, BiPartTransformer, CoordinationLayer, T2MConfig, TextEncoder,
                    coordination_layer, sample_po_mask)

__all__ = [
    "AttentionMask", "BiPartTransformer", "CoordinationLayer", "HybridLossConfig", "LossParts", "OTHER_PARTS",
    "SampledMasks", "T2MConfig", "TextEncoder", "TokenExample", "build_bp_mask", "build_causal_mask",
    "coordination_layer", "full_sequences", "hybrid_loss", "masked_count", "next_token_accuracy",
    "padded_mask", "sample_bp_unmask_set", "sample_masks", "sample_po_mask",
]
