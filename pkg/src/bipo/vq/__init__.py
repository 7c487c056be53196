from .model import PartVQVAE, VqConfig, pad_to_multiple
from .quantizer import Codebook, Quantized, codebook_stats, lookup, nearest_codes, perplexity, quantize
from .train import PartReport, PartVQVAESet, reconstruction_mse, train_part, train_vqvae

__all__ = [
    "Codebook", "PartReport", "PartVQVAE", "PartVQVAESet", "Quantized", "VqConfig", "codebook_stats",
    "lookup", "nearest_codes", "pad_to_multiple", "perplexity", "quantize", "reconstruction_mse",
    "train_part", "train_vqvae",
]
