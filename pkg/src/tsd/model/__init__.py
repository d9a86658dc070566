from tsd.model.checkpoint import load_checkpoint, save_checkpoint
from tsd.model.config import TSDConfig, parameter_count, stable_hash
from tsd.model.saliency import SaliencyMap, extract_saliency
from tsd.model.tsd import (
    ConvDown,
    ConvUp,
    ForecastHead,
    TemporalSelfAttention,
    Tokenizer,
    TSDModel,
    TSDStack,
    make_rng,
)

__all__ = [
    "ConvDown",
    "ConvUp",
    "ForecastHead",
    "SaliencyMap",
    "TSDConfig",
    "TSDModel",
    "TSDStack",
    "TemporalSelfAttention",
    "Tokenizer",
    "extract_saliency",
    "load_checkpoint",
    "make_rng",
    "parameter_count",
    "save_checkpoint",
    "stable_hash",
]
