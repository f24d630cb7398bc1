"""
Embeddings, encoder, heads and checkpoints.
"""
from .embeddings import PositionScheme, SegaEmbeddings, embed, position_param_count, schemes
from .encoder import Encoder, EncoderConfig
from .modeling import (
    ModelConfig,
    SegaForMaskedLM,
    SegaForSequenceClassification,
    SegaForSpanExtraction,
    SegaModel,
)

__all__ = [
    "PositionScheme",
    "SegaEmbeddings",
    "embed",
    "position_param_count",
    "schemes",
    "Encoder",
    "EncoderConfig",
    "ModelConfig",
    "SegaForMaskedLM",
    "SegaForSequenceClassification",
    "SegaForSpanExtraction",
    "SegaModel",
]
