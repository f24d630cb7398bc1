"""
segalm - masked-LM pretraining with segment-aware position embeddings.

Each token's position is the sum of paragraph, sentence and token-in-sentence
embeddings instead of one global position vector.
"""
from .errors import SegaLMError
from .model.embeddings import PositionScheme, position_param_count
from .model.encoder import EncoderConfig
from .model.modeling import ModelConfig, SegaForMaskedLM, SegaModel
from .text.segmenter import SegmentCaps, assign_indices, segment_document
from .text.tokenizer import Vocab, load_vocab, tokenize

__version__ = "1.0.0"
__all__ = [
    "SegaLMError",
    "PositionScheme",
    "position_param_count",
    "EncoderConfig",
    "ModelConfig",
    "SegaModel",
    "SegaForMaskedLM",
    "SegmentCaps",
    "assign_indices",
    "segment_document",
    "Vocab",
    "load_vocab",
    "tokenize",
]
