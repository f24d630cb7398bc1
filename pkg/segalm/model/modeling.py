"""
Model assembly: embeddings + encoder, with masked-LM, classification and span variants.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import torch
from torch import nn

from segalm.model.embeddings import (
    INIT_STD,
    MAX_POSITIONS,
    EmbeddingConfig,
    PositionScheme,
    SegaEmbeddings,
)
from segalm.model.encoder import Encoder, EncoderConfig, EncoderOutput
from segalm.model.heads import ClassifierHead, MaskedLMHead, SpanHead, masked_span_logits
from segalm.text.segmenter import SegmentCaps


@dataclass
class ModelConfig:
    """Everything needed to rebuild a model from a checkpoint."""

    vocab_size: int
    encoder: EncoderConfig
    scheme: PositionScheme = PositionScheme.SEGA
    caps: SegmentCaps = field(default_factory=SegmentCaps)
    max_positions: int = MAX_POSITIONS
    embedding_layer_norm: bool = True

    def __post_init__(self) -> None:
        self.scheme = PositionScheme(self.scheme)

    def embedding_config(self) -> EmbeddingConfig:
        return EmbeddingConfig(
            vocab_size=self.vocab_size,
            hidden=self.encoder.hidden,
            scheme=self.scheme,
            caps=self.caps,
            max_positions=self.max_positions,
            dropout=self.encoder.dropout,
            layer_norm=self.embedding_layer_norm,
            layer_norm_eps=self.encoder.layer_norm_eps,
        )

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary"""
        return {
            "vocab_size": self.vocab_size,
            "encoder": self.encoder.to_dict(),
            "scheme": self.scheme.value,
            "caps": {
                "max_paragraphs": self.caps.max_paragraphs,
                "max_sentences": self.caps.max_sentences,
                "max_tokens_per_sentence": self.caps.max_tokens_per_sentence,
            },
            "max_positions": self.max_positions,
            "embedding_layer_norm": self.embedding_layer_norm,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        """Create ModelConfig from dictionary"""
        return cls(
            vocab_size=data["vocab_size"],
            encoder=EncoderConfig(**data["encoder"]),
            scheme=PositionScheme(data["scheme"]),
            caps=SegmentCaps(**data.get("caps", {})),
            max_positions=data.get("max_positions", MAX_POSITIONS),
            embedding_layer_norm=data.get("embedding_layer_norm", True),
        )


def init_weights(module: nn.Module, std: float = INIT_STD) -> None:
    """BERT initialization: truncated normal weights, zero biases, unit LayerNorm gains."""
    if isinstance(module, nn.Linear):
        nn.init.trunc_normal_(module.weight, mean=0.0, std=std, a=-2 * std, b=2 * std)
        if module.bias is not None:
            nn.init.zeros_(module.bias)
    elif isinstance(module, nn.Embedding):
        nn.init.trunc_normal_(module.weight, mean=0.0, std=std, a=-2 * std, b=2 * std)
    elif isinstance(module, nn.LayerNorm):
        nn.init.ones_(module.weight)
        nn.init.zeros_(module.bias)


class SegaModel(nn.Module):
    """Embeddings followed by the encoder; returns every layer's hidden states."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.embeddings = SegaEmbeddings(config.embedding_config())
        self.encoder = Encoder(config.encoder)

    @property
    def scheme(self) -> PositionScheme:
        return self.config.scheme

    def forward(self, batch: Dict[str, torch.Tensor], output_attentions: bool = False) -> EncoderOutput:
        embedded = self.embeddings(batch["ids"], batch["p"], batch["s"], batch["t"], batch.get("type_ids"))
        return self.encoder(embedded, batch["attn_mask"], output_attentions=output_attentions)


class SegaForMaskedLM(nn.Module):
    """Encoder with the single masked-LM objective head."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.model = SegaModel(config)
        self.mlm_head = MaskedLMHead(
            config.encoder.hidden, self.model.embeddings.token, config.encoder.layer_norm_eps
        )
        self.apply(init_weights)

    def forward(self, batch: Dict[str, torch.Tensor]) -> torch.Tensor:
        """(batch, seq, vocab) logits."""
        return self.mlm_head(self.model(batch).last)


class SegaForSequenceClassification(nn.Module):
    """Encoder with a pooled [CLS] classifier (num_labels == 1 means regression)."""

    def __init__(self, config: ModelConfig, num_labels: int):
        super().__init__()
        self.config = config
        self.model = SegaModel(config)
        self.head = ClassifierHead(config.encoder.hidden, num_labels, config.encoder.dropout)
        self.apply(init_weights)

    def forward(self, batch: Dict[str, torch.Tensor]) -> torch.Tensor:
        return self.head(self.model(batch).last)


class SegaForSpanExtraction(nn.Module):
    """Encoder with start/end span scoring."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.model = SegaModel(config)
        self.head = SpanHead(config.encoder.hidden)
        self.apply(init_weights)

    def forward(self, batch: Dict[str, torch.Tensor]) -> Tuple[torch.Tensor, torch.Tensor]:
        """Start and end logits, -inf outside batch["context_mask"]."""
        return masked_span_logits(self.model(batch).last, self.head, batch["context_mask"])


def encoder_state_dict(model: nn.Module) -> Dict[str, torch.Tensor]:
    """The `model.` sub-state of any wrapper, keyed without the prefix."""
    prefix = "model."
    return {k[len(prefix):]: v for k, v in model.state_dict().items() if k.startswith(prefix)}


def load_encoder_state(model: nn.Module, state: Dict[str, torch.Tensor], strict: bool = True) -> None:
    """Load encoder weights (e.g. from a pretraining checkpoint) into a task wrapper."""
    target: Optional[nn.Module] = getattr(model, "model", None)
    if target is None:
        raise ValueError(f"{type(model).__name__} has no encoder submodule")
    target.load_state_dict(state, strict=strict)
