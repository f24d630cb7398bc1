"""
Input representations: token embedding plus scheme-dependent position embeddings.

Each position scheme registers its encoding module with the global `schemes`
registry when this module is imported:

    @schemes.register(PositionScheme.SEGA)
    class SegmentPositions(PositionEncoding):
        ...
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Type

import torch
from torch import nn

from core.logging_config import get_logger
from segalm.errors import IndexOutOfTable
from segalm.text.segmenter import SegmentCaps

logger = get_logger(__name__)

MAX_POSITIONS = 512
TYPE_VOCAB_SIZE = 2
INIT_STD = 0.02


class PositionScheme(str, Enum):
    """How a token's position enters its input representation."""

    SEGA = "sega"
    GLOBAL = "global"
    GLOBAL_PLUS_PS = "global_ps"


@dataclass
class EmbeddingConfig:
    """Sizes and switches of the input embedding layer."""

    vocab_size: int
    hidden: int
    scheme: PositionScheme = PositionScheme.SEGA
    caps: SegmentCaps = field(default_factory=SegmentCaps)
    max_positions: int = MAX_POSITIONS
    dropout: float = 0.1
    layer_norm: bool = True
    layer_norm_eps: float = 1e-12

    def __post_init__(self) -> None:
        self.scheme = PositionScheme(self.scheme)


def init_table(table: nn.Embedding, std: float = INIT_STD) -> None:
    """Truncated normal at two standard deviations."""
    nn.init.trunc_normal_(table.weight, mean=0.0, std=std, a=-2 * std, b=2 * std)


def lookup(table: nn.Embedding, index: torch.Tensor, name: str) -> torch.Tensor:
    """
    Embedding lookup that reports out-of-range indices by table name.

    Raises:
        IndexOutOfTable: If any index is negative or >= the table size
    """
    if index.numel():
        high = int(index.max())
        low = int(index.min())
        if high >= table.num_embeddings or low < 0:
            raise IndexOutOfTable(name, high if high >= table.num_embeddings else low, table.num_embeddings)
    return table(index)


class PositionEncoding(nn.Module):
    """Base class: produce the position addends of every token."""

    scheme: PositionScheme

    def __init__(self, config: EmbeddingConfig):
        super().__init__()
        self.config = config

    @classmethod
    def table_rows(cls, caps: SegmentCaps, max_positions: int) -> int:
        """Total rows of the position tables this scheme owns."""
        raise NotImplementedError

    def addends(
        self,
        p: torch.Tensor,
        s: torch.Tensor,
        t: torch.Tensor,
        type_ids: torch.Tensor,
    ) -> List[torch.Tensor]:
        """
        Position vectors to add to the token embedding, in summation order.

        Args:
            p, s, t: (batch, seq) paragraph/sentence/token indices
            type_ids: (batch, seq) segment A/B ids

        Returns:
            List of (batch, seq, hidden) tensors
        """
        raise NotImplementedError


class SchemeRegistry:
    """
    Registry of position-encoding classes keyed by PositionScheme.

    Usage:
        registry = SchemeRegistry()

        @registry.register(PositionScheme.SEGA)
        class SegmentPositions(PositionEncoding):
            ...

        module = registry.build(config)
    """

    def __init__(self):
        """Initialize an empty registry"""
        self._encodings: Dict[PositionScheme, Type[PositionEncoding]] = {}

    def register(self, scheme: PositionScheme) -> Callable[[Type[PositionEncoding]], Type[PositionEncoding]]:
        """Decorator registering a PositionEncoding subclass for a scheme."""

        def decorator(cls: Type[PositionEncoding]) -> Type[PositionEncoding]:
            self.register_encoding(scheme, cls)
            return cls

        return decorator

    def register_encoding(self, scheme: PositionScheme, cls: Type[PositionEncoding]) -> None:
        """
        Register an encoding class.

        Args:
            scheme: Scheme the class implements
            cls: PositionEncoding subclass
        """
        if not (isinstance(cls, type) and issubclass(cls, PositionEncoding)):
            raise ValueError("Encoding must be a PositionEncoding subclass")
        scheme = PositionScheme(scheme)
        cls.scheme = scheme
        self._encodings[scheme] = cls
        logger.debug(f"Registered position encoding {cls.__name__} for scheme: {scheme.value}")

    def get(self, scheme: PositionScheme) -> Type[PositionEncoding]:
        scheme = PositionScheme(scheme)
        if scheme not in self._encodings:
            raise KeyError(f"No position encoding registered for scheme {scheme.value}")
        return self._encodings[scheme]

    def build(self, config: EmbeddingConfig) -> PositionEncoding:
        return self.get(config.scheme)(config)

    def get_registered_schemes(self) -> List[PositionScheme]:
        """Get list of registered schemes"""
        return list(self._encodings.keys())


# Global registry instance
schemes = SchemeRegistry()


@schemes.register(PositionScheme.SEGA)
class SegmentPositions(PositionEncoding):
    """Token-in-sentence, sentence-in-paragraph and paragraph-in-document tables."""

    def __init__(self, config: EmbeddingConfig):
        super().__init__(config)
        caps = config.caps
        self.token_index = nn.Embedding(caps.max_tokens_per_sentence, config.hidden)
        self.sentence_index = nn.Embedding(caps.max_sentences, config.hidden)
        self.paragraph_index = nn.Embedding(caps.max_paragraphs, config.hidden)

    @classmethod
    def table_rows(cls, caps: SegmentCaps, max_positions: int) -> int:
        return caps.max_paragraphs + caps.max_sentences + caps.max_tokens_per_sentence

    def addends(self, p, s, t, type_ids):
        return [
            lookup(self.token_index, t, "token_index"),
            lookup(self.sentence_index, s, "sentence_index"),
            lookup(self.paragraph_index, p, "paragraph_index"),
        ]


@schemes.register(PositionScheme.GLOBAL)
class GlobalPositions(PositionEncoding):
    """BERT baseline: one vector per absolute position plus the A/B segment table."""

    def __init__(self, config: EmbeddingConfig):
        super().__init__(config)
        self.global_position = nn.Embedding(config.max_positions, config.hidden)
        self.token_type = nn.Embedding(TYPE_VOCAB_SIZE, config.hidden)

    @classmethod
    def table_rows(cls, caps: SegmentCaps, max_positions: int) -> int:
        return max_positions

    def addends(self, p, s, t, type_ids):
        return [
            lookup(self.global_position, _absolute_positions(t), "global_position"),
            lookup(self.token_type, type_ids, "token_type"),
        ]


@schemes.register(PositionScheme.GLOBAL_PLUS_PS)
class GlobalPlusSegmentPositions(PositionEncoding):
    """Global positions with paragraph and sentence tables added on top."""

    def __init__(self, config: EmbeddingConfig):
        super().__init__(config)
        caps = config.caps
        self.global_position = nn.Embedding(config.max_positions, config.hidden)
        self.sentence_index = nn.Embedding(caps.max_sentences, config.hidden)
        self.paragraph_index = nn.Embedding(caps.max_paragraphs, config.hidden)

    @classmethod
    def table_rows(cls, caps: SegmentCaps, max_positions: int) -> int:
        return max_positions + caps.max_paragraphs + caps.max_sentences

    def addends(self, p, s, t, type_ids):
        return [
            lookup(self.global_position, _absolute_positions(t), "global_position"),
            lookup(self.sentence_index, s, "sentence_index"),
            lookup(self.paragraph_index, p, "paragraph_index"),
        ]


def _absolute_positions(like: torch.Tensor) -> torch.Tensor:
    batch, seq = like.shape
    return torch.arange(seq, device=like.device).unsqueeze(0).expand(batch, seq)


def position_param_count(
    scheme: PositionScheme,
    hidden: int,
    caps: Optional[SegmentCaps] = None,
    max_positions: int = MAX_POSITIONS,
) -> int:
    """
    Number of position-table parameters a scheme adds at a given width.

    With default sizes: SEGA 406*H, GLOBAL 512*H, GLOBAL_PLUS_PS 662*H.

    Args:
        scheme: Position scheme
        hidden: Hidden width H
        caps: Index table sizes
        max_positions: Global table size

    Returns:
        Parameter count
    """
    if hidden <= 0:
        raise ValueError(f"hidden must be positive, got {hidden}")
    caps = caps or SegmentCaps()
    return schemes.get(scheme).table_rows(caps, max_positions) * hidden


class SegaEmbeddings(nn.Module):
    """
    Token embedding plus position addends, then layer norm and dropout.

    The sum order is fixed: E, then the scheme's addends in their listed order
    (for SEGA: P^t, P^s, P^p).
    """

    def __init__(self, config: EmbeddingConfig):
        super().__init__()
        self.config = config
        self.token = nn.Embedding(config.vocab_size, config.hidden)
        self.positions = schemes.build(config)
        self.layer_norm: nn.Module = (
            nn.LayerNorm(config.hidden, eps=config.layer_norm_eps) if config.layer_norm else nn.Identity()
        )
        self.dropout = nn.Dropout(config.dropout)
        self.reset_parameters()

    def reset_parameters(self) -> None:
        for module in self.modules():
            if isinstance(module, nn.Embedding):
                init_table(module)
            elif isinstance(module, nn.LayerNorm):
                nn.init.ones_(module.weight)
                nn.init.zeros_(module.bias)

    @property
    def scheme(self) -> PositionScheme:
        return self.config.scheme

    def forward(
        self,
        ids: torch.Tensor,
        p: torch.Tensor,
        s: torch.Tensor,
        t: torch.Tensor,
        type_ids: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """
        Embed a batch.

        Args:
            ids: (batch, seq) vocab ids
            p, s, t: (batch, seq) index triples
            type_ids: (batch, seq) segment ids, zeros when None

        Returns:
            (batch, seq, hidden) input representations
        """
        if type_ids is None:
            type_ids = torch.zeros_like(ids)
        x = lookup(self.token, ids, "token")
        for addend in self.positions.addends(p, s, t, type_ids):
            x = x + addend
        return self.dropout(self.layer_norm(x))


def embed(
    batch: Dict[str, torch.Tensor],
    embeddings: SegaEmbeddings,
    scheme: Optional[PositionScheme] = None,
) -> torch.Tensor:
    """
    Embed a collated batch, checking that the module implements the requested scheme.

    Args:
        batch: Collated tensors with ids, p, s, t and type_ids
        embeddings: Embedding module
        scheme: Expected scheme; defaults to the module's own

    Returns:
        (batch, seq, hidden) representations; dropout only in training mode
    """
    if scheme is not None and PositionScheme(scheme) != embeddings.scheme:
        raise ValueError(f"Embedding module implements {embeddings.scheme.value}, not {PositionScheme(scheme).value}")
    return embeddings(batch["ids"], batch["p"], batch["s"], batch["t"], batch.get("type_ids"))
