"""
Bidirectional transformer encoder (post-norm, GELU), returning every layer's hidden states.
"""
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import torch
import torch.nn.functional as F
from torch import nn

from segalm.errors import AllMasked, ShapeMismatch


@dataclass
class EncoderConfig:
    """Encoder size: layers, hidden width, attention heads, FFN width, dropout."""

    layers: int
    hidden: int
    heads: int
    ffn_width: Optional[int] = None
    dropout: float = 0.1
    layer_norm_eps: float = 1e-12

    def __post_init__(self) -> None:
        if self.ffn_width is None:
            self.ffn_width = 4 * self.hidden
        if min(self.layers, self.hidden, self.heads, self.ffn_width) <= 0:
            raise ValueError("Encoder sizes must be positive")
        if self.hidden % self.heads != 0:
            raise ValueError(f"hidden ({self.hidden}) must be divisible by heads ({self.heads})")

    @property
    def head_dim(self) -> int:
        return self.hidden // self.heads

    @classmethod
    def preset(cls, name: str, **overrides: Any) -> "EncoderConfig":
        """
        Build a named preset (toy, base, large), optionally overriding fields.

        Args:
            name: Preset name
            **overrides: Field values replacing the preset's (None is ignored)

        Returns:
            EncoderConfig
        """
        try:
            values = dict(PRESETS[name.lower()])
        except KeyError:
            raise ValueError(f"Unknown encoder preset {name!r}; choose from {sorted(PRESETS)}") from None
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


PRESETS: Dict[str, Dict[str, int]] = {
    "toy": {"layers": 2, "hidden": 64, "heads": 4},
    "base": {"layers": 12, "hidden": 768, "heads": 12},
    "large": {"layers": 24, "hidden": 1024, "heads": 16},
}


def attention(
    q: torch.Tensor,
    k: torch.Tensor,
    v: torch.Tensor,
    mask: torch.Tensor,
    dropout: Optional[nn.Module] = None,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Scaled dot-product attention with additive -inf masking of padded keys.

    Args:
        q, k, v: (batch, heads, seq, head_dim)
        mask: (batch, seq) with 1 on visible keys and 0 on padding
        dropout: Applied to the attention weights when given

    Returns:
        (context (batch, heads, seq, head_dim), weights (batch, heads, seq, seq))

    Raises:
        AllMasked: If some sequence has no visible key
        ShapeMismatch: If the mask does not cover the key length
    """
    if mask.shape != (k.shape[0], k.shape[-2]):
        raise ShapeMismatch(f"mask shape {tuple(mask.shape)} does not cover keys {tuple(k.shape[:1] + k.shape[-2:-1])}")
    visible = mask.bool()
    if not bool(visible.any(dim=-1).all()):
        raise AllMasked("A query row has no visible key")

    scores = torch.matmul(q, k.transpose(-1, -2)) / math.sqrt(q.shape[-1])
    scores = scores.masked_fill(~visible[:, None, None, :], float("-inf"))
    weights = torch.softmax(scores, dim=-1)
    if dropout is not None:
        weights = dropout(weights)
    return torch.matmul(weights, v), weights


class SelfAttention(nn.Module):
    """Multi-head self-attention with the output projection."""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.heads = config.heads
        self.head_dim = config.head_dim
        self.query = nn.Linear(config.hidden, config.hidden)
        self.key = nn.Linear(config.hidden, config.hidden)
        self.value = nn.Linear(config.hidden, config.hidden)
        self.output = nn.Linear(config.hidden, config.hidden)
        self.attn_dropout = nn.Dropout(config.dropout)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        batch, seq, _ = x.shape
        return x.view(batch, seq, self.heads, self.head_dim).transpose(1, 2)

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        context, weights = attention(
            self._split(self.query(x)),
            self._split(self.key(x)),
            self._split(self.value(x)),
            mask,
            self.attn_dropout,
        )
        batch, _, seq, _ = context.shape
        context = context.transpose(1, 2).reshape(batch, seq, self.heads * self.head_dim)
        return self.output(context), weights


class EncoderLayer(nn.Module):
    """Post-norm block: x = LN(x + attn(x)); x = LN(x + ffn(x))."""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.attention = SelfAttention(config)
        self.attention_norm = nn.LayerNorm(config.hidden, eps=config.layer_norm_eps)
        self.ffn_in = nn.Linear(config.hidden, config.ffn_width)
        self.ffn_out = nn.Linear(config.ffn_width, config.hidden)
        self.ffn_norm = nn.LayerNorm(config.hidden, eps=config.layer_norm_eps)
        self.dropout = nn.Dropout(config.dropout)

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        attended, weights = self.attention(x, mask)
        x = self.attention_norm(x + self.dropout(attended))
        hidden = self.ffn_out(F.gelu(self.ffn_in(x)))
        x = self.ffn_norm(x + self.dropout(hidden))
        return x, weights


class EncoderOutput(NamedTuple):
    """hidden_states[0] is the embedded input, hidden_states[-1] the last layer."""

    hidden_states: List[torch.Tensor]
    attentions: Optional[List[torch.Tensor]]

    @property
    def last(self) -> torch.Tensor:
        return self.hidden_states[-1]


class Encoder(nn.Module):
    """Stack of EncoderLayer; consumes only the embedded matrix and the mask."""

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        self.layers = nn.ModuleList([EncoderLayer(config) for _ in range(config.layers)])

    def forward(
        self,
        embedded: torch.Tensor,
        mask: torch.Tensor,
        output_attentions: bool = False,
    ) -> EncoderOutput:
        """
        Encode a batch.

        Args:
            embedded: (batch, seq, hidden) input representations
            mask: (batch, seq) attention mask
            output_attentions: Also return per-layer attention weights

        Returns:
            EncoderOutput with layers + 1 hidden-state tensors

        Raises:
            ShapeMismatch: If embedded width or mask shape disagree with the config
        """
        if embedded.dim() != 3 or embedded.shape[-1] != self.config.hidden:
            raise ShapeMismatch(f"expected (batch, seq, {self.config.hidden}), got {tuple(embedded.shape)}")
        if mask.shape != embedded.shape[:2]:
            raise ShapeMismatch(f"mask {tuple(mask.shape)} does not match input {tuple(embedded.shape[:2])}")

        hidden_states = [embedded]
        attentions: Optional[List[torch.Tensor]] = [] if output_attentions else None
        x = embedded
        for layer in self.layers:
            x, weights = layer(x, mask)
            hidden_states.append(x)
            if attentions is not None:
                attentions.append(weights)
        return EncoderOutput(hidden_states, attentions)
