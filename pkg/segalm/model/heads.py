"""
Output heads: masked-LM, [CLS] classification/regression and span extraction.
"""
from typing import Tuple

import torch
import torch.nn.functional as F
from torch import nn

from segalm.errors import NoContextPositions, ShapeMismatch

DEFAULT_MAX_ANSWER_LEN = 30


class MaskedLMHead(nn.Module):
    """Dense + GELU + LayerNorm transform, decoder tied to the token table."""

    def __init__(self, hidden: int, token_table: nn.Embedding, layer_norm_eps: float = 1e-12):
        super().__init__()
        self.transform = nn.Linear(hidden, hidden)
        self.layer_norm = nn.LayerNorm(hidden, eps=layer_norm_eps)
        self.token_table = token_table
        self.bias = nn.Parameter(torch.zeros(token_table.num_embeddings))

    def forward(self, hidden: torch.Tensor) -> torch.Tensor:
        x = self.layer_norm(F.gelu(self.transform(hidden)))
        return F.linear(x, self.token_table.weight, self.bias)


class ClassifierHead(nn.Module):
    """tanh pooler over the [CLS] vector followed by a linear layer."""

    def __init__(self, hidden: int, num_labels: int, dropout: float = 0.1):
        super().__init__()
        if num_labels < 1:
            raise ValueError(f"num_labels must be >= 1, got {num_labels}")
        self.num_labels = num_labels
        self.pooler = nn.Linear(hidden, hidden)
        self.dropout = nn.Dropout(dropout)
        self.classifier = nn.Linear(hidden, num_labels)

    @property
    def is_regression(self) -> bool:
        return self.num_labels == 1

    def forward(self, hidden_states: torch.Tensor) -> torch.Tensor:
        """(batch, seq, hidden) -> (batch, num_labels) logits."""
        if hidden_states.dim() != 3 or hidden_states.shape[-1] != self.pooler.in_features:
            raise ShapeMismatch(
                f"classifier expects (batch, seq, {self.pooler.in_features}), got {tuple(hidden_states.shape)}"
            )
        pooled = torch.tanh(self.pooler(hidden_states[:, 0]))
        return self.classifier(self.dropout(pooled))


class SpanHead(nn.Module):
    """Start and end scores per position from the final hidden states."""

    def __init__(self, hidden: int):
        super().__init__()
        self.start = nn.Linear(hidden, 1)
        self.end = nn.Linear(hidden, 1)

    def forward(self, hidden_states: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        if hidden_states.dim() != 3 or hidden_states.shape[-1] != self.start.in_features:
            raise ShapeMismatch(
                f"span head expects (batch, seq, {self.start.in_features}), got {tuple(hidden_states.shape)}"
            )
        return self.start(hidden_states).squeeze(-1), self.end(hidden_states).squeeze(-1)


def classify(hidden_states: torch.Tensor, head: ClassifierHead) -> torch.Tensor:
    """
    Predict from the [CLS] position.

    Args:
        hidden_states: (batch, seq, hidden) final-layer states
        head: Classifier head

    Returns:
        (batch, num_labels) label distribution, or (batch,) scores for regression
    """
    logits = head(hidden_states)
    if head.is_regression:
        return logits.squeeze(-1)
    return torch.softmax(logits, dim=-1)


def masked_span_logits(
    hidden_states: torch.Tensor, head: SpanHead, context_mask: torch.Tensor
) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Start/end logits with every non-context position set to -inf.

    Raises:
        NoContextPositions: If some example has no context position
    """
    if context_mask.shape != hidden_states.shape[:2]:
        raise ShapeMismatch(f"context mask {tuple(context_mask.shape)} vs states {tuple(hidden_states.shape[:2])}")
    candidates = context_mask.bool()
    if not bool(candidates.any(dim=-1).all()):
        raise NoContextPositions("Span example has no context position")
    start, end = head(hidden_states)
    blocked = ~candidates
    return start.masked_fill(blocked, float("-inf")), end.masked_fill(blocked, float("-inf"))


def extract_span(
    hidden_states: torch.Tensor, head: SpanHead, context_mask: torch.Tensor
) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Independent start and end distributions over context positions.

    Args:
        hidden_states: (batch, seq, hidden) final-layer states
        head: Span head
        context_mask: (batch, seq) 1 on context tokens, 0 on question, specials and padding

    Returns:
        (start probabilities, end probabilities), each (batch, seq)
    """
    start, end = masked_span_logits(hidden_states, head, context_mask)
    return torch.softmax(start, dim=-1), torch.softmax(end, dim=-1)


def decode_span(
    start_scores: torch.Tensor,
    end_scores: torch.Tensor,
    max_answer_len: int = DEFAULT_MAX_ANSWER_LEN,
) -> Tuple[int, int]:
    """
    Best (s, e) maximizing start[s] + end[e] subject to s <= e <= s + max_answer_len.

    Args:
        start_scores: (seq,) log-probabilities or logits, -inf where not allowed
        end_scores: (seq,) same for ends
        max_answer_len: Largest allowed e - s

    Returns:
        (start, end) positions
    """
    seq = start_scores.shape[-1]
    pair = start_scores[:, None] + end_scores[None, :]
    rows = torch.arange(seq).unsqueeze(1)
    cols = torch.arange(seq).unsqueeze(0)
    allowed = (cols >= rows) & (cols <= rows + max_answer_len)
    pair = pair.masked_fill(~allowed, float("-inf"))
    best = int(torch.argmax(pair))
    return best // seq, best % seq
