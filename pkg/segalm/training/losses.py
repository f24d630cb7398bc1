"""
Training objectives. Pretraining uses the masked-LM term alone.
"""
from typing import Tuple

import torch
import torch.nn.functional as F

from segalm.data.builder import IGNORE_LABEL
from segalm.errors import NoLabels, ShapeMismatch


def mlm_loss(logits: torch.Tensor, labels: torch.Tensor) -> Tuple[torch.Tensor, float]:
    """
    Mean cross-entropy over labeled positions and the masked-position accuracy.

    Args:
        logits: (..., vocab) scores
        labels: (...) original ids, IGNORE_LABEL where unlabeled

    Returns:
        (scalar loss tensor, accuracy over labeled positions)

    Raises:
        NoLabels: If no position is labeled
        ShapeMismatch: If logits and labels disagree
    """
    if logits.shape[:-1] != labels.shape:
        raise ShapeMismatch(f"logits {tuple(logits.shape)} do not match labels {tuple(labels.shape)}")
    flat_logits = logits.reshape(-1, logits.shape[-1])
    flat_labels = labels.reshape(-1).long()
    labeled = flat_labels != IGNORE_LABEL
    if not bool(labeled.any()):
        raise NoLabels("Batch has no labeled position")
    loss = F.cross_entropy(flat_logits, flat_labels, ignore_index=IGNORE_LABEL)
    with torch.no_grad():
        hits = flat_logits[labeled].argmax(dim=-1) == flat_labels[labeled]
        accuracy = float(hits.float().mean())
    return loss, accuracy


def classification_loss(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Cross-entropy for (batch, labels) logits, mean squared error when there is one output."""
    if logits.shape[-1] == 1:
        return F.mse_loss(logits.squeeze(-1), targets.to(logits.dtype))
    return F.cross_entropy(logits, targets.long())


def span_loss(
    start_logits: torch.Tensor,
    end_logits: torch.Tensor,
    start: torch.Tensor,
    end: torch.Tensor,
) -> torch.Tensor:
    """Average of the start and end cross-entropies; logits may hold -inf off the context."""
    return (F.cross_entropy(start_logits, start.long()) + F.cross_entropy(end_logits, end.long())) / 2
