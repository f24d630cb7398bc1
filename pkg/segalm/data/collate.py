"""
Stack examples into model-ready tensors.
"""
from typing import Dict, Sequence

import numpy as np
import torch

from segalm.data.builder import Example

ARRAY_FIELDS = ("ids", "p", "s", "t", "type_ids", "attn_mask", "mlm_labels")


def context_mask(example: Example) -> np.ndarray:
    """Second-segment positions without the closing [SEP]."""
    mask = (example.type_ids == 1) & (example.attn_mask == 1)
    n = example.length
    if n:
        mask[n - 1] = False
    return mask.astype(np.uint8)


def collate_examples(examples: Sequence[Example], trim: bool = True) -> Dict[str, torch.Tensor]:
    """
    Stack examples into (batch, seq) tensors.

    Args:
        examples: Examples sharing one max_len
        trim: Cut the padding suffix shared by the whole batch

    Returns:
        Tensors ids, p, s, t, type_ids, attn_mask, mlm_labels, context_mask
        (batch, seq) and class_label, score, start, end (batch,)
    """
    if not examples:
        raise ValueError("Cannot collate an empty batch")
    seq = max(example.length for example in examples) if trim else examples[0].max_len
    batch = {
        name: torch.from_numpy(np.stack([getattr(e, name)[:seq] for e in examples]).astype(np.int64))
        for name in ARRAY_FIELDS
    }
    batch["context_mask"] = torch.from_numpy(np.stack([context_mask(e)[:seq] for e in examples]).astype(np.int64))
    batch["class_label"] = torch.tensor([e.class_label for e in examples], dtype=torch.long)
    batch["score"] = torch.tensor([e.score for e in examples], dtype=torch.float32)
    batch["start"] = torch.tensor([e.start for e in examples], dtype=torch.long)
    batch["end"] = torch.tensor([e.end for e in examples], dtype=torch.long)
    return batch
