"""
Masked-LM corruption of pretraining examples.
"""
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from segalm.data.builder import IGNORE_LABEL, Example, ExampleKind
from segalm.errors import NoEligiblePositions
from segalm.text.tokenizer import Vocab


@dataclass(frozen=True)
class MaskingPolicy:
    """Selection rate and the mask / random / keep split of selected positions."""

    select_prob: float = 0.15
    mask_prob: float = 0.8
    random_prob: float = 0.1
    keep_prob: float = 0.1
    force_one: bool = True

    def __post_init__(self) -> None:
        for name in ("select_prob", "mask_prob", "random_prob", "keep_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        total = self.mask_prob + self.random_prob + self.keep_prob
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mask_prob + random_prob + keep_prob must be 1, got {total}")


def masking_rng(seed: int, epoch: int, index: int) -> np.random.Generator:
    """Generator for one example in one epoch; independent of worker scheduling."""
    return np.random.default_rng([seed, epoch, index])


def eligible_positions(example: Example, vocab: Vocab) -> np.ndarray:
    """Boolean mask of real, non-special positions."""
    special = np.isin(example.ids, [vocab.pad_id, vocab.cls_id, vocab.sep_id, vocab.mask_id])
    return (example.attn_mask == 1) & ~special


def apply_masking(
    example: Example,
    policy: MaskingPolicy,
    rng: np.random.Generator,
    vocab: Vocab,
) -> Tuple[Example, np.ndarray]:
    """
    Corrupt a pretraining example for the masked-LM objective.

    Every eligible position is selected independently with select_prob. A
    selected position becomes [MASK] with mask_prob, a uniformly drawn vocab
    id with random_prob, and keeps its token otherwise. When nothing was
    selected and force_one is set, one eligible position is drawn uniformly.

    Args:
        example: Pretraining example
        policy: Masking policy
        rng: Seeded generator
        vocab: Vocab for the [MASK] id, the special ids and the random-id range

    Returns:
        (masked copy of the example with mlm_labels set, label array) where
        labels hold original ids at selected positions and IGNORE_LABEL elsewhere

    Raises:
        NoEligiblePositions: If the example holds only specials and padding
    """
    if example.kind != ExampleKind.PRETRAIN:
        raise ValueError(f"Masking applies to pretraining examples, got {example.kind.name}")
    eligible = eligible_positions(example, vocab)
    if not eligible.any():
        raise NoEligiblePositions("Example has no position eligible for masking")

    n = len(example.ids)
    selected = eligible & (rng.random(n) < policy.select_prob)
    if not selected.any() and policy.force_one:
        selected[rng.choice(np.flatnonzero(eligible))] = True

    action = rng.random(n)
    random_ids = rng.integers(0, len(vocab), size=n)
    to_mask = selected & (action < policy.mask_prob)
    to_random = selected & (action >= policy.mask_prob) & (action < policy.mask_prob + policy.random_prob)

    ids = example.ids.copy()
    ids[to_mask] = vocab.mask_id
    ids[to_random] = random_ids[to_random]

    labels = np.full(n, IGNORE_LABEL, dtype=np.int32)
    labels[selected] = example.ids[selected]
    return replace(example, ids=ids, mlm_labels=labels), labels
