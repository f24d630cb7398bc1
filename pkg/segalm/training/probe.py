"""
Linear probes on frozen hidden states: how well does a layer encode each
token's sentence (or paragraph) index?
"""
from collections import Counter
from dataclasses import dataclass
from typing import Any, Dict, Sequence, Tuple

import numpy as np
import torch
from sklearn.linear_model import LogisticRegression
from sklearn.model_selection import train_test_split
from sklearn.preprocessing import StandardScaler

from core.logging_config import get_logger
from segalm.data.builder import Example
from segalm.data.collate import collate_examples
from segalm.model.modeling import SegaModel
from segalm.text.tokenizer import Vocab

logger = get_logger(__name__)

TARGETS = ("sentence", "paragraph")
_TARGET_FIELD = {"sentence": "s", "paragraph": "p"}


@dataclass
class ProbeResult:
    """Held-out accuracy of the probe and of always predicting the majority class."""

    target: str
    layer: int
    accuracy: float
    majority_baseline: float
    num_classes: int
    train_tokens: int
    test_tokens: int

    @property
    def margin(self) -> float:
        return self.accuracy - self.majority_baseline

    def to_dict(self) -> Dict[str, Any]:
        return {
            "target": self.target,
            "layer": self.layer,
            "accuracy": self.accuracy,
            "majority_baseline": self.majority_baseline,
            "margin": self.margin,
            "num_classes": self.num_classes,
            "train_tokens": self.train_tokens,
            "test_tokens": self.test_tokens,
        }


@torch.no_grad()
def collect_features(
    model: SegaModel,
    examples: Sequence[Example],
    vocab: Vocab,
    layer: int = -1,
    max_tokens: int = 20000,
    batch_size: int = 32,
) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """
    Hidden states of real, non-special tokens and their index labels.

    Args:
        model: Encoder (run in eval mode)
        examples: Packed examples
        vocab: Vocab for the special ids
        layer: Index into the hidden-state list (0 = embeddings, -1 = last layer)
        max_tokens: Stop once this many tokens are collected
        batch_size: Forward batch size

    Returns:
        (features (n, hidden), {"sentence": s labels, "paragraph": p labels})
    """
    model.eval()
    specials = [vocab.pad_id, vocab.cls_id, vocab.sep_id, vocab.mask_id]
    features, labels = [], {target: [] for target in TARGETS}
    collected = 0
    for begin in range(0, len(examples), batch_size):
        batch = collate_examples(examples[begin:begin + batch_size])
        hidden = model(batch).hidden_states[layer]
        keep = (batch["attn_mask"] == 1) & ~torch.isin(batch["ids"], torch.tensor(specials))
        features.append(hidden[keep].double().numpy())
        for target in TARGETS:
            labels[target].append(batch[_TARGET_FIELD[target]][keep].numpy())
        collected += int(keep.sum())
        if collected >= max_tokens:
            break
    if not features:
        return np.zeros((0, model.config.encoder.hidden)), {target: np.zeros(0, dtype=np.int64) for target in TARGETS}
    X = np.concatenate(features)[:max_tokens]
    return X, {target: np.concatenate(values)[:max_tokens] for target, values in labels.items()}


def run_probe(
    features: np.ndarray,
    labels: np.ndarray,
    target: str = "sentence",
    layer: int = -1,
    seed: int = 0,
    test_size: float = 0.3,
) -> ProbeResult:
    """
    Fit a multinomial logistic-regression probe and score it on a held-out split.

    Args:
        features: (n, hidden) frozen representations
        labels: (n,) class per token
        target: Label name for the report
        layer: Layer the features came from, for the report
        seed: Split and solver seed
        test_size: Held-out share

    Returns:
        ProbeResult; the majority baseline predicts the most frequent
        training label for every test token
    """
    if len(labels) < 10:
        raise ValueError(f"Probe needs at least 10 tokens, got {len(labels)}")
    X_train, X_test, y_train, y_test = train_test_split(
        features, labels, test_size=test_size, random_state=seed, shuffle=True
    )
    majority = Counter(y_train.tolist()).most_common(1)[0][0]
    baseline = float(np.mean(y_test == majority))
    if len(np.unique(y_train)) < 2:
        logger.warning(f"⚠️ Only one {target} class in the probe training split")
        return ProbeResult(target, layer, baseline, baseline, 1, len(y_train), len(y_test))

    scaler = StandardScaler().fit(X_train)
    probe = LogisticRegression(max_iter=2000, random_state=seed)
    probe.fit(scaler.transform(X_train), y_train)
    accuracy = float(probe.score(scaler.transform(X_test), y_test))
    result = ProbeResult(
        target, layer, accuracy, baseline, int(len(np.unique(labels))), len(y_train), len(y_test)
    )
    logger.info(
        f"🔍 {target} probe on layer {layer}: accuracy {accuracy:.3f} vs majority {baseline:.3f}"
    )
    return result


def probe_indices(
    model: SegaModel,
    examples: Sequence[Example],
    vocab: Vocab,
    layer: int = -1,
    max_tokens: int = 20000,
    seed: int = 0,
) -> Dict[str, ProbeResult]:
    """Sentence-index and paragraph-index probes on one layer."""
    features, labels = collect_features(model, examples, vocab, layer, max_tokens)
    return {target: run_probe(features, labels[target], target, layer, seed) for target in TARGETS}
