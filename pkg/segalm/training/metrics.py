"""
Task metrics: classification (accuracy, F1, Matthews), regression (Pearson,
Spearman) and span answers (exact match and token-overlap F1 after SQuAD
answer normalization).
"""
import re
import string
from collections import Counter
from typing import Dict, List, Sequence

import numpy as np
from scipy.stats import pearsonr, spearmanr
from sklearn.metrics import accuracy_score, f1_score, matthews_corrcoef

_ARTICLES = re.compile(r"\b(a|an|the)\b", re.UNICODE)
_PUNCTUATION = set(string.punctuation)


def accuracy(predictions: Sequence[int], labels: Sequence[int]) -> float:
    return float(accuracy_score(labels, predictions))


def f1(predictions: Sequence[int], labels: Sequence[int]) -> float:
    """Binary F1 of the positive class (label 1)."""
    return float(f1_score(labels, predictions, average="binary", pos_label=1, zero_division=0))


def matthews(predictions: Sequence[int], labels: Sequence[int]) -> float:
    return float(matthews_corrcoef(labels, predictions))


def pearson(predictions: Sequence[float], labels: Sequence[float]) -> float:
    return float(pearsonr(np.asarray(predictions, dtype=np.float64), np.asarray(labels, dtype=np.float64))[0])


def spearman(predictions: Sequence[float], labels: Sequence[float]) -> float:
    return float(spearmanr(np.asarray(predictions, dtype=np.float64), np.asarray(labels, dtype=np.float64))[0])


def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation and the articles a/an/the, collapse whitespace."""
    text = text.lower()
    text = "".join(ch for ch in text if ch not in _PUNCTUATION)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def exact_match(prediction: str, gold: str) -> float:
    return float(normalize_answer(prediction) == normalize_answer(gold))


def span_f1(prediction: str, gold: str) -> float:
    """Harmonic mean of token precision and recall over normalized answers."""
    predicted = normalize_answer(prediction).split()
    expected = normalize_answer(gold).split()
    if not predicted or not expected:
        return float(predicted == expected)
    common = Counter(predicted) & Counter(expected)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(predicted)
    recall = overlap / len(expected)
    return 2 * precision * recall / (precision + recall)


def classification_report(predictions: Sequence[int], labels: Sequence[int]) -> Dict[str, float]:
    """accuracy and Matthews always; F1 when the labels are binary."""
    report = {"accuracy": accuracy(predictions, labels), "matthews": matthews(predictions, labels)}
    if set(int(label) for label in labels) <= {0, 1}:
        report["f1"] = f1(predictions, labels)
    return report


def regression_report(predictions: Sequence[float], labels: Sequence[float]) -> Dict[str, float]:
    return {"pearson": pearson(predictions, labels), "spearman": spearman(predictions, labels)}


def span_report(predictions: List[str], golds: List[str]) -> Dict[str, float]:
    """Mean exact match and F1 over answers, as fractions in [0, 1]."""
    if not predictions:
        return {"exact_match": 0.0, "f1": 0.0}
    return {
        "exact_match": float(np.mean([exact_match(p, g) for p, g in zip(predictions, golds)])),
        "f1": float(np.mean([span_f1(p, g) for p, g in zip(predictions, golds)])),
    }
