"""
Finite-difference gradient check of the full model (embeddings, encoder and
every head) in double precision.
"""
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from core.logging_config import get_logger
from segalm.model.heads import ClassifierHead, MaskedLMHead, SpanHead, masked_span_logits
from segalm.model.modeling import ModelConfig, SegaModel, init_weights
from segalm.training.losses import mlm_loss, span_loss

logger = get_logger(__name__)

DEFAULT_TOLERANCE = 1e-4
STEP = 1e-5
# Denominator floor of the relative error, so near-zero gradients are compared absolutely
ABS_FLOOR = 1e-5

# Report groups in order: (group name, parameter-name fragment)
GROUPS: Tuple[Tuple[str, str], ...] = (
    ("token_embedding", "embeddings.token."),
    ("token_index", "positions.token_index."),
    ("sentence_index", "positions.sentence_index."),
    ("paragraph_index", "positions.paragraph_index."),
    ("global_position", "positions.global_position."),
    ("token_type", "positions.token_type."),
    ("embedding_norm", "embeddings.layer_norm."),
    ("attention", ".attention."),
    ("attention_norm", ".attention_norm."),
    ("ffn", ".ffn_"),
    ("ffn_norm", ".ffn_norm."),
    ("mlm_head", "mlm_head."),
    ("classifier_head", "classifier_head."),
    ("span_head", "span_head."),
)

GradTransform = Callable[[str, torch.Tensor], torch.Tensor]


@dataclass
class GroupResult:
    """Outcome for one parameter group."""

    name: str
    parameters: List[str] = field(default_factory=list)
    checked: int = 0
    max_rel_error: float = 0.0
    passed: bool = True
    note: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "parameters": self.parameters,
            "checked": self.checked,
            "max_rel_error": self.max_rel_error,
            "passed": self.passed,
            "note": self.note,
        }


@dataclass
class GradCheckReport:
    tolerance: float
    groups: List[GroupResult]

    @property
    def passed(self) -> bool:
        return all(group.passed for group in self.groups)

    def group(self, name: str) -> GroupResult:
        for result in self.groups:
            if result.name == name:
                return result
        raise KeyError(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tolerance": self.tolerance,
            "passed": self.passed,
            "groups": [group.to_dict() for group in self.groups],
        }


class CheckedModel(nn.Module):
    """Encoder with the masked-LM, classifier and span heads on one objective."""

    def __init__(self, config: ModelConfig, num_labels: int = 3):
        super().__init__()
        self.model = SegaModel(config)
        self.mlm_head = MaskedLMHead(config.encoder.hidden, self.model.embeddings.token, config.encoder.layer_norm_eps)
        self.classifier_head = ClassifierHead(config.encoder.hidden, num_labels, dropout=0.0)
        self.span_head = SpanHead(config.encoder.hidden)
        self.apply(init_weights)

    def forward(self, batch: Dict[str, torch.Tensor]) -> torch.Tensor:
        hidden = self.model(batch).last
        loss, _ = mlm_loss(self.mlm_head(hidden), batch["mlm_labels"])
        loss = loss + F.cross_entropy(self.classifier_head(hidden), batch["class_label"])
        start, end = masked_span_logits(hidden, self.span_head, batch["context_mask"])
        return loss + span_loss(start, end, batch["start"], batch["end"])


def _long(values: Any) -> torch.Tensor:
    return torch.as_tensor(np.asarray(values, dtype=np.int64))


def probe_batch(config: ModelConfig, seed: int = 0, seq: int = 12) -> Dict[str, torch.Tensor]:
    """
    A small random batch exercising every embedding table and head.

    The second row is padded; ids avoid the first five vocab entries.
    """
    rng = np.random.default_rng(seed)
    batch_size = 2
    caps = config.caps
    ids = rng.integers(5, config.vocab_size, size=(batch_size, seq))
    attn_mask = np.ones((batch_size, seq), dtype=np.int64)
    attn_mask[1, seq - 3:] = 0
    p = rng.integers(0, min(3, caps.max_paragraphs), size=(batch_size, seq))
    s = rng.integers(0, min(4, caps.max_sentences), size=(batch_size, seq))
    t = rng.integers(0, min(seq, caps.max_tokens_per_sentence), size=(batch_size, seq))
    type_ids = np.zeros((batch_size, seq), dtype=np.int64)
    type_ids[:, seq // 2:] = 1
    context = (type_ids == 1) & (attn_mask == 1)
    mlm_labels = np.full((batch_size, seq), -1, dtype=np.int64)
    mlm_labels[:, 1:4] = rng.integers(0, config.vocab_size, size=(batch_size, 3))
    return {
        "ids": _long(ids),
        "p": _long(p),
        "s": _long(s),
        "t": _long(t),
        "type_ids": _long(type_ids),
        "attn_mask": _long(attn_mask),
        "mlm_labels": _long(mlm_labels),
        "context_mask": _long(context),
        "class_label": _long(rng.integers(0, 3, size=batch_size)),
        "start": _long([seq // 2, seq // 2 + 1]),
        "end": _long([seq // 2 + 2, seq // 2 + 1]),
    }


def _group_of(name: str) -> Optional[str]:
    # Norm fragments are more specific than the layer fragments they overlap
    for group, fragment in sorted(GROUPS, key=lambda item: -len(item[1])):
        if fragment in name:
            return group
    return None


def _coordinates(grad: torch.Tensor, samples: int, rng: np.random.Generator) -> List[int]:
    flat = grad.reshape(-1).abs()
    count = flat.numel()
    largest = torch.topk(flat, min(samples, count)).indices.tolist()
    extra = rng.choice(count, size=min(samples, count), replace=False).tolist()
    return sorted(set(largest) | set(extra))


def gradient_check(
    config: ModelConfig,
    tolerance: float = DEFAULT_TOLERANCE,
    seed: int = 0,
    samples_per_tensor: int = 6,
    grad_transform: Optional[GradTransform] = None,
) -> GradCheckReport:
    """
    Compare analytic gradients with central differences.

    For every parameter tensor the largest-magnitude analytic coordinates and
    as many random ones are perturbed by +-STEP. Relative error is
    |analytic - numeric| / max(|analytic|, |numeric|, ABS_FLOOR).

    Args:
        config: Model configuration (TOY sized); dropout is disabled
        tolerance: Largest accepted relative error
        seed: Seed for weights, batch and coordinate sampling
        samples_per_tensor: Top and random coordinates per tensor
        grad_transform: Hook applied to each analytic gradient before comparison

    Returns:
        GradCheckReport with one entry per parameter group; groups without
        parameters in this model are skipped with a note
    """
    torch.manual_seed(seed)
    model = CheckedModel(config).double()
    model.eval()
    batch = probe_batch(config, seed)
    rng = np.random.default_rng(seed)

    model.zero_grad()
    model(batch).backward()
    analytic = {}
    for name, param in model.named_parameters():
        grad = param.grad.detach().clone() if param.grad is not None else torch.zeros_like(param)
        analytic[name] = grad_transform(name, grad) if grad_transform else grad

    results = {group: GroupResult(group) for group, _ in GROUPS}
    with torch.no_grad():
        for name, param in model.named_parameters():
            group = _group_of(name)
            if group is None:
                logger.warning(f"⚠️ Parameter {name} belongs to no gradient-check group")
                continue
            result = results[group]
            result.parameters.append(name)
            flat = param.view(-1)
            grad = analytic[name].reshape(-1)
            for index in _coordinates(analytic[name], samples_per_tensor, rng):
                original = flat[index].item()
                flat[index] = original + STEP
                plus = model(batch).item()
                flat[index] = original - STEP
                minus = model(batch).item()
                flat[index] = original
                numeric = (plus - minus) / (2 * STEP)
                exact = grad[index].item()
                error = abs(exact - numeric) / max(abs(exact), abs(numeric), ABS_FLOOR)
                result.checked += 1
                result.max_rel_error = max(result.max_rel_error, error)

    for result in results.values():
        if not result.parameters:
            result.note = "no parameters in this model"
        else:
            result.passed = result.max_rel_error < tolerance
            if not result.passed:
                logger.error(f"❌ Gradient check failed for {result.name}: {result.max_rel_error:.3e}")

    report = GradCheckReport(tolerance, list(results.values()))
    logger.info(f"{'✅' if report.passed else '❌'} Gradient check ({config.scheme.value}): passed={report.passed}")
    return report
