"""
Learning-rate schedule, optimizer construction and the guarded Adam step.
"""
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Deque, Dict, Iterable, List, Optional, Sequence, Tuple

import torch
from torch import nn

from core.logging_config import get_logger, get_training_logger
from segalm.errors import NonFiniteGradient

logger = get_logger(__name__)
training_logger = get_training_logger()

DEFAULT_WARMUP_FRACTION = 0.01
METRICS_RING_SIZE = 1000


def warmup_steps(total_steps: int, warmup_fraction: float = DEFAULT_WARMUP_FRACTION) -> int:
    """ceil(warmup_fraction * total_steps), computed on the decimal value of the fraction."""
    return math.ceil(Fraction(repr(float(warmup_fraction))) * total_steps)


def lr_at(
    step: int,
    total_steps: int,
    peak_lr: float,
    warmup_fraction: float = DEFAULT_WARMUP_FRACTION,
) -> float:
    """
    Linear warmup to peak_lr, then linear decay to 0 at total_steps.

    Args:
        step: Update index, 0 <= step <= total_steps
        total_steps: Length of the run
        peak_lr: Rate reached at the end of warmup
        warmup_fraction: Share of total_steps spent warming up

    Returns:
        Learning rate for this step
    """
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    if total_steps == 0:
        return 0.0
    warmup = warmup_steps(total_steps, warmup_fraction)
    if warmup > 0 and step <= warmup:
        return peak_lr * step / warmup
    return peak_lr * (total_steps - step) / (total_steps - warmup)


@dataclass
class MetricsRecord:
    """One line of metrics.jsonl."""

    step: int
    lr: float
    loss: float
    masked_acc: float
    wall_ms: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "step": self.step,
            "lr": self.lr,
            "loss": self.loss,
            "masked_acc": self.masked_acc,
            "wall_ms": self.wall_ms,
        }


@dataclass
class TrainState:
    """
    Mutable training state. The optimizer holds the first and second moments;
    `metrics` keeps the most recent records.
    """

    optimizer: torch.optim.Optimizer
    total_steps: int
    peak_lr: float = 1e-4
    warmup_fraction: float = DEFAULT_WARMUP_FRACTION
    clip_norm: float = 1.0
    seed: int = 0
    step: int = 0
    metrics: Deque[MetricsRecord] = field(default_factory=lambda: deque(maxlen=METRICS_RING_SIZE))

    def __post_init__(self) -> None:
        if not 0 <= self.step <= self.total_steps:
            raise ValueError(f"step {self.step} outside [0, {self.total_steps}]")

    @property
    def done(self) -> bool:
        return self.step >= self.total_steps

    def state_dict(self) -> Dict[str, Any]:
        return {
            "step": self.step,
            "total_steps": self.total_steps,
            "peak_lr": self.peak_lr,
            "warmup_fraction": self.warmup_fraction,
            "clip_norm": self.clip_norm,
            "seed": self.seed,
            "optimizer": self.optimizer.state_dict(),
            "metrics": [record.to_dict() for record in self.metrics],
        }

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        self.step = int(state["step"])
        self.optimizer.load_state_dict(state["optimizer"])
        self.metrics.clear()
        self.metrics.extend(MetricsRecord(**record) for record in state.get("metrics", []))


def _no_decay_names(model: nn.Module) -> set:
    names = set()
    for module_name, module in model.named_modules():
        for param_name, _ in module.named_parameters(recurse=False):
            full = f"{module_name}.{param_name}" if module_name else param_name
            if isinstance(module, nn.LayerNorm) or param_name == "bias":
                names.add(full)
    return names


def build_optimizer(
    model: nn.Module,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.01,
) -> torch.optim.AdamW:
    """
    Bias-corrected Adam with decoupled weight decay, skipping LayerNorm and bias parameters.

    The learning rate is assigned by adam_step before every update.
    """
    skip = _no_decay_names(model)
    decay: List[nn.Parameter] = []
    no_decay: List[nn.Parameter] = []
    for name, param in model.named_parameters():
        if not param.requires_grad:
            continue
        (no_decay if name in skip else decay).append(param)
    groups = [
        {"params": decay, "weight_decay": weight_decay},
        {"params": no_decay, "weight_decay": 0.0},
    ]
    return torch.optim.AdamW(
        [group for group in groups if group["params"]],
        lr=0.0,
        betas=(beta1, beta2),
        eps=eps,
        foreach=False,
    )


def adam_step(named_params: Sequence[Tuple[str, nn.Parameter]], state: TrainState) -> float:
    """
    Apply one update from the gradients already stored on the parameters.

    Args:
        named_params: (name, parameter) pairs covered by state.optimizer
        state: Training state; step is incremented on success

    Returns:
        Learning rate used for the update

    Raises:
        NonFiniteGradient: If any gradient holds NaN or infinity; no parameter
            or moment is changed and the gradients are cleared
        ValueError: If the run is already complete
    """
    if state.done:
        raise ValueError(f"Training already reached total_steps={state.total_steps}")

    params = [param for _, param in named_params]
    for name, param in named_params:
        if param.grad is not None and not bool(torch.isfinite(param.grad).all()):
            state.optimizer.zero_grad(set_to_none=True)
            logger.error(f"❌ Non-finite gradient in {name} at step {state.step}; update aborted")
            raise NonFiniteGradient(name, state.step)

    if state.clip_norm and state.clip_norm > 0:
        torch.nn.utils.clip_grad_norm_([p for p in params if p.grad is not None], state.clip_norm)

    lr = lr_at(state.step, state.total_steps, state.peak_lr, state.warmup_fraction)
    for group in state.optimizer.param_groups:
        group["lr"] = lr
    state.optimizer.step()
    state.optimizer.zero_grad(set_to_none=True)
    state.step += 1
    return lr


def log_record(record: MetricsRecord, every: int = 1, extra: Optional[Iterable[str]] = None) -> None:
    """Write a step summary to the training log every `every` steps."""
    if every > 0 and record.step % every == 0:
        suffix = " ".join(extra or [])
        training_logger.info(
            f"step {record.step} lr {record.lr:.3e} loss {record.loss:.4f} "
            f"masked_acc {record.masked_acc:.3f} {suffix}".rstrip()
        )
