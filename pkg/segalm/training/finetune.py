"""
Fine-tuning on classification, regression and span-extraction task files.
"""
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import torch
from torch import nn
from tqdm import tqdm

from core.logging_config import get_logger, get_training_logger
from segalm.data.builder import Example
from segalm.data.collate import collate_examples
from segalm.data.tasks import (
    SpanFeature,
    convention_violations,
    encode_classification,
    encode_span,
    load_classification,
    load_span,
)
from segalm.errors import AnswerOutOfWindow, VocabMismatch
from segalm.model.checkpoint import load_checkpoint, save_checkpoint
from segalm.model.embeddings import PositionScheme
from segalm.model.heads import decode_span
from segalm.model.modeling import (
    ModelConfig,
    SegaForSequenceClassification,
    SegaForSpanExtraction,
    load_encoder_state,
)
from segalm.text.tokenizer import Vocab, load_vocab
from segalm.training.losses import classification_loss, span_loss
from segalm.training.metrics import classification_report, regression_report, span_report
from segalm.training.optim import TrainState, adam_step, build_optimizer
from utils.jsonl import write_json
from utils.seeding import seed_everything

logger = get_logger(__name__)
training_logger = get_training_logger()

METRICS_FILE = "metrics.json"
SWEEP_FILE = "sweep.json"
EVAL_BATCH = 64


class TaskType(str, Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"
    SPAN = "span"


DEFAULTS: Dict[TaskType, Dict[str, Any]] = {
    TaskType.CLASSIFICATION: {"lr": 3e-5, "batch": 256, "epochs": 3},
    TaskType.REGRESSION: {"lr": 3e-5, "batch": 256, "epochs": 3},
    TaskType.SPAN: {"lr": 3e-5, "batch": 128, "epochs": 4},
}

DEFAULT_GRID: Dict[str, Tuple[Any, ...]] = {
    "batch": (16, 24, 32),
    "lr": (2e-5, 3e-5, 5e-5),
    "epochs": tuple(range(3, 11)),
}

PRIMARY_METRIC = {
    TaskType.CLASSIFICATION: "accuracy",
    TaskType.REGRESSION: "spearman",
    TaskType.SPAN: "f1",
}


@dataclass
class FinetuneConfig:
    """Hyperparameters of one fine-tuning run."""

    task: TaskType
    lr: float
    batch: int
    epochs: int
    num_labels: int = 2
    warmup_fraction: float = 0.0
    weight_decay: float = 0.01
    clip_norm: float = 1.0
    max_len: int = 128
    max_answer_len: int = 30
    max_query_len: int = 64
    seed: int = 0
    grid: Optional[Dict[str, Sequence[Any]]] = field(default=None)

    def __post_init__(self) -> None:
        self.task = TaskType(self.task)
        if self.task == TaskType.REGRESSION:
            self.num_labels = 1
        if self.lr <= 0 or self.batch <= 0 or self.epochs <= 0:
            raise ValueError("lr, batch and epochs must be positive")
        if self.task == TaskType.CLASSIFICATION and self.num_labels < 2:
            raise ValueError(f"classification needs num_labels >= 2, got {self.num_labels}")

    @classmethod
    def defaults(cls, task: Union[str, TaskType], **overrides: Any) -> "FinetuneConfig":
        """Task defaults, with non-None overrides applied."""
        task = TaskType(task)
        values = dict(DEFAULTS[task])
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(task=task, **values)


@dataclass
class FinetuneResult:
    metrics: Dict[str, float]
    checkpoint_dir: Path
    train_examples: int
    skipped: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "metrics": self.metrics,
            "checkpoint_dir": str(self.checkpoint_dir),
            "train_examples": self.train_examples,
            "skipped": self.skipped,
        }


def _build_model(model_config: ModelConfig, cfg: FinetuneConfig) -> nn.Module:
    if cfg.task == TaskType.SPAN:
        return SegaForSpanExtraction(model_config)
    return SegaForSequenceClassification(model_config, cfg.num_labels)


def _check_conventions(examples: Sequence[Example]) -> None:
    for index, example in enumerate(examples):
        problems = convention_violations(example)
        if problems:
            raise ValueError(f"Example {index} breaks its index convention: {'; '.join(problems)}")


def _encode(
    path: Union[str, Path],
    cfg: FinetuneConfig,
    vocab: Vocab,
    model_config: ModelConfig,
    training: bool,
) -> Tuple[List[Example], List[SpanFeature], int]:
    """Examples (and span features) of a task file; out-of-window training answers are skipped."""
    caps = model_config.caps
    if cfg.task != TaskType.SPAN:
        regression = cfg.task == TaskType.REGRESSION
        examples = [
            encode_classification(record, vocab, cfg.max_len, caps, regression)
            for record in load_classification(path)
        ]
        return examples, [], 0

    features: List[SpanFeature] = []
    skipped = 0
    for record in load_span(path):
        try:
            features.append(
                encode_span(record, vocab, cfg.max_len, caps, cfg.max_query_len, with_answer=training)
            )
        except AnswerOutOfWindow as e:
            skipped += 1
            logger.warning(f"⚠️ Skipping span record {record.id or ''} from {path}: {e}")
    return [feature.example for feature in features], features, skipped


def _loss(model: nn.Module, batch: Dict[str, torch.Tensor], cfg: FinetuneConfig) -> torch.Tensor:
    if cfg.task == TaskType.SPAN:
        start_logits, end_logits = model(batch)
        return span_loss(start_logits, end_logits, batch["start"], batch["end"])
    targets = batch["score"] if cfg.task == TaskType.REGRESSION else batch["class_label"]
    return classification_loss(model(batch), targets)


@torch.no_grad()
def evaluate(
    model: nn.Module,
    examples: Sequence[Example],
    cfg: FinetuneConfig,
    features: Optional[Sequence[SpanFeature]] = None,
) -> Dict[str, float]:
    """
    Task metrics of a model on encoded examples.

    Returns:
        accuracy/matthews(/f1) for classification, pearson/spearman for
        regression, exact_match/f1 for spans
    """
    model.eval()
    predictions: List[Any] = []
    for begin in range(0, len(examples), EVAL_BATCH):
        batch = collate_examples(examples[begin:begin + EVAL_BATCH])
        if cfg.task == TaskType.SPAN:
            start_logits, end_logits = model(batch)
            start_scores = torch.log_softmax(start_logits, dim=-1)
            end_scores = torch.log_softmax(end_logits, dim=-1)
            for row in range(start_scores.shape[0]):
                predictions.append(decode_span(start_scores[row], end_scores[row], cfg.max_answer_len))
        else:
            logits = model(batch)
            if cfg.task == TaskType.REGRESSION:
                predictions.extend(logits.squeeze(-1).tolist())
            else:
                predictions.extend(logits.argmax(dim=-1).tolist())

    if cfg.task == TaskType.SPAN:
        assert features is not None
        answers = [feature.answer_for(s, e) for feature, (s, e) in zip(features, predictions)]
        return span_report(answers, [feature.answer_text for feature in features])
    if cfg.task == TaskType.REGRESSION:
        return regression_report(predictions, [example.score for example in examples])
    return classification_report(predictions, [example.class_label for example in examples])


def finetune(
    checkpoint_dir: Union[str, Path],
    train_path: Union[str, Path],
    dev_path: Union[str, Path],
    cfg: FinetuneConfig,
    vocab_path: Union[str, Path],
    out_dir: Union[str, Path],
    requested_scheme: Optional[Union[str, PositionScheme]] = None,
    show_progress: bool = False,
) -> FinetuneResult:
    """
    Fine-tune a pretrained encoder on a task and report dev metrics.

    Args:
        checkpoint_dir: Pretraining (or fine-tuning) checkpoint
        train_path: Training task file
        dev_path: Dev task file
        cfg: Hyperparameters
        vocab_path: Vocab the checkpoint was trained with
        out_dir: Run directory for the fine-tuned checkpoint and metrics.json
        requested_scheme: Scheme the caller expects the checkpoint to use
        show_progress: Show a tqdm progress bar

    Returns:
        FinetuneResult with dev metrics

    Raises:
        SchemeMismatch: If requested_scheme differs from the checkpoint's scheme
        VocabMismatch: If the checkpoint was trained with another vocab
    """
    out_dir = Path(out_dir)
    checkpoint = load_checkpoint(checkpoint_dir, expected_scheme=requested_scheme, with_train_state=False)
    vocab = load_vocab(vocab_path)
    stored_hash = checkpoint.header.get("vocab_hash")
    if stored_hash and stored_hash != vocab.fingerprint:
        raise VocabMismatch(vocab.fingerprint, stored_hash)

    seed_everything(cfg.seed)
    model_config = checkpoint.model_config
    model = _build_model(model_config, cfg)
    load_encoder_state(model, checkpoint.encoder_tensors())

    train_examples, _, skipped = _encode(train_path, cfg, vocab, model_config, training=True)
    dev_examples, dev_features, _ = _encode(dev_path, cfg, vocab, model_config, training=False)
    if not train_examples:
        raise ValueError(f"{train_path} yields no usable training examples")
    _check_conventions(train_examples)
    _check_conventions(dev_examples)

    steps_per_epoch = math.ceil(len(train_examples) / cfg.batch)
    state = TrainState(
        optimizer=build_optimizer(model, weight_decay=cfg.weight_decay),
        total_steps=cfg.epochs * steps_per_epoch,
        peak_lr=cfg.lr,
        warmup_fraction=cfg.warmup_fraction,
        clip_norm=cfg.clip_norm,
        seed=cfg.seed,
    )
    named_params = [(name, param) for name, param in model.named_parameters() if param.requires_grad]
    logger.info(
        f"🚀 Fine-tuning {model_config.scheme.value} checkpoint on {cfg.task.value}: "
        f"{len(train_examples)} examples, {cfg.epochs} epochs, batch {cfg.batch}, lr {cfg.lr}"
    )

    with tqdm(total=state.total_steps, desc=f"finetune[{cfg.task.value}]", disable=not show_progress) as bar:
        for epoch in range(cfg.epochs):
            model.train()
            order = torch.randperm(len(train_examples), generator=torch.Generator().manual_seed(cfg.seed + epoch))
            for begin in range(0, len(order), cfg.batch):
                batch = collate_examples([train_examples[int(i)] for i in order[begin:begin + cfg.batch]])
                loss = _loss(model, batch, cfg)
                loss.backward()
                lr = adam_step(named_params, state)
                bar.update(1)
            training_logger.info(f"{cfg.task.value} epoch {epoch + 1}/{cfg.epochs} loss {float(loss):.4f} lr {lr:.3e}")

    metrics = evaluate(model, dev_examples, cfg, dev_features) if dev_examples else {}
    directory = save_checkpoint(
        out_dir / "checkpoint",
        model,
        model_config,
        head=cfg.task.value,
        vocab_hash=vocab.fingerprint,
        extra_header={"num_labels": cfg.num_labels},
        config_snapshot={k: v for k, v in asdict(cfg).items() if k != "grid"} | {"task": cfg.task.value},
    )
    result = FinetuneResult(metrics, directory, len(train_examples), skipped)
    write_json(out_dir / METRICS_FILE, result.to_dict())
    logger.info(f"✅ Fine-tuning done: {metrics}")
    return result


def _sweep_one(args: Tuple[Any, ...]) -> Dict[str, Any]:
    checkpoint_dir, train_path, dev_path, cfg, vocab_path, run_dir, scheme = args
    result = finetune(checkpoint_dir, train_path, dev_path, cfg, vocab_path, run_dir, scheme)
    return {"batch": cfg.batch, "lr": cfg.lr, "epochs": cfg.epochs, "out_dir": str(run_dir), "metrics": result.metrics}


def sweep(
    checkpoint_dir: Union[str, Path],
    train_path: Union[str, Path],
    dev_path: Union[str, Path],
    base: FinetuneConfig,
    vocab_path: Union[str, Path],
    out_dir: Union[str, Path],
    requested_scheme: Optional[Union[str, PositionScheme]] = None,
    workers: int = 1,
) -> Dict[str, Any]:
    """
    Run finetune over every (batch, lr, epochs) combination of the grid.

    Each combination gets its own directory under out_dir; with workers > 1
    combinations run in separate processes.

    Returns:
        {"runs": [...], "best": run with the highest primary metric}
    """
    out_dir = Path(out_dir)
    grid = {**DEFAULT_GRID, **(base.grid or {})}
    jobs = []
    for batch, lr, epochs in itertools.product(grid["batch"], grid["lr"], grid["epochs"]):
        cfg = replace(base, batch=batch, lr=lr, epochs=epochs, grid=None)
        run_dir = out_dir / f"bs{batch}_lr{lr:g}_ep{epochs}"
        jobs.append((checkpoint_dir, train_path, dev_path, cfg, vocab_path, run_dir, requested_scheme))
    logger.info(f"🔁 Sweeping {len(jobs)} fine-tuning configurations with {workers} worker(s)")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_sweep_one, jobs))
    else:
        runs = [_sweep_one(job) for job in jobs]

    key = PRIMARY_METRIC[base.task]
    best = max(runs, key=lambda run: run["metrics"].get(key, float("-inf")), default=None)
    report = {"metric": key, "runs": runs, "best": best}
    write_json(out_dir / SWEEP_FILE, report)
    return report
