"""
Masked-LM pretraining loop with periodic checkpoints and resume.

Batches are a pure function of (seed, step): the step determines the epoch
and the slice of that epoch's permutation, and every example is masked with a
generator seeded by (seed, epoch, index). A resumed run therefore sees the
same batches as an uninterrupted one.
"""
import json
import math
import random
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
import torch
from torch.utils.data import DataLoader, Dataset, Sampler
from tqdm import tqdm

from config.run_config import RunConfig
from config.settings import get_settings
from core.logging_config import get_logger, get_training_logger
from segalm.data.builder import Example, ExampleKind
from segalm.data.collate import collate_examples
from segalm.data.records import from_record, read_records
from segalm.errors import VocabMismatch
from segalm.model.checkpoint import load_checkpoint, save_checkpoint
from segalm.model.modeling import SegaForMaskedLM
from segalm.text.tokenizer import Vocab, load_vocab
from segalm.training.losses import mlm_loss
from segalm.training.masking import MaskingPolicy, apply_masking, masking_rng
from segalm.training.optim import MetricsRecord, TrainState, adam_step, build_optimizer, log_record
from utils.jsonl import append_jsonl, write_json
from utils.seeding import configure_threads, seed_everything

logger = get_logger(__name__)
training_logger = get_training_logger()

CHECKPOINTS_DIR = "checkpoints"
LATEST_FILE = "latest"
METRICS_FILE = "metrics.jsonl"
SUMMARY_FILE = "summary.json"
# Masking epoch reserved for held-out evaluation batches
EVAL_EPOCH = 2**31 - 1
EVAL_LIMIT = 256


class PretrainDataset(Dataset):
    """Example records keyed by (epoch, index); masking happens on access."""

    def __init__(self, records: np.ndarray, vocab: Vocab, policy: MaskingPolicy, seed: int):
        self.records = records
        self.vocab = vocab
        self.policy = policy
        self.seed = seed

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, key: Tuple[int, int]) -> Example:
        epoch, index = key
        example = from_record(self.records[index])
        masked, _ = apply_masking(example, self.policy, masking_rng(self.seed, epoch, index), self.vocab)
        return masked


class StepBatchSampler(Sampler):
    """Yields the (epoch, index) keys of batches start_step .. stop_step - 1."""

    def __init__(self, num_examples: int, batch_size: int, seed: int, start_step: int, stop_step: int):
        if num_examples <= 0:
            raise ValueError("No examples to sample from")
        self.num_examples = num_examples
        self.batch_size = batch_size
        self.seed = seed
        self.start_step = start_step
        self.stop_step = stop_step

    @property
    def steps_per_epoch(self) -> int:
        return math.ceil(self.num_examples / self.batch_size)

    def permutation(self, epoch: int) -> np.ndarray:
        return np.random.default_rng([self.seed, epoch]).permutation(self.num_examples)

    def batch_keys(self, step: int, order: Optional[np.ndarray] = None) -> List[Tuple[int, int]]:
        epoch, offset = divmod(step, self.steps_per_epoch)
        if order is None:
            order = self.permutation(epoch)
        chunk = order[offset * self.batch_size:(offset + 1) * self.batch_size]
        return [(epoch, int(index)) for index in chunk]

    def __iter__(self) -> Iterator[List[Tuple[int, int]]]:
        epoch, order = -1, None
        for step in range(self.start_step, self.stop_step):
            if step // self.steps_per_epoch != epoch:
                epoch = step // self.steps_per_epoch
                order = self.permutation(epoch)
            yield self.batch_keys(step, order)

    def __len__(self) -> int:
        return max(0, self.stop_step - self.start_step)


@dataclass
class PretrainResult:
    """Where a pretraining run left its artifacts."""

    checkpoint_dir: Path
    steps: int
    metrics_path: Path
    initial_eval_loss: Optional[float] = None
    final_eval_loss: Optional[float] = None
    held_out_examples: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "checkpoint_dir": str(self.checkpoint_dir),
            "steps": self.steps,
            "metrics_path": str(self.metrics_path),
            "initial_eval_loss": self.initial_eval_loss,
            "final_eval_loss": self.final_eval_loss,
            "held_out_examples": self.held_out_examples,
        }


def split_held_out(
    num_examples: int, seed: int, fraction: float, limit: int = EVAL_LIMIT
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Partition example indices into training and held-out sets.

    The held-out set is the first floor(num_examples * fraction) entries (at
    most limit, leaving at least one training example) of a seed-keyed
    permutation, so a resumed run holds out the same examples.

    Returns:
        (train indices, held-out indices), each sorted
    """
    count = min(limit, int(num_examples * fraction), max(0, num_examples - 1))
    order = np.random.default_rng([seed, EVAL_EPOCH]).permutation(num_examples)
    return np.sort(order[count:]), np.sort(order[:count])


@torch.no_grad()
def evaluate_mlm(
    model: SegaForMaskedLM,
    records: np.ndarray,
    vocab: Vocab,
    policy: MaskingPolicy,
    seed: int,
    batch_size: int = 32,
) -> Tuple[float, float]:
    """
    Masked-LM loss and accuracy on held-out records, masked the same way on every call.

    Args:
        model: Model to evaluate (put in eval mode for the call)
        records: Held-out example records
        vocab: Vocab for masking
        policy: Masking policy
        seed: Run seed
        batch_size: Evaluation batch size

    Returns:
        (loss, accuracy), averaged over labeled positions
    """
    was_training = model.training
    model.eval()
    dataset = PretrainDataset(records, vocab, policy, seed)
    total_loss, total_hits, total_labels = 0.0, 0.0, 0
    try:
        for begin in range(0, len(dataset), batch_size):
            batch = collate_examples([dataset[(EVAL_EPOCH, i)] for i in range(begin, min(begin + batch_size, len(dataset)))])
            loss, accuracy = mlm_loss(model(batch), batch["mlm_labels"])
            labeled = int((batch["mlm_labels"] != -1).sum())
            total_loss += float(loss) * labeled
            total_hits += accuracy * labeled
            total_labels += labeled
    finally:
        model.train(was_training)
    if total_labels == 0:
        return float("nan"), float("nan")
    return total_loss / total_labels, total_hits / total_labels


def latest_checkpoint(out_dir: Union[str, Path]) -> Optional[Path]:
    """The most recent checkpoint directory of a run, or None."""
    pointer = Path(out_dir) / CHECKPOINTS_DIR / LATEST_FILE
    if not pointer.is_file():
        return None
    directory = pointer.parent / pointer.read_text(encoding="utf-8").strip()
    return directory if directory.is_dir() else None


def _truncate_metrics(path: Path, step: int) -> None:
    """Drop metric lines past `step` left by an interrupted run."""
    if not path.exists():
        return
    kept = [line for line in path.read_text(encoding="utf-8").splitlines() if line and json.loads(line)["step"] <= step]
    path.write_text("".join(line + "\n" for line in kept), encoding="utf-8")


def _save(
    out_dir: Path,
    model: SegaForMaskedLM,
    state: TrainState,
    config: RunConfig,
    vocab: Vocab,
) -> Path:
    directory = out_dir / CHECKPOINTS_DIR / f"step-{state.step:07d}"
    train_state = {
        "trainer": state.state_dict(),
        "torch_rng": torch.get_rng_state(),
        "numpy_rng": np.random.get_state(),
        "python_rng": random.getstate(),
    }
    save_checkpoint(
        directory,
        model,
        model.config,
        head="mlm",
        vocab_hash=vocab.fingerprint,
        train_state=train_state,
        config_snapshot=config.snapshot(),
        extra_header={"step": state.step},
    )
    (out_dir / CHECKPOINTS_DIR / LATEST_FILE).write_text(directory.name + "\n", encoding="utf-8")
    return directory


def pretrain(
    config: RunConfig,
    examples_path: Optional[Union[str, Path]] = None,
    out_dir: Optional[Union[str, Path]] = None,
    resume: bool = True,
    stop_after: Optional[int] = None,
    show_progress: bool = False,
) -> PretrainResult:
    """
    Pretrain a masked-LM model on an example file.

    Args:
        config: Validated run configuration
        examples_path: Example file (defaults to config.examples_path)
        out_dir: Run directory (defaults to config.out_dir)
        resume: Continue from the run's latest checkpoint when one exists
        stop_after: Stop (and checkpoint) once this many steps are done; the
            schedule still spans config.total_steps
        show_progress: Show a tqdm progress bar

    Returns:
        PretrainResult with the final checkpoint directory

    Raises:
        VocabMismatch: If the example file or checkpoint used another vocab
        SchemeMismatch: If the checkpoint being resumed used another scheme
        NonFiniteGradient: If an update meets a NaN or infinite gradient
    """
    examples_path = Path(examples_path or config.examples_path or "")
    out_dir = Path(out_dir or config.out_dir)
    if not config.vocab_path:
        raise ValueError("vocab_path is required for pretraining")
    if not examples_path.is_file():
        raise FileNotFoundError(f"Example file not found: {examples_path}")
    out_dir.mkdir(parents=True, exist_ok=True)

    configure_threads(get_settings().SEGALM_THREADS, config.deterministic)
    seed_everything(config.seed)

    vocab = load_vocab(config.vocab_path)
    _, records = read_records(examples_path, vocab.fingerprint)
    records = records[records["kind"] == int(ExampleKind.PRETRAIN)]
    policy = config.masking_policy()

    model = SegaForMaskedLM(config.model_config_for(len(vocab)))
    optimizer = build_optimizer(model, config.beta1, config.beta2, config.adam_eps, config.weight_decay)
    state = TrainState(
        optimizer=optimizer,
        total_steps=config.total_steps,
        peak_lr=config.peak_lr,
        warmup_fraction=config.warmup_fraction,
        clip_norm=config.clip_norm,
        seed=config.seed,
    )
    metrics_path = out_dir / METRICS_FILE

    previous = latest_checkpoint(out_dir) if resume else None
    if previous is not None:
        checkpoint = load_checkpoint(previous, expected_scheme=config.scheme)
        if checkpoint.header.get("vocab_hash") != vocab.fingerprint:
            raise VocabMismatch(vocab.fingerprint, checkpoint.header.get("vocab_hash") or "")
        model.load_state_dict(checkpoint.tensors)
        state.load_state_dict(checkpoint.train_state["trainer"])
        torch.set_rng_state(checkpoint.train_state["torch_rng"])
        np.random.set_state(checkpoint.train_state["numpy_rng"])
        random.setstate(checkpoint.train_state["python_rng"])
        _truncate_metrics(metrics_path, state.step)
        logger.info(f"🔄 Resuming {out_dir} from step {state.step}")
    else:
        metrics_path.write_text("", encoding="utf-8")

    stop = config.total_steps if stop_after is None else min(stop_after, config.total_steps)
    if state.step >= stop:
        directory = _save(out_dir, model, state, config, vocab)
        logger.info(f"✅ Nothing to train (step {state.step} of {config.total_steps})")
        return PretrainResult(directory, state.step, metrics_path)

    if len(records) == 0:
        raise ValueError(f"{examples_path} holds no pretraining examples")

    train_index, held_index = split_held_out(len(records), config.seed, config.eval_fraction)
    held_out, records = records[held_index], records[train_index]

    initial_eval = None
    if state.step == 0 and len(held_out):
        initial_eval, _ = evaluate_mlm(model, held_out, vocab, policy, config.seed, config.batch_size)
        training_logger.info(f"initial held-out MLM loss {initial_eval:.4f} on {len(held_out)} examples")

    settings = get_settings()
    workers = 0 if config.deterministic else max(0, settings.SEGALM_THREADS - 1)
    loader = DataLoader(
        PretrainDataset(records, vocab, policy, config.seed),
        batch_sampler=StepBatchSampler(len(records), config.batch_size, config.seed, state.step, stop),
        collate_fn=collate_examples,
        num_workers=workers,
        prefetch_factor=2 if workers else None,
        generator=torch.Generator().manual_seed(config.seed),
    )

    logger.info(
        f"🚀 Pretraining {config.scheme.value} model ({sum(p.numel() for p in model.parameters())} parameters) "
        f"on {len(records)} examples, steps {state.step}..{stop} of {config.total_steps}"
    )
    named_params = [(name, param) for name, param in model.named_parameters() if param.requires_grad]
    model.train()
    with tqdm(total=stop, initial=state.step, desc=f"pretrain[{config.scheme.value}]", disable=not show_progress) as bar:
        for batch in loader:
            started = time.perf_counter()
            loss, accuracy = mlm_loss(model(batch), batch["mlm_labels"])
            loss.backward()
            lr = adam_step(named_params, state)
            record = MetricsRecord(
                step=state.step,
                lr=lr,
                loss=float(loss),
                masked_acc=accuracy,
                wall_ms=(time.perf_counter() - started) * 1000.0,
            )
            state.metrics.append(record)
            append_jsonl(metrics_path, [record.to_dict()])
            log_record(record, config.log_every)
            bar.update(1)
            if state.step % config.checkpoint_every == 0 and state.step < stop:
                _save(out_dir, model, state, config, vocab)

    directory = _save(out_dir, model, state, config, vocab)
    final_eval = None
    if len(held_out):
        final_eval, final_acc = evaluate_mlm(model, held_out, vocab, policy, config.seed, config.batch_size)
        training_logger.info(f"final held-out MLM loss {final_eval:.4f} (masked accuracy {final_acc:.3f})")
    else:
        logger.debug("No held-out examples; eval_fraction leaves none")

    result = PretrainResult(directory, state.step, metrics_path, initial_eval, final_eval, len(held_out))
    write_json(out_dir / SUMMARY_FILE, result.to_dict())
    logger.info(f"✅ Pretraining stopped at step {state.step}; checkpoint {directory}")
    return result
