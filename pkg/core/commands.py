"""
Command implementations behind the CLI. Each returns plain data so it can be
called from tests or other code without going through click.
"""
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from config.run_config import RunConfig
from core.logging_config import get_logger
from core.runs import prepare_run_dir
from segalm.data.builder import pack_pretraining
from segalm.data.records import from_record, read_header, read_records, write_examples
from segalm.data.tasks import load_classification
from segalm.errors import SegaLMError, VocabMismatch
from segalm.model.checkpoint import load_checkpoint
from segalm.model.modeling import SegaModel
from segalm.text.segmenter import SegmentCaps, assign_indices, index_histogram, read_corpus, segment_document
from segalm.text.tokenizer import load_vocab
from segalm.training.finetune import FinetuneConfig, TaskType, finetune, sweep
from segalm.training.gradcheck import DEFAULT_TOLERANCE, GradCheckReport, gradient_check
from segalm.training.pretrain import pretrain
from segalm.training.probe import probe_indices
from utils.jsonl import write_json
from utils.seeding import seed_everything

logger = get_logger(__name__)

STATS_SUFFIX = ".stats.json"
GRADCHECK_FILE = "gradcheck.json"
PROBE_FILE = "probe.json"
# Vocab size for gradient checks run without a vocab file
GRADCHECK_VOCAB_SIZE = 100


class CommandError(SegaLMError):
    """A command failed on a specific input file and line."""

    def __init__(self, source: str, line: int, cause: Exception):
        self.source = source
        self.line = line
        self.cause = cause
        super().__init__(f"{source}:{line}: {cause}")


def cmd_segment(
    corpus_in: Union[str, Path],
    vocab_path: Union[str, Path],
    examples_out: Union[str, Path],
    caps: Optional[SegmentCaps] = None,
    max_len: int = 128,
) -> Dict[str, Any]:
    """
    Tokenize, segment and pack a corpus into an example file.

    Args:
        corpus_in: Corpus file (===DOC=== separated) or directory
        vocab_path: Vocab file
        examples_out: Example file to write; a stats report goes next to it
        caps: Index table sizes
        max_len: Example capacity

    Returns:
        Stats report: documents, examples, tokens, per-axis clipped counts and rates

    Raises:
        CommandError: Wrapping a document-level failure with its file and line
    """
    caps = caps or SegmentCaps()
    vocab = load_vocab(vocab_path)
    examples = []
    documents = 0
    tokens = 0
    clipped = {"paragraph": 0, "sentence": 0, "token": 0}
    deepest = {"paragraph": -1, "sentence": -1, "token": -1}
    for document in read_corpus(corpus_in):
        try:
            doc = segment_document(document.text, vocab)
            indexed = assign_indices(doc, caps)
            examples.extend(pack_pretraining(indexed, max_len, vocab, caps))
        except SegaLMError as e:
            raise CommandError(document.source, document.line, e) from e
        if doc.token_count == 0:
            continue
        documents += 1
        tokens += doc.token_count
        for axis, summary in index_histogram(doc, caps).items():
            clipped[axis] += summary["clipped"]
            deepest[axis] = max(deepest[axis], summary["max_index"])

    if documents == 0:
        logger.warning(f"⚠️ Corpus {corpus_in} holds no documents; writing an empty example file")
    write_examples(examples, examples_out, vocab.fingerprint, max_len=max_len)

    stats = {
        "documents": documents,
        "examples": len(examples),
        "tokens": tokens,
        "max_len": max_len,
        "clipped": clipped,
        "clip_rate": {axis: (count / tokens if tokens else 0.0) for axis, count in clipped.items()},
        "max_index": deepest,
    }
    write_json(str(examples_out) + STATS_SUFFIX, stats)
    logger.info(f"✅ Segmented {documents} documents into {len(examples)} examples")
    return stats


def cmd_pretrain(config: RunConfig, resume: bool = True, show_progress: bool = False) -> Path:
    """Pretrain into config.out_dir; returns the final checkpoint directory."""
    run_dir = prepare_run_dir(config)
    result = pretrain(config, config.examples_path, run_dir, resume=resume, show_progress=show_progress)
    return result.checkpoint_dir


def _num_labels(train_path: Union[str, Path]) -> int:
    labels = [int(record.label) for record in load_classification(train_path)]
    return max(2, max(labels, default=0) + 1)


def cmd_finetune(
    config: RunConfig,
    run_sweep: bool = False,
    workers: int = 1,
    show_progress: bool = False,
) -> Dict[str, Any]:
    """
    Fine-tune config.checkpoint_path on config.train_path, scoring config.dev_path.

    The checkpoint's scheme is checked only when the scheme was set explicitly.

    Returns:
        Dev metrics, or the sweep report when run_sweep
    """
    missing = [
        name
        for name in ("checkpoint_path", "train_path", "dev_path", "vocab_path")
        if not getattr(config, name)
    ]
    if missing:
        raise ValueError(f"finetune requires {', '.join(missing)}")
    run_dir = prepare_run_dir(config)
    task = TaskType(config.task)
    cfg = FinetuneConfig.defaults(
        task,
        lr=config.ft_lr,
        batch=config.ft_batch_size,
        epochs=config.ft_epochs,
        warmup_fraction=config.ft_warmup_fraction,
        max_len=config.max_len,
        max_answer_len=config.max_answer_len,
        max_query_len=config.max_query_len,
        seed=config.seed,
        num_labels=_num_labels(config.train_path) if task == TaskType.CLASSIFICATION else None,
    )
    requested = config.scheme if "scheme" in config.model_fields_set else None
    if run_sweep:
        return sweep(
            config.checkpoint_path, config.train_path, config.dev_path, cfg,
            config.vocab_path, run_dir, requested, workers=workers,
        )
    result = finetune(
        config.checkpoint_path, config.train_path, config.dev_path, cfg,
        config.vocab_path, run_dir, requested, show_progress=show_progress,
    )
    return result.metrics


def cmd_gradcheck(config: RunConfig, tolerance: float = DEFAULT_TOLERANCE) -> GradCheckReport:
    """Gradient-check the configured architecture; the report lands in the run directory."""
    run_dir = prepare_run_dir(config)
    vocab_size = len(load_vocab(config.vocab_path)) if config.vocab_path else GRADCHECK_VOCAB_SIZE
    report = gradient_check(config.model_config_for(vocab_size), tolerance, seed=config.seed)
    write_json(run_dir / GRADCHECK_FILE, report.to_dict())
    return report


def cmd_probe(
    checkpoint: Union[str, Path],
    examples: Union[str, Path],
    config: RunConfig,
) -> Dict[str, Any]:
    """
    Probe a checkpoint's hidden states for sentence and paragraph indices.

    Returns:
        {"sentence": ProbeResult dict, "paragraph": ProbeResult dict}
    """
    if not config.vocab_path:
        raise ValueError("probe requires vocab_path")
    run_dir = prepare_run_dir(config)
    seed_everything(config.seed)
    requested = config.scheme if "scheme" in config.model_fields_set else None
    loaded = load_checkpoint(checkpoint, expected_scheme=requested, with_train_state=False)
    vocab = load_vocab(config.vocab_path)
    stored_hash = loaded.header.get("vocab_hash")
    if stored_hash and stored_hash != vocab.fingerprint:
        raise VocabMismatch(vocab.fingerprint, stored_hash)
    model = SegaModel(loaded.model_config)
    model.load_state_dict(loaded.encoder_tensors())
    _, records = read_records(examples, vocab.fingerprint)
    results = probe_indices(
        model,
        [from_record(record) for record in records],
        vocab,
        layer=config.probe_layer,
        max_tokens=config.probe_max_tokens,
        seed=config.seed,
    )
    report = {target: result.to_dict() for target, result in results.items()}
    report["scheme"] = loaded.scheme.value
    write_json(run_dir / PROBE_FILE, report)
    return report


def cmd_inspect(path: Union[str, Path], limit: Optional[int] = None) -> List[Dict[str, Any]]:
    """Records of an example file as dictionaries, in file order."""
    header, records = read_records(path)
    if limit is not None:
        records = records[:limit]
    logger.debug(f"Inspecting {len(records)} of {header['count']} records in {path}")
    return [from_record(record).to_dict() for record in records]


def cmd_header(path: Union[str, Path]) -> Dict[str, Any]:
    """Header of an example file."""
    header, _ = read_header(path)
    return header
