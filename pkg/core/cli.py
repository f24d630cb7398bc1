"""
Command-line interface.

    segalm segment CORPUS VOCAB EXAMPLES_OUT
    segalm pretrain --config run.env
    segalm finetune --config run.env --task span
    segalm gradcheck --scheme sega
    segalm probe CHECKPOINT EXAMPLES --config run.env
    segalm inspect EXAMPLES --limit 3
    segalm synth OUT_DIR

Every command accepts --config, --seed, --scheme and --deterministic; flags
win over config file values.
"""
import functools
import json
from typing import Any, Callable, Dict, Optional

import click

from config.run_config import RunConfig, load_run_config
from core import commands
from core.logging_config import get_logger
from segalm import __version__
from segalm.data.synthetic import DEFAULT_DOCUMENTS, write_synthetic
from segalm.errors import SegaLMError
from segalm.model.embeddings import PositionScheme

logger = get_logger(__name__)


def run_options(func: Callable) -> Callable:
    """Attach the common --config/--seed/--scheme/--deterministic flags."""
    decorators = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="key=value config file"),
        click.option("--seed", type=int, default=None, help="Random seed"),
        click.option(
            "--scheme",
            type=click.Choice([scheme.value for scheme in PositionScheme]),
            default=None,
            help="Position scheme",
        ),
        click.option("--deterministic/--no-deterministic", default=None, help="Single-threaded deterministic mode"),
    ]
    for decorator in reversed(decorators):
        func = decorator(func)
    return func


def handle_errors(func: Callable) -> Callable:
    """Turn library and file errors into a one-line message and exit code 1."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except (SegaLMError, OSError, ValueError) as e:
            logger.error(f"❌ {type(e).__name__}: {e}")
            raise click.ClickException(f"{type(e).__name__}: {e}") from e

    return wrapper


def build_config(
    config_path: Optional[str],
    seed: Optional[int],
    scheme: Optional[str],
    deterministic: Optional[bool],
    **overrides: Any,
) -> RunConfig:
    values: Dict[str, Any] = {"seed": seed, "scheme": scheme, "deterministic": deterministic}
    values.update(overrides)
    return load_run_config(config_path, values)


def echo_json(data: Any) -> None:
    click.echo(json.dumps(data, indent=2, sort_keys=True, default=str))


@click.group()
@click.version_option(__version__, prog_name="segalm")
def cli() -> None:
    """Masked-LM pretraining with segment-aware position embeddings."""


@cli.command()
@click.argument("corpus_in", type=click.Path(exists=True))
@click.argument("vocab", type=click.Path())
@click.argument("examples_out", type=click.Path(dir_okay=False))
@click.option("--max-len", type=int, default=None, help="Example capacity (at most 512)")
@run_options
@handle_errors
def segment(corpus_in, vocab, examples_out, max_len, config_path, seed, scheme, deterministic):
    """Tokenize, segment and pack CORPUS_IN into EXAMPLES_OUT."""
    config = build_config(config_path, seed, scheme, deterministic, max_len=max_len, vocab_path=vocab)
    echo_json(commands.cmd_segment(corpus_in, config.vocab_path, examples_out, config.caps(), config.max_len))


@cli.command()
@click.option("--examples", "examples_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--vocab", "vocab_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@click.option("--steps", "total_steps", type=int, default=None)
@click.option("--resume/--no-resume", default=True, help="Continue from the run's latest checkpoint")
@click.option("--progress/--no-progress", default=True)
@run_options
@handle_errors
def pretrain(examples_path, vocab_path, out_dir, total_steps, resume, progress, config_path, seed, scheme, deterministic):
    """Pretrain a masked-LM model."""
    config = build_config(
        config_path, seed, scheme, deterministic,
        examples_path=examples_path, vocab_path=vocab_path, out_dir=out_dir, total_steps=total_steps,
    )
    checkpoint = commands.cmd_pretrain(config, resume=resume, show_progress=progress)
    click.echo(str(checkpoint))


@cli.command()
@click.option("--checkpoint", "checkpoint_path", type=click.Path(exists=True, file_okay=False), default=None)
@click.option("--train", "train_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--dev", "dev_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--vocab", "vocab_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--task", type=click.Choice(["classification", "regression", "span"]), default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@click.option("--sweep", "run_sweep", is_flag=True, help="Run the batch/lr/epochs grid")
@click.option("--workers", type=int, default=1, help="Parallel sweep processes")
@run_options
@handle_errors
def finetune(checkpoint_path, train_path, dev_path, vocab_path, task, out_dir, run_sweep, workers,
             config_path, seed, scheme, deterministic):
    """Fine-tune a checkpoint on a task file and report dev metrics."""
    config = build_config(
        config_path, seed, scheme, deterministic,
        checkpoint_path=checkpoint_path, train_path=train_path, dev_path=dev_path,
        vocab_path=vocab_path, task=task, out_dir=out_dir,
    )
    echo_json(commands.cmd_finetune(config, run_sweep=run_sweep, workers=workers))


@cli.command()
@click.option("--tolerance", type=float, default=commands.DEFAULT_TOLERANCE)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@run_options
@handle_errors
def gradcheck(tolerance, out_dir, config_path, seed, scheme, deterministic):
    """Finite-difference gradient check in double precision."""
    config = build_config(config_path, seed, scheme, deterministic, out_dir=out_dir)
    report = commands.cmd_gradcheck(config, tolerance)
    echo_json(report.to_dict())
    if not report.passed:
        raise click.ClickException("gradient check failed")


@cli.command()
@click.argument("checkpoint", type=click.Path(exists=True, file_okay=False))
@click.argument("examples", type=click.Path(exists=True, dir_okay=False))
@click.option("--vocab", "vocab_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--layer", "probe_layer", type=int, default=None, help="Hidden-state index (-1 = last layer)")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@run_options
@handle_errors
def probe(checkpoint, examples, vocab_path, probe_layer, out_dir, config_path, seed, scheme, deterministic):
    """Linear probes for sentence and paragraph index on frozen hidden states."""
    config = build_config(
        config_path, seed, scheme, deterministic,
        vocab_path=vocab_path, probe_layer=probe_layer, out_dir=out_dir,
    )
    echo_json(commands.cmd_probe(checkpoint, examples, config))


@cli.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--limit", type=int, default=None, help="Print at most this many records")
@click.option("--header", "show_header", is_flag=True, help="Print the file header first")
@handle_errors
def inspect(path, limit, show_header):
    """Print the records of an example file as JSON lines."""
    if show_header:
        click.echo(json.dumps({"header": commands.cmd_header(path)}, sort_keys=True))
    for record in commands.cmd_inspect(path, limit):
        click.echo(json.dumps(record, sort_keys=True))


@cli.command()
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--documents", type=int, default=DEFAULT_DOCUMENTS)
@click.option("--seed", type=int, default=0)
@handle_errors
def synth(out_dir, documents, seed):
    """Write the synthetic vocab and corpus into OUT_DIR."""
    vocab_path, corpus_path = write_synthetic(out_dir, documents, seed)
    echo_json({"vocab": str(vocab_path), "corpus": str(corpus_path)})
