import json

import numpy as np
import pytest
import torch

from config.run_config import RunConfig
from core.commands import cmd_segment
from segalm.data.synthetic import write_synthetic
from segalm.model.checkpoint import load_checkpoint
from segalm.training.pretrain import StepBatchSampler, latest_checkpoint, pretrain, split_held_out


@pytest.fixture
def examples_file(tmp_path, corpus_file, vocab_file):
    path = tmp_path / "examples.bin"
    cmd_segment(corpus_file, vocab_file, path, max_len=32)
    return path


def run_config(vocab_file, out_dir, **overrides):
    values = dict(
        layers=1,
        hidden=16,
        heads=2,
        ffn_width=32,
        max_paragraphs=8,
        max_sentences=8,
        max_tokens_per_sentence=32,
        total_steps=6,
        batch_size=2,
        peak_lr=1e-3,
        checkpoint_every=100,
        vocab_path=str(vocab_file),
        out_dir=str(out_dir),
    )
    values.update(overrides)
    return RunConfig(**values)


def losses(metrics_path):
    return [json.loads(line)["loss"] for line in metrics_path.read_text(encoding="utf-8").splitlines()]


def test_batches_depend_only_on_seed_and_step():
    full = list(StepBatchSampler(7, 3, seed=4, start_step=0, stop_step=10))
    tail = list(StepBatchSampler(7, 3, seed=4, start_step=6, stop_step=10))
    assert full[6:] == tail
    # Every epoch visits each example once
    first_epoch = [index for keys in full[:3] for _, index in keys]
    assert sorted(first_epoch) == list(range(7))


def test_zero_steps_writes_checkpoint(tmp_path, vocab_file, examples_file):
    config = run_config(vocab_file, tmp_path / "run", total_steps=0)
    result = pretrain(config, examples_file)
    assert result.steps == 0
    assert load_checkpoint(result.checkpoint_dir).header["step"] == 0
    assert result.metrics_path.read_text(encoding="utf-8") == ""


def test_runs_are_reproducible(tmp_path, vocab_file, examples_file):
    first = pretrain(run_config(vocab_file, tmp_path / "a"), examples_file)
    second = pretrain(run_config(vocab_file, tmp_path / "b"), examples_file)
    assert losses(first.metrics_path) == losses(second.metrics_path)
    assert len(losses(first.metrics_path)) == 6


def test_resume_matches_uninterrupted_run(tmp_path, vocab_file, examples_file):
    straight = pretrain(run_config(vocab_file, tmp_path / "straight"), examples_file)

    config = run_config(vocab_file, tmp_path / "resumed")
    halfway = pretrain(config, examples_file, stop_after=3)
    assert halfway.steps == 3
    assert latest_checkpoint(tmp_path / "resumed") == halfway.checkpoint_dir
    resumed = pretrain(config, examples_file)

    assert resumed.steps == 6
    assert losses(resumed.metrics_path) == losses(straight.metrics_path)
    a = load_checkpoint(straight.checkpoint_dir).tensors
    b = load_checkpoint(resumed.checkpoint_dir).tensors
    for name in a:
        assert torch.equal(a[name], b[name]), name


def test_no_resume_starts_over(tmp_path, vocab_file, examples_file):
    config = run_config(vocab_file, tmp_path / "run")
    pretrain(config, examples_file, stop_after=2)
    result = pretrain(config, examples_file, resume=False, stop_after=1)
    assert result.steps == 1
    assert len(losses(result.metrics_path)) == 1


def test_held_out_split_is_disjoint_and_stable():
    train, held = split_held_out(100, seed=3, fraction=0.1)
    assert len(held) == 10
    assert sorted(np.concatenate([train, held]).tolist()) == list(range(100))
    again_train, again_held = split_held_out(100, seed=3, fraction=0.1)
    assert np.array_equal(held, again_held) and np.array_equal(train, again_train)
    assert len(split_held_out(10000, seed=3, fraction=0.5)[1]) == 256
    # Always keeps one example to train on
    assert [len(part) for part in split_held_out(2, seed=0, fraction=0.9)] == [1, 1]
    assert [len(part) for part in split_held_out(3, seed=0, fraction=0.05)] == [3, 0]


def test_eval_loss_comes_from_held_out_examples(tmp_path, vocab_file, examples_file):
    result = pretrain(run_config(vocab_file, tmp_path / "held", eval_fraction=0.5), examples_file)
    assert result.held_out_examples == 1
    assert np.isfinite(result.initial_eval_loss) and np.isfinite(result.final_eval_loss)
    summary = json.loads((tmp_path / "held" / "summary.json").read_text(encoding="utf-8"))
    assert summary["held_out_examples"] == 1

    # Three examples at the default fraction leave nothing to hold out
    plain = pretrain(run_config(vocab_file, tmp_path / "plain"), examples_file)
    assert plain.held_out_examples == 0
    assert plain.initial_eval_loss is None and plain.final_eval_loss is None


def test_missing_examples_file(tmp_path, vocab_file):
    with pytest.raises(FileNotFoundError):
        pretrain(run_config(vocab_file, tmp_path / "run"), tmp_path / "nope.bin")


@pytest.mark.slow
def test_loss_halves_on_synthetic_corpus(tmp_path):
    vocab_path, corpus_path = write_synthetic(tmp_path / "synth", n_documents=200, seed=0)
    examples = tmp_path / "synth.bin"
    cmd_segment(corpus_path, vocab_path, examples, max_len=64)
    config = RunConfig(
        preset="toy",
        dropout=0.0,
        total_steps=2000,
        batch_size=16,
        peak_lr=1e-3,
        checkpoint_every=1000,
        vocab_path=str(vocab_path),
        out_dir=str(tmp_path / "run"),
    )
    result = pretrain(config, examples)
    trace = losses(result.metrics_path)
    early = float(np.mean(trace[:20]))
    late = float(np.mean(trace[-100:]))
    assert late <= 0.5 * early
    assert result.final_eval_loss < result.initial_eval_loss
