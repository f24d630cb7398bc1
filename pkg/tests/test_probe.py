import numpy as np
import pytest

from config.run_config import RunConfig
from core.commands import cmd_probe, cmd_segment
from segalm.data.synthetic import write_synthetic
from segalm.model.embeddings import PositionScheme
from segalm.training.pretrain import pretrain
from segalm.training.probe import run_probe


def test_probe_on_separable_features():
    rng = np.random.default_rng(0)
    labels = rng.integers(0, 3, size=300)
    features = np.eye(3)[labels] * 5 + rng.normal(scale=0.1, size=(300, 3))
    result = run_probe(features, labels, "sentence")
    assert result.accuracy == 1.0
    assert result.margin > 0.5
    assert result.to_dict()["num_classes"] == 3


def test_single_class_falls_back_to_baseline():
    result = run_probe(np.zeros((20, 4)), np.zeros(20, dtype=np.int64), "paragraph")
    assert result.accuracy == result.majority_baseline == 1.0
    assert result.margin == 0.0


def test_too_few_tokens():
    with pytest.raises(ValueError):
        run_probe(np.zeros((5, 4)), np.arange(5), "sentence")


@pytest.mark.slow
def test_trained_segment_model_encodes_sentence_index(tmp_path):
    vocab_path, corpus_path = write_synthetic(tmp_path / "synth", n_documents=200, seed=0)
    examples_path = tmp_path / "synth.bin"
    cmd_segment(corpus_path, vocab_path, examples_path, max_len=64)

    sentence = {}
    for scheme in (PositionScheme.SEGA, PositionScheme.GLOBAL):
        config = RunConfig(
            scheme=scheme,
            preset="toy",
            dropout=0.0,
            total_steps=2000,
            batch_size=16,
            peak_lr=1e-3,
            checkpoint_every=1000,
            vocab_path=str(vocab_path),
            out_dir=str(tmp_path / scheme.value),
            probe_layer=-1,
            probe_max_tokens=5000,
        )
        result = pretrain(config, examples_path)
        probe_config = config.model_copy(update={"out_dir": str(tmp_path / f"{scheme.value}-probe")})
        report = cmd_probe(result.checkpoint_dir, examples_path, probe_config)
        sentence[scheme] = report["sentence"]

    # Final hidden states of both schemes after identical training
    sega, global_ = sentence[PositionScheme.SEGA], sentence[PositionScheme.GLOBAL]
    assert sega["accuracy"] - sega["majority_baseline"] >= 0.10
    assert sega["accuracy"] > global_["accuracy"]
