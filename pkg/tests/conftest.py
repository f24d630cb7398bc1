"""
Shared fixtures: a hand-written vocab, a three-document corpus, task files and
a small model configuration.
"""
import json
import logging
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import List

import pytest
import torch

from config.settings import reset_settings
from core.logging_config import TRAINING_LOGGER
from segalm.model.embeddings import PositionScheme
from segalm.model.encoder import EncoderConfig
from segalm.model.modeling import ModelConfig
from segalm.text.segmenter import SegmentCaps
from segalm.text.tokenizer import SPECIAL_TOKENS, Vocab

WORDS = [
    "the", "a", "cat", "dog", "sat", "on", "mat", "ran", "is", "big", "small", "red",
    "un", "##aff", "##able", "##s", "##ing", "play", "hello", "world",
    "what", "where", "who", "did", "in", "of", "city", "capital", "france", "paris",
    "lives", "bird", "sang", "home", "went",
    ".", ",", "?", "!",
]

# Token counts per sentence (all words are single pieces):
#   doc 1: [4, 4] [5]      -> 13 tokens
#   doc 2: [6]             -> 6 tokens
#   doc 3: [4] [5] [5, 4]  -> 18 tokens
CORPUS_DOCUMENTS = [
    "The cat sat. The dog ran.\n\nA cat is big.",
    "Hello world, hello world!",
    "A bird sang.\n\nThe cat went home.\n\nThe dog is red. Dog ran home.",
]
CORPUS_TOKENS = 13 + 6 + 18


def vocab_entries() -> List[str]:
    return list(SPECIAL_TOKENS) + WORDS


@pytest.fixture(autouse=True)
def _fresh_settings(monkeypatch, tmp_path):
    monkeypatch.setenv("LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.setenv("SEGALM_THREADS", "1")
    reset_settings()
    yield
    reset_settings()
    # Run directories attach handlers to streams that die with the test
    for name in (None, TRAINING_LOGGER):
        log = logging.getLogger(name)
        for handler in [h for h in log.handlers if type(h) in (logging.StreamHandler, RotatingFileHandler)]:
            log.removeHandler(handler)
            handler.close()


@pytest.fixture
def vocab() -> Vocab:
    return Vocab.from_entries(vocab_entries())


@pytest.fixture
def vocab_file(tmp_path) -> Path:
    path = tmp_path / "vocab.txt"
    path.write_text("\n".join(vocab_entries()) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def corpus_file(tmp_path) -> Path:
    path = tmp_path / "corpus.txt"
    path.write_text("\n===DOC===\n".join(CORPUS_DOCUMENTS) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def small_caps() -> SegmentCaps:
    return SegmentCaps(max_paragraphs=4, max_sentences=6, max_tokens_per_sentence=16)


def tiny_model_config(vocab_size: int, scheme=PositionScheme.SEGA, caps=None, dropout=0.0) -> ModelConfig:
    return ModelConfig(
        vocab_size=vocab_size,
        encoder=EncoderConfig(layers=2, hidden=16, heads=2, ffn_width=32, dropout=dropout),
        scheme=scheme,
        caps=caps or SegmentCaps(4, 6, 16),
        max_positions=64,
    )


@pytest.fixture
def tiny_config(vocab) -> ModelConfig:
    return tiny_model_config(len(vocab))


def write_jsonl(path: Path, rows) -> Path:
    path.write_text("".join(json.dumps(row) + "\n" for row in rows), encoding="utf-8")
    return path


def random_batch(config: ModelConfig, batch: int = 2, seq: int = 10, seed: int = 0):
    """Random ids and triples inside the config's tables; no padding."""
    generator = torch.Generator().manual_seed(seed)
    caps = config.caps

    def draw(high):
        return torch.randint(0, high, (batch, seq), generator=generator)

    return {
        "ids": torch.randint(5, config.vocab_size, (batch, seq), generator=generator),
        "p": draw(caps.max_paragraphs),
        "s": draw(caps.max_sentences),
        "t": draw(min(seq, caps.max_tokens_per_sentence)),
        "type_ids": torch.zeros(batch, seq, dtype=torch.long),
        "attn_mask": torch.ones(batch, seq, dtype=torch.long),
    }
