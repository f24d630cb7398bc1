"""
Deterministic synthetic corpus with paragraph and sentence structure.

Every paragraph has a topic. Its first sentence introduces a subject with
"a"; later sentences refer back to it with "the". Verbs carry "##s" / "##ed"
/ "##ing" continuation pieces so WordPiece splitting is exercised.
"""
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from core.logging_config import get_logger
from segalm.text.segmenter import DOC_SEPARATOR
from segalm.text.tokenizer import SPECIAL_TOKENS

logger = get_logger(__name__)

TOPICS = {
    "nature": ["river", "tree", "stone", "cloud", "bird", "hill", "leaf", "rain", "wind", "field"],
    "city": ["street", "car", "tower", "market", "bridge", "shop", "train", "door", "window", "road"],
    "home": ["table", "chair", "lamp", "bed", "cup", "plate", "book", "clock", "floor", "wall"],
    "work": ["desk", "paper", "phone", "office", "report", "team", "plan", "meeting", "letter", "screen"],
}
VERBS = ["walk", "jump", "pass", "watch", "touch", "follow", "reach", "push", "pull", "lift", "climb", "paint"]
ADJECTIVES = ["big", "small", "red", "old", "new", "quiet", "bright", "dark", "warm", "cold"]
PREPOSITIONS = ["near", "over", "under", "behind", "beside"]
DETERMINERS = ["the", "a", "this", "every", "some"]
FUNCTION_WORDS = ["and", "then", "is", "was"]
SUFFIXES = ["##s", "##ed", "##ing"]
PUNCTUATION = [".", ",", "!", "?"]

DEFAULT_DOCUMENTS = 200
VOCAB_FILE = "vocab.txt"
CORPUS_FILE = "corpus.txt"


def synthetic_vocab() -> List[str]:
    """Vocab entries covering every word the generator emits."""
    entries = list(SPECIAL_TOKENS) + PUNCTUATION + DETERMINERS + FUNCTION_WORDS
    for nouns in TOPICS.values():
        entries.extend(nouns)
    entries.extend(VERBS + ADJECTIVES + PREPOSITIONS + SUFFIXES)
    return entries


def _pick(rng: np.random.Generator, options: List[str]) -> str:
    return options[int(rng.integers(len(options)))]


def _sentence(rng: np.random.Generator, subject: str, nouns: List[str], first: bool) -> str:
    words = ["a" if first else "the"]
    if first or rng.random() < 0.3:
        words.append(_pick(rng, ADJECTIVES))
    words.append(subject)
    if not first and rng.random() < 0.3:
        words.append(_pick(rng, ["then", "and"]))
    words.append(_pick(rng, VERBS) + _pick(rng, ["s", "ed", "ing"]))
    words.extend([_pick(rng, DETERMINERS), _pick(rng, nouns)])
    if rng.random() < 0.5:
        words.extend([_pick(rng, PREPOSITIONS), "the", _pick(rng, nouns)])
    text = " ".join(words)
    return text[0].upper() + text[1:] + _pick(rng, [".", ".", ".", "!", "?"])


def generate_document(rng: np.random.Generator) -> str:
    """One document of 2-4 paragraphs of 2-5 sentences."""
    paragraphs = []
    for _ in range(int(rng.integers(2, 5))):
        nouns = TOPICS[_pick(rng, sorted(TOPICS))]
        subject = _pick(rng, nouns)
        count = int(rng.integers(2, 6))
        paragraphs.append(" ".join(_sentence(rng, subject, nouns, j == 0) for j in range(count)))
    return "\n\n".join(paragraphs)


def generate_corpus(n_documents: int = DEFAULT_DOCUMENTS, seed: int = 0) -> List[str]:
    """n_documents raw documents; identical for identical (n_documents, seed)."""
    rng = np.random.default_rng(seed)
    return [generate_document(rng) for _ in range(n_documents)]


def write_synthetic(
    directory: Union[str, Path],
    n_documents: int = DEFAULT_DOCUMENTS,
    seed: int = 0,
) -> Tuple[Path, Path]:
    """
    Write vocab.txt and corpus.txt (documents separated by ===DOC=== lines).

    Returns:
        (vocab path, corpus path)
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    vocab_path = directory / VOCAB_FILE
    corpus_path = directory / CORPUS_FILE
    vocab_path.write_text("\n".join(synthetic_vocab()) + "\n", encoding="utf-8")
    documents = generate_corpus(n_documents, seed)
    corpus_path.write_text(f"\n{DOC_SEPARATOR}\n".join(documents) + "\n", encoding="utf-8")
    logger.info(f"📝 Wrote {n_documents} synthetic documents to {corpus_path}")
    return vocab_path, corpus_path
