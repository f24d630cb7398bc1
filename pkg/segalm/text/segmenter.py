"""
Paragraph and sentence segmentation, and (paragraph, sentence, token) index assignment.
"""
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, FrozenSet, Iterator, List, NamedTuple, Union

from core.logging_config import get_logger
from segalm.text.tokenizer import SubToken, Vocab, tokenize

logger = get_logger(__name__)

DOC_SEPARATOR = "===DOC==="
ABBREVIATIONS_FILE = Path(__file__).parent / "data" / "abbreviations.txt"

_BLANK_LINES = re.compile(r"\n[ \t\r\f\v]*\n")
_TERMINATOR = re.compile(r"[.!?]+[\"')\]]*(?=\s+\S)")
_TRAILING_WORD = re.compile(r"(\w+)$")


@dataclass(frozen=True)
class SegmentCaps:
    """Embedding-table sizes per index axis; valid indices are 0..cap-1."""

    max_paragraphs: int = 50
    max_sentences: int = 100
    max_tokens_per_sentence: int = 256

    def __post_init__(self) -> None:
        for name in ("max_paragraphs", "max_sentences", "max_tokens_per_sentence"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


class IndexedToken(NamedTuple):
    """A subtoken id with its paragraph, sentence and token index."""

    id: int
    p: int
    s: int
    t: int


@dataclass
class Document:
    """Paragraphs of sentences of subtokens; no paragraph or sentence is empty."""

    paragraphs: List[List[List[SubToken]]] = field(default_factory=list)

    @property
    def token_count(self) -> int:
        return sum(len(sentence) for paragraph in self.paragraphs for sentence in paragraph)


class CorpusDocument(NamedTuple):
    """Raw document text with the place it came from."""

    source: str
    line: int
    text: str


@lru_cache(maxsize=1)
def load_abbreviations() -> FrozenSet[str]:
    """Abbreviations whose trailing period never ends a sentence."""
    with open(ABBREVIATIONS_FILE, "r", encoding="utf-8") as reader:
        return frozenset(line.strip().lower() for line in reader if line.strip())


def split_paragraphs(raw: str) -> List[str]:
    """
    Split text into paragraphs separated by one or more blank lines.

    Args:
        raw: Document text

    Returns:
        Non-empty paragraphs with surrounding whitespace stripped
    """
    text = raw.replace("\r\n", "\n")
    return [chunk.strip() for chunk in _BLANK_LINES.split(text) if chunk.strip()]


def split_sentences(paragraph: str) -> List[str]:
    """
    Rule-based sentence split.

    A boundary follows a run of . ! or ? (plus closing quotes or brackets) when
    whitespace and then an uppercase letter or digit come next. A single period
    after a stop-listed abbreviation is not a boundary.

    Args:
        paragraph: Paragraph text

    Returns:
        Sentences; the whole paragraph when no boundary is found
    """
    abbreviations = load_abbreviations()
    sentences: List[str] = []
    start = 0
    for match in _TERMINATOR.finditer(paragraph):
        following = paragraph[match.end():].lstrip()
        if not following or not (following[0].isupper() or following[0].isdigit()):
            continue
        if match.group().startswith(".") and not match.group().startswith(".."):
            word = _TRAILING_WORD.search(paragraph[:match.start()])
            if word and word.group(1).lower() in abbreviations:
                continue
        sentence = paragraph[start:match.end()].strip()
        if sentence:
            sentences.append(sentence)
        start = match.end()

    tail = paragraph[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def segment_document(raw: str, vocab: Vocab) -> Document:
    """
    Split a raw document into paragraphs and sentences and tokenize every sentence.

    Args:
        raw: Document text
        vocab: Vocab for tokenization

    Returns:
        Document without empty paragraphs or sentences
    """
    paragraphs = []
    for paragraph in split_paragraphs(raw):
        sentences = [tokenize(sentence, vocab) for sentence in split_sentences(paragraph)]
        sentences = [sentence for sentence in sentences if sentence]
        if sentences:
            paragraphs.append(sentences)
    return Document(paragraphs)


def assign_indices(doc: Document, caps: SegmentCaps) -> List[IndexedToken]:
    """
    Give every subtoken its (paragraph, sentence, token) triple in document order.

    Indices start from 0 per document, per paragraph and per sentence; overflow
    is clamped to the last table slot.

    Args:
        doc: Segmented document
        caps: Table sizes

    Returns:
        One IndexedToken per subtoken
    """
    last_p = caps.max_paragraphs - 1
    last_s = caps.max_sentences - 1
    last_t = caps.max_tokens_per_sentence - 1
    out: List[IndexedToken] = []
    for i, paragraph in enumerate(doc.paragraphs):
        p = min(i, last_p)
        for j, sentence in enumerate(paragraph):
            s = min(j, last_s)
            for k, token in enumerate(sentence):
                out.append(IndexedToken(token.id, p, s, min(k, last_t)))
    return out


def count_clipped(doc: Document, caps: SegmentCaps) -> Dict[str, int]:
    """
    Count subtokens whose raw index exceeded its cap, per axis.

    Args:
        doc: Segmented document
        caps: Table sizes

    Returns:
        {"paragraph": n, "sentence": n, "token": n}
    """
    clipped = {"paragraph": 0, "sentence": 0, "token": 0}
    for i, paragraph in enumerate(doc.paragraphs):
        for j, sentence in enumerate(paragraph):
            n = len(sentence)
            if i >= caps.max_paragraphs:
                clipped["paragraph"] += n
            if j >= caps.max_sentences:
                clipped["sentence"] += n
            clipped["token"] += max(0, n - caps.max_tokens_per_sentence)
    return clipped


def read_corpus(path: Union[str, Path]) -> Iterator[CorpusDocument]:
    """
    Read raw documents from a corpus.

    A directory holds one document per file (sorted by name); a single file
    holds documents separated by lines containing only ===DOC===.

    Args:
        path: Corpus file or directory

    Yields:
        CorpusDocument for every non-blank document
    """
    path = Path(path)
    if path.is_dir():
        for child in sorted(p for p in path.iterdir() if p.is_file()):
            text = child.read_text(encoding="utf-8")
            if text.strip():
                yield CorpusDocument(str(child), 1, text)
        return

    lines: List[str] = []
    first_line = 1
    with open(path, "r", encoding="utf-8") as reader:
        for number, line in enumerate(reader, start=1):
            if line.strip() == DOC_SEPARATOR:
                text = "".join(lines)
                if text.strip():
                    yield CorpusDocument(str(path), first_line, text)
                lines = []
                first_line = number + 1
                continue
            lines.append(line)
    text = "".join(lines)
    if text.strip():
        yield CorpusDocument(str(path), first_line, text)


def index_histogram(doc: Document, caps: SegmentCaps) -> Dict[str, Dict[str, int]]:
    """
    Per-axis summary of a document's raw indices.

    Args:
        doc: Segmented document
        caps: Table sizes

    Returns:
        For each axis ("paragraph", "sentence", "token"): the largest raw index
        seen ("max_index"), the number of subtokens ("tokens") and how many of
        them were clamped ("clipped")
    """
    max_index = {"paragraph": -1, "sentence": -1, "token": -1}
    for i, paragraph in enumerate(doc.paragraphs):
        max_index["paragraph"] = max(max_index["paragraph"], i)
        for j, sentence in enumerate(paragraph):
            max_index["sentence"] = max(max_index["sentence"], j)
            max_index["token"] = max(max_index["token"], len(sentence) - 1)
    clipped = count_clipped(doc, caps)
    tokens = doc.token_count
    return {axis: {"max_index": max_index[axis], "tokens": tokens, "clipped": clipped[axis]} for axis in clipped}
