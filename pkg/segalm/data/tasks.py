"""
Fine-tuning task files (JSON lines) and their encoding into examples.

Classification lines: {"text_a": ..., "text_b": ... (optional), "label": ...}
Span lines: {"question": ..., "context_paragraphs": [[sentence, ...], ...],
             "answer_text": ..., "answer_char_start": ...}

answer_char_start is an offset into the context text: sentences joined by a
single space, paragraphs joined by a blank line.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from core.logging_config import get_logger
from segalm.data.builder import (
    DEFAULT_MAX_QUERY_LEN,
    MAX_SEQ_LEN,
    Example,
    ExampleKind,
    SpanLayout,
    build_pair,
    build_single,
    build_span,
)
from segalm.data.collate import context_mask
from segalm.text.segmenter import SegmentCaps
from segalm.text.tokenizer import SubToken, Vocab, tokenize, tokenize_with_offsets
from utils.jsonl import read_jsonl

logger = get_logger(__name__)

SENTENCE_JOINER = " "
PARAGRAPH_JOINER = "\n\n"


@dataclass
class ClassificationRecord:
    text_a: str
    label: Union[int, float]
    text_b: Optional[str] = None


@dataclass
class SpanRecord:
    question: str
    context_paragraphs: List[List[str]]
    answer_text: str
    answer_char_start: int
    id: Optional[str] = None

    @property
    def answer_char_end(self) -> int:
        """Exclusive end offset of the answer in the context text."""
        return self.answer_char_start + len(self.answer_text)


@dataclass
class SpanFeature:
    """A packed span example plus what is needed to turn positions back into text."""

    example: Example
    layout: SpanLayout
    token_spans: List[Tuple[int, int]]
    context: str
    answer_text: str
    id: Optional[str] = None

    def answer_for(self, start: int, end: int) -> str:
        """
        Context text covered by packed positions start..end (inclusive).

        Args:
            start: Packed start position (a context position)
            end: Packed end position

        Returns:
            The original context substring from the start word to the end word
        """
        first = start - self.layout.context_offset
        last = end - self.layout.context_offset
        if not (0 <= first <= last < len(self.token_spans)):
            return ""
        return self.context[self.token_spans[first][0]:self.token_spans[last][1]]


def context_text(paragraphs: List[List[str]]) -> Tuple[str, List[List[int]]]:
    """
    Join a context into one string.

    Returns:
        (text, start offset of every sentence per paragraph)
    """
    pieces: List[str] = []
    starts: List[List[int]] = []
    cursor = 0
    for i, paragraph in enumerate(paragraphs):
        if i:
            pieces.append(PARAGRAPH_JOINER)
            cursor += len(PARAGRAPH_JOINER)
        paragraph_starts = []
        for j, sentence in enumerate(paragraph):
            if j:
                pieces.append(SENTENCE_JOINER)
                cursor += len(SENTENCE_JOINER)
            paragraph_starts.append(cursor)
            pieces.append(sentence)
            cursor += len(sentence)
        starts.append(paragraph_starts)
    return "".join(pieces), starts


def _require(data: Dict[str, Any], keys: Tuple[str, ...], where: str) -> None:
    missing = [key for key in keys if key not in data]
    if missing:
        raise ValueError(f"{where}: missing field(s) {', '.join(missing)}")


def load_classification(path: Union[str, Path]) -> List[ClassificationRecord]:
    """Read a classification/regression task file."""
    records = []
    for number, data in enumerate(read_jsonl(path), start=1):
        _require(data, ("text_a", "label"), f"{path} record {number}")
        records.append(ClassificationRecord(data["text_a"], data["label"], data.get("text_b")))
    return records


def load_span(path: Union[str, Path]) -> List[SpanRecord]:
    """Read a span-extraction task file."""
    records = []
    for number, data in enumerate(read_jsonl(path), start=1):
        _require(
            data,
            ("question", "context_paragraphs", "answer_text", "answer_char_start"),
            f"{path} record {number}",
        )
        records.append(
            SpanRecord(
                question=data["question"],
                context_paragraphs=data["context_paragraphs"],
                answer_text=data["answer_text"],
                answer_char_start=int(data["answer_char_start"]),
                id=data.get("id"),
            )
        )
    return records


def encode_classification(
    record: ClassificationRecord,
    vocab: Vocab,
    max_len: int = MAX_SEQ_LEN,
    caps: Optional[SegmentCaps] = None,
    regression: bool = False,
) -> Example:
    """
    Encode a classification record as a single-sentence or sentence-pair example.

    Each side is one segment with sentence index 0, whatever its internal
    sentence count.
    """
    labels: Dict[str, Any] = {"score": float(record.label)} if regression else {"label": int(record.label)}
    seq_a = tokenize(record.text_a, vocab)
    if record.text_b is None:
        return build_single(seq_a, vocab, max_len, caps, **labels)
    return build_pair(seq_a, tokenize(record.text_b, vocab), vocab, max_len, caps, **labels)


def encode_span(
    record: SpanRecord,
    vocab: Vocab,
    max_len: int = MAX_SEQ_LEN,
    caps: Optional[SegmentCaps] = None,
    max_query_len: int = DEFAULT_MAX_QUERY_LEN,
    with_answer: bool = True,
) -> SpanFeature:
    """
    Encode a span record.

    Every subtoken inherits the character span of the word it came from; the
    gold token span runs from the first token ending after answer_char_start
    to the last token starting before the answer's end.

    Args:
        record: Span record
        vocab: Vocab
        max_len: Example capacity
        caps: Index table sizes
        max_query_len: Question tokens kept
        with_answer: Attach gold start/end (raises when they fall outside the window)

    Returns:
        SpanFeature

    Raises:
        EmptyQuestion: If the question has no tokens
        AnswerOutOfWindow: If with_answer and the answer is cut off
        ValueError: If the answer offsets fall outside the context text
    """
    text, starts = context_text(record.context_paragraphs)
    paragraphs: List[List[List[SubToken]]] = []
    token_spans: List[Tuple[int, int]] = []
    for paragraph, paragraph_starts in zip(record.context_paragraphs, starts):
        sentences = []
        for sentence, offset in zip(paragraph, paragraph_starts):
            pieces: List[SubToken] = []
            for word in tokenize_with_offsets(sentence, vocab):
                pieces.extend(word.pieces)
                token_spans.extend([(offset + word.start, offset + word.end)] * len(word.pieces))
            sentences.append(pieces)
        paragraphs.append(sentences)

    answer = None
    if with_answer:
        begin, end = record.answer_char_start, record.answer_char_end
        if begin < 0 or end > len(text) or text[begin:end] != record.answer_text:
            raise ValueError(f"Answer {record.answer_text!r} is not found at offset {begin} of the context")
        covered = [k for k, (s, e) in enumerate(token_spans) if e > begin and s < end]
        if not covered:
            raise ValueError(f"Answer {record.answer_text!r} covers no context token")
        answer = (covered[0], covered[-1])

    example, layout = build_span(
        tokenize(record.question, vocab),
        paragraphs,
        vocab,
        answer=answer,
        max_len=max_len,
        caps=caps,
        max_query_len=max_query_len,
    )
    return SpanFeature(example, layout, token_spans[: layout.context_kept], text, record.answer_text, record.id)


def convention_violations(example: Example) -> List[str]:
    """
    Check a fine-tuning example against its index convention.

    Pair: paragraph indices {0, 1} with the first segment on 0, the second on 1,
    sentence index 0 throughout. Span: question on paragraph 0, every context
    token on paragraph >= 1. Single: paragraph and sentence 0 throughout.
    """
    n = example.length
    p, s = example.p[:n], example.s[:n]
    problems: List[str] = []
    if example.kind == ExampleKind.PAIR_CLASSIFY:
        if set(np.unique(p).tolist()) != {0, 1}:
            problems.append(f"pair paragraph indices {sorted(set(p.tolist()))} are not {{0, 1}}")
        second = example.type_ids[:n] == 1
        if np.any(p[second] != 1) or np.any(p[~second] != 0):
            problems.append("pair segment and paragraph index disagree")
        if np.any(s != 0):
            problems.append("pair sentence indices are not all 0")
    elif example.kind == ExampleKind.SPAN:
        in_context = context_mask(example)[:n].astype(bool)
        question = example.type_ids[:n] == 0
        if np.any(p[question] != 0):
            problems.append("question tokens are not on paragraph 0")
        if not in_context.any() or np.any(p[in_context] < 1):
            problems.append("context tokens are not on paragraph >= 1")
    elif example.kind == ExampleKind.SINGLE_CLASSIFY:
        if np.any(p != 0) or np.any(s != 0):
            problems.append("single-sentence indices are not all 0")
    return problems
