"""
Pack indexed token streams into fixed-length examples.

Pretraining examples follow document order; fine-tuning examples follow the
pair and reading-comprehension index conventions:

- single sentence: every token gets paragraph 0, sentence 0
- sentence pair: first segment paragraph 0, second segment paragraph 1, both sentence 0
- question + context: question paragraph 0; context paragraph i gets i + 1 and
  its sentences are indexed from 0
"""
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.logging_config import get_logger
from segalm.errors import AnswerOutOfWindow, EmptyQuestion, EmptySequence
from segalm.text.segmenter import IndexedToken, SegmentCaps
from segalm.text.tokenizer import SubToken, Vocab

logger = get_logger(__name__)

MAX_SEQ_LEN = 512
IGNORE_LABEL = -1
DEFAULT_MAX_QUERY_LEN = 64


class ExampleKind(IntEnum):
    """What an example is used for; the value is its on-disk code."""

    PRETRAIN = 0
    PAIR_CLASSIFY = 1
    SINGLE_CLASSIFY = 2
    SPAN = 3


@dataclass(eq=False)
class Example:
    """
    Fixed-capacity packed sequence.

    Arrays all have length max_len. Padding is a suffix with attn_mask 0.
    Labels: mlm_labels (IGNORE_LABEL where unlabeled), class_label or score
    for classification/regression, start/end for spans.
    """

    ids: np.ndarray
    p: np.ndarray
    s: np.ndarray
    t: np.ndarray
    type_ids: np.ndarray
    attn_mask: np.ndarray
    kind: ExampleKind
    mlm_labels: np.ndarray = field(default=None)  # type: ignore[assignment]
    class_label: int = -1
    score: float = 0.0
    start: int = -1
    end: int = -1

    def __post_init__(self) -> None:
        if self.mlm_labels is None:
            self.mlm_labels = np.full(len(self.ids), IGNORE_LABEL, dtype=np.int32)
        self.kind = ExampleKind(self.kind)

    @property
    def max_len(self) -> int:
        return len(self.ids)

    @property
    def length(self) -> int:
        """Number of real (non-pad) positions."""
        return int(self.attn_mask.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Example):
            return NotImplemented
        arrays = ("ids", "p", "s", "t", "type_ids", "attn_mask", "mlm_labels")
        return (
            all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays)
            and self.kind == other.kind
            and self.class_label == other.class_label
            and np.float64(self.score).tobytes() == np.float64(other.score).tobytes()
            and self.start == other.start
            and self.end == other.end
        )

    def violations(self, vocab: Vocab, caps: SegmentCaps) -> List[str]:
        """
        Check the layout invariants.

        Args:
            vocab: Vocab the example was built with
            caps: Index table sizes

        Returns:
            Human-readable violations; empty when the example is well formed
        """
        problems: List[str] = []
        n = self.length
        if n == 0:
            return ["example has no real tokens"]
        if not np.all(self.attn_mask[:n] == 1) or np.any(self.attn_mask[n:] != 0):
            problems.append("padding is not a suffix of the attention mask")
        if int(self.ids[0]) != vocab.cls_id:
            problems.append("position 0 does not hold [CLS]")
        if int(self.ids[n - 1]) != vocab.sep_id:
            problems.append("last real position is not [SEP]")
        if np.any(self.ids[n:] != vocab.pad_id):
            problems.append("padding positions hold non-pad ids")
        seps = int(np.sum(self.ids[:n] == vocab.sep_id))
        expected = 2 if self.kind in (ExampleKind.PAIR_CLASSIFY, ExampleKind.SPAN) else 1
        if seps != expected:
            problems.append(f"expected {expected} [SEP] tokens, found {seps}")
        for name, cap in (
            ("p", caps.max_paragraphs),
            ("s", caps.max_sentences),
            ("t", caps.max_tokens_per_sentence),
        ):
            values = getattr(self, name)[:n]
            if np.any(values >= cap):
                problems.append(f"{name} index out of bounds (cap {cap})")
        if self.kind == ExampleKind.SPAN and not (0 < self.start <= self.end < n):
            problems.append("span labels outside the real positions")
        return problems

    def to_dict(self) -> Dict[str, Any]:
        """Convert to a JSON-serializable dictionary of the real positions."""
        n = self.length
        data: Dict[str, Any] = {
            "kind": self.kind.name.lower(),
            "length": n,
            "ids": self.ids[:n].tolist(),
            "triples": [[int(a), int(b), int(c)] for a, b, c in zip(self.p[:n], self.s[:n], self.t[:n])],
            "type_ids": self.type_ids[:n].tolist(),
        }
        if self.kind == ExampleKind.PRETRAIN:
            labeled = np.nonzero(self.mlm_labels != IGNORE_LABEL)[0]
            if len(labeled):
                data["mlm_labels"] = {int(i): int(self.mlm_labels[i]) for i in labeled}
        elif self.kind == ExampleKind.SPAN:
            data["start"] = self.start
            data["end"] = self.end
        else:
            data["class_label"] = self.class_label
            data["score"] = self.score
        return data


class _Layout:
    """Accumulates (id, p, s, t, type) rows and pads them into an Example."""

    def __init__(self, vocab: Vocab, caps: SegmentCaps):
        self.vocab = vocab
        self.caps = caps
        self.rows: List[Tuple[int, int, int, int, int]] = []

    def add(self, token_id: int, p: int, s: int, t: int, type_id: int = 0) -> None:
        self.rows.append(
            (
                token_id,
                min(p, self.caps.max_paragraphs - 1),
                min(s, self.caps.max_sentences - 1),
                min(t, self.caps.max_tokens_per_sentence - 1),
                type_id,
            )
        )

    def add_sep(self, type_id: int = 0) -> None:
        """[SEP] inherits the previous token's (p, s) and takes the next t."""
        _, p, s, t, _ = self.rows[-1]
        self.add(self.vocab.sep_id, p, s, t + 1, type_id)

    def finish(self, max_len: int, kind: ExampleKind, **labels: Any) -> Example:
        if len(self.rows) > max_len:
            raise ValueError(f"Layout of {len(self.rows)} rows exceeds max_len {max_len}")
        n = len(self.rows)
        ids = np.full(max_len, self.vocab.pad_id, dtype=np.int32)
        p = np.zeros(max_len, dtype=np.uint16)
        s = np.zeros(max_len, dtype=np.uint16)
        t = np.zeros(max_len, dtype=np.uint16)
        type_ids = np.zeros(max_len, dtype=np.uint8)
        attn_mask = np.zeros(max_len, dtype=np.uint8)
        if n:
            rows = np.asarray(self.rows, dtype=np.int64)
            ids[:n] = rows[:, 0]
            p[:n] = rows[:, 1]
            s[:n] = rows[:, 2]
            t[:n] = rows[:, 3]
            type_ids[:n] = rows[:, 4]
            attn_mask[:n] = 1
        return Example(ids, p, s, t, type_ids, attn_mask, kind, **labels)


def pack_pretraining(
    tokens: Sequence[IndexedToken],
    max_len: int,
    vocab: Vocab,
    caps: Optional[SegmentCaps] = None,
) -> List[Example]:
    """
    Greedily pack one document's indexed tokens into pretraining examples.

    Each example holds up to max_len - 2 content tokens between [CLS] and [SEP];
    examples never cross documents.

    Args:
        tokens: Indexed tokens of one document
        max_len: Example capacity including the two specials
        vocab: Vocab for special ids
        caps: Index table sizes

    Returns:
        Examples in document order; empty for an empty document
    """
    if max_len < 3 or max_len > MAX_SEQ_LEN:
        raise ValueError(f"max_len must be in [3, {MAX_SEQ_LEN}], got {max_len}")
    caps = caps or SegmentCaps()
    capacity = max_len - 2
    examples = []
    for offset in range(0, len(tokens), capacity):
        chunk = tokens[offset:offset + capacity]
        layout = _Layout(vocab, caps)
        layout.add(vocab.cls_id, 0, 0, 0)
        for token in chunk:
            layout.add(token.id, token.p, token.s, token.t)
        layout.add_sep()
        examples.append(layout.finish(max_len, ExampleKind.PRETRAIN))
    return examples


def truncate_pair(
    seq_a: Sequence[SubToken], seq_b: Sequence[SubToken], budget: int
) -> Tuple[List[SubToken], List[SubToken]]:
    """Trim the tail of the longer segment, one token at a time, until both fit in budget."""
    a, b = list(seq_a), list(seq_b)
    while len(a) + len(b) > budget:
        if len(a) >= len(b):
            a.pop()
        else:
            b.pop()
    return a, b


def build_single(
    seq: Sequence[SubToken],
    vocab: Vocab,
    max_len: int = MAX_SEQ_LEN,
    caps: Optional[SegmentCaps] = None,
    label: int = -1,
    score: float = 0.0,
) -> Example:
    """
    Single-sentence classification input: [CLS] A [SEP], A at (0, 0, t).

    Raises:
        EmptySequence: If seq is empty
    """
    if not seq:
        raise EmptySequence("Single-sentence input is empty")
    caps = caps or SegmentCaps()
    tokens = list(seq)[: max_len - 2]
    layout = _Layout(vocab, caps)
    layout.add(vocab.cls_id, 0, 0, 0)
    for k, token in enumerate(tokens):
        layout.add(token.id, 0, 0, k)
    layout.add_sep()
    return layout.finish(max_len, ExampleKind.SINGLE_CLASSIFY, class_label=label, score=score)


def build_pair(
    seq_a: Sequence[SubToken],
    seq_b: Sequence[SubToken],
    vocab: Vocab,
    max_len: int = MAX_SEQ_LEN,
    caps: Optional[SegmentCaps] = None,
    label: int = -1,
    score: float = 0.0,
) -> Example:
    """
    Sentence-pair input: [CLS] A [SEP] B [SEP].

    A tokens get (0, 0, t) and B tokens (1, 0, t), t counting from 0 in each
    segment. Over-long pairs are truncated longest-first.

    Args:
        seq_a: First segment
        seq_b: Second segment
        vocab: Vocab for special ids
        max_len: Example capacity
        caps: Index table sizes
        label: Class id (-1 when unused)
        score: Regression target

    Returns:
        PairClassify example

    Raises:
        EmptySequence: If either segment is empty
    """
    if not seq_a or not seq_b:
        raise EmptySequence("Both pair segments must be non-empty")
    caps = caps or SegmentCaps()
    a, b = truncate_pair(seq_a, seq_b, max_len - 3)
    layout = _Layout(vocab, caps)
    layout.add(vocab.cls_id, 0, 0, 0)
    for k, token in enumerate(a):
        layout.add(token.id, 0, 0, k)
    layout.add_sep()
    for k, token in enumerate(b):
        layout.add(token.id, 1, 0, k, type_id=1)
    layout.add_sep(type_id=1)
    return layout.finish(max_len, ExampleKind.PAIR_CLASSIFY, class_label=label, score=score)


@dataclass
class SpanLayout:
    """Where the context sits inside a packed span example."""

    context_offset: int
    context_kept: int
    context_total: int


def build_span(
    question: Sequence[SubToken],
    context_paragraphs: Sequence[Sequence[Sequence[SubToken]]],
    vocab: Vocab,
    answer: Optional[Tuple[int, int]] = None,
    max_len: int = MAX_SEQ_LEN,
    caps: Optional[SegmentCaps] = None,
    max_query_len: int = DEFAULT_MAX_QUERY_LEN,
) -> Tuple[Example, SpanLayout]:
    """
    Reading-comprehension input: [CLS] question [SEP] context [SEP].

    The question gets (0, 0, t). Context paragraph i gets paragraph index
    i + 1, sentences indexed from 0 inside it and tokens from 0 per sentence.
    Sentences and paragraphs without tokens take no index. The question is
    cut to leave at least one context slot; context that does not fit the
    window is cut from the tail.

    Args:
        question: Question subtokens
        context_paragraphs: Paragraphs of sentences of subtokens
        vocab: Vocab for special ids
        answer: Gold (start, end) over the flattened context tokens, inclusive
        max_len: Example capacity
        caps: Index table sizes
        max_query_len: Question tokens kept

    Returns:
        Span example (start/end are packed positions) and its context layout

    Raises:
        EmptyQuestion: If the question is empty
        EmptySequence: If the context has no tokens
        AnswerOutOfWindow: If the gold span does not fit in the window
    """
    if not question:
        raise EmptyQuestion("Span example question is empty")
    caps = caps or SegmentCaps()
    q = list(question)[: max(0, min(max_query_len, max_len - 4))]
    paragraphs = [[sentence for sentence in paragraph if sentence] for paragraph in context_paragraphs]
    paragraphs = [paragraph for paragraph in paragraphs if paragraph]
    context_total = sum(len(sentence) for paragraph in paragraphs for sentence in paragraph)
    if context_total == 0:
        raise EmptySequence("Span example context is empty")

    layout = _Layout(vocab, caps)
    layout.add(vocab.cls_id, 0, 0, 0)
    for k, token in enumerate(q):
        layout.add(token.id, 0, 0, k)
    layout.add_sep()

    context_offset = len(layout.rows)
    room = max_len - context_offset - 1
    kept = 0
    for i, paragraph in enumerate(paragraphs):
        for j, sentence in enumerate(paragraph):
            for k, token in enumerate(sentence):
                if kept >= room:
                    break
                layout.add(token.id, i + 1, j, k, type_id=1)
                kept += 1
    layout.add_sep(type_id=1)

    start = end = -1
    if answer is not None:
        a_start, a_end = answer
        if a_start < 0 or a_end < a_start or a_end >= kept:
            raise AnswerOutOfWindow(a_start, a_end, kept)
        start, end = context_offset + a_start, context_offset + a_end

    example = layout.finish(max_len, ExampleKind.SPAN, start=start, end=end)
    return example, SpanLayout(context_offset, kept, context_total)
