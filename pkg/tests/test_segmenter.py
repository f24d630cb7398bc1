import numpy as np
import pytest

from segalm.text.segmenter import (
    Document,
    SegmentCaps,
    assign_indices,
    count_clipped,
    index_histogram,
    read_corpus,
    segment_document,
    split_paragraphs,
    split_sentences,
)
from segalm.text.tokenizer import SubToken

from conftest import CORPUS_DOCUMENTS


def test_split_paragraphs_on_blank_lines():
    raw = "First one.\n\n\nSecond one.\n   \nThird\none.\n"
    assert split_paragraphs(raw) == ["First one.", "Second one.", "Third\none."]


@pytest.mark.parametrize(
    "paragraph, expected",
    [
        ("The cat sat. The dog ran.", ["The cat sat.", "The dog ran."]),
        ("Dr. Smith sat. The cat ran.", ["Dr. Smith sat.", "The cat ran."]),
        ("It is 3.5 big. Yes", ["It is 3.5 big.", "Yes"]),
        ("Wait... What? No!", ["Wait...", "What?", "No!"]),
        ("the cat sat. then it ran.", ["the cat sat. then it ran."]),
        ('He said "go." Then he left.', ['He said "go."', "Then he left."]),
        ("No terminator here", ["No terminator here"]),
    ],
)
def test_split_sentences(paragraph, expected):
    assert split_sentences(paragraph) == expected


def test_indices_of_hand_document(vocab):
    doc = segment_document(CORPUS_DOCUMENTS[0], vocab)
    triples = [(token.p, token.s, token.t) for token in assign_indices(doc, SegmentCaps())]
    assert triples == [
        (0, 0, 0), (0, 0, 1), (0, 0, 2), (0, 0, 3),
        (0, 1, 0), (0, 1, 1), (0, 1, 2), (0, 1, 3),
        (1, 0, 0), (1, 0, 1), (1, 0, 2), (1, 0, 3), (1, 0, 4),
    ]


def test_overflow_is_clamped_to_last_slot():
    token = SubToken(5, "x")
    doc = Document([[[token] * 4], [[token], [token], [token]], [[token]]])
    caps = SegmentCaps(max_paragraphs=2, max_sentences=2, max_tokens_per_sentence=3)
    triples = [(tok.p, tok.s, tok.t) for tok in assign_indices(doc, caps)]
    assert triples == [
        (0, 0, 0), (0, 0, 1), (0, 0, 2), (0, 0, 2),
        (1, 0, 0), (1, 1, 0), (1, 1, 0),
        (1, 0, 0),
    ]
    assert count_clipped(doc, caps) == {"paragraph": 1, "sentence": 1, "token": 1}


def _random_document(rng, max_paragraphs, max_sentences, max_tokens):
    token = SubToken(5, "x")
    return Document(
        [
            [[token] * int(rng.integers(1, max_tokens + 1)) for _ in range(int(rng.integers(1, max_sentences + 1)))]
            for _ in range(int(rng.integers(1, max_paragraphs + 1)))
        ]
    )


def test_random_documents_obey_bounds_resets_and_monotonicity():
    rng = np.random.default_rng(7)
    caps = SegmentCaps(max_paragraphs=3, max_sentences=4, max_tokens_per_sentence=5)
    violations = 0
    for _ in range(10_000):
        doc = _random_document(rng, 6, 6, 8)
        indexed = assign_indices(doc, caps)
        assert len(indexed) == doc.token_count
        position = 0
        for i, paragraph in enumerate(doc.paragraphs):
            for j, sentence in enumerate(paragraph):
                for k in range(len(sentence)):
                    _, p, s, t = indexed[position]
                    expected = (
                        min(i, caps.max_paragraphs - 1),
                        min(j, caps.max_sentences - 1),
                        min(k, caps.max_tokens_per_sentence - 1),
                    )
                    violations += (p, s, t) != expected
                    position += 1
        p = np.array([token.p for token in indexed])
        violations += int(np.any(np.diff(p) < 0))
        violations += int(indexed[0][1:] != (0, 0, 0))
    assert violations == 0


def test_large_document_stays_inside_default_tables():
    rng = np.random.default_rng(0)
    token = SubToken(5, "x")
    paragraphs = [[[token] * int(rng.integers(1, 4)) for _ in range(120)] for _ in range(60)]
    paragraphs[0][0] = [token] * 300
    caps = SegmentCaps()
    indexed = assign_indices(Document(paragraphs), caps)
    p = np.array([tok.p for tok in indexed])
    s = np.array([tok.s for tok in indexed])
    t = np.array([tok.t for tok in indexed])
    assert p.max() == 49 and s.max() == 99 and t.max() == 255
    assert p.min() == s.min() == t.min() == 0


def test_index_histogram_reports_raw_maxima_and_clipping(vocab):
    doc = segment_document(CORPUS_DOCUMENTS[2], vocab)
    summary = index_histogram(doc, SegmentCaps(max_paragraphs=2, max_sentences=100, max_tokens_per_sentence=4))
    assert summary["paragraph"] == {"max_index": 2, "tokens": 18, "clipped": 9}
    assert summary["sentence"] == {"max_index": 1, "tokens": 18, "clipped": 0}
    # Sentences of 4, 5, 5, 4 tokens against a 4-slot table
    assert summary["token"] == {"max_index": 4, "tokens": 18, "clipped": 2}


def test_empty_text_gives_empty_document(vocab):
    doc = segment_document("  \n\n \n", vocab)
    assert doc.paragraphs == []
    assert assign_indices(doc, SegmentCaps()) == []


def test_read_corpus_file_reports_start_lines(corpus_file):
    documents = list(read_corpus(corpus_file))
    assert len(documents) == 3
    assert [document.line for document in documents] == [1, 5, 7]
    assert documents[1].text.strip() == CORPUS_DOCUMENTS[1]


def test_read_corpus_directory(tmp_path):
    directory = tmp_path / "docs"
    directory.mkdir()
    (directory / "b.txt").write_text("Second.", encoding="utf-8")
    (directory / "a.txt").write_text("First.", encoding="utf-8")
    (directory / "c.txt").write_text("   \n", encoding="utf-8")
    assert [document.text for document in read_corpus(directory)] == ["First.", "Second."]


def test_caps_must_be_positive():
    with pytest.raises(ValueError):
        SegmentCaps(max_paragraphs=0)
