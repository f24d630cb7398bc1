import numpy as np
import pytest

from segalm.data.builder import (
    ExampleKind,
    build_pair,
    build_single,
    build_span,
    pack_pretraining,
    truncate_pair,
)
from segalm.errors import AnswerOutOfWindow, EmptyQuestion, EmptySequence
from segalm.text.segmenter import IndexedToken, SegmentCaps, assign_indices, segment_document
from segalm.text.tokenizer import SubToken, tokenize

from conftest import CORPUS_DOCUMENTS


def pieces(n, token_id=7):
    return [SubToken(token_id, "cat")] * n


def stream(n):
    return [IndexedToken(7, 0, k // 10, k % 10) for k in range(n)]


def test_packing_1022_tokens_gives_three_examples(vocab):
    examples = pack_pretraining(stream(1022), 512, vocab)
    assert [example.length for example in examples] == [512, 512, 4]
    for example in examples:
        assert example.kind == ExampleKind.PRETRAIN
        assert example.violations(vocab, SegmentCaps()) == []


def test_packed_example_layout(vocab):
    doc = segment_document(CORPUS_DOCUMENTS[0], vocab)
    (example,) = pack_pretraining(assign_indices(doc, SegmentCaps()), 32, vocab)
    n = example.length
    assert n == 13 + 2
    assert example.ids[0] == vocab.cls_id
    assert (example.p[0], example.s[0], example.t[0]) == (0, 0, 0)
    # [SEP] continues the last sentence: (1, 0, 4) -> (1, 0, 5)
    assert example.ids[n - 1] == vocab.sep_id
    assert (example.p[n - 1], example.s[n - 1], example.t[n - 1]) == (1, 0, 5)
    assert np.all(example.attn_mask[:n] == 1) and np.all(example.attn_mask[n:] == 0)
    assert np.all(example.ids[n:] == vocab.pad_id)


def test_empty_document_packs_to_nothing(vocab):
    assert pack_pretraining([], 128, vocab) == []


@pytest.mark.parametrize("max_len", [2, 513])
def test_packing_rejects_bad_capacity(vocab, max_len):
    with pytest.raises(ValueError):
        pack_pretraining(stream(5), max_len, vocab)


def test_truncate_pair_trims_longer_side():
    a, b = truncate_pair(pieces(600), pieces(10), 512 - 3)
    assert (len(a), len(b)) == (499, 10)
    a, b = truncate_pair(pieces(300), pieces(300), 509)
    assert (len(a), len(b)) == (254, 255)


def test_pair_layout(vocab):
    a = tokenize("the cat sat", vocab)
    b = tokenize("the dog ran home", vocab)
    example = build_pair(a, b, vocab, max_len=16, label=1)
    n = example.length
    assert n == 3 + 4 + 3
    assert example.p[:n].tolist() == [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]
    assert example.s[:n].tolist() == [0] * n
    assert example.t[:n].tolist() == [0, 0, 1, 2, 3, 0, 1, 2, 3, 4]
    assert example.type_ids[:n].tolist() == [0] * 5 + [1] * 5
    assert example.class_label == 1
    assert example.violations(vocab, SegmentCaps()) == []


def test_pair_truncation_fills_capacity(vocab):
    example = build_pair(pieces(600), pieces(10), vocab, max_len=512)
    assert example.length == 512
    assert int(np.sum(example.type_ids == 1)) == 11


def test_single_layout(vocab):
    example = build_single(tokenize("a big cat", vocab), vocab, max_len=8, score=0.5)
    n = example.length
    assert example.kind == ExampleKind.SINGLE_CLASSIFY
    assert example.p[:n].tolist() == [0] * n
    assert example.s[:n].tolist() == [0] * n
    assert example.score == 0.5


def test_empty_segments_rejected(vocab):
    with pytest.raises(EmptySequence):
        build_pair([], pieces(3), vocab)
    with pytest.raises(EmptySequence):
        build_single([], vocab)


def test_span_layout(vocab):
    question = tokenize("who sat", vocab)
    context = [
        [tokenize("the cat sat .", vocab), tokenize("a dog ran .", vocab)],
        [tokenize("the bird sang .", vocab)],
    ]
    example, layout = build_span(question, context, vocab, answer=(4, 5), max_len=32)
    n = example.length
    assert layout.context_offset == 4
    assert layout.context_kept == layout.context_total == 12
    assert example.p[:n].tolist() == [0] * 4 + [1] * 8 + [2] * 4 + [2]
    assert example.s[:n].tolist() == [0] * 4 + [0] * 4 + [1] * 4 + [0] * 4 + [0]
    assert example.t[4:8].tolist() == [0, 1, 2, 3]
    assert (example.start, example.end) == (8, 9)
    assert example.violations(vocab, SegmentCaps()) == []


def test_span_context_cut_from_tail(vocab):
    question = pieces(3)
    context = [[pieces(20)]]
    example, layout = build_span(question, context, vocab, answer=(0, 1), max_len=16)
    assert layout.context_kept == 16 - 5 - 1
    assert example.length == 16
    with pytest.raises(AnswerOutOfWindow):
        build_span(question, context, vocab, answer=(12, 13), max_len=16)


def test_span_question_is_capped(vocab):
    example, layout = build_span(pieces(100), [[pieces(5)]], vocab, max_len=128, max_query_len=64)
    assert layout.context_offset == 66


def test_span_long_question_leaves_room_for_context(vocab):
    # 80 question tokens at max_len 64: question cut to 60, one context slot
    example, layout = build_span(pieces(80), [[pieces(5)]], vocab, answer=(0, 0), max_len=64, max_query_len=64)
    assert layout.context_offset == 62
    assert layout.context_kept == 1
    assert (example.start, example.end) == (62, 62)
    assert example.length == 64
    unlabeled, _ = build_span(pieces(80), [[pieces(5)]], vocab, max_len=64, max_query_len=64)
    assert unlabeled.length == 64
    assert unlabeled.violations(vocab, SegmentCaps()) == ["span labels outside the real positions"]


def test_span_empty_sentences_take_no_index(vocab):
    context = [[], [[], pieces(2, 8), [], pieces(1, 9)], [[]], [pieces(1, 10)]]
    example, layout = build_span(pieces(2), context, vocab, answer=(3, 3), max_len=32)
    offset = layout.context_offset
    triples = list(zip(example.p[offset:offset + 4], example.s[offset:offset + 4], example.t[offset:offset + 4]))
    assert triples == [(1, 0, 0), (1, 0, 1), (1, 1, 0), (2, 0, 0)]
    assert layout.context_total == 4
    assert example.ids[example.start] == 10


def test_span_requires_question_and_context(vocab):
    with pytest.raises(EmptyQuestion):
        build_span([], [[pieces(3)]], vocab)
    with pytest.raises(EmptySequence):
        build_span(pieces(3), [[]], vocab)


def test_violations_detect_broken_layout(vocab):
    example = build_single(pieces(3), vocab, max_len=8)
    example.ids[0] = 7
    example.attn_mask[6] = 1
    problems = example.violations(vocab, SegmentCaps())
    assert any("[CLS]" in problem for problem in problems)
    assert any("padding" in problem for problem in problems)
