import itertools

import pytest
import torch
from torch import nn

from segalm.errors import AllMasked, NoContextPositions, ShapeMismatch
from segalm.model.encoder import Encoder, EncoderConfig, EncoderLayer, attention
from segalm.model.heads import ClassifierHead, SpanHead, classify, decode_span, extract_span
from segalm.model.modeling import (
    SegaForMaskedLM,
    SegaForSequenceClassification,
    SegaModel,
    encoder_state_dict,
    load_encoder_state,
)

from conftest import random_batch, tiny_model_config


def test_encoder_returns_every_layer(tiny_config):
    model = SegaModel(tiny_config).eval()
    output = model(random_batch(tiny_config), output_attentions=True)
    assert len(output.hidden_states) == tiny_config.encoder.layers + 1
    assert output.last.shape == (2, 10, 16)
    assert len(output.attentions) == 2
    assert torch.allclose(output.attentions[0].sum(-1), torch.ones(2, 2, 10))


def test_padding_does_not_change_real_positions(tiny_config):
    model = SegaModel(tiny_config).eval()
    batch = random_batch(tiny_config, batch=1, seq=6)
    padded = {name: torch.cat([tensor, torch.zeros(1, 4, dtype=torch.long)], dim=1) for name, tensor in batch.items()}
    with torch.no_grad():
        plain = model(batch).last
        extended = model(padded).last[:, :6]
    assert torch.allclose(plain, extended, atol=1e-5)


def test_pad_content_never_reaches_real_positions(tiny_config):
    model = SegaModel(tiny_config).eval()
    batch = random_batch(tiny_config, batch=1, seq=10, seed=1)
    batch["attn_mask"][:, 6:] = 0
    other = {name: tensor.clone() for name, tensor in batch.items()}
    generator = torch.Generator().manual_seed(2)
    other["ids"][:, 6:] = torch.randint(0, tiny_config.vocab_size, (1, 4), generator=generator)
    other["p"][:, 6:] = tiny_config.caps.max_paragraphs - 1
    other["t"][:, 6:] = 0
    with torch.no_grad():
        first = model(batch).last[:, :6]
        second = model(other).last[:, :6]
    assert torch.equal(first, second)


def test_attention_matches_dense_reference():
    generator = torch.Generator().manual_seed(0)
    q, k, v = (torch.randn(1, 1, 4, 8, dtype=torch.float64, generator=generator) for _ in range(3))
    context, weights = attention(q, k, v, torch.ones(1, 4))
    expected = torch.softmax(q[0, 0] @ k[0, 0].T / 8 ** 0.5, dim=-1)
    assert torch.allclose(weights[0, 0], expected, atol=1e-6, rtol=0)
    assert torch.allclose(context[0, 0], expected @ v[0, 0], atol=1e-6, rtol=0)


def test_single_token_attends_to_itself():
    q, k, v = torch.randn(1, 1, 1, 4), torch.randn(1, 1, 1, 4), torch.randn(1, 1, 1, 4)
    context, weights = attention(q, k, v, torch.ones(1, 1))
    assert weights.tolist() == [[[[1.0]]]]
    assert torch.equal(context, v)


def test_identical_keys_give_uniform_weights():
    q = torch.randn(1, 2, 5, 4)
    k = torch.randn(1, 2, 1, 4).expand(1, 2, 5, 4)
    _, weights = attention(q, k, torch.randn(1, 2, 5, 4), torch.ones(1, 5))
    assert torch.allclose(weights, torch.full((1, 2, 5, 5), 0.2))


def test_encoder_is_bidirectional(tiny_config):
    model = SegaModel(tiny_config).eval()
    batch = random_batch(tiny_config, batch=1, seq=8, seed=3)
    changed = {name: tensor.clone() for name, tensor in batch.items()}
    j = 4
    changed["ids"][0, j] = 5 + (int(batch["ids"][0, j]) - 5 + 1) % (tiny_config.vocab_size - 5)
    with torch.no_grad():
        delta = (model(batch).last - model(changed).last).abs().amax(-1)[0]
    assert torch.all(delta[:j] > 1e-6)
    assert torch.all(delta[j + 1:] > 1e-6)


def test_attention_ignores_masked_keys():
    torch.manual_seed(0)
    q, k, v = (torch.randn(1, 1, 4, 3) for _ in range(3))
    mask = torch.tensor([[1, 1, 0, 0]])
    _, weights = attention(q, k, v, mask)
    assert torch.all(weights[..., 2:] == 0)
    assert torch.allclose(weights.sum(-1), torch.ones(1, 1, 4))


def test_fully_masked_row_is_rejected():
    q = k = v = torch.zeros(2, 1, 3, 4)
    with pytest.raises(AllMasked):
        attention(q, k, v, torch.tensor([[1, 0, 0], [0, 0, 0]]))


def test_encoder_checks_width():
    encoder = Encoder(EncoderConfig(layers=1, hidden=8, heads=2))
    with pytest.raises(ShapeMismatch):
        encoder(torch.zeros(1, 3, 6), torch.ones(1, 3))
    with pytest.raises(ShapeMismatch):
        encoder(torch.zeros(1, 3, 8), torch.ones(1, 4))


def test_zero_weight_layer_reduces_to_layer_norms():
    layer = EncoderLayer(EncoderConfig(layers=1, hidden=2, heads=1, dropout=0.0)).eval()
    for module in layer.modules():
        if isinstance(module, nn.Linear):
            nn.init.zeros_(module.weight)
            nn.init.zeros_(module.bias)
    x = torch.tensor([[[3.0, 1.0]]])
    out, _ = layer(x, torch.ones(1, 1))
    assert torch.allclose(out, torch.tensor([[[1.0, -1.0]]]), atol=1e-5)


def test_preset_sizes():
    assert EncoderConfig.preset("toy").to_dict()["hidden"] == 64
    base = EncoderConfig.preset("base")
    assert (base.layers, base.hidden, base.heads, base.ffn_width) == (12, 768, 12, 3072)
    with pytest.raises(ValueError):
        EncoderConfig.preset("huge")
    with pytest.raises(ValueError):
        EncoderConfig(layers=1, hidden=10, heads=3)


def brute_force_span(start, end, max_answer_len):
    best, best_pair = float("-inf"), None
    n = len(start)
    for s, e in itertools.product(range(n), range(n)):
        if s <= e <= s + max_answer_len and start[s] + end[e] > best:
            best, best_pair = start[s] + end[e], (s, e)
    return best_pair


def test_decode_span_matches_exhaustive_search():
    generator = torch.Generator().manual_seed(11)
    for trial in range(100):
        start = torch.randn(20, generator=generator, dtype=torch.float64)
        end = torch.randn(20, generator=generator, dtype=torch.float64)
        blocked = torch.rand(20, generator=generator) < 0.3
        blocked[int(torch.randint(0, 20, (1,), generator=generator))] = False
        start = start.masked_fill(blocked, float("-inf"))
        end = end.masked_fill(blocked, float("-inf"))
        max_answer_len = trial % 7
        expected = brute_force_span(start.tolist(), end.tolist(), max_answer_len)
        assert decode_span(start, end, max_answer_len) == expected


def test_single_context_token_gets_all_mass():
    hidden = torch.randn(1, 5, 8)
    probs_start, probs_end = extract_span(hidden, SpanHead(8), torch.tensor([[0, 0, 0, 1, 0]]))
    assert probs_start[0].tolist() == pytest.approx([0.0, 0.0, 0.0, 1.0, 0.0])
    assert probs_end[0].tolist() == pytest.approx([0.0, 0.0, 0.0, 1.0, 0.0])


def test_span_needs_a_context_position():
    with pytest.raises(NoContextPositions):
        extract_span(torch.randn(1, 4, 8), SpanHead(8), torch.zeros(1, 4, dtype=torch.long))


def test_zero_span_weights_give_uniform_distribution():
    head = SpanHead(8)
    for parameter in head.parameters():
        nn.init.zeros_(parameter)
    mask = torch.tensor([[0, 1, 1, 1, 1, 0]])
    start, end = extract_span(torch.randn(1, 6, 8), head, mask)
    assert start[0].tolist() == pytest.approx([0.0, 0.25, 0.25, 0.25, 0.25, 0.0])
    assert end[0].tolist() == pytest.approx([0.0, 0.25, 0.25, 0.25, 0.25, 0.0])


def test_classify_distribution_and_regression():
    hidden = torch.randn(3, 4, 8)
    probs = classify(hidden, ClassifierHead(8, 3).eval())
    assert probs.shape == (3, 3)
    assert torch.allclose(probs.sum(-1), torch.ones(3))
    assert classify(hidden, ClassifierHead(8, 1).eval()).shape == (3,)
    with pytest.raises(ShapeMismatch):
        classify(torch.randn(3, 4, 6), ClassifierHead(8, 3))


def test_mlm_decoder_is_tied_to_token_table(tiny_config):
    model = SegaForMaskedLM(tiny_config)
    assert model.mlm_head.token_table.weight is model.model.embeddings.token.weight
    logits = model(random_batch(tiny_config))
    assert logits.shape == (2, 10, tiny_config.vocab_size)


def test_encoder_weights_move_between_heads(tiny_config):
    pretrained = SegaForMaskedLM(tiny_config)
    classifier = SegaForSequenceClassification(tiny_config, num_labels=2)
    load_encoder_state(classifier, encoder_state_dict(pretrained))
    for name, tensor in encoder_state_dict(pretrained).items():
        assert torch.equal(classifier.model.state_dict()[name], tensor)


def test_model_config_round_trip(vocab):
    config = tiny_model_config(len(vocab))
    assert type(config).from_dict(config.to_dict()) == config
