import numpy as np
import pytest
import torch

from segalm.errors import IndexOutOfTable
from segalm.model.embeddings import (
    EmbeddingConfig,
    PositionEncoding,
    PositionScheme,
    SchemeRegistry,
    SegaEmbeddings,
    embed,
    position_param_count,
    schemes,
)
from segalm.text.segmenter import SegmentCaps

CAPS = SegmentCaps(4, 6, 16)


def embeddings_for(scheme, hidden=8, layer_norm=False):
    config = EmbeddingConfig(
        vocab_size=20, hidden=hidden, scheme=scheme, caps=CAPS, max_positions=32, dropout=0.0, layer_norm=layer_norm
    )
    module = SegaEmbeddings(config)
    module.eval()
    return module


def inputs(seed=0, batch=2, seq=7):
    generator = torch.Generator().manual_seed(seed)
    return {
        "ids": torch.randint(0, 20, (batch, seq), generator=generator),
        "p": torch.randint(0, CAPS.max_paragraphs, (batch, seq), generator=generator),
        "s": torch.randint(0, CAPS.max_sentences, (batch, seq), generator=generator),
        "t": torch.randint(0, CAPS.max_tokens_per_sentence, (batch, seq), generator=generator),
        "type_ids": torch.zeros(batch, seq, dtype=torch.long),
    }


@pytest.mark.parametrize(
    "scheme, expected",
    [
        (PositionScheme.SEGA, 311_808),
        (PositionScheme.GLOBAL, 393_216),
        (PositionScheme.GLOBAL_PLUS_PS, 508_416),
    ],
)
def test_position_param_count_at_base_width(scheme, expected):
    assert position_param_count(scheme, 768) == expected


def test_position_param_count_ordering():
    rng = np.random.default_rng(0)
    for hidden in rng.integers(1, 4097, size=100):
        sega = position_param_count(PositionScheme.SEGA, int(hidden))
        base = position_param_count(PositionScheme.GLOBAL, int(hidden))
        both = position_param_count(PositionScheme.GLOBAL_PLUS_PS, int(hidden))
        assert sega < base < both


def test_position_param_count_rejects_bad_width():
    with pytest.raises(ValueError):
        position_param_count(PositionScheme.SEGA, 0)


def test_zero_position_tables_leave_token_rows():
    module = embeddings_for(PositionScheme.SEGA)
    with torch.no_grad():
        for table in module.positions.children():
            table.weight.zero_()
    batch = inputs()
    out = embed(batch, module)
    assert torch.equal(out, module.token.weight[batch["ids"]])


def test_sega_sum_of_tables():
    module = embeddings_for(PositionScheme.SEGA)
    batch = inputs(1)
    positions = module.positions
    expected = (
        module.token.weight[batch["ids"]]
        + positions.token_index.weight[batch["t"]]
        + positions.sentence_index.weight[batch["s"]]
        + positions.paragraph_index.weight[batch["p"]]
    )
    assert torch.allclose(embed(batch, module), expected, atol=1e-6)


def test_sega_and_global_differ_by_position_addends():
    for draw in range(100):
        torch.manual_seed(draw)
        sega = embeddings_for(PositionScheme.SEGA)
        base = embeddings_for(PositionScheme.GLOBAL)
        with torch.no_grad():
            base.token.weight.copy_(sega.token.weight)
        batch = inputs(draw)
        seq = batch["ids"].shape[1]
        delta = (
            sega.positions.token_index.weight[batch["t"]]
            + sega.positions.sentence_index.weight[batch["s"]]
            + sega.positions.paragraph_index.weight[batch["p"]]
            - base.positions.global_position.weight[:seq].unsqueeze(0)
            - base.positions.token_type.weight[batch["type_ids"]]
        )
        assert torch.allclose(embed(batch, sega), embed(batch, base) + delta, atol=1e-6)


def test_global_plus_ps_adds_sentence_and_paragraph():
    module = embeddings_for(PositionScheme.GLOBAL_PLUS_PS)
    batch = inputs(2)
    seq = batch["ids"].shape[1]
    positions = module.positions
    expected = (
        module.token.weight[batch["ids"]]
        + positions.global_position.weight[:seq].unsqueeze(0)
        + positions.sentence_index.weight[batch["s"]]
        + positions.paragraph_index.weight[batch["p"]]
    )
    assert torch.allclose(embed(batch, module), expected, atol=1e-6)


def test_swapping_tokens_changes_only_their_columns():
    module = embeddings_for(PositionScheme.SEGA)
    batch = inputs(3, batch=1)
    batch["ids"][0, 5] = batch["ids"][0, 2]
    batch["t"][0, 2], batch["t"][0, 5] = 0, 1
    swapped = {name: tensor.clone() for name, tensor in batch.items()}
    for name in ("p", "s", "t"):
        swapped[name][0, 2], swapped[name][0, 5] = batch[name][0, 5], batch[name][0, 2]
    before, after = embed(batch, module), embed(swapped, module)
    changed = ~torch.isclose(before, after).all(dim=-1)[0]
    assert changed.nonzero().flatten().tolist() == [2, 5]
    assert torch.allclose(after[0, 2], before[0, 5])


def test_sega_is_translation_invariant_where_global_is_not():
    batch = inputs(4, batch=1, seq=6)
    shifted = {name: torch.roll(tensor, 1, dims=1) for name, tensor in batch.items()}
    sega = embeddings_for(PositionScheme.SEGA)
    assert torch.allclose(embed(batch, sega)[0, 0], embed(shifted, sega)[0, 1])
    base = embeddings_for(PositionScheme.GLOBAL)
    assert not torch.allclose(embed(batch, base)[0, 0], embed(shifted, base)[0, 1])


def test_dropout_only_in_training():
    config = EmbeddingConfig(vocab_size=20, hidden=8, caps=CAPS, dropout=0.5)
    module = SegaEmbeddings(config)
    batch = inputs()
    module.eval()
    assert torch.equal(embed(batch, module), embed(batch, module))
    module.train()
    torch.manual_seed(0)
    assert not torch.equal(embed(batch, module), embed(batch, module))


def test_index_beyond_table_is_reported():
    module = embeddings_for(PositionScheme.SEGA)
    batch = inputs()
    batch["s"][0, 0] = CAPS.max_sentences
    with pytest.raises(IndexOutOfTable) as info:
        embed(batch, module)
    assert info.value.table == "sentence_index"


def test_embed_checks_scheme():
    module = embeddings_for(PositionScheme.SEGA)
    with pytest.raises(ValueError):
        embed(inputs(), module, scheme=PositionScheme.GLOBAL)


def test_registry_holds_every_scheme():
    assert set(schemes.get_registered_schemes()) == set(PositionScheme)


def test_registry_decorator_and_validation():
    registry = SchemeRegistry()

    @registry.register(PositionScheme.SEGA)
    class NoPositions(PositionEncoding):
        @classmethod
        def table_rows(cls, caps, max_positions):
            return 0

        def addends(self, p, s, t, type_ids):
            return []

    assert registry.get(PositionScheme.SEGA) is NoPositions
    assert NoPositions.scheme == PositionScheme.SEGA
    with pytest.raises(KeyError):
        registry.get(PositionScheme.GLOBAL)
    with pytest.raises(ValueError):
        registry.register_encoding(PositionScheme.GLOBAL, dict)
