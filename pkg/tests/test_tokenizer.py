import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linkrank import (
    Entity,
    EntityCatalog,
    TokenizationError,
    Vocabulary,
    VocabularyError,
    vocab_from_texts,
)


@pytest.fixture
def vocab():
    return Vocabulary.from_tokens(["dog", "s", "cat", " and", " dog", "noun", " 1"])


class TestTokenize:
    def test_empty_text(self, vocab):
        assert vocab.tokenize("") == []

    def test_whole_word_hit(self, vocab):
        ids = vocab.tokenize("dog")
        assert ids == [vocab.id_of("dog")]

    def test_greedy_longest_match(self, vocab):
        # "dogs" has no whole-word entry, so the longest prefix wins, then "s"
        assert vocab.tokenize("dogs") == [vocab.id_of("dog"), vocab.id_of("s")]

    def test_prefers_longest_not_first(self, vocab):
        assert vocab.tokenize("cat and dog") == [
            vocab.id_of("cat"), vocab.id_of(" and"), vocab.id_of(" dog")]

    def test_byte_fallback_covers_unknown_chars(self, vocab):
        ids = vocab.tokenize("dog!")
        assert ids[:-1] == [vocab.id_of("dog")]
        assert vocab.token(ids[-1]) == "<0x21>"

    def test_byte_fallback_multibyte_char(self, vocab):
        ids = vocab.tokenize("é")  # two UTF-8 bytes
        assert [vocab.token(i) for i in ids] == ["<0xC3>", "<0xA9>"]

    def test_never_emits_reserved_ids(self, vocab):
        ids = vocab.tokenize("<s><mask></s><pad>")
        assert not any(vocab.is_reserved(i) for i in ids)

    def test_detokenize_round_trip(self, vocab):
        for text in ["dog", "cat and dog", "dogs!", "café dog", ""]:
            assert vocab.detokenize(vocab.tokenize(text)) == text

    def test_detokenize_rejects_reserved(self, vocab):
        with pytest.raises(TokenizationError):
            vocab.detokenize([vocab.mask_id])

    def test_no_byte_tokens_means_error_on_oov(self):
        bare = Vocabulary.from_tokens(["dog"], include_bytes=False)
        with pytest.raises(TokenizationError):
            bare.tokenize("cat")

    @given(st.text(max_size=40))
    @settings(max_examples=200, deadline=None)
    def test_round_trip_any_text(self, text):
        v = Vocabulary.from_tokens(["dog", "s", "cat", " and", " dog"])
        assert v.detokenize(v.tokenize(text)) == text


class TestVocabularyFile:
    def test_save_load_round_trip(self, tmp_path, vocab):
        path = tmp_path / "vocab.txt"
        vocab.save(path)
        back = Vocabulary.load(path)
        assert back.size == vocab.size
        assert (back.bos_id, back.eos_id, back.mask_id, back.pad_id) == (
            vocab.bos_id, vocab.eos_id, vocab.mask_id, vocab.pad_id)
        assert back.tokenize("cat and dogs") == vocab.tokenize("cat and dogs")

    def test_header_lines_hold_reserved_ids(self, tmp_path, vocab):
        vocab.save(tmp_path / "vocab.txt")
        lines = (tmp_path / "vocab.txt").read_text().split("\n")
        assert lines[:4] == ["0", "1", "2", "3"]
        assert lines[4] == "<s>"

    def test_arbitrary_reserved_positions(self, tmp_path):
        # mirrors a real model layout where mask sits at a high id
        tokens = ["<s>", "<pad>", "</s>", "dog", " dog", "cat", "<mask>"]
        v = Vocabulary(tokens, bos_id=0, eos_id=2, mask_id=6, pad_id=1)
        v.save(tmp_path / "v.txt")
        back = Vocabulary.load(tmp_path / "v.txt")
        assert back.mask_id == 6 and back.pad_id == 1
        assert back.tokenize("dog") == [3]

    def test_bad_header_rejected(self, tmp_path):
        (tmp_path / "v.txt").write_text("0\n1\nx\n3\n<s>\n</s>\n<mask>\n<pad>\na\n")
        with pytest.raises(VocabularyError, match="header"):
            Vocabulary.load(tmp_path / "v.txt")

    def test_duplicate_token_rejected(self):
        with pytest.raises(VocabularyError, match="duplicate"):
            Vocabulary.from_tokens(["dog", "dog"])

    def test_reserved_ids_must_be_distinct(self):
        with pytest.raises(VocabularyError, match="distinct"):
            Vocabulary(["<s>", "</s>", "<mask>", "<pad>"], 0, 0, 2, 3)


class TestCatalog:
    def test_pad_to_longest(self, vocab):
        entities = [Entity(0, "a", "dog"), Entity(1, "b", "cat and dog")]
        cat = EntityCatalog.build(vocab, entities)
        assert cat.l_max == 3
        pad = vocab.pad_id
        assert cat.tokens[0].tolist() == [vocab.id_of("dog"), pad, pad]
        assert cat.tokens[1].tolist() == [
            vocab.id_of("cat"), vocab.id_of(" and"), vocab.id_of(" dog")]
        assert cat.lengths.tolist() == [1, 3]

    def test_singleton_catalog_has_no_pads(self, vocab):
        cat = EntityCatalog.build(vocab, [Entity(0, "a", "cat and dog")])
        assert cat.l_max == 3
        assert cat.lengths.tolist() == [3]
        assert (cat.tokens != vocab.pad_id).all()

    def test_uniform_lengths_no_pads(self, vocab):
        entities = [Entity(0, "a", "dog"), Entity(1, "b", "cat"), Entity(2, "c", "s")]
        cat = EntityCatalog.build(vocab, entities)
        assert cat.l_max == 1
        assert (cat.tokens != vocab.pad_id).all()

    def test_row_structure_invariants(self, rng):
        words = [f"w{i}" for i in range(30)]
        v = Vocabulary.from_tokens(words + [" " + w for w in words])
        entities = []
        for i in range(50):
            k = int(rng.integers(1, 6))
            surface = " ".join(words[int(j)] for j in rng.integers(0, 30, k))
            entities.append(Entity(i, f"e{i}", surface))
        cat = EntityCatalog.build(v, entities)
        for i in range(cat.n):
            n = int(cat.lengths[i])
            assert n >= 1
            assert (cat.tokens[i, :n] != v.pad_id).all()
            assert (cat.tokens[i, n:] == v.pad_id).all()
        assert cat.l_max == int(cat.lengths.max())

    def test_stripping_pads_reproduces_tokenize(self, vocab):
        entities = [Entity(0, "a", "dog"), Entity(1, "b", "cat and dog"),
                    Entity(2, "c", "dogs")]
        cat = EntityCatalog.build(vocab, entities)
        for e in entities:
            assert cat.row(e.id) == vocab.tokenize(e.surface)

    def test_input_order_does_not_matter(self, vocab):
        entities = [Entity(0, "a", "dog"), Entity(1, "b", "cat and dog"),
                    Entity(2, "c", "s")]
        cat_fwd = EntityCatalog.build(vocab, entities)
        cat_rev = EntityCatalog.build(vocab, list(reversed(entities)))
        assert (cat_fwd.tokens == cat_rev.tokens).all()
        assert (cat_fwd.lengths == cat_rev.lengths).all()

    def test_save_load_round_trip(self, tmp_path, vocab):
        entities = [Entity(0, "a", "dog"), Entity(1, "b", "cat and dog")]
        cat = EntityCatalog.build(vocab, entities)
        cat.save(tmp_path / "catalog.jsonl")
        back = EntityCatalog.load(tmp_path / "catalog.jsonl", vocab)
        assert (back.tokens == cat.tokens).all()
        assert (back.lengths == cat.lengths).all()

    def test_load_rejects_reserved_ids_in_rows(self, tmp_path, vocab):
        (tmp_path / "bad.jsonl").write_text(
            '{"entity_id": 0, "token_ids": [%d]}\n' % vocab.mask_id)
        with pytest.raises(VocabularyError, match="reserved"):
            EntityCatalog.load(tmp_path / "bad.jsonl", vocab)

    def test_load_rejects_gaps_in_ids(self, tmp_path, vocab):
        tid = vocab.id_of("dog")
        (tmp_path / "bad.jsonl").write_text(
            '{"entity_id": 0, "token_ids": [%d]}\n'
            '{"entity_id": 2, "token_ids": [%d]}\n' % (tid, tid))
        with pytest.raises(VocabularyError, match="cover"):
            EntityCatalog.load(tmp_path / "bad.jsonl", vocab)

    def test_untokenizable_entity_error_names_entity(self):
        v = Vocabulary.from_tokens(["dog"], include_bytes=False)
        with pytest.raises(TokenizationError, match="kitty"):
            EntityCatalog.build(v, [Entity(0, "kitty", "cat")])

    def test_empty_surface_error_names_entity(self, vocab):
        with pytest.raises(TokenizationError, match="kitty"):
            EntityCatalog.build(vocab, [Entity(0, "kitty", "")])


def test_vocab_from_texts_covers_words_exactly():
    v = vocab_from_texts(["grant noun 1", "any monetary aid", "hypernym"])
    ids = v.tokenize("grant noun 1 any monetary aid hypernym")
    assert v.detokenize(ids) == "grant noun 1 any monetary aid hypernym"
    # exact word segmentation: one token per word
    assert len(ids) == 7
