import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otalign.vocab import (
    TokenSequence,
    Vocabulary,
    VocabError,
    decode,
    decode_sequence,
    load_vocab,
    save_vocab,
    tokenize,
)


def _write_vocab(tmp_path, name, tokens, filename="v.json"):
    path = tmp_path / filename
    path.write_text(json.dumps({"name": name, "tokens": tokens}), encoding="utf-8")
    return path


def test_load_basic(tmp_path):
    vocab = load_vocab(_write_vocab(tmp_path, "toy", ["a", "b", "ab"]))
    assert vocab.size == 3
    assert decode(vocab, 2) == "ab"


def test_load_duplicate_token(tmp_path):
    path = _write_vocab(tmp_path, "toy", ["a", "a"])
    with pytest.raises(VocabError, match="duplicate token 'a'"):
        load_vocab(path)


def test_load_missing_file(tmp_path):
    with pytest.raises(VocabError, match="not found"):
        load_vocab(tmp_path / "absent.json")


def test_load_invalid_json(tmp_path):
    path = tmp_path / "v.json"
    path.write_text("{broken", encoding="utf-8")
    with pytest.raises(VocabError, match="invalid JSON"):
        load_vocab(path)


def test_load_mapping_form(tmp_path):
    path = _write_vocab(tmp_path, "toy", {"b": 1, "a": 0})
    vocab = load_vocab(path)
    assert vocab.tokens == ("a", "b")


def test_load_mapping_non_contiguous(tmp_path):
    path = _write_vocab(tmp_path, "toy", {"a": 0, "b": 2})
    with pytest.raises(VocabError, match="non-contiguous ids.*'b'"):
        load_vocab(path)


def test_fixture_vocab_size(fixture_set):
    # 26 letters plus 20 merged bigrams
    assert fixture_set.char_vocab.size == 26
    assert fixture_set.bigram_vocab.size == 46
    assert all(len(t) == 2 for t in fixture_set.bigram_vocab.tokens[26:])


def test_save_load_round_trip(tmp_path, fixture_set):
    path = tmp_path / "bigram.json"
    save_vocab(fixture_set.bigram_vocab, path)
    loaded = load_vocab(path)
    assert loaded.tokens == fixture_set.bigram_vocab.tokens
    # decoding every id reproduces file order
    assert [decode(loaded, i) for i in range(loaded.size)] == list(loaded.tokens)


def test_encode_decode_inverse(fixture_set):
    vocab = fixture_set.bigram_vocab
    for token in vocab.tokens:
        assert decode(vocab, vocab.encode(token)) == token


def test_decode_out_of_range():
    vocab = Vocabulary(name="toy", tokens=("a", "b", "ab"))
    with pytest.raises(VocabError, match="out of range"):
        decode(vocab, 3)
    with pytest.raises(VocabError, match="out of range"):
        decode(vocab, -1)


def test_tokenize_longest_match():
    vocab = Vocabulary(name="toy", tokens=("a", "b", "ab"))
    seq = tokenize(vocab, "ab")
    assert seq.texts == ("ab",)
    assert seq.ids == (2,)


def test_tokenize_char_fallback():
    vocab = Vocabulary(name="toy", tokens=("a", "b"))
    seq = tokenize(vocab, "ab")
    assert seq.texts == ("a", "b")


def test_tokenize_uncoverable_position():
    vocab = Vocabulary(name="toy", tokens=("a", "b"))
    with pytest.raises(VocabError, match="position 1"):
        tokenize(vocab, "ac")


def test_tokenize_empty_text():
    vocab = Vocabulary(name="toy", tokens=("a",))
    assert tokenize(vocab, "") == TokenSequence(vocab="toy", ids=(), texts=())


def test_decode_sequence(fixture_set):
    vocab = fixture_set.char_vocab
    seq = decode_sequence(vocab, [0, 1, 25])
    assert seq.texts == ("a", "b", "z")


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="abcdefghijklmnopqrstuvwxyz", max_size=40))
def test_tokenize_concatenation_and_determinism(text):
    vocab = Vocabulary(
        name="toy", tokens=tuple("abcdefghijklmnopqrstuvwxyz") + ("th", "he", "an", "ab")
    )
    first = tokenize(vocab, text)
    second = tokenize(vocab, text)
    assert first == second
    assert "".join(first.texts) == text
    assert all(i < vocab.size for i in first.ids)
