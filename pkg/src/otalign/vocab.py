"""Tokenizer vocabularies and deterministic greedy tokenization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


class VocabError(ValueError):
    """Malformed vocabulary data or invalid token id."""


@dataclass(frozen=True)
class Vocabulary:
    """Immutable id <-> token-string mapping; ids are dense 0..size-1."""

    name: str
    tokens: tuple[str, ...]
    _index: dict[str, int] = field(repr=False, compare=False, default_factory=dict)
    _max_len: int = field(repr=False, compare=False, default=0)

    def __post_init__(self) -> None:
        index: dict[str, int] = {}
        for i, tok in enumerate(self.tokens):
            if not isinstance(tok, str) or not tok:
                raise VocabError(f"vocabulary {self.name!r}: token at id {i} is not a non-empty string")
            if tok in index:
                raise VocabError(f"vocabulary {self.name!r}: duplicate token {tok!r} (ids {index[tok]} and {i})")
            index[tok] = i
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_max_len", max((len(t) for t in self.tokens), default=0))

    @property
    def size(self) -> int:
        return len(self.tokens)

    def decode(self, token_id: int) -> str:
        if not 0 <= token_id < self.size:
            raise VocabError(f"vocabulary {self.name!r}: id {token_id} out of range [0, {self.size})")
        return self.tokens[token_id]

    def encode(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise VocabError(f"vocabulary {self.name!r}: unknown token {token!r}") from None


@dataclass(frozen=True)
class TokenSequence:
    """A tokenized text: parallel ids and decoded strings."""

    vocab: str
    ids: tuple[int, ...]
    texts: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.ids)


def load_vocab(path: str | Path) -> Vocabulary:
    """Load a vocabulary file: {"name": str, "tokens": [str, ...]}.

    Also accepts tokens as a {token: id} object, in which case the ids
    must be exactly 0..size-1.
    """
    path = Path(path)
    if not path.is_file():
        raise VocabError(f"vocabulary file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise VocabError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(data, dict) or "name" not in data or "tokens" not in data:
        raise VocabError(f"{path}: expected an object with 'name' and 'tokens'")
    name = data["name"]
    raw = data["tokens"]
    if isinstance(raw, list):
        tokens = raw
    elif isinstance(raw, dict):
        size = len(raw)
        slots: list[str | None] = [None] * size
        for tok, tid in raw.items():
            if not isinstance(tid, int) or not 0 <= tid < size:
                raise VocabError(f"{path}: non-contiguous ids, token {tok!r} has id {tid!r} outside 0..{size - 1}")
            if slots[tid] is not None:
                raise VocabError(f"{path}: non-contiguous ids, id {tid} assigned to both {slots[tid]!r} and {tok!r}")
            slots[tid] = tok
        tokens = slots
    else:
        raise VocabError(f"{path}: 'tokens' must be a list or an object")
    try:
        return Vocabulary(name=name, tokens=tuple(tokens))
    except VocabError as exc:
        raise VocabError(f"{path}: {exc}") from None


def tokenize(vocab: Vocabulary, text: str) -> TokenSequence:
    """Greedy longest-match segmentation, scanning left to right.

    At each position the longest vocabulary token prefixing the rest of
    the text is taken; an uncoverable character raises with its position.
    """
    ids: list[int] = []
    texts: list[str] = []
    pos = 0
    n = len(text)
    while pos < n:
        match_id = -1
        match_len = 0
        limit = min(vocab._max_len, n - pos)
        for length in range(limit, 0, -1):
            candidate = text[pos : pos + length]
            tid = vocab._index.get(candidate)
            if tid is not None:
                match_id = tid
                match_len = length
                break
        if match_id < 0:
            raise VocabError(
                f"vocabulary {vocab.name!r}: no token covers text at position {pos} ({text[pos]!r})"
            )
        ids.append(match_id)
        texts.append(text[pos : pos + match_len])
        pos += match_len
    return TokenSequence(vocab=vocab.name, ids=tuple(ids), texts=tuple(texts))


def decode(vocab: Vocabulary, token_id: int) -> str:
    """Token string for an id; raises VocabError when out of range."""
    return vocab.decode(token_id)


def decode_sequence(vocab: Vocabulary, ids) -> TokenSequence:
    """Build a TokenSequence from raw ids by decoding each one."""
    ids = tuple(int(i) for i in ids)
    return TokenSequence(vocab=vocab.name, ids=ids, texts=tuple(vocab.decode(i) for i in ids))


def save_vocab(vocab: Vocabulary, path: str | Path) -> None:
    """Write the canonical vocabulary file format."""
    payload = {"name": vocab.name, "tokens": list(vocab.tokens)}
    Path(path).write_text(json.dumps(payload, ensure_ascii=False) + "\n", encoding="utf-8")
