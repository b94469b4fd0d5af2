"""Vocabularies, greedy longest-match tokenization, and the padded entity catalog.

Two ways to obtain token ids coexist behind the same types. The built-in
tokenizer greedily matches the longest vocabulary token at each position and
falls back to byte tokens (``<0xNN>``), so it never fails on valid UTF-8. The
external mode loads a vocabulary plus a pre-tokenized entity catalog produced
by a model adapter, so entity rows carry the real model's ids untouched.

Vocabulary file format: four header lines holding the integer ids of bos, eos,
mask, and pad, then one token per line where the line index within the body is
the token id.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import TokenizationError, VocabularyError
from .kg import Entity

BOS_MARKER = "<s>"
EOS_MARKER = "</s>"
MASK_MARKER = "<mask>"
PAD_MARKER = "<pad>"

_BYTE_TOKEN_RE = re.compile(r"^<0x([0-9A-Fa-f]{2})>$")


def byte_token(value: int) -> str:
    return f"<0x{value:02X}>"


class Vocabulary:
    """Bijective token/id map with reserved bos, eos, mask, and pad ids.

    Reserved ids and byte-fallback tokens are never produced by text matching;
    byte tokens are emitted only when no vocabulary token covers a character.
    """

    def __init__(self, tokens: Sequence[str], bos_id: int, eos_id: int,
                 mask_id: int, pad_id: int):
        reserved = (bos_id, eos_id, mask_id, pad_id)
        if len(set(reserved)) != 4:
            raise VocabularyError(f"reserved ids must be distinct, got {reserved}")
        for rid in reserved:
            if not 0 <= rid < len(tokens):
                raise VocabularyError(f"reserved id {rid} outside vocabulary of size {len(tokens)}")
        self._tokens = list(tokens)
        self.bos_id, self.eos_id, self.mask_id, self.pad_id = reserved
        self.reserved_ids = frozenset(reserved)

        self._ids: dict[str, int] = {}
        self._byte_ids: dict[int, int] = {}
        match_tokens: dict[str, int] = {}
        for tid, tok in enumerate(self._tokens):
            if not tok or "\n" in tok or "\r" in tok:
                raise VocabularyError(f"token id {tid} is empty or contains a newline")
            if tok in self._ids:
                raise VocabularyError(f"duplicate token {tok!r} (ids {self._ids[tok]} and {tid})")
            self._ids[tok] = tid
            m = _BYTE_TOKEN_RE.match(tok)
            if m is not None:
                self._byte_ids[int(m.group(1), 16)] = tid
            elif tid not in self.reserved_ids:
                match_tokens[tok] = tid
        self._match = match_tokens
        # lengths to try per leading character, longest first
        lengths: dict[str, set[int]] = {}
        for tok in match_tokens:
            lengths.setdefault(tok[0], set()).add(len(tok))
        self._match_lengths = {c: sorted(ls, reverse=True) for c, ls in lengths.items()}

    def __len__(self) -> int:
        return len(self._tokens)

    @property
    def size(self) -> int:
        return len(self._tokens)

    def token(self, token_id: int) -> str:
        return self._tokens[token_id]

    def id_of(self, token: str) -> int:
        try:
            return self._ids[token]
        except KeyError:
            raise VocabularyError(f"token {token!r} not in vocabulary") from None

    def is_reserved(self, token_id: int) -> bool:
        return token_id in self.reserved_ids

    @classmethod
    def from_tokens(cls, text_tokens: Iterable[str], include_bytes: bool = True) -> "Vocabulary":
        """Build a vocabulary with the markers at ids 0-3 and optional byte tokens."""
        tokens = [BOS_MARKER, EOS_MARKER, MASK_MARKER, PAD_MARKER]
        if include_bytes:
            tokens.extend(byte_token(b) for b in range(256))
        tokens.extend(text_tokens)
        return cls(tokens, bos_id=0, eos_id=1, mask_id=2, pad_id=3)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for rid in (self.bos_id, self.eos_id, self.mask_id, self.pad_id):
                fh.write(f"{rid}\n")
            for tok in self._tokens:
                fh.write(tok + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        with open(path, encoding="utf-8", newline="") as fh:
            lines = fh.read().split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if len(lines) < 5:
            raise VocabularyError(f"{path}: vocabulary needs a 4-line header plus tokens")
        try:
            reserved = [int(x) for x in lines[:4]]
        except ValueError:
            raise VocabularyError(f"{path}: header lines must be integer reserved ids") from None
        try:
            return cls(lines[4:], *reserved)
        except VocabularyError as exc:
            raise VocabularyError(f"{path}: {exc}") from None

    def tokenize(self, text: str) -> list[int]:
        """Greedy longest match over the vocabulary with byte fallback.

        Deterministic, never emits reserved ids, and round-trips through
        :meth:`detokenize` up to whitespace normalization.
        """
        ids: list[int] = []
        i, n = 0, len(text)
        while i < n:
            matched = None
            for length in self._match_lengths.get(text[i], ()):
                if length > n - i:
                    continue
                tid = self._match.get(text[i:i + length])
                if tid is not None:
                    matched = (tid, length)
                    break
            if matched is not None:
                ids.append(matched[0])
                i += matched[1]
                continue
            char_bytes = text[i].encode("utf-8")
            for b in char_bytes:
                bid = self._byte_ids.get(b)
                if bid is None:
                    raise TokenizationError(
                        f"character {text[i]!r} not tokenizable and the vocabulary "
                        f"has no byte-fallback tokens"
                    )
                ids.append(bid)
            i += 1
        return ids

    def detokenize(self, ids: Iterable[int]) -> str:
        """Inverse of :meth:`tokenize` for non-reserved ids."""
        parts: list[str] = []
        pending = bytearray()
        for tid in ids:
            if tid in self.reserved_ids:
                raise TokenizationError(f"reserved id {tid} has no text form")
            tok = self._tokens[tid]
            m = _BYTE_TOKEN_RE.match(tok)
            if m is not None:
                pending.append(int(m.group(1), 16))
                continue
            if pending:
                parts.append(pending.decode("utf-8", errors="replace"))
                pending.clear()
            parts.append(tok)
        if pending:
            parts.append(pending.decode("utf-8", errors="replace"))
        return "".join(parts)


def vocab_from_texts(texts: Iterable[str]) -> Vocabulary:
    """Word-level vocabulary covering the given texts.

    Every whitespace-separated word is added both bare and with a leading
    space, so greedy matching reproduces word splits exactly.
    """
    words: list[str] = []
    seen: set[str] = set()
    for text in texts:
        for word in text.split():
            if word not in seen:
                seen.add(word)
                words.append(word)
    tokens: list[str] = []
    for w in sorted(words):
        tokens.append(w)
        tokens.append(" " + w)
    return Vocabulary.from_tokens(tokens)


@dataclass(frozen=True)
class EntityCatalog:
    """All entity token rows, right-padded to the longest entity.

    ``tokens`` is an (n, l_max) int32 matrix, pad-filled past each row's true
    length; ``lengths`` holds the true token counts. Row i belongs to entity
    id i.
    """

    tokens: np.ndarray
    lengths: np.ndarray
    pad_id: int

    @property
    def n(self) -> int:
        return self.tokens.shape[0]

    @property
    def l_max(self) -> int:
        return self.tokens.shape[1]

    def row(self, entity_id: int) -> list[int]:
        """Token ids of one entity with padding stripped."""
        return self.tokens[entity_id, : self.lengths[entity_id]].tolist()

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], pad_id: int) -> "EntityCatalog":
        if not rows:
            raise VocabularyError("catalog needs at least one entity")
        lengths = np.array([len(r) for r in rows], dtype=np.int64)
        if (lengths == 0).any():
            raise VocabularyError(f"entity {int(np.argmin(lengths))} has no tokens")
        l_max = int(lengths.max())
        tokens = np.full((len(rows), l_max), pad_id, dtype=np.int32)
        for i, r in enumerate(rows):
            tokens[i, : len(r)] = r
        tokens.setflags(write=False)
        lengths.setflags(write=False)
        return cls(tokens=tokens, lengths=lengths, pad_id=pad_id)

    @classmethod
    def build(cls, vocab: Vocabulary, entities: Sequence[Entity]) -> "EntityCatalog":
        """Tokenize entity surfaces and pad to the longest entity.

        Input order does not matter: rows are keyed by entity id.
        """
        ordered: list[Entity | None] = [None] * len(entities)
        for e in entities:
            if not 0 <= e.id < len(entities) or ordered[e.id] is not None:
                raise VocabularyError("entity ids must form a contiguous range")
            ordered[e.id] = e
        rows = []
        for e in ordered:
            assert e is not None
            try:
                ids = vocab.tokenize(e.surface)
            except TokenizationError as exc:
                raise TokenizationError(f"entity {e.raw!r}: {exc}") from None
            if not ids:
                raise TokenizationError(f"entity {e.raw!r} ({e.surface!r}) tokenizes to nothing")
            rows.append(ids)
        return cls.from_rows(rows, pad_id=vocab.pad_id)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for i in range(self.n):
                fh.write(json.dumps({"entity_id": i, "token_ids": self.row(i)}) + "\n")

    @classmethod
    def load(cls, path: str | Path, vocab: Vocabulary) -> "EntityCatalog":
        """Read a pre-tokenized catalog (JSON lines of {entity_id, token_ids})."""
        rows_by_id: dict[int, list[int]] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    eid, ids = int(rec["entity_id"]), [int(t) for t in rec["token_ids"]]
                except (ValueError, KeyError, TypeError):
                    raise VocabularyError(f"{path}:{lineno}: malformed catalog record") from None
                if eid in rows_by_id:
                    raise VocabularyError(f"{path}:{lineno}: duplicate entity id {eid}")
                for t in ids:
                    if not 0 <= t < vocab.size:
                        raise VocabularyError(f"{path}:{lineno}: token id {t} outside vocabulary")
                    if vocab.is_reserved(t):
                        raise VocabularyError(f"{path}:{lineno}: reserved token id {t} in entity row")
                if not ids:
                    raise VocabularyError(f"{path}:{lineno}: entity {eid} has no tokens")
                rows_by_id[eid] = ids
        if sorted(rows_by_id) != list(range(len(rows_by_id))):
            raise VocabularyError(f"{path}: entity ids must cover 0..{len(rows_by_id) - 1}")
        return cls.from_rows([rows_by_id[i] for i in range(len(rows_by_id))],
                             pad_id=vocab.pad_id)
