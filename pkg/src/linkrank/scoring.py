"""Entity scoring from per-query logit tables, and the MLMT file boundary.

One model call per query yields an (l_max x vocab) table of token logits at
the masked positions. An entity's score is the mean of its own tokens' logits
over its true length; padded positions never contribute, so entities of
different lengths compare on the same scale.

MLMT binary layout (little-endian): magic ``MLMT``, u32 version = 1, u32
vocab_size, u32 l_max, then one record per query: u64 query_id followed by
l_max * vocab_size float32 values, row-major with one row per masked position.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .errors import ShapeError, TableFormatError
from .kg import KnowledgeGraph
from .prompts import Query
from .tokenizer import EntityCatalog

MLMT_MAGIC = b"MLMT"
MLMT_VERSION = 1
_HEADER = struct.Struct("<4sIII")
_QUERY_ID = struct.Struct("<Q")


@dataclass(frozen=True)
class LogitTable:
    """Token log-likelihoods for one query: row = masked position, column = token id."""

    query_id: int
    values: np.ndarray


@dataclass(frozen=True)
class ScoreVector:
    """Mean-likelihood score per entity for one query."""

    query_id: int
    scores: np.ndarray


def score_entities(table: LogitTable, catalog: EntityCatalog) -> ScoreVector:
    """Mean logit of each entity's non-padded tokens.

    scores[i] = (1 / len_i) * sum_j values[j, tokens[i, j]] over j < len_i.
    Accumulation runs in float64 regardless of table storage width, walking
    positions in ascending order, so the result is bit-identical to a scalar
    per-entity loop.
    """
    values = table.values
    if values.ndim != 2 or values.shape[0] != catalog.l_max:
        raise ShapeError(
            f"table shape {values.shape} does not match catalog "
            f"(l_max {catalog.l_max}, {catalog.n} entities)"
        )
    max_token = int(catalog.tokens.max())
    if max_token >= values.shape[1]:
        raise ShapeError(
            f"table shape {values.shape} too narrow for catalog token id {max_token}"
        )
    values = values.astype(np.float64, copy=False)
    acc = np.zeros(catalog.n, dtype=np.float64)
    lengths = catalog.lengths
    for j in range(catalog.l_max):
        live = lengths > j
        acc[live] += values[j, catalog.tokens[live, j]]
    return ScoreVector(query_id=table.query_id, scores=acc / lengths)


def save_logit_tables(path: str | Path, tables: Iterable[LogitTable],
                      vocab_size: int, l_max: int) -> int:
    """Write tables as MLMT; returns the record count."""
    count = 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MLMT_MAGIC, MLMT_VERSION, vocab_size, l_max))
        for table in tables:
            if table.values.shape != (l_max, vocab_size):
                raise ShapeError(
                    f"table for query {table.query_id} has shape {table.values.shape}, "
                    f"file is ({l_max}, {vocab_size})"
                )
            fh.write(_QUERY_ID.pack(table.query_id))
            fh.write(np.ascontiguousarray(table.values, dtype="<f4").tobytes())
            count += 1
    return count


def load_logit_tables(path: str | Path, expected_vocab_size: int | None = None,
                      expected_l_max: int | None = None) -> Iterator[LogitTable]:
    """Stream tables from an MLMT file in file order.

    Validates magic, version, and dimensions, and reports corruption with the
    byte offset where it was detected.
    """
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise TableFormatError(f"{path}: truncated header", offset=len(header))
        magic, version, vocab_size, l_max = _HEADER.unpack(header)
        if magic != MLMT_MAGIC:
            raise TableFormatError(f"{path}: bad magic {magic!r}", offset=0)
        if version != MLMT_VERSION:
            raise TableFormatError(f"{path}: unsupported version {version}", offset=4)
        if expected_vocab_size is not None and vocab_size != expected_vocab_size:
            raise TableFormatError(
                f"{path}: file vocab_size {vocab_size} does not match expected "
                f"{expected_vocab_size}", offset=8)
        if expected_l_max is not None and l_max != expected_l_max:
            raise TableFormatError(
                f"{path}: file l_max {l_max} does not match expected {expected_l_max}",
                offset=12)
        if vocab_size == 0 or l_max == 0:
            raise TableFormatError(f"{path}: zero-sized table dimensions", offset=8)

        payload_bytes = 4 * vocab_size * l_max
        offset = _HEADER.size
        while True:
            head = fh.read(_QUERY_ID.size)
            if not head:
                return
            if len(head) < _QUERY_ID.size:
                raise TableFormatError(f"{path}: truncated query id", offset=offset)
            (query_id,) = _QUERY_ID.unpack(head)
            payload = fh.read(payload_bytes)
            if len(payload) < payload_bytes:
                raise TableFormatError(
                    f"{path}: truncated record for query {query_id}",
                    offset=offset + _QUERY_ID.size + len(payload))
            values = np.frombuffer(payload, dtype="<f4").reshape(l_max, vocab_size)
            if not np.isfinite(values).all():
                raise TableFormatError(
                    f"{path}: non-finite logits in record for query {query_id}",
                    offset=offset)
            values = values.copy()
            values.setflags(write=False)
            offset += _QUERY_ID.size + payload_bytes
            yield LogitTable(query_id=query_id, values=values)


def save_table_manifest(path: str | Path, queries: Sequence[Query],
                        vocab_size: int, l_max: int) -> None:
    manifest = {
        "vocab_size": vocab_size,
        "l_max": l_max,
        "queries": {
            str(q.query_id): {"triple": list(q.triple), "direction": q.direction}
            for q in queries
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_table_manifest(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


ScorerFn = Callable[[Iterable[Query]], Iterator[LogitTable]]

SCORER_KINDS = ("constant", "frequency")


def builtin_scorer(kind: str, kg: KnowledgeGraph, catalog: EntityCatalog,
                   vocab_size: int) -> ScorerFn:
    """Model-free table generators used as baselines and test fixtures.

    ``constant`` emits all-zero tables, which under randomized tie-breaking
    behaves as a uniform-random ranker. ``frequency`` scores token t at entity
    position j as log(1 + count of t at position j over the gold entities of
    the training triples).
    """
    if kind == "constant":
        base = np.zeros((catalog.l_max, vocab_size), dtype=np.float32)
    elif kind == "frequency":
        counts = np.zeros((catalog.l_max, vocab_size), dtype=np.float64)
        gold_ids = np.array(
            [e for t in kg.train for e in (t.head, t.tail)], dtype=np.int64
        )
        for j in range(catalog.l_max):
            live = gold_ids[catalog.lengths[gold_ids] > j]
            np.add.at(counts[j], catalog.tokens[live, j], 1.0)
        base = np.log1p(counts).astype(np.float32)
    else:
        raise ValueError(f"unknown scorer kind {kind!r}")
    base.setflags(write=False)

    def generate(queries: Iterable[Query]) -> Iterator[LogitTable]:
        for q in queries:
            yield LogitTable(query_id=q.query_id, values=base)

    return generate
