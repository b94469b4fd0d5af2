"""Query enumeration and the token layout fed to the masked language model.

A tail-prediction prompt is ``<s> head-surface head-definition relation
<mask>*L </s>`` and a head-prediction prompt is ``<s> <mask>*L relation
tail-surface tail-definition </s>``, where L is the catalog-wide longest
entity length. Segments join with single spaces at the string level; masked
spans and markers attach without extra separators.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import DatasetError, PromptError
from .kg import KnowledgeGraph, Triple, unseen_sides
from .tokenizer import (
    BOS_MARKER,
    EOS_MARKER,
    MASK_MARKER,
    PAD_MARKER,
    EntityCatalog,
    Vocabulary,
)

PREDICT_HEAD = "predict-head"
PREDICT_TAIL = "predict-tail"
DIRECTIONS = (PREDICT_TAIL, PREDICT_HEAD)


def query_id_of(triple: Triple, direction: str) -> int:
    """Stable 48-bit id for one (triple, direction) query.

    Kept under 2**53 so downstream JSON consumers can hold it in a double.
    """
    digest = hashlib.blake2b(
        f"{triple.head}|{triple.rel}|{triple.tail}|{direction}".encode(),
        digest_size=6,
    ).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class Query:
    triple: Triple
    direction: str
    query_id: int

    @property
    def gold(self) -> int:
        """The entity id the query asks for."""
        return self.triple.head if self.direction == PREDICT_HEAD else self.triple.tail


def make_query(triple: Triple, direction: str) -> Query:
    if direction not in DIRECTIONS:
        raise ValueError(f"unknown direction {direction!r}")
    return Query(triple=triple, direction=direction,
                 query_id=query_id_of(triple, direction))


def enumerate_queries(kg: KnowledgeGraph, split: str = "test",
                      mode: str = "standard") -> list[Query]:
    """All queries for a split: both directions per triple in standard mode,
    one query per unseen side in unseen mode."""
    if mode not in ("standard", "unseen"):
        raise DatasetError(f"unknown mode {mode!r}")
    queries: list[Query] = []
    for triple in kg.split(split):
        if mode == "standard":
            queries.append(make_query(triple, PREDICT_TAIL))
            queries.append(make_query(triple, PREDICT_HEAD))
        else:
            head_unseen, tail_unseen = unseen_sides(kg, triple, split)
            if tail_unseen:
                queries.append(make_query(triple, PREDICT_TAIL))
            if head_unseen:
                queries.append(make_query(triple, PREDICT_HEAD))
    ids = set()
    for q in queries:
        if q.query_id in ids:
            raise RuntimeError(f"query id collision at {q.triple} {q.direction}")
        ids.add(q.query_id)
    return queries


@dataclass(frozen=True)
class Prompt:
    tokens: tuple[int, ...]
    mask_start: int
    mask_length: int
    query: Query


def build_prompt(kg: KnowledgeGraph, catalog: EntityCatalog, vocab: Vocabulary,
                 query: Query, max_seq_len: int = 512,
                 pad_to_max: bool = False) -> Prompt:
    """Assemble the token sequence for one query.

    When the sequence would exceed ``max_seq_len``, the known entity's
    definition is truncated from its end; the surface, relation, and mask span
    are never cut. A query that cannot fit even with the definition dropped is
    an error.
    """
    t = query.triple
    known = kg.entities[t.head] if query.direction == PREDICT_TAIL else kg.entities[t.tail]
    relation = kg.relations[t.rel]
    l_max = catalog.l_max
    masks = [vocab.mask_id] * l_max

    if query.direction == PREDICT_TAIL:
        surface_ids = vocab.tokenize(known.surface)
        def_ids = vocab.tokenize(" " + known.definition) if known.definition else []
        rel_ids = vocab.tokenize(" " + relation.surface)
    else:
        rel_ids = vocab.tokenize(relation.surface)
        surface_ids = vocab.tokenize(" " + known.surface)
        def_ids = vocab.tokenize(" " + known.definition) if known.definition else []

    fixed = 2 + len(surface_ids) + len(rel_ids) + l_max  # bos + eos + everything but the definition
    room = max_seq_len - fixed
    if room < 0:
        raise PromptError(
            f"query {query.query_id} ({t.head},{t.rel},{t.tail}) {query.direction}: "
            f"needs {fixed} tokens before the definition, max_seq_len is {max_seq_len}"
        )
    if len(def_ids) > room:
        def_ids = def_ids[:room]

    if query.direction == PREDICT_TAIL:
        tokens = [vocab.bos_id, *surface_ids, *def_ids, *rel_ids, *masks, vocab.eos_id]
        mask_start = 1 + len(surface_ids) + len(def_ids) + len(rel_ids)
    else:
        tokens = [vocab.bos_id, *masks, *rel_ids, *surface_ids, *def_ids, vocab.eos_id]
        mask_start = 1
    if pad_to_max:
        tokens.extend([vocab.pad_id] * (max_seq_len - len(tokens)))
    return Prompt(tokens=tuple(tokens), mask_start=mask_start,
                  mask_length=l_max, query=query)


def render_prompt(vocab: Vocabulary, prompt: Prompt) -> str:
    """Human-readable form with <s>, </s>, <mask>, and <pad> markers."""
    markers = {
        vocab.bos_id: BOS_MARKER,
        vocab.eos_id: EOS_MARKER,
        vocab.mask_id: MASK_MARKER,
        vocab.pad_id: PAD_MARKER,
    }
    parts: list[str] = []
    run: list[int] = []
    for tid in prompt.tokens:
        if tid in markers:
            if run:
                parts.append(vocab.detokenize(run))
                run.clear()
            parts.append(markers[tid])
        else:
            run.append(tid)
    if run:
        parts.append(vocab.detokenize(run))
    return "".join(parts)


def write_prompts(path: str | Path, prompts: Iterable[Prompt]) -> int:
    """Emit the prompt contract consumed by model adapters, one JSON per line."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for p in prompts:
            q = p.query
            fh.write(json.dumps({
                "query_id": q.query_id,
                "direction": q.direction,
                "triple": list(q.triple),
                "token_ids": list(p.tokens),
                "mask_start": p.mask_start,
            }) + "\n")
            count += 1
    return count


def read_prompts(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
