"""Link-prediction datasets: loading, string cleaning, and entity-based splits.

A dataset directory holds five TSV files: ``entities.tsv`` (raw_id, name,
optional definition; two-field rows use the raw id as the name), one raw
relation string per line in ``relations.tsv``, and ``train/valid/test.tsv``
with one ``head\\trelation\\ttail`` record per line using raw identifiers.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DatasetError

log = logging.getLogger(__name__)

SPLIT_NAMES = ("train", "valid", "test")

_POS_WORDS = {
    "n": "noun",
    "v": "verb",
    "a": "adjective",
    "s": "adjective satellite",
    "r": "adverb",
}
_SYNSET_RE = re.compile(r"^(?P<name>.+)\.(?P<pos>[nvasr])\.(?P<sense>[0-9]+)$")
_RELATION_SEPS = re.compile(r"[/._]+")
_WS = re.compile(r"\s+")


class Triple(NamedTuple):
    head: int
    rel: int
    tail: int


@dataclass(frozen=True)
class Entity:
    id: int
    raw: str
    surface: str
    definition: str = ""


@dataclass(frozen=True)
class Relation:
    id: int
    raw: str
    surface: str


@dataclass(frozen=True)
class SplitSpec:
    """Entity-sampling parameters for the unseen-entity split."""

    seed: int
    valid_fraction: float = 0.05
    test_fraction: float = 0.05


def clean_synset(raw: str) -> str:
    """Turn a synset identifier like ``dog.n.01`` into ``dog noun 1``.

    Underscores in the name become spaces, the part-of-speech letter is
    spelled out, and leading zeros are dropped from the sense number.
    """
    m = _SYNSET_RE.match(raw)
    if m is None:
        raise DatasetError(f"malformed synset identifier: {raw!r}")
    name = m.group("name").replace("_", " ")
    name = _WS.sub(" ", name).strip()
    if not name:
        raise DatasetError(f"malformed synset identifier: {raw!r}")
    return f"{name} {_POS_WORDS[m.group('pos')]} {int(m.group('sense'))}"


def clean_relation(raw: str) -> str:
    """Reduce a raw relation identifier to its words.

    Underscores and path separators ('/' and '.') become spaces, whitespace
    runs collapse to a single space.
    """
    cleaned = _WS.sub(" ", _RELATION_SEPS.sub(" ", raw).replace("_", " ")).strip()
    if not cleaned:
        raise DatasetError(f"relation {raw!r} is empty after cleaning")
    return cleaned


def _clean_plain(text: str) -> str:
    return _WS.sub(" ", text).strip()


class KnowledgeGraph:
    """Immutable triple store with a known-triple index over all splits.

    ``valid_entities`` / ``test_entities`` are populated for unseen-entity
    splits and hold the sampled entity ids; they stay ``None`` for standard
    datasets.
    """

    def __init__(
        self,
        entities: Sequence[Entity],
        relations: Sequence[Relation],
        train: Sequence[Triple],
        valid: Sequence[Triple],
        test: Sequence[Triple],
        valid_entities: frozenset[int] | None = None,
        test_entities: frozenset[int] | None = None,
    ):
        self.entities = tuple(entities)
        self.relations = tuple(relations)
        self.train = tuple(train)
        self.valid = tuple(valid)
        self.test = tuple(test)
        self.valid_entities = valid_entities
        self.test_entities = test_entities

        self._known: set[Triple] = set()
        tails: dict[tuple[int, int], list[int]] = {}
        heads: dict[tuple[int, int], list[int]] = {}
        for t in self.all_triples():
            self._known.add(t)
            tails.setdefault((t.head, t.rel), []).append(t.tail)
            heads.setdefault((t.rel, t.tail), []).append(t.head)
        self._tails = {k: np.unique(v) for k, v in tails.items()}
        self._heads = {k: np.unique(v) for k, v in heads.items()}
        self._empty = np.empty(0, dtype=np.int64)

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_relations(self) -> int:
        return len(self.relations)

    def split(self, name: str) -> tuple[Triple, ...]:
        if name not in SPLIT_NAMES:
            raise ValueError(f"unknown split {name!r}")
        return getattr(self, name)

    def all_triples(self) -> tuple[Triple, ...]:
        return self.train + self.valid + self.test

    def contains(self, head: int, rel: int, tail: int) -> bool:
        return Triple(head, rel, tail) in self._known

    def known_tails(self, head: int, rel: int) -> np.ndarray:
        """All t with (head, rel, t) in any split."""
        return self._tails.get((head, rel), self._empty)

    def known_heads(self, rel: int, tail: int) -> np.ndarray:
        """All h with (h, rel, tail) in any split."""
        return self._heads.get((rel, tail), self._empty)


def _read_rows(path: Path, n_fields_min: int, n_fields_max: int):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("\t")
            if not n_fields_min <= len(fields) <= n_fields_max:
                raise DatasetError(
                    f"{path}:{lineno}: expected {n_fields_min}-{n_fields_max} "
                    f"tab-separated fields, got {len(fields)}"
                )
            rows.append((lineno, fields))
    return rows


def _load_entities(path: Path, style: str) -> list[Entity]:
    entities: list[Entity] = []
    by_raw: dict[str, int] = {}
    by_surface: dict[str, str] = {}
    for lineno, fields in _read_rows(path, 1, 3):
        raw = fields[0]
        name = fields[1] if len(fields) >= 2 and fields[1] else raw
        definition = _clean_plain(fields[2]) if len(fields) == 3 else ""
        if raw in by_raw:
            raise DatasetError(f"{path}:{lineno}: duplicate entity id {raw!r}")
        try:
            surface = clean_synset(name) if style == "wordnet" else _clean_plain(name)
        except DatasetError as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from None
        if not surface:
            raise DatasetError(f"{path}:{lineno}: entity {raw!r} has an empty name")
        if surface in by_surface:
            raise DatasetError(
                f"{path}:{lineno}: entity {raw!r} cleans to {surface!r}, "
                f"already used by {by_surface[surface]!r}"
            )
        by_raw[raw] = len(entities)
        by_surface[surface] = raw
        entities.append(Entity(len(entities), raw, surface, definition))
    return entities


def _load_relations(path: Path) -> list[Relation]:
    relations: list[Relation] = []
    seen_raw: set[str] = set()
    seen_surface: dict[str, str] = {}
    for lineno, fields in _read_rows(path, 1, 1):
        raw = fields[0]
        if raw in seen_raw:
            raise DatasetError(f"{path}:{lineno}: duplicate relation {raw!r}")
        try:
            surface = clean_relation(raw)
        except DatasetError as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from None
        if surface in seen_surface:
            raise DatasetError(
                f"{path}:{lineno}: relation {raw!r} cleans to {surface!r}, "
                f"already used by {seen_surface[surface]!r}"
            )
        seen_raw.add(raw)
        seen_surface[surface] = raw
        relations.append(Relation(len(relations), raw, surface))
    return relations


def _load_triples(
    path: Path, entity_ids: dict[str, int], relation_ids: dict[str, int]
) -> list[Triple]:
    triples: list[Triple] = []
    seen: set[Triple] = set()
    duplicates = 0
    for lineno, fields in _read_rows(path, 3, 3):
        raw_h, raw_r, raw_t = fields
        try:
            h = entity_ids[raw_h]
        except KeyError:
            raise DatasetError(f"{path}:{lineno}: unknown entity id {raw_h!r}") from None
        try:
            r = relation_ids[raw_r]
        except KeyError:
            raise DatasetError(f"{path}:{lineno}: unknown relation {raw_r!r}") from None
        try:
            t = entity_ids[raw_t]
        except KeyError:
            raise DatasetError(f"{path}:{lineno}: unknown entity id {raw_t!r}") from None
        triple = Triple(h, r, t)
        if triple in seen:
            duplicates += 1
            continue
        seen.add(triple)
        triples.append(triple)
    if duplicates:
        log.warning("%s: dropped %d duplicate triple line(s)", path, duplicates)
    return triples


def load_dataset(
    train_path: str | Path,
    valid_path: str | Path,
    test_path: str | Path,
    entities_path: str | Path,
    relations_path: str | Path,
    style: str = "plain",
    unseen_manifest: str | Path | None = None,
) -> KnowledgeGraph:
    """Load TSV dataset files into a :class:`KnowledgeGraph` with dense ids.

    ``style`` picks the name-cleaning rule: ``wordnet`` treats names as synset
    identifiers, ``freebase`` and ``plain`` use the name verbatim modulo
    whitespace normalization. Relations are always cleaned to words.
    """
    if style not in ("wordnet", "freebase", "plain"):
        raise DatasetError(f"unknown dataset style {style!r}")
    entities = _load_entities(Path(entities_path), style)
    relations = _load_relations(Path(relations_path))
    entity_ids = {e.raw: e.id for e in entities}
    relation_ids = {r.raw: r.id for r in relations}
    splits = [
        _load_triples(Path(p), entity_ids, relation_ids)
        for p in (train_path, valid_path, test_path)
    ]
    valid_entities = test_entities = None
    if unseen_manifest is not None:
        with open(unseen_manifest, encoding="utf-8") as fh:
            manifest = json.load(fh)
        try:
            valid_entities = frozenset(entity_ids[r] for r in manifest["valid_entities"])
            test_entities = frozenset(entity_ids[r] for r in manifest["test_entities"])
        except KeyError as exc:
            raise DatasetError(
                f"{unseen_manifest}: unknown entity id {exc.args[0]!r} in manifest"
            ) from None
    return KnowledgeGraph(entities, relations, *splits,
                          valid_entities=valid_entities, test_entities=test_entities)


def load_dataset_dir(
    dataset_dir: str | Path, style: str = "plain", unseen: bool = False
) -> KnowledgeGraph:
    """Load a dataset directory laid out with the conventional file names."""
    d = Path(dataset_dir)
    for name in ("train.tsv", "valid.tsv", "test.tsv", "entities.tsv", "relations.tsv"):
        if not (d / name).exists():
            raise DatasetError(f"{d}: missing {name}")
    manifest = d / "unseen.json"
    if unseen and not manifest.exists():
        raise DatasetError(
            f"{d}: unseen mode needs {manifest.name} (produced by split-unseen)"
        )
    return load_dataset(
        d / "train.tsv", d / "valid.tsv", d / "test.tsv",
        d / "entities.tsv", d / "relations.tsv",
        style=style, unseen_manifest=manifest if unseen else None,
    )


def partition_by_entities(kg: KnowledgeGraph, valid_set: frozenset[int],
                          test_set: frozenset[int]) -> KnowledgeGraph:
    """Partition all triples by two disjoint sampled entity sets.

    Triples touching a validation entity go to valid, triples touching a test
    entity but no validation entity go to test, everything else goes to train.
    A triple touching entities from both sets therefore lands in valid.
    """
    if valid_set & test_set:
        raise DatasetError("sampled validation and test entity sets overlap")
    train: list[Triple] = []
    valid: list[Triple] = []
    test: list[Triple] = []
    for t in kg.all_triples():
        if t.head in valid_set or t.tail in valid_set:
            valid.append(t)
        elif t.head in test_set or t.tail in test_set:
            test.append(t)
        else:
            train.append(t)
    return KnowledgeGraph(kg.entities, kg.relations, train, valid, test,
                          valid_entities=valid_set, test_entities=test_set)


def make_unseen_split(kg: KnowledgeGraph, spec: SplitSpec) -> KnowledgeGraph:
    """Re-split a dataset by sampled entities rather than by triples.

    Two disjoint entity sets are sampled at the given fractions and the
    triples are partitioned around them, so every evaluated triple contains at
    least one entity never seen in training.
    """
    for name, frac in (("valid", spec.valid_fraction), ("test", spec.test_fraction)):
        if not 0.0 <= frac < 1.0:
            raise DatasetError(f"{name} fraction {frac} outside [0, 1)")
    if spec.valid_fraction + spec.test_fraction >= 1.0:
        raise DatasetError("sampled fractions must sum to less than 1")

    n = kg.n_entities
    n_valid = int(spec.valid_fraction * n)
    n_test = int(spec.test_fraction * n)
    if spec.valid_fraction > 0 and n_valid == 0:
        raise DatasetError(f"valid fraction {spec.valid_fraction} samples zero entities")
    if spec.test_fraction > 0 and n_test == 0:
        raise DatasetError(f"test fraction {spec.test_fraction} samples zero entities")

    perm = np.random.default_rng(spec.seed).permutation(n)
    valid_set = frozenset(int(i) for i in perm[:n_valid])
    test_set = frozenset(int(i) for i in perm[n_valid:n_valid + n_test])
    return partition_by_entities(kg, valid_set, test_set)


def unseen_sides(kg: KnowledgeGraph, triple: Triple, split: str) -> tuple[bool, bool]:
    """(head_unseen, tail_unseen) for a triple of an unseen-split dataset."""
    sampled = kg.valid_entities if split == "valid" else kg.test_entities
    if sampled is None:
        raise DatasetError("dataset has no unseen-entity sampling information")
    return triple.head in sampled, triple.tail in sampled


def save_triples(path: str | Path, kg: KnowledgeGraph, triples: Iterable[Triple]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for t in triples:
            fh.write(f"{kg.entities[t.head].raw}\t{kg.relations[t.rel].raw}"
                     f"\t{kg.entities[t.tail].raw}\n")


def save_unseen_manifest(path: str | Path, kg: KnowledgeGraph, seed: int) -> None:
    if kg.valid_entities is None or kg.test_entities is None:
        raise DatasetError("knowledge graph carries no sampled entity sets")
    manifest = {
        "seed": seed,
        "valid_entities": sorted(kg.entities[i].raw for i in kg.valid_entities),
        "test_entities": sorted(kg.entities[i].raw for i in kg.test_entities),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
