"""Deterministic synthetic datasets and catalogs.

Used by the bench command and by the test suite to produce graphs at arbitrary
scale, including datasets shaped like the public benchmarks (entity and
relation counts, identifier styles) without shipping the originals.
"""

from __future__ import annotations

from pathlib import Path
import numpy as np

from .tokenizer import EntityCatalog

_CONSONANTS = "bcdfghjklmnprstvwz"
_VOWELS = "aeiou"
_SYLLABLES = [c + v for c in _CONSONANTS for v in _VOWELS]

WN18RR_RELATIONS = (
    "_hypernym",
    "_derivationally_related_form",
    "_instance_hypernym",
    "_also_see",
    "_member_meronym",
    "_synset_domain_topic_of",
    "_has_part",
    "_member_of_domain_usage",
    "_member_of_domain_region",
    "_verb_group",
    "_similar_to",
)


def pseudo_word(index: int) -> str:
    """Unique pronounceable word for a non-negative index."""
    n = len(_SYLLABLES)
    parts = [_SYLLABLES[index % n]]
    index //= n
    while index:
        parts.append(_SYLLABLES[index % n])
        index //= n
    return "".join(reversed(parts))


def _synset_names(n_entities: int) -> list[str]:
    # three senses per base word, occasional two-word names for length variety
    variants = (("n", 1), ("v", 1), ("n", 2))
    names = []
    for i in range(n_entities):
        word = pseudo_word(i // 3)
        if i % 7 == 0:
            word = f"{word}_{pseudo_word(i // 3 + 1)}"
        pos, sense = variants[i % 3]
        names.append(f"{word}.{pos}.{sense:02d}")
    return names


def _definition(rng: np.random.Generator, pool_size: int, min_words: int = 3,
                max_words: int = 10) -> str:
    count = int(rng.integers(min_words, max_words + 1))
    return " ".join(pseudo_word(int(w)) for w in rng.integers(0, pool_size, count))


def _random_triples(rng: np.random.Generator, n_entities: int, n_relations: int,
                    total: int) -> list[tuple[int, int, int]]:
    triples: list[tuple[int, int, int]] = []
    seen: set[tuple[int, int, int]] = set()
    while len(triples) < total:
        need = total - len(triples)
        hs = rng.integers(0, n_entities, need + 16)
        rs = rng.integers(0, n_relations, need + 16)
        ts = rng.integers(0, n_entities, need + 16)
        for h, r, t in zip(hs, rs, ts):
            if h == t:
                continue
            triple = (int(h), int(r), int(t))
            if triple in seen:
                continue
            seen.add(triple)
            triples.append(triple)
            if len(triples) == total:
                break
    return triples


def generate_dataset(out_dir: str | Path, n_entities: int, n_relations: int,
                     n_train: int, n_valid: int, n_test: int, seed: int = 0,
                     style: str = "wordnet") -> Path:
    """Write a full synthetic dataset directory; returns its path.

    ``wordnet`` style emits synset-shaped entity identifiers (and the genuine
    WN18RR relation vocabulary when 11 relations are requested); ``freebase``
    emits machine-id entities with separate names and path-style relations.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    pool = max(64, n_entities // 2)

    with open(out / "entities.tsv", "w", encoding="utf-8", newline="") as fh:
        if style == "wordnet":
            for i, name in enumerate(_synset_names(n_entities)):
                fh.write(f"{i:08d}\t{name}\t{_definition(rng, pool)}\n")
        elif style == "freebase":
            for i in range(n_entities):
                name = f"{pseudo_word(i)} {pseudo_word(i + 1)}"
                fh.write(f"/m/0{np.base_repr(i, 36).lower()}\t{name}\t{_definition(rng, pool)}\n")
        else:
            raise ValueError(f"unknown synthetic style {style!r}")

    with open(out / "relations.tsv", "w", encoding="utf-8", newline="") as fh:
        if style == "wordnet" and n_relations == len(WN18RR_RELATIONS):
            names = WN18RR_RELATIONS
        elif style == "wordnet":
            names = tuple(f"_{pseudo_word(i)}_of_{pseudo_word(i + 5)}" for i in range(n_relations))
        else:
            names = tuple(
                f"/{pseudo_word(i)}/{pseudo_word(i + 3)}/{pseudo_word(2 * i + 11)}"
                for i in range(n_relations)
            )
        for name in names:
            fh.write(name + "\n")

    triples = _random_triples(rng, n_entities, n_relations, n_train + n_valid + n_test)
    entity_raw = [line.split("\t", 1)[0] for line in
                  (out / "entities.tsv").read_text(encoding="utf-8").splitlines()]
    for split_name, chunk in (
        ("train", triples[:n_train]),
        ("valid", triples[n_train:n_train + n_valid]),
        ("test", triples[n_train + n_valid:]),
    ):
        with open(out / f"{split_name}.tsv", "w", encoding="utf-8", newline="") as fh:
            for h, r, t in chunk:
                fh.write(f"{entity_raw[h]}\t{names[r]}\t{entity_raw[t]}\n")
    return out


def synthetic_catalog(seed: int, n_entities: int, l_max: int,
                      vocab_size: int) -> EntityCatalog:
    """Random entity rows for kernel benchmarks; ids avoid the reserved range."""
    if vocab_size <= 4:
        raise ValueError("vocab_size must leave room above the reserved ids")
    rng = np.random.default_rng(seed)
    lengths = rng.integers(1, l_max + 1, n_entities)
    lengths[rng.integers(0, n_entities)] = l_max  # pin the maximum
    rows = [rng.integers(4, vocab_size, int(n)).tolist() for n in lengths]
    return EntityCatalog.from_rows(rows, pad_id=3)


def random_table_values(rng: np.random.Generator, l_max: int,
                        vocab_size: int) -> np.ndarray:
    return rng.standard_normal((l_max, vocab_size)).astype(np.float32)
