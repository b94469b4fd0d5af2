import numpy as np
import pytest

from linkrank import Entity, KnowledgeGraph, Relation, Triple, vocab_from_texts


def simple_kg(n_entities, train=(), valid=(), test=(), n_relations=2,
              with_definitions=False):
    """In-memory graph with 'item <i>' entities and 'rel<k> of' relations."""
    entities = [
        Entity(i, f"E{i}", f"item {i}",
               definition=f"thing number {i}" if with_definitions else "")
        for i in range(n_entities)
    ]
    relations = [Relation(k, f"_rel{k}", f"rel{k} of") for k in range(n_relations)]
    return KnowledgeGraph(
        entities, relations,
        [Triple(*t) for t in train],
        [Triple(*t) for t in valid],
        [Triple(*t) for t in test],
    )


def vocab_for(kg):
    texts = [e.surface for e in kg.entities] + [e.definition for e in kg.entities]
    texts += [r.surface for r in kg.relations]
    return vocab_from_texts(texts)


def random_kg(rng, n_entities=None, n_relations=None, n_triples=None):
    n_entities = n_entities or int(rng.integers(4, 30))
    n_relations = n_relations or int(rng.integers(1, 4))
    n_triples = n_triples or int(rng.integers(1, 60))
    seen = set()
    triples = []
    for _ in range(n_triples):
        h, t = rng.integers(0, n_entities, 2)
        if h == t:
            continue
        tri = (int(h), int(rng.integers(0, n_relations)), int(t))
        if tri in seen:
            continue
        seen.add(tri)
        triples.append(tri)
    k = max(1, len(triples) // 3)
    return simple_kg(n_entities, train=triples[: len(triples) - 2 * k],
                     valid=triples[len(triples) - 2 * k: len(triples) - k],
                     test=triples[len(triples) - k:], n_relations=n_relations)


WORDNET_ENTITY_ROWS = [
    ("00000001", "dog.n.01", "a domesticated canid kept as a pet"),
    ("00000002", "cat.n.01", "a small feline"),
    ("00000003", "animal.n.01", "a living organism that feeds on others"),
    ("00000004", "hot_dog.n.02", "a sausage served in a bun"),
    ("00000005", "grant.n.01", "any monetary aid"),
    ("00000006", "aid.n.03", "money to support a worthy person"),
    ("00000007", "aid.n.01", "a resource"),
    ("00000008", "mediator.n.01", "a negotiator who acts as a link between parties"),
    ("00000009", "matchmaker.n.01", "someone who arranges marriages"),
    ("00000010", "canid.n.01", ""),
]

WORDNET_RELATIONS = ["_hypernym", "_member_of_domain_usage"]

# triples by row index (1-based raw ids above), written as raw ids in files
WORDNET_TRIPLES = {
    "train": [(1, 0, 3), (2, 0, 3), (1, 0, 10), (4, 0, 1), (9, 1, 8)],
    "valid": [(5, 0, 7)],
    "test": [(5, 0, 6), (9, 0, 8)],
}


def write_wordnet_dataset(path, entity_rows=None, relations=None, triples=None):
    """Write the small handmade wordnet-style dataset used across CLI tests."""
    entity_rows = entity_rows if entity_rows is not None else WORDNET_ENTITY_ROWS
    relations = relations if relations is not None else WORDNET_RELATIONS
    triples = triples if triples is not None else WORDNET_TRIPLES
    path.mkdir(parents=True, exist_ok=True)
    with open(path / "entities.tsv", "w", encoding="utf-8") as fh:
        for raw, name, definition in entity_rows:
            fh.write(f"{raw}\t{name}\t{definition}\n")
    with open(path / "relations.tsv", "w", encoding="utf-8") as fh:
        for rel in relations:
            fh.write(rel + "\n")
    raw_ids = [row[0] for row in entity_rows]
    for split, rows in triples.items():
        with open(path / f"{split}.tsv", "w", encoding="utf-8") as fh:
            for h, r, t in rows:
                fh.write(f"{raw_ids[h - 1]}\t{relations[r]}\t{raw_ids[t - 1]}\n")
    return path


@pytest.fixture
def wordnet_dataset(tmp_path):
    return write_wordnet_dataset(tmp_path / "wn")


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
