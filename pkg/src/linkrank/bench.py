"""Micro-benchmark of the post-model engine cost per query.

Measures score_entities plus rank_gold over synthetic catalogs at several
entity counts. The point of interest is the per-entity cost staying flat as
the catalog grows: the model is called once per query no matter how many
entities are ranked, and the engine's own work is a linear gather.
"""

from __future__ import annotations

import csv
import time
from pathlib import Path

import numpy as np

from .evaluation import TieBreakRng, rank_gold
from .scoring import LogitTable, score_entities
from .synth import random_table_values, synthetic_catalog

BENCH_FIELDS = (
    "n_entities", "l_max", "vocab_size", "queries", "repeats",
    "total_s", "per_query_us", "per_entity_ns",
)


def run_bench(entity_counts: list[int], n_queries: int, l_max: int = 8,
              vocab_size: int = 1024, seed: int = 0, repeats: int = 3) -> list[dict]:
    """Time the scoring and ranking kernel at each catalog size.

    Tables are pre-generated so only engine work is timed; the best of
    ``repeats`` passes is reported.
    """
    rows: list[dict] = []
    if n_queries <= 0:
        return rows
    rng = np.random.default_rng(seed)
    tiebreak = TieBreakRng(seed)
    for n_entities in entity_counts:
        catalog = synthetic_catalog(seed, n_entities, l_max, vocab_size)
        candidates = np.ones(n_entities, dtype=bool)
        tables = [LogitTable(query_id=q, values=random_table_values(rng, l_max, vocab_size))
                  for q in range(n_queries)]
        golds = rng.integers(0, n_entities, n_queries)
        best = float("inf")
        for _ in range(max(1, repeats)):
            start = time.perf_counter()
            for table, gold in zip(tables, golds):
                sv = score_entities(table, catalog)
                rank_gold(sv, candidates, int(gold), tiebreak)
            best = min(best, time.perf_counter() - start)
        rows.append({
            "n_entities": n_entities,
            "l_max": l_max,
            "vocab_size": vocab_size,
            "queries": n_queries,
            "repeats": repeats,
            "total_s": best,
            "per_query_us": 1e6 * best / n_queries,
            "per_entity_ns": 1e9 * best / (n_queries * n_entities),
        })
    return rows


def write_bench_csv(path: str | Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def format_bench_table(rows: list[dict]) -> str:
    lines = [f"{'entities':>10}  {'per-query (us)':>15}  {'per-entity (ns)':>16}"]
    for row in rows:
        lines.append(f"{row['n_entities']:>10}  {row['per_query_us']:>15.2f}  "
                     f"{row['per_entity_ns']:>16.3f}")
    return "\n".join(lines)
