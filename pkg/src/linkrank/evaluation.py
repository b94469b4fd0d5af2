"""Filtered ranking with randomized tie-breaking, and metric aggregation.

The gold entity's rank counts candidates that strictly beat it, then adds a
uniform draw over the candidates it ties with, so a degenerate model that
scores everything equally lands at the uniform-random baseline instead of an
artificial rank 1. Candidate sets follow the filtered convention: every other
completion known from any split is removed before ranking.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EvaluationError
from .kg import KnowledgeGraph
from .prompts import PREDICT_TAIL, Query
from .scoring import LogitTable, ScoreVector, score_entities
from .tokenizer import EntityCatalog

METRIC_NAMES = ("mrr", "mr", "mp@1", "mp@3", "mp@10")


class TieBreakRng:
    """Per-query random streams derived from (global seed, query id).

    Each query gets its own counter-based stream, so tie-break outcomes do not
    depend on evaluation order or parallel layout.
    """

    def __init__(self, seed: int):
        if not 0 <= seed < 2 ** 64:
            raise EvaluationError(f"seed {seed} outside the unsigned 64-bit range")
        self.seed = int(seed)

    def stream(self, query_id: int) -> np.random.Generator:
        key = np.array([self.seed, query_id], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class RankResult:
    query_id: int
    gold: int
    rank: int
    candidate_count: int


@dataclass(frozen=True)
class EvalReport:
    seeds: tuple[int, ...]
    query_count: int
    per_seed: dict[int, dict[str, float]]
    mean: dict[str, float]
    std: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "seeds": list(self.seeds),
            "query_count": self.query_count,
            "per_seed": {str(s): m for s, m in self.per_seed.items()},
            "mean": self.mean,
            "std": self.std,
        }


def filtered_candidates(kg: KnowledgeGraph, query: Query) -> np.ndarray:
    """Boolean candidate mask over all entities for one query.

    Removes every entity that, substituted on the queried side, forms a triple
    known from any split; the gold entity is always kept.
    """
    mask = np.ones(kg.n_entities, dtype=bool)
    t = query.triple
    if query.direction == PREDICT_TAIL:
        mask[kg.known_tails(t.head, t.rel)] = False
    else:
        mask[kg.known_heads(t.rel, t.tail)] = False
    mask[query.gold] = True
    return mask


def rank_gold(scores: ScoreVector, candidates: np.ndarray, gold: int,
              tiebreak: TieBreakRng) -> RankResult:
    """Rank of the gold entity among the candidates.

    rank = 1 + |{strictly better}| + u with u uniform over {0, ..., ties},
    where ties counts candidates whose 64-bit score equals the gold's exactly.
    """
    if not candidates[gold]:
        raise ValueError(f"gold entity {gold} missing from candidate set (filtering bug)")
    values = scores.scores
    g = values[gold]
    greater = int(np.count_nonzero(candidates & (values > g)))
    ties = int(np.count_nonzero(candidates & (values == g))) - 1
    u = int(tiebreak.stream(scores.query_id).integers(0, ties + 1)) if ties else 0
    return RankResult(
        query_id=scores.query_id,
        gold=gold,
        rank=1 + greater + u,
        candidate_count=int(np.count_nonzero(candidates)),
    )


def compute_metrics(results: Sequence[RankResult]) -> dict[str, float]:
    """MRR, MR, and MP@{1,3,10} over one seed's rank results."""
    if not results:
        raise EvaluationError("no rank results to aggregate")
    ranks = np.array([r.rank for r in results], dtype=np.float64)
    return {
        "mrr": float(np.mean(1.0 / ranks)),
        "mr": float(np.mean(ranks)),
        "mp@1": float(np.mean(ranks <= 1)),
        "mp@3": float(np.mean(ranks <= 3)),
        "mp@10": float(np.mean(ranks <= 10)),
    }


def aggregate_seeds(per_seed: dict[int, dict[str, float]], query_count: int) -> EvalReport:
    """Mean and population standard deviation of each metric across seeds."""
    if not per_seed:
        raise EvaluationError("no per-seed metrics to aggregate")
    mean: dict[str, float] = {}
    std: dict[str, float] = {}
    for name in METRIC_NAMES:
        values = np.array([m[name] for m in per_seed.values()], dtype=np.float64)
        mean[name] = float(values.mean())
        std[name] = float(values.std(ddof=0))
    return EvalReport(
        seeds=tuple(per_seed),
        query_count=query_count,
        per_seed=dict(per_seed),
        mean=mean,
        std=std,
    )


@dataclass
class TopkEntry:
    """Per-query inspection record for the ranked dump."""

    query: Query
    gold_rank: int
    candidate_count: int
    entity_ids: list[int]
    entity_scores: list[float]


@dataclass
class EvaluationRun:
    report: EvalReport
    results: dict[int, list[RankResult]]
    topk: list[TopkEntry] = field(default_factory=list)


def _topk_of(scores: ScoreVector, candidates: np.ndarray, k: int,
             rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    ids = np.flatnonzero(candidates)
    values = scores.scores[ids]
    noise = rng.random(ids.size)
    order = np.lexsort((noise, -values))[: min(k, ids.size)]
    return ids[order], values[order]


def evaluate_queries(kg: KnowledgeGraph, catalog: EntityCatalog,
                     queries: Sequence[Query], tables: Iterable[LogitTable],
                     seeds: Sequence[int], topk: int = 0) -> EvaluationRun:
    """Score, filter, and rank every query under each seed.

    ``tables`` may arrive in any order; every query must be covered exactly
    once. Tables for unknown query ids are ignored. With ``topk`` > 0 each
    query also records its top-k candidates, ordered by score with the first
    seed's stream breaking ties (a full-permutation view of the same ranking
    the rank results sample).
    """
    if not seeds:
        raise EvaluationError("at least one seed is required")
    by_id = {q.query_id: q for q in queries}
    tiebreaks = {s: TieBreakRng(s) for s in seeds}
    results: dict[int, dict[int, RankResult]] = {s: {} for s in seeds}
    topk_by_id: dict[int, TopkEntry] = {}
    covered: set[int] = set()

    for table in tables:
        query = by_id.get(table.query_id)
        if query is None:
            continue
        if table.query_id in covered:
            raise EvaluationError(f"duplicate logit table for query {table.query_id}")
        covered.add(table.query_id)
        sv = score_entities(table, catalog)
        candidates = filtered_candidates(kg, query)
        for s in seeds:
            results[s][query.query_id] = rank_gold(sv, candidates, query.gold, tiebreaks[s])
        if topk > 0:
            ids, values = _topk_of(sv, candidates, topk,
                                   tiebreaks[seeds[0]].stream(query.query_id))
            first = results[seeds[0]][query.query_id]
            topk_by_id[query.query_id] = TopkEntry(
                query=query,
                gold_rank=first.rank,
                candidate_count=first.candidate_count,
                entity_ids=[int(i) for i in ids],
                entity_scores=[float(v) for v in values],
            )

    missing = len(by_id) - len(covered)
    if missing:
        raise EvaluationError(f"{missing} of {len(by_id)} queries have no logit table")

    ordered = {s: [results[s][q.query_id] for q in queries] for s in seeds}
    per_seed = {s: compute_metrics(ordered[s]) for s in seeds}
    report = aggregate_seeds(per_seed, query_count=len(queries))
    return EvaluationRun(
        report=report,
        results=ordered,
        topk=[topk_by_id[q.query_id] for q in queries if q.query_id in topk_by_id],
    )


def write_ranks_csv(path: str | Path, results: Sequence[RankResult]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_id", "gold", "rank", "candidate_count"])
        for r in results:
            writer.writerow([r.query_id, r.gold, r.rank, r.candidate_count])
