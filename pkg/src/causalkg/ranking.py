"""Filtered link-prediction ranking and metrics.

Two query tasks share one machinery: causal prediction ranks candidate
effect types for a cause anchor (causesType queries), and causal
explanation ranks candidate cause types for an effect anchor
(causedByType queries). Every candidate tail is scored, known-true
competitors are filtered out, and the gold rank feeds MRR and Hits@k.
Ties resolve to the mean of the optimistic and pessimistic rank,
rounded half-up.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .errors import EvalError
from .kg import (
    CAUSED_BY_TYPE,
    CAUSES_TYPE,
    KgSplit,
    KnowledgeGraph,
)
from .vocab import Vocabulary

TASKS = ("prediction", "explanation")
TASK_RELATIONS = {"prediction": CAUSES_TYPE, "explanation": CAUSED_BY_TYPE}

FILTER_MODES = ("standard", "paper-literal")
CANDIDATE_MODES = ("all", "types")

THREADS_ENV = "CAUSALKG_THREADS"
_CHUNK = 256


@dataclass(frozen=True)
class Query:
    """One ranking question: which tail completes (anchor, relation, Q)?

    ``task`` is "prediction" (relation causesType, gold is an effect
    type) or "explanation" (relation causedByType, gold is a cause
    type). Qualifiers ride along so mediator context reaches
    qualifier-aware scorers.
    """

    task: str
    anchor: str
    relation: str
    gold: str
    qualifiers: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.task not in TASKS:
            raise EvalError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.relation != TASK_RELATIONS[self.task]:
            raise EvalError(
                f"{self.task} queries use {TASK_RELATIONS[self.task]!r}, "
                f"got {self.relation!r}"
            )
        object.__setattr__(
            self, "qualifiers", tuple(sorted(set(self.qualifiers)))
        )

    def sort_key(self):
        return (self.task, self.anchor, self.relation, self.gold, self.qualifiers)


class Scorer(Protocol):
    def score_batch(
        self, queries: Sequence[Query], candidate_ids: np.ndarray
    ) -> np.ndarray:
        """(n_queries, n_candidates) matrix, higher = more plausible."""
        ...


@dataclass(frozen=True)
class EvalConfig:
    """How to filter and which pool of candidate tails to rank.

    ``standard`` filtering removes true tails recorded anywhere (train,
    valid, or test, minus the gold itself); ``paper-literal`` removes
    only train and valid tails, leaving test-set competitors in place.
    Candidates are either every entity or only type entities.
    """

    filter_mode: str = "standard"
    candidates: str = "all"
    ks: tuple[int, ...] = (1, 3, 10)

    def __post_init__(self):
        if self.filter_mode not in FILTER_MODES:
            raise EvalError(f"filter mode must be one of {FILTER_MODES}")
        if self.candidates not in CANDIDATE_MODES:
            raise EvalError(f"candidate mode must be one of {CANDIDATE_MODES}")
        if not self.ks or any(k < 1 for k in self.ks):
            raise EvalError(f"hits cutoffs must be positive, got {self.ks}")

    def to_dict(self) -> dict:
        return {
            "filter_mode": self.filter_mode,
            "candidates": self.candidates,
            "ks": list(self.ks),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalConfig":
        return cls(
            filter_mode=data["filter_mode"],
            candidates=data["candidates"],
            ks=tuple(data["ks"]),
        )


def tie_aware_rank(g_greater: int, t_ties: int) -> int:
    """Mean of optimistic (g+1) and pessimistic (g+t+1) ranks, half-up."""
    return math.floor(g_greater + 1 + t_ties / 2 + 0.5)


def rank_from_scores(
    scores: np.ndarray, gold_pos: int, filtered_positions: np.ndarray
) -> int:
    """Rank of the gold candidate after masking known-true competitors.

    ``filtered_positions`` indexes candidates to exclude; the gold
    position must not be among them.
    """
    if gold_pos in filtered_positions:
        raise EvalError("gold candidate is filtered out of its own query")
    gold_score = scores[gold_pos]
    if not np.isfinite(gold_score):
        raise EvalError("non-finite gold score")
    keep = np.ones(len(scores), dtype=bool)
    keep[filtered_positions] = False
    keep[gold_pos] = False
    rivals = scores[keep]
    g = int((rivals > gold_score).sum())
    t = int((rivals == gold_score).sum())
    return tie_aware_rank(g, t)


def build_queries(kg: KnowledgeGraph, task: str = "both") -> list[Query]:
    """Turn the graph's reified type links into ranking queries.

    ``task`` is "prediction", "explanation", or "both"; the result is
    canonically sorted, so downstream evaluation order is deterministic.
    """
    if task == "both":
        tasks = TASKS
    elif task in TASKS:
        tasks = (task,)
    else:
        raise EvalError(f"task must be one of {TASKS + ('both',)}, got {task!r}")
    by_relation = {TASK_RELATIONS[t]: t for t in tasks}
    queries = [
        Query(
            task=by_relation[link.relation],
            anchor=link.head,
            relation=link.relation,
            gold=link.tail,
            qualifiers=link.qualifiers,
        )
        for link in kg.qlinks
        if link.relation in by_relation
    ]
    return sorted(queries, key=Query.sort_key)


def _filter_graphs(split: KgSplit, filter_mode: str) -> list[KnowledgeGraph]:
    if filter_mode == "standard":
        return [split.train, split.valid, split.test]
    if filter_mode == "paper-literal":
        return [split.train, split.valid]
    raise EvalError(f"filter mode must be one of {FILTER_MODES}")


def _filter_index(graphs: Sequence[KnowledgeGraph]) -> dict[tuple, set[str]]:
    wanted = set(TASK_RELATIONS.values())
    index: dict[tuple, set[str]] = {}
    for kg in graphs:
        for link in kg.qlinks:
            if link.relation in wanted:
                key = (link.head, link.relation, link.qualifiers)
                index.setdefault(key, set()).add(link.tail)
    return index


def candidate_pool(
    split: KgSplit, vocab: Vocabulary, candidates: str
) -> list[str]:
    """Entity names eligible as tails, in a fixed deterministic order."""
    if candidates == "types":
        names = sorted(
            set().union(*(kg.type_entities for kg in _filter_graphs(split, "standard")))
        )
        if not names:
            raise EvalError("no type entities available as candidates")
        return names
    return list(vocab.entities)


@dataclass
class MetricsReport:
    """Aggregate ranking quality plus the raw ranks it was computed from."""

    task: str
    mrr: float
    hits: dict[int, float]
    n_queries: int
    filter_mode: str
    candidates: str
    ranks: list[int] = field(default_factory=list)
    per_task: dict[str, dict] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "mrr": self.mrr,
            "hits": {str(k): v for k, v in sorted(self.hits.items())},
            "n_queries": self.n_queries,
            "filter_mode": self.filter_mode,
            "candidates": self.candidates,
            "ranks": list(self.ranks),
            "per_task": {
                t: dict(stats) for t, stats in sorted(self.per_task.items())
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        return cls(
            task=data["task"],
            mrr=data["mrr"],
            hits={int(k): v for k, v in data["hits"].items()},
            n_queries=data["n_queries"],
            filter_mode=data["filter_mode"],
            candidates=data["candidates"],
            ranks=list(data.get("ranks", [])),
            per_task=data.get("per_task", {}),
        )


def metrics_from_ranks(ranks: Sequence[int], ks: Sequence[int]) -> tuple[float, dict]:
    arr = np.asarray(ranks, dtype=np.float64)
    mrr = float(np.mean(1.0 / arr))
    hits = {int(k): float(np.mean(arr <= k)) for k in ks}
    return mrr, hits


def eval_workers() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise EvalError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def _gold_and_filtered(
    query: Query,
    known: dict[tuple, set[str]],
    position: dict[str, int],
) -> tuple[int, np.ndarray]:
    if query.gold not in position:
        raise EvalError(f"gold tail {query.gold!r} is outside the candidate pool")
    gold_pos = position[query.gold]
    truths = known.get((query.anchor, query.relation, query.qualifiers), set())
    filtered = np.array(
        sorted(position[t] for t in truths if t != query.gold and t in position),
        dtype=np.int64,
    )
    return gold_pos, filtered


def filtered_rank(
    scorer: Scorer,
    query: Query,
    split: KgSplit,
    vocab: Vocabulary,
    config: EvalConfig = EvalConfig(),
) -> int:
    """Filtered rank of one query's gold tail. Single-query reference
    path; ``evaluate`` must agree with it on every query."""
    known = _filter_index(_filter_graphs(split, config.filter_mode))
    names = candidate_pool(split, vocab, config.candidates)
    candidate_ids = vocab.entity_ids(names)
    position = {name: i for i, name in enumerate(names)}
    gold_pos, filtered = _gold_and_filtered(query, known, position)
    scores = scorer.score_batch([query], candidate_ids)[0]
    return rank_from_scores(scores, gold_pos, filtered)


def evaluate(
    scorer: Scorer,
    queries: Sequence[Query],
    split: KgSplit,
    vocab: Vocabulary,
    config: EvalConfig = EvalConfig(),
) -> MetricsReport:
    """Rank every query and aggregate MRR / Hits@k.

    Deterministic given the scorer: queries are processed in the given
    order and the thread pool (capped by CAUSALKG_THREADS) only
    parallelizes score computation, not the rank bookkeeping. The
    report keeps per-query ranks aligned with the query order.
    """
    queries = list(queries)
    if not queries:
        raise EvalError("no queries to evaluate")
    known = _filter_index(_filter_graphs(split, config.filter_mode))
    names = candidate_pool(split, vocab, config.candidates)
    candidate_ids = vocab.entity_ids(names)
    position = {name: i for i, name in enumerate(names)}

    chunks = [queries[i : i + _CHUNK] for i in range(0, len(queries), _CHUNK)]
    workers = eval_workers()
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            score_blocks = list(
                pool.map(lambda c: scorer.score_batch(c, candidate_ids), chunks)
            )
    else:
        score_blocks = [scorer.score_batch(c, candidate_ids) for c in chunks]

    ranks: list[int] = []
    by_task: dict[str, list[int]] = {}
    for chunk, block in zip(chunks, score_blocks):
        for row, query in enumerate(chunk):
            gold_pos, filtered = _gold_and_filtered(query, known, position)
            rank = rank_from_scores(block[row], gold_pos, filtered)
            ranks.append(rank)
            by_task.setdefault(query.task, []).append(rank)

    mrr, hits = metrics_from_ranks(ranks, config.ks)
    per_task = {}
    for task, task_ranks in by_task.items():
        task_mrr, task_hits = metrics_from_ranks(task_ranks, config.ks)
        per_task[task] = {
            "mrr": task_mrr,
            "hits": {str(k): v for k, v in sorted(task_hits.items())},
            "n_queries": len(task_ranks),
        }
    task_label = (
        next(iter(by_task)) if len(by_task) == 1 else "both"
    )
    return MetricsReport(
        task=task_label,
        mrr=mrr,
        hits=hits,
        n_queries=len(ranks),
        filter_mode=config.filter_mode,
        candidates=config.candidates,
        ranks=ranks,
        per_task=per_task,
    )
