"""High-recall-retrieval evaluation under explicit review cost structures.

The central quantity is the two-phase total cost of a run state: the cost
of the documents reviewed for training plus the cost of the minimum number
of top-ranked unreviewed documents needed to reach the recall target.
Rankings break ties by ascending doc_id everywhere.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import betainc

from .classifier import LabeledSet


class UndefinedMetricError(ValueError):
    """The metric is undefined for this input (e.g. no relevant documents)."""


class DegenerateTestError(ValueError):
    """The statistical test is degenerate (zero-variance differences)."""


@dataclass(frozen=True)
class CostStructure:
    """Per-document review costs: training phase and mass-review phase,
    split by gold label."""

    train_pos: float
    train_neg: float
    review_pos: float
    review_neg: float
    name: str = ""

    def __post_init__(self) -> None:
        for value in (self.train_pos, self.train_neg, self.review_pos, self.review_neg):
            if value < 0:
                raise ValueError("cost components must be >= 0")

    @classmethod
    def uniform(cls) -> "CostStructure":
        return cls(1.0, 1.0, 1.0, 1.0, name="uniform")

    @classmethod
    def expensive_training(cls) -> "CostStructure":
        return cls(10.0, 10.0, 1.0, 1.0, name="expensive")

    @property
    def key(self) -> str:
        return self.name or f"{self.train_pos:g}:{self.train_neg:g}:{self.review_pos:g}:{self.review_neg:g}"


UNIFORM = CostStructure.uniform()
EXPENSIVE_TRAINING = CostStructure.expensive_training()


@dataclass(frozen=True)
class RunState:
    """One evaluable moment of a run: who is labeled, how everything scores."""

    doc_ids: tuple[str, ...]
    scores: np.ndarray
    labeled: LabeledSet
    qrels: frozenset[str]
    recall_target: float = 0.8

    def __post_init__(self) -> None:
        if not 0.0 < self.recall_target <= 1.0:
            raise ValueError(f"recall_target must be in (0, 1], got {self.recall_target}")
        if len(self.scores) != len(self.doc_ids):
            raise ValueError("scores are not aligned to doc_ids")
        known = set(self.doc_ids)
        stray = [e.doc_id for e in self.labeled if e.doc_id not in known]
        if stray:
            raise ValueError(f"labeled documents not in the collection: {stray[:5]}")


def rank_documents(scores: np.ndarray, doc_ids: Sequence[str]) -> list[str]:
    """Full-collection ranking: descending score, ties by ascending doc_id."""
    if len(scores) != len(doc_ids):
        raise ValueError(f"{len(scores)} scores for {len(doc_ids)} documents")
    order = sorted(range(len(doc_ids)), key=lambda i: (-scores[i], doc_ids[i]))
    return [doc_ids[i] for i in order]


def r_precision(scores: np.ndarray, doc_ids: Sequence[str], qrels: frozenset[str]) -> float:
    """Precision within the top R ranked documents, R = |qrels|."""
    r = len(qrels)
    if r == 0:
        raise UndefinedMetricError("R-Precision undefined with zero relevant documents")
    ranked = rank_documents(scores, doc_ids)
    hits = sum(1 for doc_id in ranked[:r] if doc_id in qrels)
    return hits / r


def dfr(ranked_doc_ids: Sequence[str], qrels: frozenset[str], target: float) -> float:
    """Depth for recall: fraction of the collection reviewed, in ranked
    order, before recall reaches the target."""
    r = len(qrels)
    if r == 0:
        raise UndefinedMetricError("DFR undefined with zero relevant documents")
    if not 0.0 < target <= 1.0:
        raise ValueError(f"target must be in (0, 1], got {target}")
    n = len(ranked_doc_ids)
    found = 0
    for depth, doc_id in enumerate(ranked_doc_ids, start=1):
        if doc_id in qrels:
            found += 1
            if found / r >= target:
                return depth / n
    raise UndefinedMetricError("qrels contain documents outside the ranking")


def wss(dfr_value: float, target: float) -> float:
    """Work saved over sampling: target - DFR@target, exactly."""
    return target - dfr_value


def _second_phase_ranking(state: RunState) -> list[str]:
    labeled_ids = state.labeled.doc_ids
    unlabeled = [i for i, doc_id in enumerate(state.doc_ids) if doc_id not in labeled_ids]
    unlabeled.sort(key=lambda i: (-state.scores[i], state.doc_ids[i]))
    return [state.doc_ids[i] for i in unlabeled]


def optimal_second_phase_depth(state: RunState) -> int:
    """Minimum number of top-ranked unreviewed documents whose review,
    together with the already-labeled relevant documents, meets the recall
    target. Zero when the labeled set alone reaches it."""
    r = len(state.qrels)
    if r == 0:
        raise UndefinedMetricError("recall target undefined with zero relevant documents")
    found = sum(1 for e in state.labeled if e.doc_id in state.qrels)
    if found / r >= state.recall_target:
        return 0
    for depth, doc_id in enumerate(_second_phase_ranking(state), start=1):
        if doc_id in state.qrels:
            found += 1
            if found / r >= state.recall_target:
                return depth
    raise UndefinedMetricError("recall target unreachable: qrels missing from the collection")


def phase_counts(state: RunState) -> tuple[int, int, int, int]:
    """Document counts multiplying each cost component:
    (train_pos, train_neg, second_phase_pos, second_phase_neg)."""
    train_pos = sum(1 for e in state.labeled if e.doc_id in state.qrels)
    train_neg = len(state.labeled) - train_pos
    depth = optimal_second_phase_depth(state)
    phase2 = _second_phase_ranking(state)[:depth]
    review_pos = sum(1 for doc_id in phase2 if doc_id in state.qrels)
    review_neg = depth - review_pos
    return train_pos, train_neg, review_pos, review_neg


def cost_from_counts(counts: tuple[int, int, int, int], cs: CostStructure) -> float:
    """Total cost as the dot product of phase counts and cost components."""
    n_tp, n_tn, n_rp, n_rn = counts
    return (
        cs.train_pos * n_tp
        + cs.train_neg * n_tn
        + cs.review_pos * n_rp
        + cs.review_neg * n_rn
    )


def total_cost(state: RunState, cs: CostStructure) -> float:
    """Two-phase total review cost under one cost structure."""
    return cost_from_counts(phase_counts(state), cs)


def min_cost_over_run(costs: Iterable[tuple[int, float]]) -> tuple[int, float]:
    """Earliest iteration achieving the minimum cost, as (iteration, cost)."""
    best: tuple[int, float] | None = None
    for iteration, cost in costs:
        if best is None or cost < best[1]:
            best = (iteration, cost)
    if best is None:
        raise ValueError("no iteration records to minimize over")
    return best


def relative_cost(cost_run: float, cost_baseline: float) -> float:
    """Cost ratio against a baseline; 1.0 is parity, below 1.0 is savings."""
    if cost_baseline <= 0:
        raise ValueError(f"baseline cost must be > 0, got {cost_baseline}")
    return cost_run / cost_baseline


def aggregate_relative_costs(ratios: Sequence[float]) -> float:
    """Macro-average of per-category cost ratios.

    Averaging ratios rather than raw costs keeps naturally harder (more
    expensive) categories from dominating the aggregate.
    """
    if len(ratios) == 0:
        raise ValueError("no ratios to aggregate")
    return float(np.mean(ratios))


@dataclass(frozen=True)
class TTestResult:
    t: float
    p: float
    df: int


def paired_t_test(costs_a: Sequence[float], costs_b: Sequence[float]) -> TTestResult:
    """Two-sided paired Student t-test on per-category differences.

    The p-value comes from the t cumulative distribution evaluated through
    the regularized incomplete beta function with df = n - 1.
    """
    if len(costs_a) != len(costs_b):
        raise ValueError(f"length mismatch: {len(costs_a)} vs {len(costs_b)}")
    if len(costs_a) < 2:
        raise ValueError("need at least two pairs")
    diff = np.asarray(costs_a, dtype=np.float64) - np.asarray(costs_b, dtype=np.float64)
    sd = diff.std(ddof=1)
    if sd == 0.0:
        raise DegenerateTestError("zero-variance differences")
    n = len(diff)
    t = float(diff.mean() / (sd / math.sqrt(n)))
    df = n - 1
    p = float(betainc(df / 2.0, 0.5, df / (df + t * t)))
    return TTestResult(t=t, p=p, df=df)


# --------------------------------------------------------------------------
# Metrics report files: one JSON record per (category, iteration). This
# field set is the compatibility contract for the aggregate command.

REPORT_FIELDS = (
    "category",
    "iteration",
    "n_labeled",
    "n_labeled_pos",
    "r_precision",
    "d_star",
    "cost_uniform",
    "cost_expensive",
    "dfr",
    "wss",
)


def write_report(records: Iterable[Mapping[str, object]], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for record in records:
            missing = [f for f in REPORT_FIELDS if f not in record]
            if missing:
                raise ValueError(f"report record missing fields: {missing}")
            row = {f: record[f] for f in REPORT_FIELDS}
            handle.write(json.dumps(row, sort_keys=True) + "\n")


def read_report(path: str | Path) -> list[dict]:
    records = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            missing = [f for f in REPORT_FIELDS if f not in record]
            if missing:
                raise ValueError(f"{path} line {lineno}: missing fields {missing}")
            records.append(record)
    return records
