"""Seed selection and per-iteration batch selection.

Two strategies: relevance feedback takes the highest-scored unlabeled
documents; least-confidence uncertainty sampling takes those with
predicted probability nearest 0.5. Ties break by ascending doc_id so runs
are reproducible.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .classifier import LabeledSet
from .corpus import Corpus

STRATEGY_KINDS = ("relevance", "uncertainty")


class CategoryEmptyError(ValueError):
    """The category has no relevant documents to seed from."""


class CorpusExhausted(Exception):
    """No unlabeled documents remain; the run should stop early."""


@dataclass(frozen=True)
class SamplingStrategy:
    kind: str
    batch_size: int = 200

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


def select_seed(corpus: Corpus, category: str, rng_seed: int) -> str:
    """Uniformly pick one relevant document to start the run."""
    relevant = sorted(corpus.relevant_ids(category))
    if not relevant:
        raise CategoryEmptyError(f"category {category!r} has no relevant documents")
    return random.Random(rng_seed).choice(relevant)


def select_batch(
    scores: np.ndarray,
    labeled: LabeledSet,
    strategy: SamplingStrategy,
    doc_ids: Sequence[str],
) -> list[str]:
    """Pick the next review batch from the unlabeled pool.

    Returns min(batch_size, #unlabeled) doc_ids in selection-priority
    order, disjoint from the labeled set. Raises CorpusExhausted when no
    unlabeled documents remain.
    """
    if len(scores) != len(doc_ids):
        raise ValueError(f"{len(scores)} scores for {len(doc_ids)} documents")
    labeled_ids = labeled.doc_ids
    unlabeled = [i for i, doc_id in enumerate(doc_ids) if doc_id not in labeled_ids]
    if not unlabeled:
        raise CorpusExhausted("all documents are labeled")
    if strategy.kind == "relevance":
        key = lambda i: (-scores[i], doc_ids[i])
    else:
        key = lambda i: (abs(scores[i] - 0.5), doc_ids[i])
    unlabeled.sort(key=key)
    return [doc_ids[i] for i in unlabeled[: strategy.batch_size]]
