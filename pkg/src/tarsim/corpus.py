"""Labeled document collections: ingestion, subsampling, and category bins.

A corpus is an ordered, immutable set of documents with per-document
category labels. Those labels double as the gold judgments for simulated
review, so correctness of the index here is load-bearing for everything
downstream.
"""

from __future__ import annotations

import json
import random
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

PREVALENCE_BINS = ("rare", "medium", "common")
DIFFICULTY_BINS = ("easy", "medium", "hard")


class CorpusError(ValueError):
    """A corpus file or operation violated the collection contract."""


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    categories: frozenset[str]

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise CorpusError("doc_id must be non-empty")


class Corpus:
    """Immutable ordered document collection with an inverted category index.

    Document order is ingestion order and is stable across save/load.
    ``category_index`` maps each category to the set of relevant doc_ids and
    is exactly the inversion of the per-document category sets.
    """

    def __init__(self, documents: Iterable[Document]):
        docs = tuple(documents)
        seen: set[str] = set()
        index: dict[str, set[str]] = {}
        for doc in docs:
            if doc.doc_id in seen:
                raise CorpusError(f"duplicate doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)
            for cat in doc.categories:
                index.setdefault(cat, set()).add(doc.doc_id)
        self._documents = docs
        self._category_index = {c: frozenset(ids) for c, ids in index.items()}
        self._doc_ids = tuple(d.doc_id for d in docs)

    @property
    def documents(self) -> tuple[Document, ...]:
        return self._documents

    @property
    def doc_ids(self) -> tuple[str, ...]:
        return self._doc_ids

    @property
    def category_index(self) -> Mapping[str, frozenset[str]]:
        return self._category_index

    def relevant_ids(self, category: str) -> frozenset[str]:
        """Gold-relevant doc_ids for a category (empty set if unknown)."""
        return self._category_index.get(category, frozenset())

    def __len__(self) -> int:
        return len(self._documents)

    def __iter__(self):
        return iter(self._documents)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Corpus):
            return NotImplemented
        return self._documents == other._documents

    def __repr__(self) -> str:
        return f"Corpus(n_docs={len(self)}, n_categories={len(self._category_index)})"


def _parse_record(line: str, lineno: int) -> Document:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise CorpusError(f"line {lineno}: not valid JSON ({exc.msg})") from exc
    if not isinstance(raw, dict):
        raise CorpusError(f"line {lineno}: record must be a JSON object")
    for field_name in ("doc_id", "text", "categories"):
        if field_name not in raw:
            raise CorpusError(f"line {lineno}: missing field {field_name!r}")
    doc_id, text, cats = raw["doc_id"], raw["text"], raw["categories"]
    if not isinstance(doc_id, str) or not doc_id:
        raise CorpusError(f"line {lineno}: doc_id must be a non-empty string")
    if not isinstance(text, str):
        raise CorpusError(f"line {lineno}: text must be a string")
    if not isinstance(cats, list) or not all(isinstance(c, str) for c in cats):
        raise CorpusError(f"line {lineno}: categories must be an array of strings")
    return Document(doc_id=doc_id, text=text, categories=frozenset(cats))


def load_corpus(path: str | Path, expected_format: str = "jsonl") -> Corpus:
    """Load a newline-delimited JSON corpus file.

    Each line is one record with ``doc_id``, ``text`` and ``categories``.
    Malformed lines and duplicate doc_ids are rejected with the offending
    line number; they are never silently skipped or deduplicated.
    """
    if expected_format != "jsonl":
        raise CorpusError(f"unsupported corpus format {expected_format!r}")
    path = Path(path)
    documents: list[Document] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            doc = _parse_record(line, lineno)
            if doc.doc_id in seen:
                raise CorpusError(f"line {lineno}: duplicate doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)
            documents.append(doc)
    return Corpus(documents)


def serialize_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus in the newline-delimited record format.

    ``load_corpus(serialize_corpus(c))`` round-trips to an equal corpus;
    categories are emitted sorted so output bytes are deterministic.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for doc in corpus:
            record = {
                "doc_id": doc.doc_id,
                "text": doc.text,
                "categories": sorted(doc.categories),
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_qrels(path: str | Path) -> dict[str, dict[str, int]]:
    """Read ``category<TAB>doc_id<TAB>{0|1}`` judgment lines."""
    qrels: dict[str, dict[str, int]] = {}
    with Path(path).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3 or parts[2] not in ("0", "1"):
                raise CorpusError(f"line {lineno}: expected 'category<TAB>doc_id<TAB>0|1'")
            category, doc_id, label = parts
            qrels.setdefault(category, {})[doc_id] = int(label)
    return qrels


def merge_qrels(corpus: Corpus, qrels: Mapping[str, Mapping[str, int]]) -> Corpus:
    """Fold explicit judgments into document category sets.

    A ``1`` judgment adds the category to the document, a ``0`` judgment
    removes it; explicit qrels win over inline labels. Judgments for
    unknown doc_ids are rejected.
    """
    known = set(corpus.doc_ids)
    for category, by_doc in qrels.items():
        missing = sorted(set(by_doc) - known)
        if missing:
            raise CorpusError(f"qrels for {category!r} name unknown doc_ids: {missing[:5]}")
    merged = []
    for doc in corpus:
        cats = set(doc.categories)
        for category, by_doc in qrels.items():
            label = by_doc.get(doc.doc_id)
            if label == 1:
                cats.add(category)
            elif label == 0:
                cats.discard(category)
        merged.append(Document(doc.doc_id, doc.text, frozenset(cats)))
    return Corpus(merged)


def downsample(corpus: Corpus, fraction: float, rng_seed: int) -> Corpus:
    """Uniform sample without replacement of ``round(fraction * N)`` documents.

    Deterministic given (corpus order, fraction, rng_seed); the relative
    order of the surviving documents is preserved.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    n = len(corpus)
    k = round(fraction * n)
    if k >= n:
        return Corpus(corpus.documents)
    rng = random.Random(rng_seed)
    keep = sorted(rng.sample(range(n), k))
    return Corpus(corpus.documents[i] for i in keep)


def category_prevalence(corpus: Corpus, category: str) -> float:
    """Fraction of the collection relevant to a category (0.0 if unknown)."""
    if len(corpus) == 0:
        return 0.0
    return len(corpus.relevant_ids(category)) / len(corpus)


@dataclass(frozen=True)
class CategoryBin:
    category: str
    prevalence_bin: str
    difficulty_bin: str


@dataclass(frozen=True)
class BinThresholds:
    """Cutoffs defining the 3x3 prevalence/difficulty grid.

    All intervals are closed on the left: a value exactly at a cutoff
    belongs to the bin whose interval starts there. Prevalence cutoffs are
    upper bounds for rare and medium. Difficulty cutoffs are on the score
    axis (higher score = easier): below ``difficulty_hard_below`` is hard,
    at or above ``difficulty_easy_at`` is easy, medium between.
    """

    difficulty_hard_below: float
    difficulty_easy_at: float
    prevalence_rare_below: float = 0.002
    prevalence_medium_below: float = 0.01

    def __post_init__(self) -> None:
        if not self.prevalence_rare_below <= self.prevalence_medium_below:
            raise ValueError("prevalence cutoffs must be non-decreasing")
        if not self.difficulty_hard_below <= self.difficulty_easy_at:
            raise ValueError("difficulty cutoffs must be non-decreasing")

    @classmethod
    def from_difficulty_terciles(
        cls,
        difficulty_scores: Iterable[float],
        prevalence_rare_below: float = 0.002,
        prevalence_medium_below: float = 0.01,
    ) -> "BinThresholds":
        """Difficulty cutoffs from score terciles over the analyzed categories."""
        scores = sorted(difficulty_scores)
        if len(scores) < 2:
            raise ValueError("need at least two difficulty scores for terciles")
        lo, hi = statistics.quantiles(scores, n=3, method="inclusive")
        return cls(lo, hi, prevalence_rare_below, prevalence_medium_below)

    def prevalence_bin(self, prevalence: float) -> str:
        if prevalence < self.prevalence_rare_below:
            return "rare"
        if prevalence < self.prevalence_medium_below:
            return "medium"
        return "common"

    def difficulty_bin(self, score: float) -> str:
        if score < self.difficulty_hard_below:
            return "hard"
        if score < self.difficulty_easy_at:
            return "medium"
        return "easy"


def assign_bins(
    categories: Sequence[str],
    prevalences: Mapping[str, float],
    difficulty_scores: Mapping[str, float],
    thresholds: BinThresholds,
) -> list[CategoryBin]:
    """Map each category to its (prevalence, difficulty) grid cell."""
    missing = [c for c in categories if c not in prevalences or c not in difficulty_scores]
    if missing:
        raise ValueError(f"categories missing prevalence or difficulty score: {missing}")
    return [
        CategoryBin(
            category=c,
            prevalence_bin=thresholds.prevalence_bin(prevalences[c]),
            difficulty_bin=thresholds.difficulty_bin(difficulty_scores[c]),
        )
        for c in categories
    ]
