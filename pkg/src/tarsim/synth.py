"""Deterministic synthetic labeled corpora for desk-scale experiments.

Each category plants a marker token in its positive documents. The noise
knob controls signal-to-noise: with noise q, a positive document carries
the marker with probability 1 - q and a negative document carries it with
probability q. At q = 0 the positives are perfectly separable by the
marker; at q = 0.5 the marker is uninformative.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import Corpus, Document


@dataclass(frozen=True)
class SynthCategorySpec:
    name: str
    prevalence: float
    noise: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.prevalence <= 1.0:
            raise ValueError(f"prevalence must be in (0, 1], got {self.prevalence}")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError(f"noise must be in [0, 1], got {self.noise}")

    @property
    def marker(self) -> str:
        return f"marker{self.name}"


@dataclass(frozen=True)
class SynthSpec:
    n_docs: int
    categories: tuple[SynthCategorySpec, ...]
    vocab_size: int = 500
    doc_length: int = 30

    def __post_init__(self) -> None:
        if self.n_docs < 1:
            raise ValueError("n_docs must be >= 1")
        if not self.categories:
            raise ValueError("need at least one category")
        if self.vocab_size < 2 or self.doc_length < 2:
            raise ValueError("vocab_size and doc_length must be >= 2")
        for cat in self.categories:
            if round(cat.prevalence * self.n_docs) < 1:
                raise ValueError(
                    f"category {cat.name!r}: prevalence {cat.prevalence} yields "
                    f"no positive documents at n_docs={self.n_docs}"
                )

    @classmethod
    def from_json(cls, data: Mapping) -> "SynthSpec":
        return cls(
            n_docs=data["n_docs"],
            categories=tuple(
                SynthCategorySpec(
                    name=c["name"],
                    prevalence=c["prevalence"],
                    noise=c.get("noise", 0.0),
                )
                for c in data["categories"]
            ),
            vocab_size=data.get("vocab_size", 500),
            doc_length=data.get("doc_length", 30),
        )


def generate_corpus(spec: SynthSpec, rng_seed: int) -> Corpus:
    """Build the corpus; prevalence is realized exactly as round(N * p)."""
    rng = random.Random(rng_seed)
    vocab = [f"w{i:04d}" for i in range(spec.vocab_size)]
    id_width = max(5, len(str(spec.n_docs - 1)))

    token_lists: list[list[str]] = []
    for _ in range(spec.n_docs):
        length = rng.randint(max(2, spec.doc_length // 2), spec.doc_length * 3 // 2)
        token_lists.append(rng.choices(vocab, k=length))

    labels: list[set[str]] = [set() for _ in range(spec.n_docs)]
    for cat in spec.categories:
        n_pos = round(cat.prevalence * spec.n_docs)
        positives = set(rng.sample(range(spec.n_docs), n_pos))
        for i in range(spec.n_docs):
            is_pos = i in positives
            if is_pos:
                labels[i].add(cat.name)
            has_marker = rng.random() >= cat.noise if is_pos else rng.random() < cat.noise
            if has_marker:
                tokens = token_lists[i]
                for _ in range(2):
                    tokens.insert(rng.randrange(len(tokens) + 1), cat.marker)

    documents = [
        Document(
            doc_id=f"d{i:0{id_width}d}",
            text=" ".join(token_lists[i]),
            categories=frozenset(labels[i]),
        )
        for i in range(spec.n_docs)
    ]
    return Corpus(documents)
