"""Sparse BM25-saturated term-frequency features for the linear scorer.

Feature values are within-document saturated term frequencies,
tf / (tf + k1 * ((1 - b) + b * dl / avgdl)), stored sparsely. There is no
IDF component by default: the baseline scorer consumes raw saturation
values in (0, 1).
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse

from .corpus import Corpus

# FeatureMatrix rows are aligned to corpus document order.
FeatureMatrix = sparse.csr_matrix

_WORD_RE = re.compile(r"\w+", re.UNICODE)


def _tokenize_unicode_word(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def _tokenize_whitespace(text: str) -> list[str]:
    return text.lower().split()


_TOKENIZERS = {
    "unicode-word": _tokenize_unicode_word,
    "whitespace": _tokenize_whitespace,
}


@dataclass(frozen=True)
class VectorizerConfig:
    """Saturation and tokenization knobs.

    ``use_idf`` multiplies saturated values by a smoothed idf; it is off by
    default and the (0, 1) value-range invariant only holds when it is off.
    """

    k1: float = 1.2
    b: float = 0.75
    min_df: int = 1
    tokenizer: str = "unicode-word"
    use_idf: bool = False

    def __post_init__(self) -> None:
        if self.k1 <= 0:
            raise ValueError(f"k1 must be > 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")
        if self.min_df < 1:
            raise ValueError(f"min_df must be >= 1, got {self.min_df}")
        if self.tokenizer not in _TOKENIZERS:
            raise ValueError(f"unknown tokenizer {self.tokenizer!r}")

    def tokenize(self, text: str) -> list[str]:
        return _TOKENIZERS[self.tokenizer](text)


@dataclass(frozen=True)
class Vocabulary:
    """Term-to-column map plus the document length statistics BM25 needs."""

    term_index: dict[str, int]
    document_frequency: dict[str, int]
    document_lengths: tuple[int, ...]
    avg_doc_length: float

    def __len__(self) -> int:
        return len(self.term_index)


def build_vocabulary(corpus: Corpus, config: VectorizerConfig) -> Vocabulary:
    """Collect terms with document frequency >= min_df.

    Column indices are assigned by lexicographic term order, so the layout
    is independent of document order and hashing.
    """
    if len(corpus) == 0:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    df: Counter[str] = Counter()
    lengths: list[int] = []
    for doc in corpus:
        tokens = config.tokenize(doc.text)
        lengths.append(len(tokens))
        df.update(set(tokens))
    kept = sorted(t for t, n in df.items() if n >= config.min_df)
    term_index = {t: i for i, t in enumerate(kept)}
    avg = sum(lengths) / len(lengths)
    return Vocabulary(
        term_index=term_index,
        document_frequency={t: df[t] for t in kept},
        document_lengths=tuple(lengths),
        avg_doc_length=avg,
    )


def saturated_tf(tf: int, dl: int, avgdl: float, k1: float, b: float) -> float:
    """Within-document BM25 saturation of a raw term frequency."""
    return tf / (tf + k1 * ((1.0 - b) + b * dl / avgdl))


def _idf(n_docs: int, df: int) -> float:
    return math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))


def vectorize(corpus: Corpus, vocab: Vocabulary, config: VectorizerConfig) -> FeatureMatrix:
    """Build the sparse document-by-term matrix of saturated frequencies.

    Zero frequencies are absent, not stored; out-of-vocabulary terms are
    ignored. Row i corresponds to corpus document i.
    """
    if len(vocab.document_lengths) != len(corpus):
        raise ValueError("vocabulary was built from a corpus of different size")
    n_docs = len(corpus)
    n_terms = len(vocab)
    data: list[float] = []
    indices: list[int] = []
    indptr = [0]
    idf_by_col: dict[int, float] = {}
    if config.use_idf:
        idf_by_col = {
            col: _idf(n_docs, vocab.document_frequency[term])
            for term, col in vocab.term_index.items()
        }
    for i, doc in enumerate(corpus):
        counts = Counter(config.tokenize(doc.text))
        dl = vocab.document_lengths[i]
        cells = []
        for term, tf in counts.items():
            col = vocab.term_index.get(term)
            if col is None:
                continue
            value = saturated_tf(tf, dl, vocab.avg_doc_length, config.k1, config.b)
            if config.use_idf:
                value *= idf_by_col[col]
            cells.append((col, value))
        cells.sort()
        indices.extend(c for c, _ in cells)
        data.extend(v for _, v in cells)
        indptr.append(len(indices))
    matrix = sparse.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int32), indptr),
        shape=(n_docs, n_terms),
    )
    return matrix


def cache_key(config: VectorizerConfig, vocab: Vocabulary) -> str:
    """Hash identifying one (config, vocabulary) combination."""
    payload = json.dumps(
        {
            "k1": config.k1,
            "b": config.b,
            "min_df": config.min_df,
            "tokenizer": config.tokenizer,
            "use_idf": config.use_idf,
            "terms": sorted(vocab.term_index),
            "document_lengths": list(vocab.document_lengths),
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def save_matrix_cache(path: str | Path, matrix: FeatureMatrix, key: str) -> None:
    """Write the matrix as a header line plus row-major sparse triples.

    Format: line 1 is a JSON header {n_rows, n_cols, nnz, key}; every
    following line is ``row<TAB>col<TAB>value`` with values in shortest
    round-trip decimal form.
    """
    coo = matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    header = {
        "n_rows": int(matrix.shape[0]),
        "n_cols": int(matrix.shape[1]),
        "nnz": int(coo.nnz),
        "key": key,
    }
    with Path(path).open("w", encoding="utf-8") as handle:
        handle.write(json.dumps(header, sort_keys=True) + "\n")
        for idx in order:
            handle.write(f"{coo.row[idx]}\t{coo.col[idx]}\t{float(coo.data[idx])!r}\n")


def load_matrix_cache(path: str | Path, key: str) -> FeatureMatrix | None:
    """Read a cached matrix; returns None when absent or the key mismatches."""
    path = Path(path)
    if not path.exists():
        return None
    with path.open("r", encoding="utf-8") as handle:
        header = json.loads(handle.readline())
        if header.get("key") != key:
            return None
        rows, cols, values = [], [], []
        for line in handle:
            r, c, v = line.rstrip("\n").split("\t")
            rows.append(int(r))
            cols.append(int(c))
            values.append(float(v))
        if len(values) != header["nnz"]:
            raise ValueError(f"{path}: cache truncated ({len(values)} of {header['nnz']} entries)")
    matrix = sparse.coo_matrix(
        (values, (rows, cols)), shape=(header["n_rows"], header["n_cols"]), dtype=np.float64
    )
    return matrix.tocsr()
