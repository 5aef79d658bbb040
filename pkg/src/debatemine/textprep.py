"""Tokenization, vocabulary/document-term index, and window co-occurrence.

The co-occurrence statistics feed the coherence metrics; counting itself is
delegated to the kernels package (compiled when available).
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import kernels
from .errors import EmptyVocabulary

_WORD_RE = re.compile(r"\w+", re.UNICODE)
_PARA_RE = re.compile(r"\n\s*\n")


def default_stopwords() -> frozenset[str]:
    text = resources.files("debatemine.data").joinpath("stopwords_en.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def load_stopwords(path: str | Path) -> frozenset[str]:
    """One token per line, UTF-8."""
    with open(path, encoding="utf-8") as fh:
        return frozenset(line.strip() for line in fh if line.strip())


@dataclass(frozen=True)
class PrepConfig:
    lowercase: bool = True
    min_token_len: int = 3
    stopwords: frozenset[str] = field(default_factory=default_stopwords)
    extra_stopwords: frozenset[str] = frozenset()
    min_df: int = 5
    max_df_ratio: float = 0.5
    window: int = 110
    paragraph_split: bool = False

    def all_stopwords(self) -> frozenset[str]:
        return self.stopwords | self.extra_stopwords


def tokenize(text: str, cfg: PrepConfig) -> list[str]:
    """Deterministic token stream: Unicode word segmentation, lowercased,
    short / stopword / pure-digit tokens dropped."""
    stop = cfg.all_stopwords()
    out = []
    for m in _WORD_RE.finditer(text):
        tok = m.group(0)
        if cfg.lowercase:
            tok = tok.lower()
        if len(tok) < cfg.min_token_len:
            continue
        if tok.isdigit():
            continue
        if tok in stop:
            continue
        out.append(tok)
    return out


def split_paragraphs(text: str) -> list[str]:
    return [p for p in (s.strip() for s in _PARA_RE.split(text)) if p]


def tokenize_speeches(speeches, cfg: PrepConfig) -> list[list[str]]:
    """Tokenize one document per speech (or per paragraph when the config
    asks for paragraph granularity) and fill in token counts."""
    docs: list[list[str]] = []
    for s in speeches:
        base = getattr(s, "base", s)
        if cfg.paragraph_split:
            paras = [tokenize(p, cfg) for p in split_paragraphs(base.text)]
            base.token_count = sum(len(p) for p in paras)
            docs.extend(p for p in paras if p)
        else:
            toks = tokenize(base.text, cfg)
            base.token_count = len(toks)
            docs.append(toks)
    return docs


@dataclass
class Vocabulary:
    terms: list[str]
    index: dict[str, int]
    doc_freq: np.ndarray
    total_tokens: int

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self.index

    def export_tsv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("term\tid\tdoc_freq\n")
            for i, t in enumerate(self.terms):
                fh.write(f"{t}\t{i}\t{int(self.doc_freq[i])}\n")


@dataclass
class DocTermMatrix:
    """CSR-style sparse counts; within each row term ids are ascending."""

    docs: int
    indptr: np.ndarray
    indices: np.ndarray
    counts: np.ndarray

    def row(self, d: int) -> dict[int, int]:
        lo, hi = self.indptr[d], self.indptr[d + 1]
        return {int(t): int(c) for t, c in zip(self.indices[lo:hi], self.counts[lo:hi])}

    def doc_token_count(self, d: int) -> int:
        lo, hi = self.indptr[d], self.indptr[d + 1]
        return int(self.counts[lo:hi].sum())

    @property
    def total_count(self) -> int:
        return int(self.counts.sum())


def index_tokenized(tokenized: list[list[str]], cfg: PrepConfig) -> tuple[Vocabulary, DocTermMatrix]:
    """Build the vocabulary and document-term matrix from token streams.

    Terms are kept when doc_freq >= min_df and doc_freq/docs <= max_df_ratio;
    order is descending corpus frequency, ties broken lexicographically.
    """
    n_docs = len(tokenized)
    term_freq: Counter[str] = Counter()
    doc_freq: Counter[str] = Counter()
    total_tokens = 0
    for toks in tokenized:
        total_tokens += len(toks)
        term_freq.update(toks)
        doc_freq.update(set(toks))

    retained = [
        t
        for t, df in doc_freq.items()
        if df >= cfg.min_df and (n_docs == 0 or df / n_docs <= cfg.max_df_ratio)
    ]
    if not retained:
        raise EmptyVocabulary(
            f"no terms survive min_df={cfg.min_df}, max_df_ratio={cfg.max_df_ratio}"
        )
    retained.sort(key=lambda t: (-term_freq[t], t))
    index = {t: i for i, t in enumerate(retained)}
    df_arr = np.array([doc_freq[t] for t in retained], dtype=np.int64)
    vocab = Vocabulary(terms=retained, index=index, doc_freq=df_arr, total_tokens=total_tokens)

    indptr = np.zeros(n_docs + 1, dtype=np.int64)
    all_indices: list[np.ndarray] = []
    all_counts: list[np.ndarray] = []
    for d, toks in enumerate(tokenized):
        row = Counter(index[t] for t in toks if t in index)
        ids = np.array(sorted(row), dtype=np.int32)
        cnts = np.array([row[int(i)] for i in ids], dtype=np.int32)
        all_indices.append(ids)
        all_counts.append(cnts)
        indptr[d + 1] = indptr[d] + len(ids)
    dtm = DocTermMatrix(
        docs=n_docs,
        indptr=indptr,
        indices=np.concatenate(all_indices) if all_indices else np.empty(0, np.int32),
        counts=np.concatenate(all_counts) if all_counts else np.empty(0, np.int32),
    )
    return vocab, dtm


def build_index(speeches, cfg: PrepConfig) -> tuple[Vocabulary, DocTermMatrix]:
    """Tokenize speeches and index them in one step (see index_tokenized)."""
    return index_tokenized(tokenize_speeches(speeches, cfg), cfg)


@dataclass
class CooccurrenceCounts:
    """Window counts: how many sliding windows contain a term or a pair.

    Pairs are stored once with i < j under key (i << 32) | j; lookups accept
    either order. All probabilities are counts / n_windows.
    """

    window: int
    n_windows: int
    single: np.ndarray
    pair_keys: np.ndarray
    pair_counts: np.ndarray

    def single_count(self, i: int) -> int:
        return int(self.single[i])

    def pair_count(self, i: int, j: int) -> int:
        if i == j:
            return int(self.single[i])
        lo, hi = (i, j) if i < j else (j, i)
        key = np.uint64((lo << 32) | hi)
        pos = int(np.searchsorted(self.pair_keys, key))
        if pos < len(self.pair_keys) and self.pair_keys[pos] == key:
            return int(self.pair_counts[pos])
        return 0

    def pairs_as_dict(self) -> dict[tuple[int, int], int]:
        return {
            (int(k) >> 32, int(k) & 0xFFFFFFFF): int(c)
            for k, c in zip(self.pair_keys, self.pair_counts)
        }


def count_cooccurrence(
    tokenized: list[list[str]], vocab: Vocabulary, window: int
) -> CooccurrenceCounts:
    """Count boolean sliding windows over the in-vocabulary token streams.

    Out-of-vocabulary tokens are dropped before windowing; documents left
    empty contribute no windows.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    ids: list[int] = []
    offsets = np.zeros(len(tokenized) + 1, dtype=np.int64)
    index = vocab.index
    for d, toks in enumerate(tokenized):
        ids.extend(index[t] for t in toks if t in index)
        offsets[d + 1] = len(ids)
    token_ids = np.array(ids, dtype=np.int32)
    n_windows, single, keys, counts = kernels.count_windows(
        token_ids, offsets, window, len(vocab)
    )
    return CooccurrenceCounts(
        window=window, n_windows=n_windows, single=single, pair_keys=keys, pair_counts=counts
    )
