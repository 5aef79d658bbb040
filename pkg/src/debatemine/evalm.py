"""Topic coherence and diversity scoring over reference window counts.

Probabilities are window counts / n_windows. Smoothing eps applies to the
joint probability only. Terms absent from the reference counts trigger the
skip policy: pairs involving them are dropped and counted, and more than
10% skipped pairs is a hard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MissingReferenceTerm, UnknownTerm
from .textprep import CooccurrenceCounts, Vocabulary

SKIP_FRACTION_LIMIT = 0.10
VARIANTS = ("c_npmi", "c_v")


@dataclass(frozen=True)
class TopicSet:
    topics: tuple[tuple[str, ...], ...]
    n: int
    model_name: str
    k: int

    def __post_init__(self):
        if self.k != len(self.topics) or self.k < 1:
            raise ValueError("k must equal the number of topic lists and be >= 1")
        for words in self.topics:
            if len(words) != self.n or len(set(words)) != self.n:
                raise ValueError(f"every topic needs exactly {self.n} distinct terms: {words}")


def topic_set(topics: list[list[str]], model_name: str) -> TopicSet:
    if not topics:
        raise ValueError("no topics")
    return TopicSet(
        topics=tuple(tuple(t) for t in topics),
        n=len(topics[0]),
        model_name=model_name,
        k=len(topics),
    )


@dataclass
class EvalReport:
    model_name: str
    k: int
    coherence: float
    coherence_variant: str
    diversity: float
    n_words_scored: int


@dataclass
class CoherenceScore:
    value: float
    skipped_pairs: int
    total_pairs: int

    def __float__(self) -> float:
        return self.value


def npmi(i: int, j: int, cc: CooccurrenceCounts, eps: float = 1e-12) -> float:
    """Normalized PMI of two term ids over the reference windows:
    ln((P(i,j)+eps) / (P(i)P(j))) / -ln(P(i,j)+eps)."""
    if not (0 <= i < len(cc.single)) or not (0 <= j < len(cc.single)):
        raise UnknownTerm(f"term id out of range: {i}, {j}")
    if eps <= 0:
        raise ValueError("eps must be > 0")
    p_i = cc.single_count(i) / cc.n_windows
    p_j = cc.single_count(j) / cc.n_windows
    if p_i == 0.0 or p_j == 0.0:
        raise UnknownTerm(f"term {i if p_i == 0.0 else j} has no reference windows")
    p_ij = cc.pair_count(i, j) / cc.n_windows
    return math.log((p_ij + eps) / (p_i * p_j)) / -math.log(p_ij + eps)


def diversity(topics: TopicSet) -> float:
    """Distinct terms across all topic lists / (K * n). Range [1/K, 1]."""
    distinct = set()
    for words in topics.topics:
        distinct.update(words)
    return len(distinct) / (topics.k * topics.n)


def _topic_ids(words, vocab: Vocabulary, cc: CooccurrenceCounts):
    """Split a topic into reference-present ids and the missing-word count."""
    present = []
    for w in words:
        i = vocab.index.get(w)
        if i is not None and cc.single_count(i) > 0:
            present.append(i)
    return present, len(words) - len(present)


def coherence(
    topics: TopicSet,
    cc: CooccurrenceCounts,
    vocab: Vocabulary,
    variant: str = "c_v",
    eps: float = 1e-12,
) -> CoherenceScore:
    """Mean topic coherence over the reference counts.

    c_npmi: mean over topics of the mean pairwise NPMI of the topic's words.
    c_v: per word, cosine between its NPMI vector (against the topic's words,
    self included) and the sum of all the topic's NPMI vectors; means over
    words, then topics.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown coherence variant {variant!r}")
    pair_universe = topics.n * (topics.n - 1) // 2
    total_pairs = topics.k * pair_universe
    skipped = 0
    topic_scores: list[float] = []
    for words in topics.topics:
        ids, n_missing = _topic_ids(words, vocab, cc)
        m = len(ids)
        skipped += pair_universe - m * (m - 1) // 2
        if variant == "c_npmi":
            if m < 2:
                continue
            acc = 0.0
            for a in range(m):
                for b in range(a + 1, m):
                    acc += npmi(ids[a], ids[b], cc, eps)
            topic_scores.append(acc / (m * (m - 1) / 2))
        else:
            if m < 1:
                continue
            mat = np.empty((m, m), dtype=np.float64)
            for a in range(m):
                for b in range(m):
                    mat[a, b] = npmi(ids[a], ids[b], cc, eps)
            ref = mat.sum(axis=0)
            ref_norm = float(np.linalg.norm(ref))
            word_scores = []
            for a in range(m):
                v_norm = float(np.linalg.norm(mat[a]))
                if v_norm == 0.0 or ref_norm == 0.0:
                    word_scores.append(0.0)
                else:
                    word_scores.append(float(mat[a] @ ref) / (v_norm * ref_norm))
            topic_scores.append(float(np.mean(word_scores)))
    if total_pairs > 0 and skipped / total_pairs > SKIP_FRACTION_LIMIT:
        raise MissingReferenceTerm(
            f"{skipped}/{total_pairs} topic word pairs missing from the reference counts"
        )
    if not topic_scores:
        raise MissingReferenceTerm("no topic had enough reference-covered words to score")
    return CoherenceScore(
        value=float(np.mean(topic_scores)), skipped_pairs=skipped, total_pairs=total_pairs
    )


def evaluate(
    topics: TopicSet,
    cc: CooccurrenceCounts,
    vocab: Vocabulary,
    variant: str = "c_v",
    eps: float = 1e-12,
) -> EvalReport:
    score = coherence(topics, cc, vocab, variant=variant, eps=eps)
    return EvalReport(
        model_name=topics.model_name,
        k=topics.k,
        coherence=score.value,
        coherence_variant=variant,
        diversity=diversity(topics),
        n_words_scored=topics.n,
    )


@dataclass
class ComparisonCell:
    model: str
    k: int
    coherence: float
    diversity: float
    coherence_best: bool = False
    diversity_best: bool = False


def compare(
    models: list[tuple[str, TopicSet]],
    cc: CooccurrenceCounts,
    vocab: Vocabulary,
    variant: str = "c_v",
    eps: float = 1e-12,
) -> list[ComparisonCell]:
    """Score every (model, K) cell and mark the per-K best values, the way
    comparison tables bold their winners. Deterministic ordering: K
    ascending, then model name."""
    if not models:
        return []
    n_values = {ts.n for _, ts in models}
    if len(n_values) != 1:
        raise ValueError(f"all topic sets must share n, got {sorted(n_values)}")
    cells = []
    for name, ts in sorted(models, key=lambda kv: (kv[1].k, kv[0])):
        score = coherence(ts, cc, vocab, variant=variant, eps=eps)
        cells.append(
            ComparisonCell(model=name, k=ts.k, coherence=score.value, diversity=diversity(ts))
        )
    for k in {c.k for c in cells}:
        row = [c for c in cells if c.k == k]
        best_c = max(c.coherence for c in row)
        best_d = max(c.diversity for c in row)
        for c in row:
            c.coherence_best = c.coherence == best_c
            c.diversity_best = c.diversity == best_d
    return cells


def comparison_to_dict(cells: list[ComparisonCell], variant: str, window: int, n: int) -> dict:
    return {
        "coherence_variant": variant,
        "window": window,
        "n_words": n,
        "cells": [
            {
                "model": c.model,
                "k": c.k,
                "coherence": c.coherence,
                "diversity": c.diversity,
                "coherence_best": c.coherence_best,
                "diversity_best": c.diversity_best,
            }
            for c in cells
        ],
    }


def comparison_to_tsv(cells: list[ComparisonCell], variant: str) -> str:
    """Two blocks (coherence, diversity): rows are topic counts, columns are
    models, an asterisk marks each row's best value."""
    model_names = sorted({c.model for c in cells})
    ks = sorted({c.k for c in cells})
    by_key = {(c.model, c.k): c for c in cells}
    lines = []
    for metric in ("coherence", "diversity"):
        title = f"{metric} ({variant})" if metric == "coherence" else metric
        lines.append(f"# {title}")
        lines.append("\t".join(["k"] + model_names))
        for k in ks:
            row = [str(k)]
            for name in model_names:
                cell = by_key.get((name, k))
                if cell is None:
                    row.append("")
                    continue
                value = getattr(cell, metric)
                best = getattr(cell, f"{metric}_best")
                row.append(f"{value:.6f}" + ("*" if best else ""))
            lines.append("\t".join(row))
    return "\n".join(lines) + "\n"
