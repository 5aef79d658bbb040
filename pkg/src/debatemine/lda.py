"""Collapsed Gibbs sampling LDA baseline.

One sampler chain is strictly sequential over a shared count-table state;
multiple chains (different sub-seeds) can be run and the best post-burn-in
likelihood wins. Estimates average the count tables over thinned
post-burn-in sweeps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from . import kernels
from .errors import EmptyCorpus
from .textprep import DocTermMatrix, Vocabulary


@dataclass(frozen=True)
class LdaConfig:
    k: int
    seed: int = 0
    alpha: float | None = None  # None = 50/k
    beta: float = 0.01
    iterations: int = 1000
    burn_in: int = 200
    thinning: int = 10
    chains: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.alpha is not None and self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if not (0 <= self.burn_in < self.iterations):
            raise ValueError("need 0 <= burn_in < iterations")
        if self.thinning < 1 or self.chains < 1:
            raise ValueError("thinning and chains must be >= 1")

    @property
    def effective_alpha(self) -> float:
        return 50.0 / self.k if self.alpha is None else self.alpha


@dataclass
class LdaModel:
    phi: np.ndarray  # K x V topic-word probabilities
    theta: np.ndarray  # D x K document-topic probabilities
    assignments: np.ndarray  # final per-token topic ids (flattened)
    doc_ids: np.ndarray
    token_ids: np.ndarray
    log_likelihood_trace: list[float] = field(default_factory=list)
    config: LdaConfig | None = None


def _flatten(dtm: DocTermMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Expand counts to one entry per token instance, doc-major, term ascending."""
    doc_lengths = np.diff(dtm.indptr)
    reps = dtm.counts.astype(np.int64)
    token_ids = np.repeat(dtm.indices, reps).astype(np.int32)
    doc_of_entry = np.repeat(np.arange(dtm.docs, dtype=np.int32), doc_lengths)
    doc_ids = np.repeat(doc_of_entry, reps).astype(np.int32)
    return doc_ids, token_ids


def _joint_log_likelihood(n_dk, n_kw, n_k, n_d, alpha, beta) -> float:
    """log p(w, z | alpha, beta) from the collapsed count tables."""
    K, V = n_kw.shape
    D = n_dk.shape[0]
    word_side = (
        K * gammaln(V * beta)
        - K * V * gammaln(beta)
        + gammaln(n_kw + beta).sum()
        - gammaln(n_k + V * beta).sum()
    )
    doc_side = (
        D * gammaln(K * alpha)
        - D * K * gammaln(alpha)
        + gammaln(n_dk + alpha).sum()
        - gammaln(n_d + K * alpha).sum()
    )
    return float(word_side + doc_side)


def _run_chain(doc_ids, token_ids, n_docs, n_terms, cfg: LdaConfig, seed_seq):
    K = cfg.k
    alpha = cfg.effective_alpha
    beta = cfg.beta
    rng = np.random.default_rng(seed_seq)
    n_tokens = len(token_ids)

    z = rng.integers(0, K, size=n_tokens, dtype=np.int32)
    n_dk = np.zeros((n_docs, K), dtype=np.int32)
    n_kw = np.zeros((K, n_terms), dtype=np.int32)
    n_k = np.zeros(K, dtype=np.int32)
    np.add.at(n_dk, (doc_ids, z), 1)
    np.add.at(n_kw, (z, token_ids), 1)
    np.add.at(n_k, z, 1)
    n_d = n_dk.sum(axis=1)

    acc_dk = np.zeros((n_docs, K), dtype=np.float64)
    acc_kw = np.zeros((K, n_terms), dtype=np.float64)
    n_samples = 0
    trace: list[float] = []

    for it in range(cfg.iterations):
        uniforms = rng.random(n_tokens)
        kernels.gibbs_sweep(doc_ids, token_ids, z, n_dk, n_kw, n_k, alpha, beta, uniforms)
        trace.append(_joint_log_likelihood(n_dk, n_kw, n_k, n_d, alpha, beta))
        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thinning == 0:
            acc_dk += n_dk
            acc_kw += n_kw
            n_samples += 1

    mean_kw = acc_kw / n_samples
    mean_dk = acc_dk / n_samples
    mean_k = mean_kw.sum(axis=1)
    phi = (mean_kw + beta) / (mean_k + n_terms * beta)[:, None]
    theta = (mean_dk + alpha) / (n_d + K * alpha)[:, None]
    post_burn_ll = float(np.mean(trace[cfg.burn_in :]))
    return phi, theta, z, trace, post_burn_ll


def fit_lda(dtm: DocTermMatrix, cfg: LdaConfig) -> LdaModel:
    """Fit LDA by collapsed Gibbs sampling; fully reproducible from cfg.seed."""
    if dtm.docs == 0 or dtm.total_count == 0:
        raise EmptyCorpus("document-term matrix is empty")
    n_terms = int(dtm.indices.max()) + 1 if len(dtm.indices) else 0
    if n_terms == 0:
        raise EmptyCorpus("vocabulary is empty")
    doc_ids, token_ids = _flatten(dtm)

    seed_seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.chains)
    best = None
    for chain, seq in enumerate(seed_seqs):
        phi, theta, z, trace, score = _run_chain(doc_ids, token_ids, dtm.docs, n_terms, cfg, seq)
        if best is None or score > best[0]:
            best = (score, phi, theta, z, trace)
    _, phi, theta, z, trace = best
    return LdaModel(
        phi=phi,
        theta=theta,
        assignments=z,
        doc_ids=doc_ids,
        token_ids=token_ids,
        log_likelihood_trace=trace,
        config=cfg,
    )


def top_words(model: LdaModel, n: int) -> list[list[int]]:
    """Per-topic term ids with the n highest phi, ties to the lower id."""
    K, V = model.phi.shape
    if not (1 <= n <= V):
        raise ValueError(f"need 1 <= n <= {V}, got {n}")
    out = []
    for k in range(K):
        order = np.lexsort((np.arange(V), -model.phi[k]))
        out.append([int(i) for i in order[:n]])
    return out


def dominant_topics(model: LdaModel) -> np.ndarray:
    """Per-document argmax of theta, ties to the lower topic id."""
    return model.theta.argmax(axis=1).astype(np.int32)


def _write_matrix_tsv(path: Path, mat: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in mat:
            fh.write("\t".join(repr(float(x)) for x in row) + "\n")


def export_model(model: LdaModel, vocab: Vocabulary, out_dir: str | Path, n_top: int = 10) -> None:
    """Write phi.tsv, theta.tsv, topics.json, and trace.tsv into a run directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_matrix_tsv(out_dir / "phi.tsv", model.phi)
    _write_matrix_tsv(out_dir / "theta.tsv", model.theta)
    with open(out_dir / "trace.tsv", "w", encoding="utf-8") as fh:
        fh.write("iteration\tlog_likelihood\n")
        for i, ll in enumerate(model.log_likelihood_trace):
            fh.write(f"{i}\t{ll!r}\n")
    n = min(n_top, model.phi.shape[1])
    dom = dominant_topics(model)
    sizes = np.bincount(dom, minlength=model.phi.shape[0])
    topics = []
    for k, ids in enumerate(top_words(model, n)):
        topics.append(
            {
                "topic_id": k,
                "size": int(sizes[k]),
                "top_words": [
                    {"term": vocab.terms[i], "score": float(model.phi[k, i])} for i in ids
                ],
            }
        )
    with open(out_dir / "topics.json", "w", encoding="utf-8") as fh:
        json.dump(topics, fh, sort_keys=True, separators=(",", ":"))
