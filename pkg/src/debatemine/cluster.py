"""Embedding-cluster pipeline: document vectors, PCA reduction, k-means,
and class-based TF-IDF topic descriptions.

Real embeddings arrive as data files; the built-in fallback is a seeded
hashed bag-of-words, good enough for deterministic tests and protocol
experiments, not a claim about semantic quality.
"""

from __future__ import annotations

import hashlib
import json
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateInput, DimensionMismatch, MissingDocument, TooFewDocuments, UnknownDocument
from .textprep import DocTermMatrix, Vocabulary

_HASH_PROBES = 8


@dataclass
class EmbeddingMatrix:
    docs: int
    dim: int
    vectors: np.ndarray  # docs x dim, float64
    embedder_name: str
    doc_keys: list[str] = field(default_factory=list)
    degenerate: np.ndarray | None = None  # bool mask: zero-vector documents

    def __post_init__(self):
        if self.degenerate is None:
            self.degenerate = np.zeros(self.docs, dtype=bool)


def _term_pattern(term: str, dim: int, seed: int) -> np.ndarray:
    key = struct.pack("<q", seed)
    vec = np.zeros(dim, dtype=np.float64)
    for probe in range(_HASH_PROBES):
        h = hashlib.blake2b(f"{term}\x00{probe}".encode(), digest_size=8, key=key)
        value = int.from_bytes(h.digest(), "little")
        idx = value % dim
        sign = 1.0 if value >> 63 else -1.0
        vec[idx] += sign
    return vec


def embed_fallback(
    dtm: DocTermMatrix, vocab: Vocabulary, dim: int, seed: int, doc_keys: list[str] | None = None
) -> EmbeddingMatrix:
    """Hashed bag-of-words embedder: each term maps to a seeded signed
    coordinate pattern; a document is the L2-normalized count-weighted sum.

    Documents with no retained tokens get the zero vector and are flagged
    degenerate (excluded from clustering downstream).
    """
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    pattern = np.vstack([_term_pattern(t, dim, seed) for t in vocab.terms])
    counts = sp.csr_matrix(
        (dtm.counts.astype(np.float64), dtm.indices, dtm.indptr), shape=(dtm.docs, len(vocab))
    )
    vectors = counts @ pattern
    norms = np.linalg.norm(vectors, axis=1)
    degenerate = norms == 0.0
    safe = np.where(degenerate, 1.0, norms)
    vectors = vectors / safe[:, None]
    return EmbeddingMatrix(
        docs=dtm.docs,
        dim=dim,
        vectors=vectors,
        embedder_name=f"hashed-bow-{dim}-seed{seed}",
        doc_keys=list(doc_keys) if doc_keys else [],
        degenerate=degenerate,
    )


def save_embeddings_tsv(emb: EmbeddingMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"doc_id\tdim={emb.dim}\n")
        for key, row in zip(emb.doc_keys, emb.vectors):
            fh.write(key + "\t" + "\t".join(repr(float(x)) for x in row) + "\n")


def load_embeddings(path: str | Path, doc_keys: list[str]) -> EmbeddingMatrix:
    """Load per-document vectors and align rows to the corpus by SpeechId key.

    Accepts the TSV format (header ``doc_id<TAB>dim=<d>``) or a flat
    little-endian float64 binary accompanied by a ``.json`` sidecar listing
    ``dim`` and ``doc_ids``. Missing/extra rows and dimension or value
    problems are hard errors.
    """
    path = Path(path)
    if path.suffix == ".tsv":
        rows: dict[str, np.ndarray] = {}
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n").split("\t")
            if len(header) != 2 or not header[1].startswith("dim="):
                raise DimensionMismatch(f"{path}: bad embedding header {header}")
            dim = int(header[1][4:])
            for line in fh:
                parts = line.rstrip("\n").split("\t")
                key, values = parts[0], parts[1:]
                if len(values) != dim:
                    raise DimensionMismatch(
                        f"{path}: row {key} has {len(values)} values, expected {dim}"
                    )
                rows[key] = np.array([float(v) for v in values], dtype=np.float64)
    else:
        sidecar = path.with_suffix(".json")
        with open(sidecar, encoding="utf-8") as fh:
            meta = json.load(fh)
        dim = int(meta["dim"])
        keys = list(meta["doc_ids"])
        data = np.fromfile(path, dtype="<f8")
        if len(data) != len(keys) * dim:
            raise DimensionMismatch(
                f"{path}: {len(data)} values do not factor as {len(keys)} x {dim}"
            )
        mat = data.reshape(len(keys), dim)
        rows = {k: mat[i] for i, k in enumerate(keys)}

    known = set(doc_keys)
    for key in rows:
        if key not in known:
            raise UnknownDocument(f"embedding row {key} matches no corpus document")
    missing = [k for k in doc_keys if k not in rows]
    if missing:
        raise MissingDocument(f"no embedding row for {missing[0]} ({len(missing)} missing)")
    vectors = np.vstack([rows[k] for k in doc_keys])
    bad = ~np.isfinite(vectors)
    if bad.any():
        where = int(np.argwhere(bad.any(axis=1))[0][0])
        raise DimensionMismatch(f"{path}: non-finite value in row {doc_keys[where]}")
    return EmbeddingMatrix(
        docs=len(doc_keys),
        dim=dim,
        vectors=vectors,
        embedder_name=path.stem,
        doc_keys=list(doc_keys),
    )


def reduce(x: np.ndarray, d: int, seed: int, power_iters: int = 4, oversample: int = 10) -> np.ndarray:
    """PCA via randomized power iteration on mean-centered data.

    Returns the projection onto the top-d principal directions. Rank-deficient
    inputs are padded with zero components and warned about.
    """
    n, dim = x.shape
    if not (2 <= d <= dim):
        raise ValueError(f"need 2 <= d <= {dim}, got {d}")
    centered = x - x.mean(axis=0)
    rng = np.random.default_rng(seed)
    p = min(oversample, dim - d)
    g = rng.standard_normal((dim, d + p))
    y = centered @ g
    y, _ = np.linalg.qr(y)
    for _ in range(power_iters):
        z, _ = np.linalg.qr(centered.T @ y)
        y, _ = np.linalg.qr(centered @ z)
    b = y.T @ centered
    _, s, vt = np.linalg.svd(b, full_matrices=False)
    components = vt[:d].copy()
    tol = s[0] * max(n, dim) * np.finfo(np.float64).eps if len(s) and s[0] > 0 else 0.0
    rank = int((s > tol).sum())
    if rank < d:
        warnings.warn(
            DegenerateInput(f"input rank {rank} < d={d}; padding with zero components")
        )
        components[rank:] = 0.0
    # canonical sign: the largest-magnitude loading of each component is positive
    for i in range(d):
        j = int(np.argmax(np.abs(components[i])))
        if components[i, j] < 0:
            components[i] = -components[i]
    return centered @ components.T


@dataclass
class ClusterAssignment:
    labels: np.ndarray  # per-document cluster id in [0, K); -1 = excluded
    k: int
    centroids: np.ndarray
    objective_trace: list[float] = field(default_factory=list)


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    centers = np.empty((k, x.shape[1]), dtype=np.float64)
    centers[0] = x[int(rng.integers(n))]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total > 0:
            probs = d2 / total
        else:
            probs = np.full(n, 1.0 / n)
        idx = int(rng.choice(n, p=probs))
        centers[c] = x[idx]
        d2 = np.minimum(d2, ((x - centers[c]) ** 2).sum(axis=1))
    return centers


def _assign(x: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, float]:
    d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    return labels, float(d2[np.arange(len(x)), labels].sum())


def _repair_empty(x, labels, centers, k):
    """Give each empty cluster the farthest point of the largest cluster."""
    for c in range(k):
        if (labels == c).any():
            continue
        sizes = np.bincount(labels, minlength=k)
        donor = int(sizes.argmax())
        members = np.flatnonzero(labels == donor)
        dists = ((x[members] - centers[donor]) ** 2).sum(axis=1)
        point = int(members[int(dists.argmax())])
        labels[point] = c
        centers[c] = x[point]
    return labels, centers


def cluster(x: np.ndarray, k: int, seed: int, max_iter: int = 300, tol: float = 1e-6) -> ClusterAssignment:
    """k-means with k-means++ seeding on the reduced document vectors."""
    n = len(x)
    if k > n:
        raise TooFewDocuments(f"k={k} exceeds {n} clusterable documents")
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    centers = _kmeanspp(x, k, rng)
    trace: list[float] = []
    for _ in range(max_iter):
        labels, obj = _assign(x, centers)
        trace.append(obj)
        labels, centers = _repair_empty(x, labels, centers, k)
        new_centers = np.vstack([x[labels == c].mean(axis=0) for c in range(k)])
        shift = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        if shift < tol:
            break
    labels, obj = _assign(x, centers)
    trace.append(obj)
    labels, centers = _repair_empty(x, labels, centers, k)
    centers = np.vstack([x[labels == c].mean(axis=0) for c in range(k)])
    return ClusterAssignment(labels=labels.astype(np.int32), k=k, centroids=centers, objective_trace=trace)


@dataclass
class CTfIdfModel:
    """Class-based TF-IDF: W[t,c] = tf[t,c] * ln(1 + A / f[t]) where A is the
    average token count per class and f[t] the term's total across classes."""

    k: int
    tf: np.ndarray  # K x V per-class term frequencies
    average_class_tokens: float
    class_freq: np.ndarray  # per-term total over classes
    scores: np.ndarray  # K x V


def ctfidf(dtm: DocTermMatrix, labels, normalize_tf: bool = False) -> CTfIdfModel:
    """Aggregate member-document counts per class and weight by ln(1 + A/f).

    ``labels`` is a ClusterAssignment or an int array; label -1 means the
    document is excluded (degenerate).
    """
    lab = labels.labels if isinstance(labels, ClusterAssignment) else np.asarray(labels)
    k = int(labels.k) if isinstance(labels, ClusterAssignment) else int(lab.max()) + 1
    n_terms = int(dtm.indices.max()) + 1 if len(dtm.indices) else 0
    tf = np.zeros((k, n_terms), dtype=np.float64)
    for d in range(dtm.docs):
        c = int(lab[d])
        if c < 0:
            continue
        lo, hi = dtm.indptr[d], dtm.indptr[d + 1]
        np.add.at(tf[c], dtm.indices[lo:hi], dtm.counts[lo:hi])
    if normalize_tf:
        totals = tf.sum(axis=1, keepdims=True)
        totals[totals == 0] = 1.0
        tf = tf / totals
    a = tf.sum() / k
    f = tf.sum(axis=0)
    with np.errstate(divide="ignore"):
        idf = np.log1p(np.where(f > 0, a / np.where(f > 0, f, 1.0), 0.0))
    scores = tf * idf
    return CTfIdfModel(k=k, tf=tf, average_class_tokens=float(a), class_freq=f, scores=scores)


def topic_descriptions(model: CTfIdfModel, n: int) -> list[list[int]]:
    """Per class, the top-n term ids by score, ties to the lower id."""
    n_terms = model.scores.shape[1]
    if not (1 <= n <= n_terms):
        raise ValueError(f"need 1 <= n <= {n_terms}, got {n}")
    out = []
    for c in range(model.k):
        order = np.lexsort((np.arange(n_terms), -model.scores[c]))
        out.append([int(i) for i in order[:n]])
    return out


def export_topics_json(
    descriptions: list[list[int]],
    scores: np.ndarray,
    sizes: np.ndarray,
    vocab: Vocabulary,
    path: str | Path,
) -> None:
    topics = []
    for c, ids in enumerate(descriptions):
        topics.append(
            {
                "topic_id": c,
                "size": int(sizes[c]),
                "top_words": [{"term": vocab.terms[i], "score": float(scores[c, i])} for i in ids],
            }
        )
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(topics, fh, sort_keys=True, separators=(",", ":"))
