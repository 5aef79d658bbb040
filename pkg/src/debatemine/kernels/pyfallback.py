"""Pure-Python kernels, used when the compiled extension is unavailable.

Semantics are identical to ``_native``; the Gibbs sweep is written so the
floating-point operation order matches the C loop bit-for-bit.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np


def count_windows(token_ids, doc_offsets, window, n_terms):
    """Boolean sliding-window co-occurrence counts.

    Windows of ``window`` tokens advance one token at a time inside each
    document; documents shorter than the window count as one window and
    empty documents contribute none. Counts are windows, not occurrences.

    Returns (n_windows, single_counts[V], pair_keys sorted asc, pair_counts)
    with pair key = (i << 32) | j for term ids i < j.
    """
    single = np.zeros(n_terms, dtype=np.int64)
    pairs: dict[int, int] = {}
    n_windows = 0
    n_docs = len(doc_offsets) - 1
    for d in range(n_docs):
        doc = token_ids[doc_offsets[d] : doc_offsets[d + 1]]
        n = len(doc)
        if n == 0:
            continue
        n_win = 1 if n <= window else n - window + 1
        n_windows += n_win
        for w in range(n_win):
            seen = sorted(set(int(t) for t in doc[w : w + window]))
            for t in seen:
                single[t] += 1
            for i, j in combinations(seen, 2):
                key = (i << 32) | j
                pairs[key] = pairs.get(key, 0) + 1
    keys = np.array(sorted(pairs), dtype=np.uint64)
    counts = np.array([pairs[int(k)] for k in keys], dtype=np.int64)
    return n_windows, single, keys, counts


def gibbs_sweep(doc_ids, token_ids, z, n_dk, n_kw, n_k, alpha, beta, uniforms):
    """One collapsed-Gibbs sweep over all tokens, updating counts in place.

    Token t in doc d is resampled with weight
    (n_dk[d,k]+alpha) * (n_kw[k,w]+beta) / (n_k[k]+V*beta), its own count
    excluded. ``uniforms`` supplies one pre-drawn double per token.
    """
    n_topics = n_dk.shape[1]
    v_beta = n_kw.shape[1] * beta
    for i in range(len(token_ids)):
        d = doc_ids[i]
        w = token_ids[i]
        k_old = z[i]
        n_dk[d, k_old] -= 1
        n_kw[k_old, w] -= 1
        n_k[k_old] -= 1
        weights = (n_dk[d, :] + alpha) * (n_kw[:, w] + beta) / (n_k + v_beta)
        cum = np.cumsum(weights)
        target = uniforms[i] * cum[-1]
        k_new = int(np.searchsorted(cum, target, side="right"))
        if k_new >= n_topics:
            k_new = n_topics - 1
        z[i] = k_new
        n_dk[d, k_new] += 1
        n_kw[k_new, w] += 1
        n_k[k_new] += 1
