# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the two hot loops: sliding-window co-occurrence
counting and the collapsed-Gibbs sweep.

Co-occurrence uses joint presence runs: a pair (i, j) is jointly present in
maximal runs of consecutive windows, and each run adds its length to the
count once instead of once per window. Pair totals land in an
open-addressing hash keyed by (i << 32) | j with i < j.
"""

from libc.stdlib cimport calloc, free, malloc, realloc
from libc.string cimport memset

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef cnp.uint64_t u64
ctypedef cnp.int64_t i64
ctypedef cnp.int32_t i32

# above this many distinct terms in one document, pairs go straight to the hash
cdef Py_ssize_t FLAT_PAIR_MAX_D = 4096


cdef inline u64 _mix(u64 x) noexcept nogil:
    x ^= x >> 33
    x *= <u64>0xff51afd7ed558ccd
    x ^= x >> 33
    x *= <u64>0xc4ceb9fe1a85ec53
    x ^= x >> 33
    return x


cdef struct PairHash:
    u64 *keys
    i64 *vals
    size_t cap
    size_t size


cdef int _hash_init(PairHash *h, size_t cap) except -1:
    h.cap = cap
    h.size = 0
    h.keys = <u64 *>calloc(cap, sizeof(u64))
    h.vals = <i64 *>malloc(cap * sizeof(i64))
    if h.keys == NULL or h.vals == NULL:
        raise MemoryError("pair hash allocation failed")
    return 0


cdef void _hash_free(PairHash *h) noexcept nogil:
    if h.keys != NULL:
        free(h.keys)
        h.keys = NULL
    if h.vals != NULL:
        free(h.vals)
        h.vals = NULL


cdef int _hash_grow(PairHash *h) except -1:
    cdef size_t new_cap = h.cap * 2
    cdef u64 *new_keys = <u64 *>calloc(new_cap, sizeof(u64))
    cdef i64 *new_vals = <i64 *>malloc(new_cap * sizeof(i64))
    cdef size_t i, slot, mask
    cdef u64 k
    if new_keys == NULL or new_vals == NULL:
        if new_keys != NULL:
            free(new_keys)
        if new_vals != NULL:
            free(new_vals)
        raise MemoryError("pair hash growth failed")
    mask = new_cap - 1
    for i in range(h.cap):
        k = h.keys[i]
        if k != 0:
            slot = _mix(k) & mask
            while new_keys[slot] != 0:
                slot = (slot + 1) & mask
            new_keys[slot] = k
            new_vals[slot] = h.vals[i]
    free(h.keys)
    free(h.vals)
    h.keys = new_keys
    h.vals = new_vals
    h.cap = new_cap
    return 0


cdef inline int _hash_add(PairHash *h, u64 key, i64 val) except -1:
    cdef size_t mask = h.cap - 1
    cdef size_t slot = _mix(key) & mask
    while True:
        if h.keys[slot] == key:
            h.vals[slot] += val
            return 0
        if h.keys[slot] == 0:
            h.keys[slot] = key
            h.vals[slot] = val
            h.size += 1
            if h.size * 8 > h.cap * 5:
                _hash_grow(h)
            return 0
        slot = (slot + 1) & mask


cdef i32 *_renew_i32(i32 *ptr, size_t n_items) except NULL:
    cdef void *out = realloc(ptr, n_items * sizeof(i32))
    if out == NULL:
        raise MemoryError("buffer growth failed")
    return <i32 *>out


cdef i64 *_renew_i64(i64 *ptr, size_t n_items) except NULL:
    cdef void *out = realloc(ptr, n_items * sizeof(i64))
    if out == NULL:
        raise MemoryError("buffer growth failed")
    return <i64 *>out


cdef struct Arena:
    # open joint-run entries: (other term, other's run id, start window, next index)
    i32 *other
    i32 *other_rid
    i32 *start
    i32 *nxt
    size_t cap
    size_t n


cdef int _arena_reserve(Arena *a, size_t need) except -1:
    cdef size_t new_cap = a.cap
    if need <= a.cap:
        return 0
    while new_cap < need:
        new_cap *= 2
    a.other = _renew_i32(a.other, new_cap)
    a.other_rid = _renew_i32(a.other_rid, new_cap)
    a.start = _renew_i32(a.start, new_cap)
    a.nxt = _renew_i32(a.nxt, new_cap)
    a.cap = new_cap
    return 0


cdef int _leave(i32 u, Py_ssize_t w, Arena *A, i32 *head, i32 *cnt,
                i32 *run_id, i32 *run_start, i32 *plist, i32 *ppos,
                Py_ssize_t *npresent, i64[::1] single, i32 *uniq,
                i32 *pair_local, bint use_flat, Py_ssize_t d_loc,
                i64 *touched, Py_ssize_t *touched_n, PairHash *H) except -1:
    """Close u's presence run ending at window w-1 and settle its open pairs."""
    cdef Py_ssize_t e, pos
    cdef i32 s, rid_s, last
    cdef i64 fk, length, ga, gb, tmp
    single[uniq[u]] += w - run_start[u]
    e = head[u]
    while e != -1:
        s = A.other[e]
        rid_s = A.other_rid[e]
        if cnt[s] > 0 and run_id[s] == rid_s:
            length = w - A.start[e]
            if use_flat:
                if u < s:
                    fk = <i64>u * d_loc + s
                else:
                    fk = <i64>s * d_loc + u
                if pair_local[fk] == 0:
                    touched[touched_n[0]] = fk
                    touched_n[0] += 1
                pair_local[fk] += <i32>length
            else:
                ga = uniq[u]
                gb = uniq[s]
                if ga > gb:
                    tmp = ga
                    ga = gb
                    gb = tmp
                _hash_add(H, (<u64>ga << 32) | <u64>gb, length)
        e = A.nxt[e]
    head[u] = -1
    pos = ppos[u]
    last = plist[npresent[0] - 1]
    plist[pos] = last
    ppos[last] = <i32>pos
    npresent[0] -= 1
    ppos[u] = -1
    return 0


cdef int _enter(i32 t, Py_ssize_t w, Arena *A, i32 *head, i32 *run_id,
                i32 *run_start, i32 *plist, i32 *ppos,
                Py_ssize_t *npresent) except -1:
    """Open t's presence run at window w and joint runs with present terms."""
    cdef Py_ssize_t pos
    cdef i32 s
    run_id[t] += 1
    run_start[t] = <i32>w
    _arena_reserve(A, A.n + 2 * <size_t>npresent[0])
    for pos in range(npresent[0]):
        s = plist[pos]
        A.other[A.n] = s
        A.other_rid[A.n] = run_id[s]
        A.start[A.n] = <i32>w
        A.nxt[A.n] = head[t]
        head[t] = <i32>A.n
        A.n += 1
        A.other[A.n] = t
        A.other_rid[A.n] = run_id[t]
        A.start[A.n] = <i32>w
        A.nxt[A.n] = head[s]
        head[s] = <i32>A.n
        A.n += 1
    ppos[t] = <i32>npresent[0]
    plist[npresent[0]] = t
    npresent[0] += 1
    return 0


def count_windows(i32[::1] token_ids, i64[::1] doc_offsets, int window, int n_terms,
                  size_t hash_hint=1 << 16):
    """Boolean sliding-window co-occurrence counts over flattened documents.

    Windows advance one token at a time inside each document; documents
    shorter than the window count as one window and empty documents
    contribute none. Returns (n_windows, single_counts, pair_keys, pair_counts)
    with pair_keys sorted ascending; key = (i << 32) | j for term ids i < j.
    """
    cdef Py_ssize_t n_docs = doc_offsets.shape[0] - 1
    cdef cnp.ndarray[i64, ndim=1] single_arr = np.zeros(n_terms, dtype=np.int64)
    cdef i64[::1] single = single_arr
    cdef i64 n_windows = 0

    cdef PairHash H
    cdef size_t cap0 = 1 << 10
    while cap0 < hash_hint:
        cap0 *= 2
    H.keys = NULL
    H.vals = NULL
    _hash_init(&H, cap0)

    cdef size_t cap_d = 256
    cdef size_t cap_n = 1024
    cdef size_t touched_cap = cap_n
    cdef size_t pair_local_cap = 0
    cdef i32 *glob2loc = NULL
    cdef i32 *uniq = NULL
    cdef i32 *cnt = NULL
    cdef i32 *run_id = NULL
    cdef i32 *run_start = NULL
    cdef i32 *head = NULL
    cdef i32 *plist = NULL
    cdef i32 *ppos = NULL
    cdef i32 *loc_tok = NULL
    cdef i32 *pair_local = NULL
    cdef i64 *touched = NULL

    cdef Arena A
    A.cap = 4096
    A.n = 0
    A.other = NULL
    A.other_rid = NULL
    A.start = NULL
    A.nxt = NULL

    cdef Py_ssize_t d, i, n, a, b, W, w, npresent, touched_n, d_loc, gi
    cdef i64 doc_start, doc_end, fk, ga, gb, tmp
    cdef i32 g, t, t_out, t_in, u, c
    cdef bint use_flat

    try:
        glob2loc = <i32 *>malloc(n_terms * sizeof(i32))
        uniq = <i32 *>malloc(cap_d * sizeof(i32))
        cnt = <i32 *>malloc(cap_d * sizeof(i32))
        run_id = <i32 *>malloc(cap_d * sizeof(i32))
        run_start = <i32 *>malloc(cap_d * sizeof(i32))
        head = <i32 *>malloc(cap_d * sizeof(i32))
        plist = <i32 *>malloc(cap_d * sizeof(i32))
        ppos = <i32 *>malloc(cap_d * sizeof(i32))
        loc_tok = <i32 *>malloc(cap_n * sizeof(i32))
        touched = <i64 *>malloc(cap_n * sizeof(i64))
        A.other = <i32 *>malloc(A.cap * sizeof(i32))
        A.other_rid = <i32 *>malloc(A.cap * sizeof(i32))
        A.start = <i32 *>malloc(A.cap * sizeof(i32))
        A.nxt = <i32 *>malloc(A.cap * sizeof(i32))
        if (glob2loc == NULL or uniq == NULL or cnt == NULL or run_id == NULL
                or run_start == NULL or head == NULL or plist == NULL
                or ppos == NULL or loc_tok == NULL or touched == NULL
                or A.other == NULL or A.other_rid == NULL or A.start == NULL
                or A.nxt == NULL):
            raise MemoryError()
        for gi in range(n_terms):
            glob2loc[gi] = -1

        for d in range(n_docs):
            doc_start = doc_offsets[d]
            doc_end = doc_offsets[d + 1]
            n = doc_end - doc_start
            if n == 0:
                continue
            if <size_t>n > cap_n:
                while cap_n < <size_t>n:
                    cap_n *= 2
                loc_tok = _renew_i32(loc_tok, cap_n)
                if touched_cap < cap_n:
                    touched = _renew_i64(touched, cap_n)
                    touched_cap = cap_n

            # local term ids in first-seen order; pair keys are normalized
            # to global order at merge time, so local order can stay arbitrary
            d_loc = 0
            for i in range(n):
                g = token_ids[doc_start + i]
                if glob2loc[g] < 0:
                    if <size_t>d_loc >= cap_d:
                        cap_d *= 2
                        uniq = _renew_i32(uniq, cap_d)
                        cnt = _renew_i32(cnt, cap_d)
                        run_id = _renew_i32(run_id, cap_d)
                        run_start = _renew_i32(run_start, cap_d)
                        head = _renew_i32(head, cap_d)
                        plist = _renew_i32(plist, cap_d)
                        ppos = _renew_i32(ppos, cap_d)
                    glob2loc[g] = <i32>d_loc
                    uniq[d_loc] = g
                    d_loc += 1
                loc_tok[i] = glob2loc[g]

            if n <= window:
                # one window holding the whole document
                n_windows += 1
                for a in range(d_loc):
                    single[uniq[a]] += 1
                for a in range(d_loc):
                    for b in range(a + 1, d_loc):
                        ga = uniq[a]
                        gb = uniq[b]
                        if ga > gb:
                            tmp = ga
                            ga = gb
                            gb = tmp
                        _hash_add(&H, (<u64>ga << 32) | <u64>gb, 1)
                for a in range(d_loc):
                    glob2loc[uniq[a]] = -1
                continue

            W = n - window + 1
            n_windows += W
            use_flat = d_loc <= FLAT_PAIR_MAX_D
            if use_flat:
                if <size_t>(d_loc * d_loc) > pair_local_cap:
                    if pair_local != NULL:
                        free(pair_local)
                    pair_local_cap = <size_t>(d_loc * d_loc)
                    pair_local = <i32 *>calloc(pair_local_cap, sizeof(i32))
                    if pair_local == NULL:
                        pair_local_cap = 0
                        raise MemoryError()
                # one document can touch up to d_loc^2/2 distinct pairs
                if <size_t>(d_loc * d_loc) > touched_cap:
                    while touched_cap < <size_t>(d_loc * d_loc):
                        touched_cap *= 2
                    touched = _renew_i64(touched, touched_cap)

            memset(cnt, 0, d_loc * sizeof(i32))
            memset(run_id, 0, d_loc * sizeof(i32))
            for a in range(d_loc):
                head[a] = -1
                ppos[a] = -1
            npresent = 0
            touched_n = 0
            A.n = 0

            for i in range(window):
                t = loc_tok[i]
                cnt[t] += 1
                if cnt[t] == 1:
                    _enter(t, 0, &A, head, run_id, run_start, plist, ppos, &npresent)

            for w in range(1, W):
                t_out = loc_tok[w - 1]
                cnt[t_out] -= 1
                if cnt[t_out] == 0:
                    _leave(t_out, w, &A, head, cnt, run_id, run_start, plist, ppos,
                           &npresent, single, uniq, pair_local, use_flat, d_loc,
                           touched, &touched_n, &H)
                t_in = loc_tok[w + window - 1]
                cnt[t_in] += 1
                if cnt[t_in] == 1:
                    _enter(t_in, w, &A, head, run_id, run_start, plist, ppos, &npresent)

            # document end: force-leave everything still present
            while npresent > 0:
                u = plist[npresent - 1]
                cnt[u] = 0
                _leave(u, W, &A, head, cnt, run_id, run_start, plist, ppos,
                       &npresent, single, uniq, pair_local, use_flat, d_loc,
                       touched, &touched_n, &H)

            if use_flat:
                for i in range(touched_n):
                    fk = touched[i]
                    c = pair_local[fk]
                    if c != 0:
                        a = fk // d_loc
                        b = fk % d_loc
                        ga = uniq[a]
                        gb = uniq[b]
                        if ga > gb:
                            tmp = ga
                            ga = gb
                            gb = tmp
                        _hash_add(&H, (<u64>ga << 32) | <u64>gb, c)
                        pair_local[fk] = 0

            for a in range(d_loc):
                glob2loc[uniq[a]] = -1

        keys_arr = np.empty(H.size, dtype=np.uint64)
        counts_arr = np.empty(H.size, dtype=np.int64)
        _extract(&H, keys_arr, counts_arr)
        _hash_free(&H)
        order = np.argsort(keys_arr, kind="stable")
        return int(n_windows), single_arr, keys_arr[order], counts_arr[order]
    finally:
        _hash_free(&H)
        free(glob2loc)
        free(uniq)
        free(cnt)
        free(run_id)
        free(run_start)
        free(head)
        free(plist)
        free(ppos)
        free(loc_tok)
        free(touched)
        if pair_local != NULL:
            free(pair_local)
        free(A.other)
        free(A.other_rid)
        free(A.start)
        free(A.nxt)


cdef void _extract(PairHash *H, u64[::1] keys_out, i64[::1] counts_out) noexcept nogil:
    cdef size_t i
    cdef size_t j = 0
    for i in range(H.cap):
        if H.keys[i] != 0:
            keys_out[j] = H.keys[i]
            counts_out[j] = H.vals[i]
            j += 1


def gibbs_sweep(i32[::1] doc_ids, i32[::1] token_ids, i32[::1] z,
                i32[:, ::1] n_dk, i32[:, ::1] n_kw, i32[::1] n_k,
                double alpha, double beta, double[::1] uniforms):
    """One collapsed-Gibbs sweep over all tokens, updating counts in place.

    Token weights are (n_dk+alpha) * (n_kw+beta) / (n_k+V*beta) with the
    token's own count removed; the operation order matches the pure-Python
    fallback so results are bit-identical.
    """
    cdef Py_ssize_t N = token_ids.shape[0]
    cdef Py_ssize_t K = n_dk.shape[1]
    cdef Py_ssize_t V = n_kw.shape[1]
    cdef double v_beta = V * beta
    cdef double *cum = <double *>malloc(K * sizeof(double))
    cdef Py_ssize_t i, k, k_new
    cdef i32 d, w, k_old
    cdef double c, target
    if cum == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(N):
                d = doc_ids[i]
                w = token_ids[i]
                k_old = z[i]
                n_dk[d, k_old] -= 1
                n_kw[k_old, w] -= 1
                n_k[k_old] -= 1
                c = 0.0
                for k in range(K):
                    c = c + (n_dk[d, k] + alpha) * (n_kw[k, w] + beta) / (n_k[k] + v_beta)
                    cum[k] = c
                target = uniforms[i] * cum[K - 1]
                k_new = K - 1
                for k in range(K):
                    if cum[k] > target:
                        k_new = k
                        break
                z[i] = <i32>k_new
                n_dk[d, k_new] += 1
                n_kw[k_new, w] += 1
                n_k[k_new] += 1
    finally:
        free(cum)
