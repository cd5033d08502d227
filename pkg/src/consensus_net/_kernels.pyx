# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; behaviour is identical to ``_kernels_py``."""

import numpy as np

from libc.stdint cimport int8_t, int32_t, int64_t, uint64_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef int64_t UNSET = 0x7FFFFFFFFFFFFFFFLL


cdef inline uint64_t mix64(uint64_t x) noexcept nogil:
    cdef uint64_t z = x + GOLDEN
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t tie_draw(uint64_t seed, int64_t step, int64_t node) noexcept nogil:
    cdef uint64_t h = mix64(seed ^ (<uint64_t>step * GOLDEN))
    return mix64(h ^ <uint64_t>node)


cdef inline void commit(int64_t j, int8_t c, int64_t s,
                        const int64_t[::1] indptr, const int32_t[::1] indices,
                        const int32_t[::1] delays,
                        int64_t[::1] adopt, int8_t[::1] color, int64_t[:, ::1] arrival,
                        int64_t[::1] head, int32_t[::1] ev_node, int64_t[::1] ev_next,
                        int64_t ring, int64_t* n_events, int64_t* committed,
                        int64_t* pending) noexcept nogil:
    cdef int64_t e, k, t, slot
    color[j] = c
    adopt[j] = s
    committed[0] += 1
    for e in range(indptr[j], indptr[j + 1]):
        k = indices[e]
        if color[k] != 0:
            continue
        t = s + delays[e]
        if t < arrival[c, k]:
            arrival[c, k] = t
            slot = t % ring
            ev_node[n_events[0]] = <int32_t>k
            ev_next[n_events[0]] = head[slot]
            head[slot] = n_events[0]
            n_events[0] += 1
            pending[0] += 1


def diffuse_two(const int64_t[::1] indptr, const int32_t[::1] indices,
                const int32_t[::1] delays, int64_t seed_a, int64_t seed_b,
                int64_t delta_t, uint64_t tie_seed, int64_t max_steps):
    cdef int64_t n = indptr.shape[0] - 1
    cdef int64_t nnz = indices.shape[0]
    cdef int64_t ring = (int(np.max(delays)) if nnz else 1) + 1

    adopt_arr = np.full(n, -1, dtype=np.int64)
    color_arr = np.zeros(n, dtype=np.int8)
    arrival_arr = np.full((3, n), UNSET, dtype=np.int64)
    head_arr = np.full(ring, -1, dtype=np.int64)
    ev_node_arr = np.empty(nnz + 1, dtype=np.int32)
    ev_next_arr = np.empty(nnz + 1, dtype=np.int64)

    cdef int64_t[::1] adopt = adopt_arr
    cdef int8_t[::1] color = color_arr
    cdef int64_t[:, ::1] arrival = arrival_arr
    cdef int64_t[::1] head = head_arr
    cdef int32_t[::1] ev_node = ev_node_arr
    cdef int64_t[::1] ev_next = ev_next_arr

    cdef int64_t n_events = 0, committed = 0, pending = 0
    cdef int64_t s = 0, ev, k, e, v, na, nb, slot
    cdef int8_t c
    cdef bint has_a, has_b

    with nogil:
        while True:
            if s > 0:
                slot = s % ring
                ev = head[slot]
                head[slot] = -1
                while ev >= 0:
                    k = ev_node[ev]
                    ev = ev_next[ev]
                    pending -= 1
                    if color[k] != 0:
                        continue
                    has_a = arrival[1, k] == s
                    has_b = arrival[2, k] == s
                    if has_a and has_b:
                        na = 0
                        nb = 0
                        for e in range(indptr[k], indptr[k + 1]):
                            v = indices[e]
                            if color[v] != 0 and adopt[v] < s:
                                if color[v] == 1:
                                    na += 1
                                else:
                                    nb += 1
                        if na > nb:
                            c = 1
                        elif nb > na:
                            c = 2
                        elif tie_draw(tie_seed, s, k) % 2 == 0:
                            c = 1
                        else:
                            c = 2
                    elif has_a:
                        c = 1
                    elif has_b:
                        c = 2
                    else:
                        continue
                    commit(k, c, s, indptr, indices, delays, adopt, color, arrival,
                           head, ev_node, ev_next, ring, &n_events, &committed, &pending)
            if s == 0:
                commit(seed_a, 1, 0, indptr, indices, delays, adopt, color, arrival,
                       head, ev_node, ev_next, ring, &n_events, &committed, &pending)
            if s == delta_t and color[seed_b] == 0:
                commit(seed_b, 2, s, indptr, indices, delays, adopt, color, arrival,
                       head, ev_node, ev_next, ring, &n_events, &committed, &pending)

            if committed == n or s >= max_steps:
                break
            if pending == 0 and s >= delta_t:
                break
            s += 1

    return adopt_arr, color_arr, s


def distance_sums(const int64_t[::1] indptr, const int32_t[::1] indices):
    cdef int64_t n = indptr.shape[0] - 1
    sums_arr = np.zeros(n, dtype=np.int64)
    reached_arr = np.zeros(n, dtype=np.int64)
    dist_arr = np.empty(n, dtype=np.int64)
    queue_arr = np.empty(max(n, 1), dtype=np.int64)
    cdef int64_t[::1] sums = sums_arr
    cdef int64_t[::1] reached = reached_arr
    cdef int64_t[::1] dist = dist_arr
    cdef int64_t[::1] queue = queue_arr
    cdef int64_t src, i, qhead, qtail, u, du, e, v, total

    with nogil:
        for src in range(n):
            for i in range(n):
                dist[i] = -1
            dist[src] = 0
            queue[0] = src
            qhead = 0
            qtail = 1
            total = 0
            while qhead < qtail:
                u = queue[qhead]
                qhead += 1
                du = dist[u] + 1
                for e in range(indptr[u], indptr[u + 1]):
                    v = indices[e]
                    if dist[v] < 0:
                        dist[v] = du
                        total += du
                        queue[qtail] = v
                        qtail += 1
            sums[src] = total
            reached[src] = qtail
    return sums_arr, reached_arr
