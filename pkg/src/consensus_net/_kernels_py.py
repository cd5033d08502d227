"""Pure-Python kernels.

Reference implementations of the two hot loops.  ``_kernels.pyx`` mirrors
them line for line; both must return identical arrays for identical
inputs.
"""

from __future__ import annotations

import numpy as np

from .seeds import tie_draw

UNSET = np.iinfo(np.int64).max
COLOR_A = 1
COLOR_B = 2


def diffuse_two(indptr, indices, delays, seed_a, seed_b, delta_t, tie_seed, max_steps):
    """Two-block competitive diffusion with mining switched off.

    Block A is created at ``seed_a`` during step 0, block B at ``seed_b``
    during step ``delta_t`` unless that node already holds A.  Returns
    ``(adopt_step, color, last_step)`` where ``color`` is 0 for nodes that
    never committed.
    """
    indptr = np.asarray(indptr).tolist()
    indices = np.asarray(indices).tolist()
    delays = np.asarray(delays).tolist()
    n = len(indptr) - 1
    ring = (max(delays) if delays else 1) + 1

    adopt = [-1] * n
    color = [0] * n
    arrival = [None, [UNSET] * n, [UNSET] * n]
    buckets = [[] for _ in range(ring)]
    state = {"committed": 0, "pending": 0}

    def commit(j, c, s):
        color[j] = c
        adopt[j] = s
        state["committed"] += 1
        arr = arrival[c]
        for e in range(indptr[j], indptr[j + 1]):
            k = indices[e]
            if color[k]:
                continue
            t = s + delays[e]
            if t < arr[k]:
                arr[k] = t
                buckets[t % ring].append(k)
                state["pending"] += 1

    s = 0
    while True:
        if s > 0:
            bucket = buckets[s % ring]
            buckets[s % ring] = []
            state["pending"] -= len(bucket)
            for k in bucket:
                if color[k]:
                    continue
                has_a = arrival[COLOR_A][k] == s
                has_b = arrival[COLOR_B][k] == s
                if has_a and has_b:
                    na = nb = 0
                    for e in range(indptr[k], indptr[k + 1]):
                        v = indices[e]
                        if color[v] and adopt[v] < s:
                            if color[v] == COLOR_A:
                                na += 1
                            else:
                                nb += 1
                    if na > nb:
                        c = COLOR_A
                    elif nb > na:
                        c = COLOR_B
                    else:
                        c = COLOR_A if tie_draw(tie_seed, s, k) % 2 == 0 else COLOR_B
                elif has_a:
                    c = COLOR_A
                elif has_b:
                    c = COLOR_B
                else:
                    continue
                commit(k, c, s)
        if s == 0:
            commit(seed_a, COLOR_A, 0)
        if s == delta_t and color[seed_b] == 0:
            commit(seed_b, COLOR_B, s)

        if state["committed"] == n or s >= max_steps:
            break
        if state["pending"] == 0 and s >= delta_t:
            break
        s += 1

    return np.array(adopt, dtype=np.int64), np.array(color, dtype=np.int8), s


def distance_sums(indptr, indices):
    """Per-source BFS hop-count sums and reached-node counts."""
    indptr = np.asarray(indptr).tolist()
    indices = np.asarray(indices).tolist()
    n = len(indptr) - 1
    sums = [0] * n
    reached = [0] * n
    dist = [-1] * n
    for src in range(n):
        for i in range(n):
            dist[i] = -1
        dist[src] = 0
        queue = [src]
        head = 0
        total = 0
        while head < len(queue):
            u = queue[head]
            head += 1
            du = dist[u] + 1
            for e in range(indptr[u], indptr[u + 1]):
                v = indices[e]
                if dist[v] < 0:
                    dist[v] = du
                    total += du
                    queue.append(v)
        sums[src] = total
        reached[src] = len(queue)
    return np.array(sums, dtype=np.int64), np.array(reached, dtype=np.int64)
