"""Communication topologies: random ensembles, closeness, serialization.

Graphs are stored in CSR form (``indptr``/``indices``/``delays``), with
each node's neighbours sorted ascending.  A ``Graph`` never changes after
construction, so one instance can be shared across concurrent runs.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels
from .errors import DisconnectedGraphError, InputError, ParameterError


class Ensemble(str, Enum):
    ERDOS_RENYI = "ErdosRenyi"
    SBM = "SBM"
    BARABASI_ALBERT = "BarabasiAlbert"
    CUSTOM = "Custom"


DEFAULT_SBM_SIZES = (250, 250, 250, 250)
DEFAULT_SBM_MATRIX = ((5, 1, 1, 1), (1, 5, 1, 1), (1, 1, 5, 1), (1, 1, 1, 5))


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True, eq=False)
class Graph:
    node_count: int
    indptr: np.ndarray
    indices: np.ndarray
    delays: np.ndarray
    ensemble: Ensemble = Ensemble.CUSTOM
    seed: int | None = None

    def __post_init__(self):
        for arr in (self.indptr, self.indices, self.delays):
            arr.setflags(write=False)

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[Sequence[int]],
        ensemble: Ensemble = Ensemble.CUSTOM,
        seed: int | None = None,
    ) -> "Graph":
        """Build from ``(i, j)`` or ``(i, j, delay)`` tuples (undirected)."""
        if n < 1:
            raise ParameterError(f"node count must be positive, got {n}")
        rows = [tuple(int(x) for x in e) for e in edges]
        if rows:
            arr = np.array([r if len(r) == 3 else (r[0], r[1], 1) for r in rows], dtype=np.int64)
        else:
            arr = np.zeros((0, 3), dtype=np.int64)
        return cls._from_array(n, arr[:, 0], arr[:, 1], arr[:, 2], ensemble, seed)

    @classmethod
    def _from_array(cls, n, u, v, t, ensemble, seed) -> "Graph":
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        t = np.asarray(t, dtype=np.int64)
        if u.size:
            if u.min() < 0 or v.min() < 0 or u.max() >= n or v.max() >= n:
                raise ParameterError("edge endpoint out of range")
            if np.any(u == v):
                raise ParameterError("self-loops are not allowed")
            if t.min() < 1:
                raise ParameterError("edge delays must be >= 1")
            lo, hi = np.minimum(u, v), np.maximum(u, v)
            if np.unique(lo * n + hi).size != lo.size:
                raise ParameterError("duplicate edge")
        src = np.concatenate([u, v])
        dst = np.concatenate([v, u])
        dl = np.concatenate([t, t])
        order = np.lexsort((dst, src))
        src, dst, dl = src[order], dst[order], dl[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return cls(n, indptr, dst.astype(np.int32), dl.astype(np.int32), Ensemble(ensemble), seed)

    @property
    def edge_count(self) -> int:
        return int(self.indices.size // 2)

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    @property
    def adjacency(self) -> list[list[tuple[int, int]]]:
        return [
            list(zip(self.neighbors(i).tolist(), self.delays[self.indptr[i]:self.indptr[i + 1]].tolist()))
            for i in range(self.node_count)
        ]

    def edges(self) -> list[tuple[int, int, int]]:
        """Undirected edges as ``(i, j, delay)`` with ``i < j``, sorted."""
        src = np.repeat(np.arange(self.node_count), self.degrees())
        keep = src < self.indices
        return list(zip(src[keep].tolist(), self.indices[keep].tolist(), self.delays[keep].tolist()))

    def with_delays(self, delay_fn: Callable[[int, int], int]) -> "Graph":
        e = self.edges()
        return Graph.from_edges(
            self.node_count, [(i, j, delay_fn(i, j)) for i, j, _ in e], self.ensemble, self.seed
        )

    @property
    def unit_delays(self) -> bool:
        return bool(self.delays.size == 0 or self.delays.max() == 1)


# -- generators ---------------------------------------------------------------


def _sample_pairs(rng: np.random.Generator, n_pairs: int, p: float) -> np.ndarray:
    # Independent Bernoulli(p) per pair, drawn as Binomial count + uniform subset.
    if n_pairs == 0 or p == 0:
        return np.zeros(0, dtype=np.int64)
    if p >= 1:
        return np.arange(n_pairs, dtype=np.int64)
    k = int(rng.binomial(n_pairs, p))
    return np.sort(rng.choice(n_pairs, size=k, replace=False)).astype(np.int64)


def _triu_decode(codes: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    i = np.arange(n, dtype=np.int64)
    row_start = i * n - i * (i + 1) // 2
    rows = np.searchsorted(row_start, codes, side="right") - 1
    cols = codes - row_start[rows] + rows + 1
    return rows, cols


def gen_erdos_renyi(n: int, p: float, rng=None, seed: int | None = None) -> Graph:
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    if not (0 < p <= 1):
        raise ParameterError(f"p must lie in (0, 1], got {p}")
    rng = _as_rng(rng)
    codes = _sample_pairs(rng, n * (n - 1) // 2, p)
    u, v = _triu_decode(codes, n)
    return Graph._from_array(n, u, v, np.ones_like(u), Ensemble.ERDOS_RENYI, seed)


def sbm_probabilities(block_sizes: Sequence[int], matrix) -> np.ndarray:
    """Edge probabilities from expected-edge counts.

    ``p[a, b] = C[a, b] / n_b`` across blocks and ``C[a, a] / (n_a - 1)``
    within a block.
    """
    sizes = np.asarray(block_sizes, dtype=np.int64)
    C = np.asarray(matrix, dtype=float)
    k = sizes.size
    if k == 0 or np.any(sizes < 1):
        raise ParameterError("block sizes must be positive integers")
    if C.shape != (k, k):
        raise ParameterError(f"matrix must be {k}x{k}, got shape {C.shape}")
    if not np.allclose(C, C.T, rtol=0, atol=0):
        raise ParameterError("matrix must be symmetric")
    if np.any(C < 0):
        raise ParameterError("matrix entries must be >= 0")
    P = np.empty_like(C)
    for a in range(k):
        for b in range(k):
            if a == b:
                if C[a, a] == 0:
                    P[a, a] = 0.0
                elif sizes[a] < 2:
                    raise ParameterError(f"block {a} has one node but a positive diagonal entry")
                else:
                    P[a, a] = C[a, a] / (sizes[a] - 1)
            else:
                P[a, b] = C[a, b] / sizes[b]
    if np.any(P > 1):
        raise ParameterError("derived edge probability exceeds 1")
    return P


def gen_sbm(block_sizes: Sequence[int], matrix, rng=None, seed: int | None = None) -> Graph:
    P = sbm_probabilities(block_sizes, matrix)
    rng = _as_rng(rng)
    sizes = [int(s) for s in block_sizes]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    n = int(offsets[-1])
    us, vs = [], []
    for a in range(len(sizes)):
        for b in range(a, len(sizes)):
            if a == b:
                codes = _sample_pairs(rng, sizes[a] * (sizes[a] - 1) // 2, P[a, a])
                u, v = _triu_decode(codes, sizes[a])
                us.append(u + offsets[a])
                vs.append(v + offsets[a])
            else:
                # block a is the row block: p = C_ab / n_b
                codes = _sample_pairs(rng, sizes[a] * sizes[b], P[a, b])
                us.append(codes // sizes[b] + offsets[a])
                vs.append(codes % sizes[b] + offsets[b])
    u = np.concatenate(us)
    v = np.concatenate(vs)
    return Graph._from_array(n, u, v, np.ones_like(u), Ensemble.SBM, seed)


def ba_attachment(m: int, interpret: str = "attachment") -> int:
    """Attachment count for ``m`` read either as attachment or mean degree."""
    if interpret == "attachment":
        return m
    if interpret == "mean_degree":
        return max(1, m // 2)
    raise ParameterError(f"ba_interpret must be 'attachment' or 'mean_degree', got {interpret!r}")


def gen_barabasi_albert(n: int, m: int, rng=None, seed: int | None = None) -> Graph:
    """Preferential attachment grown from an ``(m+1)``-clique."""
    if m < 1:
        raise ParameterError(f"m must be >= 1, got {m}")
    if n <= m:
        raise ParameterError(f"n must exceed m, got n={n}, m={m}")
    rng = _as_rng(rng)
    us: list[int] = []
    vs: list[int] = []
    # every edge endpoint appears once per incident edge: uniform draws from
    # this list are degree-proportional
    ends: list[int] = []
    for i in range(m + 1):
        for j in range(i + 1, m + 1):
            us.append(i)
            vs.append(j)
            ends += (i, j)
    for new in range(m + 1, n):
        targets: set[int] = set()
        while len(targets) < m:
            draws = rng.integers(0, len(ends), size=m - len(targets))
            for d in draws.tolist():
                targets.add(ends[d])
                if len(targets) == m:
                    break
        for t in sorted(targets):
            us.append(t)
            vs.append(new)
            ends += (t, new)
    u = np.array(us, dtype=np.int64)
    v = np.array(vs, dtype=np.int64)
    return Graph._from_array(n, u, v, np.ones_like(u), Ensemble.BARABASI_ALBERT, seed)


def is_connected(g: Graph) -> bool:
    if g.node_count <= 1:
        return True
    seen = np.zeros(g.node_count, dtype=bool)
    seen[0] = True
    frontier = np.array([0])
    while frontier.size:
        nxt = np.concatenate([g.neighbors(i) for i in frontier.tolist()])
        nxt = np.unique(nxt[~seen[nxt]])
        seen[nxt] = True
        frontier = nxt
    return bool(seen.all())


def sample_connected(factory: Callable[[np.random.Generator], Graph], rng=None, max_tries: int = 1000):
    """Draw graphs from ``factory`` until one is connected.

    Returns ``(graph, rejections)``.
    """
    rng = _as_rng(rng)
    for tries in range(max_tries):
        g = factory(rng)
        if is_connected(g):
            return g, tries
    raise DisconnectedGraphError(f"no connected sample in {max_tries} attempts")


# -- centrality ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CentralityRanking:
    values: np.ndarray
    sorted_ids: np.ndarray = field(repr=False)

    def __len__(self):
        return int(self.values.size)


def closeness_centrality(g: Graph) -> CentralityRanking:
    """Closeness ``(n-1) / sum_j d(i, j)`` with hop-count distances.

    Ranking is ascending by value, ties broken by node id.
    """
    n = g.node_count
    if n < 2:
        raise ParameterError("closeness needs at least two nodes")
    sums, reached = kernels.distance_sums(g.indptr, g.indices)
    if np.any(reached < n):
        raise DisconnectedGraphError("closeness centrality is undefined on a disconnected graph")
    values = (n - 1) / sums.astype(float)
    order = np.lexsort((np.arange(n), values))
    return CentralityRanking(values, order.astype(np.int64))


def node_at_quantile(r: CentralityRanking, q: float) -> int:
    if not (0.0 <= q <= 1.0):
        raise ParameterError(f"quantile must lie in [0, 1], got {q}")
    n = len(r)
    return int(r.sorted_ids[math.floor(q * (n - 1))])


# -- edge-list I/O ------------------------------------------------------------


def format_edgelist(g: Graph) -> str:
    buf = io.StringIO()
    seed = "none" if g.seed is None else str(g.seed)
    buf.write(f"# nodes={g.node_count} ensemble={g.ensemble.value} seed={seed}\n")
    for i, j, t in g.edges():
        buf.write(f"{i} {j} {t}\n")
    return buf.getvalue()


def write_edgelist(g: Graph, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_edgelist(g))


def parse_edgelist(text: str) -> Graph:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise InputError("missing '# nodes=N ensemble=TAG seed=S' header")
    meta = {}
    for tok in lines[0][1:].split():
        key, sep, val = tok.partition("=")
        if not sep:
            raise InputError(f"bad header token {tok!r}")
        meta[key] = val
    try:
        n = int(meta["nodes"])
        ensemble = Ensemble(meta.get("ensemble", "Custom"))
        seed_txt = meta.get("seed", "none")
        seed = None if seed_txt == "none" else int(seed_txt)
    except (KeyError, ValueError) as exc:
        raise InputError(f"bad header: {lines[0]!r}") from exc
    edges = []
    for lineno, line in enumerate(lines[1:], start=2):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise InputError(f"line {lineno}: expected 'i j t_ij'")
        try:
            edges.append(tuple(int(x) for x in parts))
        except ValueError as exc:
            raise InputError(f"line {lineno}: non-integer field") from exc
    try:
        return Graph.from_edges(n, edges, ensemble, seed)
    except ParameterError as exc:
        raise InputError(str(exc)) from exc


def read_edgelist(path: str | os.PathLike) -> Graph:
    with open(path, encoding="utf-8") as fh:
        return parse_edgelist(fh.read())
