"""Competitive diffusion experiments over random graph ensembles.

Two sweeps are provided:

* :func:`cluster_size_experiment` records how the two competing clusters
  split the network at an early observation step ``t_star``;
* :func:`centrality_win_experiment` measures how often a node at a given
  closeness quantile wins against a random opponent when its block starts
  ``delta_t`` steps late.

Every run draws its randomness from a seed derived from the master seed and
the run's indices (see :mod:`consensus_net.seeds`), so results do not depend
on execution order or on ``jobs``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import engine as eng
from . import kernels
from .errors import ParameterError
from .graph import (
    DEFAULT_SBM_MATRIX,
    DEFAULT_SBM_SIZES,
    Graph,
    ba_attachment,
    closeness_centrality,
    gen_barabasi_albert,
    gen_erdos_renyi,
    gen_sbm,
    node_at_quantile,
    sample_connected,
    sbm_probabilities,
)
from .seeds import derive_seed, final_coin, mix64, uniform_other

ENSEMBLE_NAMES = {"er": "ErdosRenyi", "sbm": "SBM", "ba": "BarabasiAlbert"}
DEFAULT_QUANTILES = tuple(round(0.05 * i, 2) for i in range(21))


@dataclass(frozen=True)
class ClusterSnapshot:
    step: int
    size_a: int
    size_b: int
    uncommitted: int

    @property
    def n(self) -> int:
        return self.size_a + self.size_b + self.uncommitted

    @property
    def shares(self) -> tuple[float, float, float]:
        n = self.n
        return self.size_a / n, self.size_b / n, self.uncommitted / n


@dataclass(frozen=True)
class WinCurvePoint:
    q: float
    delta_t: int
    wins: int
    runs: int
    graph_index: int
    undecided: int = 0

    @property
    def win_probability(self) -> float:
        return self.wins / self.runs if self.runs else float("nan")


@dataclass
class DiffusionResult:
    winner: str
    adopt_step: np.ndarray
    color: np.ndarray
    last_step: int
    trajectory: list[ClusterSnapshot] | None = None

    def snapshot(self, step: int) -> ClusterSnapshot:
        """Cluster sizes after ``step`` has been processed."""
        if self.trajectory is not None:
            idx = min(step, len(self.trajectory) - 1)
            snap = self.trajectory[idx]
            return ClusterSnapshot(step, snap.size_a, snap.size_b, snap.uncommitted)
        done = (self.adopt_step >= 0) & (self.adopt_step <= step)
        a = int(np.count_nonzero(done & (self.color == 1)))
        b = int(np.count_nonzero(done & (self.color == 2)))
        return ClusterSnapshot(step, a, b, self.color.size - a - b)

    def snapshots(self) -> list[ClusterSnapshot]:
        if self.trajectory is not None:
            return list(self.trajectory)
        return [self.snapshot(s) for s in range(self.last_step + 1)]


def _propagation_winner(color: np.ndarray, seed: int) -> str:
    if np.any(color == 0):
        return "undecided"
    a = int(np.count_nonzero(color == 1))
    b = color.size - a
    if a == b:
        return "A" if final_coin(seed) == 0 else "B"
    return "A" if a > b else "B"


def competitive_diffusion(g: Graph, node_a: int, node_b: int, delta_t: int = 0,
                          mode: str = "propagation", seed: int = 0, max_steps: int = 100_000,
                          mining: eng.MiningConfig | None = None, backend=None) -> DiffusionResult:
    """Race block A (from ``node_a`` at step 0) against B (``node_b`` at ``delta_t``).

    If ``node_b`` already holds A when its start step comes, B is never
    created and A wins.
    """
    if node_a == node_b:
        raise ParameterError("competing nodes must differ")
    if delta_t < 0:
        raise ParameterError("delta_t must be >= 0")
    n = g.node_count
    for v in (node_a, node_b):
        if not 0 <= v < n:
            raise ParameterError(f"node {v} out of range")
    seed &= (1 << 64) - 1
    if mode == "propagation":
        k = backend or kernels
        adopt, color, last = k.diffuse_two(g.indptr, g.indices, g.delays, int(node_a), int(node_b),
                                           int(delta_t), seed, int(max_steps))
        return DiffusionResult(_propagation_winner(color, seed), adopt, color, int(last))
    if mode == "full":
        return _full_diffusion(g, node_a, node_b, delta_t, seed, max_steps, mining)
    raise ParameterError(f"mode must be 'propagation' or 'full', got {mode!r}")


def _full_diffusion(g, node_a, node_b, delta_t, seed, max_steps, mining):
    if mining is None:
        raise ParameterError("full mode needs a mining configuration")
    s = eng.SimState(g, eng.EngineConfig(mining=mining), seed=seed)
    s.schedule_seed(node_a, 0)
    s.schedule_seed(node_b, delta_t)
    n = g.node_count
    ids = {"A": None, "B": None}
    traj: list[ClusterSnapshot] = []

    def resolve():
        for b in s.blocks[1:]:
            if b.parent_id == eng.GENESIS and b.minted_step == 0 and b.origin == node_a and ids["A"] is None:
                ids["A"] = b.id
            if (b.parent_id == eng.GENESIS and b.minted_step == delta_t and b.origin == node_b
                    and b.id != ids["A"] and ids["B"] is None):
                ids["B"] = b.id

    def record(state):
        resolve()
        na, nb = eng.fork_counts(state, ids["A"], ids["B"]) if ids["A"] is not None else (0, 0)
        traj.append(ClusterSnapshot(state.step - 1, na, nb, n - na - nb))

    winner = "undecided"
    for _ in range(max_steps + 1):
        eng.step(s)
        record(s)
        snap = traj[-1]
        if snap.size_a == n:
            winner = "A"
            break
        if snap.size_b == n:
            winner = "B"
            break
        if s.step > delta_t and ids["A"] is not None and snap.size_a + snap.size_b == 0:
            break
    tips = s.tips()
    color = np.zeros(n, dtype=np.int8)
    for i, t in enumerate(tips.tolist()):
        if ids["A"] is not None and t != eng.GENESIS and s.is_ancestor(ids["A"], t):
            color[i] = 1
        elif ids["B"] is not None and t != eng.GENESIS and s.is_ancestor(ids["B"], t):
            color[i] = 2
    return DiffusionResult(winner, np.full(n, -1, dtype=np.int64), color, s.step - 1, traj)


# -- configuration ------------------------------------------------------------


@dataclass(frozen=True)
class EnsembleConfig:
    ensemble: str = "er"
    n: int = 1000
    p: float = 8e-3
    sizes: tuple[int, ...] = DEFAULT_SBM_SIZES
    matrix: tuple[tuple[float, ...], ...] = DEFAULT_SBM_MATRIX
    m: int = 8
    ba_interpret: str = "attachment"
    t_star: int | None = None
    reps: int = 100
    graphs: int = 10
    dts: tuple[int, ...] = (0, 1, 2, 3)
    quantiles: tuple[float, ...] = DEFAULT_QUANTILES
    seed: int = 0
    mode: str = "propagation"
    opponent: str = "resampled"
    max_steps: int = 100_000
    tsys: float = 600.0

    def __post_init__(self):
        if self.ensemble not in ENSEMBLE_NAMES:
            raise ParameterError(f"ensemble must be one of {sorted(ENSEMBLE_NAMES)}, got {self.ensemble!r}")
        if self.reps < 1:
            raise ParameterError("reps must be >= 1")
        if self.graphs < 1:
            raise ParameterError("graphs must be >= 1")
        if any(d < 0 for d in self.dts) or not self.dts:
            raise ParameterError("dts must be a non-empty list of non-negative integers")
        if not self.quantiles or any(not 0 <= q <= 1 for q in self.quantiles):
            raise ParameterError("quantiles must lie in [0, 1]")
        if self.t_star is not None and self.t_star < 1:
            raise ParameterError("t_star must be >= 1")
        if self.mode not in ("propagation", "full"):
            raise ParameterError("mode must be 'propagation' or 'full'")
        if self.opponent not in ("resampled", "fixed"):
            raise ParameterError("opponent must be 'resampled' or 'fixed'")
        if self.max_steps < 1:
            raise ParameterError("max_steps must be >= 1")
        if self.ensemble == "er":
            if self.n < 2 or not 0 < self.p <= 1:
                raise ParameterError("er needs n >= 2 and 0 < p <= 1")
        elif self.ensemble == "sbm":
            sbm_probabilities(self.sizes, self.matrix)
        else:
            m = ba_attachment(self.m, self.ba_interpret)
            if self.n <= m:
                raise ParameterError("ba needs n > m")

    @property
    def node_count(self) -> int:
        return int(sum(self.sizes)) if self.ensemble == "sbm" else self.n

    def expected_mean_degree(self) -> float:
        if self.ensemble == "er":
            return self.p * (self.n - 1)
        if self.ensemble == "sbm":
            P = sbm_probabilities(self.sizes, self.matrix)
            sizes = np.asarray(self.sizes, dtype=float)
            within = np.diag(P) * (sizes - 1)
            per_block = (P * sizes[None, :]).sum(axis=1) - np.diag(P) * sizes + within
            return float((per_block * sizes).sum() / sizes.sum())
        m = ba_attachment(self.m, self.ba_interpret)
        n = self.n
        return 2.0 * (m * (m + 1) / 2 + (n - m - 1) * m) / n

    def resolved_t_star(self) -> int:
        """Observation step: ``floor(ln(n / mean_degree))`` unless set."""
        if self.t_star is not None:
            return self.t_star
        return max(1, math.floor(math.log(self.node_count / self.expected_mean_degree())))

    def header_items(self) -> list[tuple[str, str]]:
        d = asdict(self)
        d["t_star"] = self.resolved_t_star()
        out = []
        for k, v in d.items():
            if isinstance(v, (tuple, list)):
                v = ";".join(",".join(str(x) for x in r) if isinstance(r, (tuple, list)) else str(r) for r in v)
            out.append((k, str(v)))
        return out

    def mining_config(self) -> eng.MiningConfig:
        return eng.MiningConfig.calibrated(self.node_count, self.tsys)


def sample_graph(cfg: EnsembleConfig, graph_idx: int) -> tuple[Graph, int]:
    """Connected sample number ``graph_idx`` and its rejection count."""
    gseed = derive_seed(cfg.seed, f"graph/{cfg.ensemble}", graph_idx)
    if cfg.ensemble == "er":
        def factory(rng):
            return gen_erdos_renyi(cfg.n, cfg.p, rng, seed=gseed)
    elif cfg.ensemble == "sbm":
        def factory(rng):
            return gen_sbm(cfg.sizes, cfg.matrix, rng, seed=gseed)
    else:
        m = ba_attachment(cfg.m, cfg.ba_interpret)

        def factory(rng):
            return gen_barabasi_albert(cfg.n, m, rng, seed=gseed)
    return sample_connected(factory, np.random.default_rng(gseed))


def _run(cfg: EnsembleConfig, g: Graph, a: int, b: int, dt: int, seed: int) -> DiffusionResult:
    mining = cfg.mining_config() if cfg.mode == "full" else None
    return competitive_diffusion(g, a, b, dt, cfg.mode, seed, cfg.max_steps, mining)


def _map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- cluster sizes ------------------------------------------------------------


@dataclass(frozen=True)
class ClusterRow:
    graph_idx: int
    rep: int
    t_star: int
    share_win: float
    share_lose: float
    share_uncommitted: float


@dataclass
class ClusterSizeResult:
    config: EnsembleConfig
    rows: list[ClusterRow]
    undecided: int = 0
    rejections: int = 0

    def winner_shares(self) -> np.ndarray:
        return np.array([r.share_win for r in self.rows])

    def loser_shares(self) -> np.ndarray:
        return np.array([r.share_lose for r in self.rows])

    def histograms(self, bins: int = 20) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        edges = np.linspace(0.0, 1.0, bins + 1)
        hw, _ = np.histogram(self.winner_shares(), edges)
        hl, _ = np.histogram(self.loser_shares(), edges)
        return edges, hw, hl


def cluster_size_experiment(cfg: EnsembleConfig, jobs: int = 1) -> ClusterSizeResult:
    t_star = cfg.resolved_t_star()

    def per_graph(gi):
        g, rej = sample_graph(cfg, gi)
        n = g.node_count
        rows, undecided = [], 0
        for rep in range(cfg.reps):
            rs = derive_seed(cfg.seed, "cluster", gi, rep)
            a = int(mix64(derive_seed(rs, "node_a")) % n)
            b = uniform_other(derive_seed(rs, "node_b"), n, a)
            res = _run(cfg, g, a, b, 0, rs)
            if res.winner == "undecided":
                undecided += 1
                continue
            snap = res.snapshot(t_star)
            sa, sb, su = snap.size_a / n, snap.size_b / n, snap.uncommitted / n
            win, lose = (sa, sb) if res.winner == "A" else (sb, sa)
            rows.append(ClusterRow(gi, rep, t_star, win, lose, su))
        return rows, undecided, rej

    out = _map(per_graph, range(cfg.graphs), jobs)
    rows = [r for o in out for r in o[0]]
    return ClusterSizeResult(cfg, rows, sum(o[1] for o in out), sum(o[2] for o in out))


# -- win probability vs closeness quantile ------------------------------------


@dataclass
class WinCurveResult:
    config: EnsembleConfig
    points: list[WinCurvePoint]
    rejections: int = 0
    tested_nodes: dict[tuple[int, int], int] = field(default_factory=dict)

    def mean_curve(self) -> list[tuple[float, int, float, float, int]]:
        """Rows ``(q, delta_t, mean_win_rate, sd_across_graphs, graphs)``."""
        groups: dict[tuple[float, int], list[float]] = {}
        for p in self.points:
            if p.runs:
                groups.setdefault((p.q, p.delta_t), []).append(p.win_probability)
        rows = []
        for (q, dt) in sorted(groups):
            v = np.array(groups[(q, dt)])
            sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
            rows.append((q, dt, float(v.mean()), sd, int(v.size)))
        return rows

    def curve(self, delta_t: int) -> tuple[np.ndarray, np.ndarray]:
        rows = [r for r in self.mean_curve() if r[1] == delta_t]
        return np.array([r[0] for r in rows]), np.array([r[2] for r in rows])


def centrality_win_experiment(cfg: EnsembleConfig, jobs: int = 1) -> WinCurveResult:
    def per_graph(gi):
        g, rej = sample_graph(cfg, gi)
        n = g.node_count
        ranking = closeness_centrality(g)
        pts, tested = [], {}
        for qi, q in enumerate(cfg.quantiles):
            node = node_at_quantile(ranking, q)
            tested[(gi, qi)] = node
            wins = {dt: 0 for dt in cfg.dts}
            runs = {dt: 0 for dt in cfg.dts}
            und = {dt: 0 for dt in cfg.dts}
            for rep in range(cfg.reps):
                rs = derive_seed(cfg.seed, "centrality", gi, qi, rep)
                if cfg.opponent == "fixed":
                    opp_seed = derive_seed(cfg.seed, "opponent", gi, qi)
                else:
                    opp_seed = derive_seed(rs, "opponent")
                opp = uniform_other(opp_seed, n, node)
                for dt in cfg.dts:
                    res = _run(cfg, g, opp, node, dt, rs)
                    if res.winner == "undecided":
                        und[dt] += 1
                        continue
                    runs[dt] += 1
                    wins[dt] += res.winner == "B"
            for dt in cfg.dts:
                pts.append(WinCurvePoint(q, dt, wins[dt], runs[dt], gi, und[dt]))
        return pts, rej, tested

    out = _map(per_graph, range(cfg.graphs), jobs)
    points = [p for o in out for p in o[0]]
    tested = {}
    for o in out:
        tested.update(o[2])
    return WinCurveResult(cfg, points, sum(o[1] for o in out), tested)


# -- CSV output ---------------------------------------------------------------


def _header(cfg: EnsembleConfig, extra: Sequence[tuple[str, str]] = ()) -> str:
    items = list(cfg.header_items()) + list(extra)
    return "".join(f"# {k}={v}\n" for k, v in items)


def _f(x: float) -> str:
    return f"{x:.6f}"


def format_cluster_sizes(res: ClusterSizeResult) -> str:
    cfg = res.config
    name = ENSEMBLE_NAMES[cfg.ensemble]
    out = [_header(cfg, [("undecided", str(res.undecided)), ("rejections", str(res.rejections))])]
    out.append("ensemble,graph_idx,rep,t_star,share_win,share_lose,share_uncommitted\n")
    for r in res.rows:
        out.append(f"{name},{r.graph_idx},{r.rep},{r.t_star},{_f(r.share_win)},{_f(r.share_lose)},"
                   f"{_f(r.share_uncommitted)}\n")
    return "".join(out)


def format_cluster_sizes_mean(res: ClusterSizeResult, bins: int = 20) -> str:
    cfg = res.config
    name = ENSEMBLE_NAMES[cfg.ensemble]
    w, l = res.winner_shares(), res.loser_shares()
    out = [_header(cfg, [("runs", str(len(res.rows)))])]
    out.append("ensemble,bin_lo,bin_hi,count_win,count_lose\n")
    edges, hw, hl = res.histograms(bins)
    for lo, hi, a, b in zip(edges[:-1], edges[1:], hw, hl):
        out.append(f"{name},{_f(lo)},{_f(hi)},{a},{b}\n")
    if w.size:
        out.append(f"# median_share_win={_f(float(np.median(w)))} median_share_lose={_f(float(np.median(l)))}"
                   f" var_share_win={_f(float(w.var(ddof=1)) if w.size > 1 else 0.0)}\n")
    return "".join(out)


def format_win_curve(res: WinCurveResult) -> str:
    cfg = res.config
    name = ENSEMBLE_NAMES[cfg.ensemble]
    out = [_header(cfg, [("rejections", str(res.rejections))])]
    out.append("ensemble,graph_idx,q,delta_t,wins,runs,win_rate\n")
    for p in sorted(res.points, key=lambda p: (p.graph_index, p.q, p.delta_t)):
        rate = _f(p.win_probability) if p.runs else "nan"
        out.append(f"{name},{p.graph_index},{p.q:.4f},{p.delta_t},{p.wins},{p.runs},{rate}\n")
    return "".join(out)


def format_win_curve_mean(res: WinCurveResult) -> str:
    cfg = res.config
    name = ENSEMBLE_NAMES[cfg.ensemble]
    out = [_header(cfg)]
    out.append("ensemble,q,delta_t,mean_win_rate,sd_win_rate,graphs\n")
    for q, dt, mean, sd, k in res.mean_curve():
        out.append(f"{name},{q:.4f},{dt},{_f(mean)},{_f(sd)},{k}\n")
    return "".join(out)
