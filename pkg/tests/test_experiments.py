import math

import numpy as np
import pytest

from consensus_net import experiments as ex
from consensus_net import graph as gr
from consensus_net.errors import ParameterError

from .conftest import cycle, oracle_distances


def small(ensemble="er", **kw):
    base = dict(ensemble=ensemble, n=200, p=0.04, sizes=(50, 50, 50, 50), m=4, reps=10, graphs=2,
                dts=(0, 1), quantiles=(0.0, 0.5, 1.0), seed=3)
    base.update(kw)
    return ex.EnsembleConfig(**base)


# -- single races -------------------------------------------------------------


def test_star_centre_beats_leaf(star5):
    for seed in range(200):
        res = ex.competitive_diffusion(star5, 0, 3, 0, seed=seed)
        assert res.winner == "A"
        assert res.color.tolist() == [1, 1, 1, 2, 1]


def test_late_start_past_diameter_never_creates_b():
    g, _ = gr.sample_connected(lambda r: gr.gen_erdos_renyi(150, 0.04, r), rng=1)
    diameter = int(oracle_distances(g).max())
    for seed in range(20):
        res = ex.competitive_diffusion(g, 0, 1 + seed, diameter, seed=seed)
        assert res.winner == "A" and not np.any(res.color == 2)


def test_cycle_antipodal_symmetry():
    g = cycle(100)
    runs = 2000
    wins = sum(ex.competitive_diffusion(g, 0, 50, 0, seed=s).winner == "A" for s in range(runs))
    assert abs(wins / runs - 0.5) <= 3 * 0.0112


def test_argument_swap_antisymmetry():
    g, _ = gr.sample_connected(lambda r: gr.gen_barabasi_albert(200, 2, r), rng=5)
    rng = np.random.default_rng(0)
    first = total = 0
    for k in range(600):
        a, b = (int(x) for x in rng.choice(200, 2, replace=False))
        for x, y in ((a, b), (b, a)):
            first += ex.competitive_diffusion(g, x, y, 0, seed=k).winner == "A"
            total += 1
    assert abs(first / total - 0.5) < 3 * 0.5 / math.sqrt(total)


def test_snapshots_partition():
    g, _ = gr.sample_connected(lambda r: gr.gen_sbm([60, 60], [[6, 1], [1, 6]], r), rng=2)
    res = ex.competitive_diffusion(g, 0, 100, 1, seed=4)
    snaps = res.snapshots()
    assert [s.step for s in snaps] == list(range(res.last_step + 1))
    for s in snaps:
        assert s.size_a + s.size_b + s.uncommitted == 120
        assert sum(s.shares) == pytest.approx(1.0)
    assert snaps[-1].uncommitted == 0
    assert res.snapshot(10**6) == ex.ClusterSnapshot(10**6, snaps[-1].size_a, snaps[-1].size_b, 0)


def test_undecided_at_max_steps(path3):
    res = ex.competitive_diffusion(path3, 0, 2, 5, max_steps=0)
    assert res.winner == "undecided"


def test_backends_agree():
    from consensus_net import kernels

    g, _ = gr.sample_connected(lambda r: gr.gen_erdos_renyi(100, 0.06, r), rng=3)
    py = kernels.get_backend("python")
    for seed in range(10):
        a = ex.competitive_diffusion(g, 1, 2, seed % 3, seed=seed)
        b = ex.competitive_diffusion(g, 1, 2, seed % 3, seed=seed, backend=py)
        assert a.winner == b.winner and np.array_equal(a.color, b.color)


def test_full_mode_decides():
    g, _ = gr.sample_connected(lambda r: gr.gen_erdos_renyi(60, 0.1, r), rng=4)
    from consensus_net.engine import MiningConfig

    mining = MiningConfig.calibrated(60, 600)
    res = ex.competitive_diffusion(g, 0, 1, 0, mode="full", seed=2, mining=mining, max_steps=5000)
    assert res.winner in ("A", "B")
    assert all(s.size_a + s.size_b + s.uncommitted == 60 for s in res.trajectory)
    with pytest.raises(ParameterError):
        ex.competitive_diffusion(g, 0, 1, 0, mode="full")


@pytest.mark.parametrize("args", [(0, 0, 0), (0, 1, -1), (0, 9, 0)])
def test_diffusion_validation(args, star5):
    with pytest.raises(ParameterError):
        ex.competitive_diffusion(star5, *args)
    with pytest.raises(ParameterError):
        ex.competitive_diffusion(star5, 0, 1, 0, mode="other")


# -- configuration ------------------------------------------------------------


@pytest.mark.parametrize("ens", ["er", "sbm", "ba"])
def test_default_t_star(ens):
    cfg = ex.EnsembleConfig(ensemble=ens)
    assert cfg.resolved_t_star() == 4
    assert ex.EnsembleConfig(ensemble=ens, t_star=2).resolved_t_star() == 2


def test_expected_mean_degree():
    assert ex.EnsembleConfig(ensemble="er").expected_mean_degree() == pytest.approx(7.992)
    assert ex.EnsembleConfig(ensemble="sbm").expected_mean_degree() == pytest.approx(8.0)
    assert ex.EnsembleConfig(ensemble="ba").expected_mean_degree() == pytest.approx(15.928)


@pytest.mark.parametrize("kw", [dict(graphs=0), dict(reps=0), dict(dts=(-1,)), dict(quantiles=(1.2,)),
                                dict(t_star=0), dict(mode="x"), dict(opponent="x"), dict(ensemble="ws"),
                                dict(p=0.0), dict(ensemble="ba", n=5, m=8)])
def test_config_validation(kw):
    with pytest.raises(ParameterError):
        ex.EnsembleConfig(**kw)


def test_sample_graph_connected_and_stable():
    cfg = small("ba")
    g1, _ = ex.sample_graph(cfg, 1)
    g2, _ = ex.sample_graph(cfg, 1)
    g0, _ = ex.sample_graph(cfg, 0)
    assert gr.is_connected(g1)
    assert g1.edges() == g2.edges() and g1.edges() != g0.edges()


# -- sweeps -------------------------------------------------------------------


@pytest.mark.parametrize("ens", ["er", "sbm", "ba"])
def test_cluster_experiment_rows(ens):
    cfg = small(ens, t_star=3)
    res = ex.cluster_size_experiment(cfg)
    assert len(res.rows) + res.undecided == cfg.reps * cfg.graphs
    for r in res.rows:
        assert r.share_win + r.share_lose + r.share_uncommitted == pytest.approx(1.0, abs=1e-12)
        assert r.t_star == 3
    edges, hw, hl = res.histograms(10)
    assert hw.sum() == hl.sum() == len(res.rows)


def test_cluster_experiment_deterministic_and_job_invariant():
    cfg = small("sbm")
    a = ex.format_cluster_sizes(ex.cluster_size_experiment(cfg, jobs=1))
    b = ex.format_cluster_sizes(ex.cluster_size_experiment(cfg, jobs=3))
    assert a == b
    assert a.startswith("# ensemble=sbm\n")
    lines = a.splitlines()
    assert "ensemble,graph_idx,rep,t_star,share_win,share_lose,share_uncommitted" in lines
    assert "# seed=3" in lines and "# t_star=3" in lines


def test_win_curve_points_and_output():
    cfg = small("er")
    res = ex.centrality_win_experiment(cfg)
    assert len(res.points) == cfg.graphs * len(cfg.quantiles) * len(cfg.dts)
    for p in res.points:
        assert p.runs + p.undecided == cfg.reps
        assert p.win_probability == p.wins / p.runs
    text = ex.format_win_curve(res)
    assert "ensemble,graph_idx,q,delta_t,wins,runs,win_rate" in text.splitlines()
    mean = ex.format_win_curve_mean(res)
    body = [ln for ln in mean.splitlines() if not ln.startswith("#")]
    assert body[0] == "ensemble,q,delta_t,mean_win_rate,sd_win_rate,graphs"
    assert len(body) == 1 + len(cfg.quantiles) * len(cfg.dts)
    assert text == ex.format_win_curve(ex.centrality_win_experiment(cfg, jobs=2))


def test_tested_node_is_quantile_node():
    cfg = small("ba", graphs=1)
    res = ex.centrality_win_experiment(cfg)
    g, _ = ex.sample_graph(cfg, 0)
    r = gr.closeness_centrality(g)
    assert r.values[res.tested_nodes[(0, 2)]] == r.values.max()
    assert res.tested_nodes[(0, 0)] == gr.node_at_quantile(r, 0.0)


def test_fixed_opponent_option():
    cfg = small("er", opponent="fixed", graphs=1, dts=(0,))
    res = ex.centrality_win_experiment(cfg)
    assert all(p.runs == cfg.reps for p in res.points)


def test_high_closeness_beats_low_on_ba():
    cfg = small("ba", n=400, reps=100, graphs=3, dts=(0,), quantiles=(0.0, 1.0))
    pts = ex.centrality_win_experiment(cfg).points
    lo = [p for p in pts if p.q == 0.0]
    hi = [p for p in pts if p.q == 1.0]
    w_lo = sum(p.wins for p in lo) / sum(p.runs for p in lo)
    w_hi = sum(p.wins for p in hi) / sum(p.runs for p in hi)
    se = math.sqrt(w_lo * (1 - w_lo) / 300 + w_hi * (1 - w_hi) / 300)
    assert w_hi - w_lo > 3 * se


def test_win_rate_non_increasing_in_delay():
    cfg = small("er", reps=200, graphs=1, dts=(0, 1, 2, 3), quantiles=(0.5,))
    pts = sorted(ex.centrality_win_experiment(cfg).points, key=lambda p: p.delta_t)
    for a, b in zip(pts, pts[1:]):
        pa, pb = a.win_probability, b.win_probability
        se = math.sqrt((pa * (1 - pa) + pb * (1 - pb)) / 200)
        assert pb <= pa + 2 * se
