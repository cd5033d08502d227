import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import spearmanr

from consensus_net import graph as gr
from consensus_net.errors import DisconnectedGraphError, InputError, ParameterError

from .conftest import oracle_distances


def assert_well_formed(g):
    n = g.node_count
    src = np.repeat(np.arange(n), g.degrees())
    assert not np.any(src == g.indices)
    fwd = set(zip(src.tolist(), g.indices.tolist(), g.delays.tolist()))
    assert len(fwd) == g.indices.size
    assert all((j, i, t) in fwd for i, j, t in fwd)
    assert g.delays.min(initial=1) >= 1


# -- Erdos-Renyi --------------------------------------------------------------


def test_er_forced_edge():
    g = gr.gen_erdos_renyi(2, 1.0, rng=0)
    assert g.edges() == [(0, 1, 1)]
    assert g.ensemble is gr.Ensemble.ERDOS_RENYI


def test_er_full_scale_edge_count():
    n, p = 1000, 8e-3
    pairs = n * (n - 1) // 2
    mean, sd = pairs * p, math.sqrt(pairs * p * (1 - p))
    assert mean == pytest.approx(3996)
    assert sd == pytest.approx(63, abs=0.1)
    rng = np.random.default_rng(11)
    counts = np.array([gr.gen_erdos_renyi(n, p, rng).edge_count for _ in range(200)])
    assert abs(counts.mean() - mean) < 3 * sd / math.sqrt(counts.size)
    assert 2 * counts.mean() / n == pytest.approx(8, abs=0.1)


@pytest.mark.parametrize("n,p", [(1, 0.5), (10, 0.0), (10, 1.5), (10, -0.1)])
def test_er_rejects_bad_parameters(n, p):
    with pytest.raises(ParameterError):
        gr.gen_erdos_renyi(n, p)


# -- SBM ----------------------------------------------------------------------


def test_sbm_default_expected_degree():
    P = gr.sbm_probabilities(gr.DEFAULT_SBM_SIZES, gr.DEFAULT_SBM_MATRIX)
    assert P[0, 0] == pytest.approx(5 / 249)
    assert P[0, 1] == pytest.approx(1 / 250)
    expected = 249 * P[0, 0] + 3 * 250 * P[0, 1]
    assert expected == pytest.approx(8.0)


def test_sbm_sample_mean_degree():
    rng = np.random.default_rng(5)
    degs = np.array([2 * gr.gen_sbm(gr.DEFAULT_SBM_SIZES, gr.DEFAULT_SBM_MATRIX, rng).edge_count / 1000
                     for _ in range(100)])
    assert 7.7 <= degs.mean() <= 8.3
    # binomial variance of the total edge count, divided by 100 samples
    P = gr.sbm_probabilities(gr.DEFAULT_SBM_SIZES, gr.DEFAULT_SBM_MATRIX)
    var_edges = 4 * (249 * 250 / 2) * P[0, 0] * (1 - P[0, 0]) + 6 * 250 * 250 * P[0, 1] * (1 - P[0, 1])
    sd_mean_degree = 2 * math.sqrt(var_edges) / 1000 / math.sqrt(100)
    assert abs(degs.mean() - 8.0) < 3 * sd_mean_degree


def test_sbm_forced_edge():
    g = gr.gen_sbm([2], [[1]], rng=0)
    assert g.edges() == [(0, 1, 1)]


def test_sbm_block_structure():
    g = gr.gen_sbm([3, 4], [[0, 0], [0, 3]], rng=1)
    assert all(i >= 3 and j >= 3 for i, j, _ in g.edges())
    assert g.edge_count == 6


@pytest.mark.parametrize("sizes,C", [
    ([2, 2], [[1, 2], [1, 1]]),
    ([2, 2], [[3, 0], [0, 1]]),
    ([2, 2], [[1, 3], [3, 1]]),
    ([2], [[1, 1], [1, 1]]),
    ([2, 2], [[1, -1], [-1, 1]]),
])
def test_sbm_rejects_bad_matrix(sizes, C):
    with pytest.raises(ParameterError):
        gr.gen_sbm(sizes, C)


# -- Barabasi-Albert ----------------------------------------------------------


def test_ba_initial_clique_only():
    g = gr.gen_barabasi_albert(3, 2, rng=0)
    assert g.edges() == [(0, 1, 1), (0, 2, 1), (1, 2, 1)]


def test_ba_edge_count_exact():
    for seed in range(5):
        g = gr.gen_barabasi_albert(1000, 8, rng=seed)
        assert g.edge_count == 7964
        assert 2 * g.edge_count / 1000 == pytest.approx(15.928)
        assert_well_formed(g)


def test_ba_heavy_tail():
    maxdeg = [gr.gen_barabasi_albert(1000, 8, rng=s).degrees().max() for s in range(20)]
    assert sum(d > 60 for d in maxdeg) >= 15


def test_ba_max_degree_beats_er():
    wins = sum(
        gr.gen_barabasi_albert(1000, 8, rng=s).degrees().max()
        > gr.gen_erdos_renyi(1000, 8e-3, rng=10_000 + s).degrees().max()
        for s in range(20)
    )
    assert wins >= 18


def test_ba_interpretation_flag():
    assert gr.ba_attachment(8, "attachment") == 8
    assert gr.ba_attachment(8, "mean_degree") == 4
    with pytest.raises(ParameterError):
        gr.ba_attachment(8, "other")


@pytest.mark.parametrize("n,m", [(8, 8), (3, 5), (10, 0)])
def test_ba_rejects_bad_parameters(n, m):
    with pytest.raises(ParameterError):
        gr.gen_barabasi_albert(n, m)


@settings(max_examples=40, deadline=None)
@given(kind=st.sampled_from(["er", "sbm", "ba"]), n=st.integers(4, 60), seed=st.integers(0, 2**32 - 1))
def test_generated_graphs_well_formed(kind, n, seed):
    if kind == "er":
        g = gr.gen_erdos_renyi(n, 0.2, rng=seed)
    elif kind == "sbm":
        g = gr.gen_sbm([n // 2, n - n // 2], [[1.0, 0.5], [0.5, 1.0]], rng=seed)
    else:
        g = gr.gen_barabasi_albert(n, 3, rng=seed)
        assert g.edge_count == 6 + (n - 4) * 3
    assert g.node_count == n
    assert_well_formed(g)


def test_same_seed_same_graph():
    a = gr.gen_erdos_renyi(300, 0.03, rng=9)
    b = gr.gen_erdos_renyi(300, 0.03, rng=9)
    assert gr.format_edgelist(a) == gr.format_edgelist(b)


# -- Graph construction -------------------------------------------------------


@pytest.mark.parametrize("edges", [[(0, 0)], [(0, 1), (1, 0)], [(0, 5)], [(0, 1, 0)]])
def test_from_edges_rejects_invalid(edges):
    with pytest.raises(ParameterError):
        gr.Graph.from_edges(3, edges)


def test_adjacency_lists_delays():
    g = gr.Graph.from_edges(3, [(0, 1, 2), (2, 1, 3)])
    assert g.adjacency == [[(1, 2)], [(0, 2), (2, 3)], [(1, 3)]]


def test_connectivity_and_resampling():
    assert not gr.is_connected(gr.Graph.from_edges(4, [(0, 1), (2, 3)]))
    g, rejected = gr.sample_connected(lambda r: gr.gen_erdos_renyi(1000, 8e-3, r), rng=3)
    assert gr.is_connected(g)
    assert rejected >= 0
    with pytest.raises(DisconnectedGraphError):
        gr.sample_connected(lambda r: gr.Graph.from_edges(3, [(0, 1)]), max_tries=3)


# -- closeness ----------------------------------------------------------------


def test_closeness_star(star5):
    r = gr.closeness_centrality(star5)
    assert r.values[0] == 1.0
    assert np.allclose(r.values[1:], 4 / 7)
    assert r.sorted_ids.tolist() == [1, 2, 3, 4, 0]


def test_closeness_path(path3):
    r = gr.closeness_centrality(path3)
    assert r.values.tolist() == pytest.approx([2 / 3, 1.0, 2 / 3])
    assert r.sorted_ids.tolist() == [0, 2, 1]


def test_closeness_disconnected_rejected():
    with pytest.raises(DisconnectedGraphError):
        gr.closeness_centrality(gr.Graph.from_edges(4, [(0, 1), (2, 3)]))


@pytest.mark.parametrize("seed", range(6))
def test_closeness_matches_bfs_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 201))
    factories = [
        lambda r: gr.gen_erdos_renyi(n, 0.08, r),
        lambda r: gr.gen_barabasi_albert(n, 2, r),
        lambda r: gr.gen_sbm([n // 2, n - n // 2], [[4, 1], [1, 4]], r),
    ]
    g, _ = gr.sample_connected(factories[seed % 3], rng)
    D = oracle_distances(g)
    expected = (n - 1) / D.sum(axis=1)
    got = gr.closeness_centrality(g).values
    assert np.max(np.abs(got - expected) / expected) <= 1e-12


def test_closeness_correlates_with_degree_er():
    rng = np.random.default_rng(21)
    for _ in range(10):
        g, _ = gr.sample_connected(lambda r: gr.gen_erdos_renyi(1000, 8e-3, r), rng)
        r = gr.closeness_centrality(g)
        assert np.all((r.values > 0) & (r.values <= 1))
        assert spearmanr(g.degrees(), r.values)[0] > 0.5


# -- quantile selection -------------------------------------------------------


def test_quantile_endpoints():
    g, _ = gr.sample_connected(lambda r: gr.gen_erdos_renyi(1000, 8e-3, r), rng=4)
    r = gr.closeness_centrality(g)
    assert gr.node_at_quantile(r, 1.0) == r.sorted_ids[-1]
    assert r.values[gr.node_at_quantile(r, 1.0)] == r.values.max()
    assert r.values[gr.node_at_quantile(r, 0.0)] == r.values.min()


def test_quantile_median_of_five():
    g = gr.Graph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)])
    r = gr.closeness_centrality(g)
    assert gr.node_at_quantile(r, 0.5) == r.sorted_ids[2]


@pytest.mark.parametrize("q", [-0.01, 1.01])
def test_quantile_out_of_range(q, star5):
    with pytest.raises(ParameterError):
        gr.node_at_quantile(gr.closeness_centrality(star5), q)


@settings(max_examples=60, deadline=None)
@given(q1=st.floats(0, 1), q2=st.floats(0, 1), seed=st.integers(0, 1000))
def test_quantile_monotone(q1, q2, seed):
    g, _ = gr.sample_connected(lambda r: gr.gen_barabasi_albert(40, 2, r), rng=seed)
    r = gr.closeness_centrality(g)
    lo, hi = sorted((q1, q2))
    assert r.values[gr.node_at_quantile(r, lo)] <= r.values[gr.node_at_quantile(r, hi)]


# -- edge-list format ---------------------------------------------------------


def test_edgelist_format_and_roundtrip(tmp_path):
    g = gr.gen_erdos_renyi(30, 0.2, rng=1, seed=7)
    text = gr.format_edgelist(g)
    lines = text.splitlines()
    assert lines[0] == "# nodes=30 ensemble=ErdosRenyi seed=7"
    pairs = [tuple(map(int, ln.split())) for ln in lines[1:]]
    assert pairs == sorted(pairs)
    assert all(i < j and t == 1 for i, j, t in pairs)
    path = tmp_path / "g.txt"
    gr.write_edgelist(g, path)
    back = gr.read_edgelist(path)
    assert back.edges() == g.edges() and back.seed == 7
    assert back.ensemble is gr.Ensemble.ERDOS_RENYI


def test_edgelist_weighted_roundtrip():
    g = gr.Graph.from_edges(4, [(0, 1, 3), (1, 2, 1), (2, 3, 2)])
    assert gr.parse_edgelist(gr.format_edgelist(g)).edges() == g.edges()


@pytest.mark.parametrize("text", [
    "0 1 1\n",
    "# nodes=x ensemble=Custom seed=1\n",
    "# nodes=3 ensemble=Custom seed=1\n0 1 a\n",
    "# nodes=3 ensemble=Custom seed=1\n0 0 1\n",
    "# nodes=3 ensemble=Bogus seed=1\n",
])
def test_edgelist_parse_errors(text):
    with pytest.raises(InputError):
        gr.parse_edgelist(text)
