import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import TOY_GRID, TOY_VECTORS, silo_from_counts
from fedgroup.dataio import SyntheticSpec, generate_synthetic
from fedgroup.silo import EXACT, SHARE, GridSpec, ReleaseLog, SpatialSilo
from fedgroup.mpcsim import secure_cosine_cost
from fedgroup.simgraph import (GraphBuildConfig, SimilarityGraph, build_dp, build_exact, build_graph, build_hybrid,
                               build_mpc, cosine_matrix, cosine_similarity, edge_fidelity, read_graph,
                               release_noisy_vectors, write_graph)

# clustered instance on which noisy similarity is informative but imperfect
CLUSTERED = dict(m=100, records_per_owner=80, cluster_count=10, cluster_spread=3.0, cells_per_axis=10)


def clustered(seed):
    return generate_synthetic(SyntheticSpec(seed=seed, **CLUSTERED))


def test_cosine_examples():
    assert abs(cosine_similarity(TOY_VECTORS[0], TOY_VECTORS[1]) - 0.973) <= 0.0005
    assert cosine_similarity([2, 3, 0], [2, 3, 0]) == pytest.approx(1.0)
    assert cosine_similarity([0, 0, 0], [1, 2, 3]) == 0.0
    assert cosine_similarity([1, 2, 3], [0, 0, 0]) == 0.0


@given(st.lists(st.integers(0, 50), min_size=4, max_size=4), st.lists(st.integers(0, 50), min_size=4, max_size=4))
def test_cosine_symmetric_and_bounded(a, b):
    assert cosine_similarity(a, b) == cosine_similarity(b, a)
    assert 0.0 <= cosine_similarity(a, b) <= 1.0 + 1e-12
    m = cosine_matrix(np.array([a, b]))
    assert m[0, 1] == m[1, 0] == cosine_similarity(a, b)


def test_exact_graph_of_toy_federation(toy_silos):
    g = build_exact(toy_silos, TOY_GRID)
    assert g.edge_set() == {(1, 2), (1, 3), (2, 3)}
    assert round(g.weight_of(1, 2), 3) == 0.973
    assert round(g.weight_of(1, 3), 3) == 0.749
    assert round(g.weight_of(2, 3), 3) == 0.649
    assert g.weight_of(3, 2) == g.weight_of(2, 3)
    assert g.weight_of(1, 4) is None
    assert all(0.5 < w <= 1 for _, _, w in g.edges())


def test_exact_graph_trivial_cases():
    assert build_exact([silo_from_counts(1, TOY_VECTORS[0])], TOY_GRID).n_edges == 0
    same = [silo_from_counts(i, TOY_VECTORS[2]) for i in range(1, 6)]
    g = build_exact(same, TOY_GRID)
    assert g.n_edges == 10 and np.allclose(g.weight, 1.0)


def test_graph_rejects_bad_edges():
    with pytest.raises(ValueError):
        SimilarityGraph.from_edges(3, [(1, 1, 0.9)])
    with pytest.raises(ValueError):
        SimilarityGraph.from_edges(3, [(1, 2, 0.9), (2, 1, 0.8)])
    with pytest.raises(ValueError):
        SimilarityGraph.from_edges(3, [(1, 4, 0.9)])


def test_mpc_graph_on_toy_federation(toy_silos):
    g, cost = build_mpc(toy_silos, TOY_GRID)
    assert g.edge_set() == build_exact(toy_silos, TOY_GRID).edge_set()
    assert cost.sessions == 6
    assert cost.rounds == 6 * 3
    assert cost.bytes == 6 * secure_cosine_cost(9).bytes
    g1, c1 = build_mpc(toy_silos[:1], TOY_GRID)
    assert g1.n_edges == 0 and c1.sessions == 0 and c1.bytes == 0


def test_mpc_graph_equals_exact_on_random_federations():
    rng = np.random.default_rng(11)
    for k in range(200):
        m = int(rng.integers(2, 21))
        cells = int(rng.integers(2, 6))
        grid = GridSpec(0, 0, 10, 10, cells)
        centres = rng.uniform(0, 10, (3, 2))
        silos = []
        for u in range(1, m + 1):
            n = int(rng.integers(0, 30))
            pts = centres[rng.integers(0, 3)] + rng.normal(0, 1.5, (n, 2))
            silos.append(SpatialSilo(u, pts))
        g_mpc, cost = build_mpc(silos, grid, seed=k)
        g_ex = build_exact(silos, grid)
        assert g_mpc.edge_set() == g_ex.edge_set()
        assert cost.sessions == m * (m - 1) // 2
        for i, j, w in g_mpc.edges():
            assert w == pytest.approx(g_ex.weight_of(i, j), abs=2**-10)


def test_dp_graph_large_epsilon_matches_exact():
    ds = clustered(0)
    vec = release_noisy_vectors(ds.silos, ds.grid, 1e6, seed=2)
    assert build_dp(vec).edge_set() == build_exact(ds.silos, ds.grid).edge_set()


def test_dp_graph_is_deterministic_per_seed():
    ds = clustered(1)
    cfg = GraphBuildConfig(strategy="dp", epsilon_graph=0.5)
    a, _, _ = build_graph(ds.silos, ds.grid, cfg, seed=9)
    b, _, _ = build_graph(ds.silos, ds.grid, cfg, seed=9)
    c, _, _ = build_graph(ds.silos, ds.grid, cfg, seed=10)
    assert a.edge_set() == b.edge_set() and np.array_equal(a.weight, b.weight)
    assert a.edge_set() != c.edge_set() or not np.array_equal(a.weight, c.weight)


def test_dp_graph_rejects_exact_vectors(toy_silos):
    exact = [s.exact_count_vector(TOY_GRID) for s in toy_silos]
    with pytest.raises(ValueError):
        build_dp(exact)
    a = release_noisy_vectors(toy_silos[:2], TOY_GRID, 0.5)
    b = release_noisy_vectors(toy_silos[2:], TOY_GRID, 1.0)
    with pytest.raises(ValueError):
        build_dp(a + b)


def test_dp_f1_increases_with_epsilon():
    means = []
    for eps in (0.2, 0.5, 1.0):
        f1 = []
        for seed in range(20):
            ds = clustered(seed)
            exact = build_exact(ds.silos, ds.grid)
            f1.append(edge_fidelity(build_dp(release_noisy_vectors(ds.silos, ds.grid, eps, seed)), exact).f1)
        means.append(np.mean(f1))
    assert means[0] < means[1] < means[2]


def test_hybrid_degenerate_thresholds(toy_silos):
    ds = clustered(3)
    vec = release_noisy_vectors(ds.silos, ds.grid, 0.3, seed=4)
    # r_l = r_u = r: nothing is borderline, so the result is the DP graph
    tight, cost, audit = build_hybrid(ds.silos, ds.grid, GraphBuildConfig(0.5, 0.5, 0.5, epsilon_graph=0.3),
                                      noisy_vectors=vec)
    dp = build_dp(vec)
    assert tight.edge_set() == dp.edge_set() and np.array_equal(tight.weight, dp.weight)
    assert audit.mpc_resolved == 0 and cost.sessions == 0
    # r_l = -1, r_u = +1: no noisy weight leaves [-1, 1], so every pair is resolved exactly
    wide, cost, audit = build_hybrid(toy_silos, TOY_GRID, GraphBuildConfig(0.5, -1.0, 1.0, epsilon_graph=0.3))
    exact = build_exact(toy_silos, TOY_GRID)
    assert wide.edge_set() == exact.edge_set()
    assert np.allclose(wide.weight, exact.weight, atol=2**-10)
    assert audit.mpc_resolved == 6 and audit.fast_inserted == audit.pruned == 0


def test_hybrid_mpc_edges_have_exact_weight_above_r():
    ds = clustered(5)
    cfg = GraphBuildConfig(epsilon_graph=0.3)
    vec = release_noisy_vectors(ds.silos, ds.grid, 0.3, seed=5)
    g, cost, audit = build_hybrid(ds.silos, ds.grid, cfg, noisy_vectors=vec)
    noisy = cosine_matrix(np.stack([v.values for v in vec]))
    exact_cos = cosine_matrix(np.stack([s.exact_count_vector(ds.grid).values for s in ds.silos]))
    for i, j, w in g.edges():
        wt = noisy[i - 1, j - 1]
        if cfg.r_l <= wt <= cfg.r_u:
            assert exact_cos[i - 1, j - 1] > cfg.r and w == pytest.approx(exact_cos[i - 1, j - 1], abs=2**-10)
        else:
            assert wt > cfg.r_u and w == wt
    assert cost.sessions == audit.mpc_resolved
    assert 0 < audit.mpc_fraction < 1
    # very similar pairs (exact >= 0.9) are always present
    strong = {(i + 1, j + 1) for i, j in itertools.combinations(range(len(ds.silos)), 2)
              if exact_cos[i, j] >= 0.9}
    assert strong <= g.edge_set()


def test_hybrid_filter_touches_only_noisy_vectors():
    ds = clustered(6)
    log = ReleaseLog()
    for s in ds.silos:
        s.log = log
    build_graph(ds.silos, ds.grid, GraphBuildConfig(epsilon_graph=0.3), seed=1)
    assert log.violations() == []
    shares = [e for e in log.entries if e.kind == SHARE]
    assert shares and all(e.session for e in shares)
    assert not any(e.kind == EXACT for e in log.entries)


def test_edge_fidelity_conventions():
    t = SimilarityGraph.from_edges(4, [(1, 2, 0.9), (2, 3, 0.8)])
    f = edge_fidelity(t, t)
    assert (f.precision, f.recall, f.f1) == (1.0, 1.0, 1.0)
    empty = SimilarityGraph.from_edges(4, [])
    f = edge_fidelity(empty, t)
    assert (f.precision, f.recall, f.f1) == (1.0, 0.0, 0.0)
    f = edge_fidelity(t, empty)
    assert (f.precision, f.recall) == (0.0, 1.0)
    with pytest.raises(ValueError):
        edge_fidelity(t, SimilarityGraph.from_edges(5, []))


def test_edge_fidelity_against_hand_counts():
    rng = np.random.default_rng(3)
    pairs = list(itertools.combinations(range(1, 16), 2))
    for _ in range(100):
        a = [p for p in pairs if rng.random() < 0.3]
        b = [p for p in pairs if rng.random() < 0.3]
        ga = SimilarityGraph.from_edges(15, [(i, j, 0.9) for i, j in a])
        gb = SimilarityGraph.from_edges(15, [(i, j, 0.9) for i, j in b])
        tp = sum(1 for p in a if p in b)
        p = tp / len(a) if a else 1.0
        r = tp / len(b) if b else 1.0
        f = edge_fidelity(ga, gb)
        assert f.precision == p and f.recall == r
        assert f.f1 == (2 * p * r / (p + r) if p + r else 0.0)


def test_graph_file_round_trip(tmp_path, toy_silos):
    g = build_exact(toy_silos, TOY_GRID)
    write_graph(g, tmp_path / "g.txt")
    back = read_graph(tmp_path / "g.txt")
    assert back.m == 4 and back.r == 0.5
    assert back.edge_set() == g.edge_set()
    assert np.allclose(back.weight, g.weight, atol=1e-6)


def test_config_validation():
    with pytest.raises(ValueError):
        GraphBuildConfig(0.5, 0.6, 0.7)
    with pytest.raises(ValueError):
        GraphBuildConfig(strategy="magic")
    with pytest.raises(ValueError):
        GraphBuildConfig(epsilon_graph=0)
    cfg = GraphBuildConfig(0.4)
    assert cfg.r_l == pytest.approx(0.3) and cfg.r_u == pytest.approx(0.5)
