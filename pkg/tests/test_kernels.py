import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedgroup import kernels
from fedgroup.grouping import GroupConstraint, complement
from fedgroup.simgraph import SimilarityGraph

BACKENDS = kernels.available_backends()
needs_both = pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")


def test_backend_selection():
    assert "python" in BACKENDS
    assert kernels.BACKEND in BACKENDS
    assert kernels.backend("python").__name__.endswith("_pykernels")


def points(seed, n, m):
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-2, 12, n)
    ys = rng.uniform(-2, 12, n)
    # put some records exactly on cell edges and on the box boundary
    xs[: n // 10] = np.round(xs[: n // 10])
    ys[: n // 10] = np.round(ys[: n // 10])
    return xs, ys, rng.integers(0, m, n).astype(np.int64)


@needs_both
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 3000), st.integers(1, 30), st.floats(0.01, 8))
def test_disc_kernels_agree(seed, n, m, radius):
    xs, ys, owner = points(seed, n, m)
    w = np.random.default_rng(seed).exponential(2.0, n)
    c = kernels.disc_counts(xs, ys, owner, 5.0, 5.0, radius, m, impl="cython")
    p = kernels.disc_counts(xs, ys, owner, 5.0, 5.0, radius, m, impl="python")
    assert np.array_equal(c, p)
    cs = kernels.disc_sums(xs, ys, owner, w, 5.0, 5.0, radius, m, impl="cython")
    ps = kernels.disc_sums(xs, ys, owner, w, 5.0, 5.0, radius, m, impl="python")
    assert np.allclose(cs, ps, rtol=1e-12, atol=1e-12)


@needs_both
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 3000), st.integers(1, 20), st.integers(1, 17))
def test_grid_kernels_agree(seed, n, m, k):
    xs, ys, owner = points(seed, n, m)
    bbox = (0.0, 0.0, 10.0, 10.0)
    c = kernels.grid_counts(xs, ys, owner, bbox, k, m, impl="cython")
    p = kernels.grid_counts(xs, ys, owner, bbox, k, m, impl="python")
    assert np.array_equal(c, p)
    assert c.sum() == n


@needs_both
@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 50), st.floats(0, 1), st.integers(1, 8))
def test_greedy_colouring_agrees(seed, m, density, t):
    rng = np.random.default_rng(seed)
    edges = [(i, j, 0.9) for i in range(1, m + 1) for j in range(i + 1, m + 1) if rng.random() < density]
    indptr, indices = complement(SimilarityGraph.from_edges(m, edges)).csr()
    for caps in (GroupConstraint.none().caps(m), np.full(m, t), rng.integers(1, 6, m)):
        caps = np.asarray(caps, dtype=np.int64)
        a = kernels.greedy_color(indptr, indices, caps, impl="cython")
        b = kernels.greedy_color(indptr, indices, caps, impl="python")
        assert np.array_equal(a, b)


@pytest.mark.parametrize("impl", BACKENDS)
def test_kernels_on_empty_input(impl):
    e = np.empty(0)
    o = np.empty(0, dtype=np.int64)
    assert kernels.disc_counts(e, e, o, 0, 0, 1, 3, impl=impl).tolist() == [0, 0, 0]
    assert kernels.grid_counts(e, e, o, (0, 0, 1, 1), 2, 2, impl=impl).shape == (2, 4)
    assert kernels.greedy_color(np.zeros(1, dtype=np.int64), o, o, impl=impl).size == 0
