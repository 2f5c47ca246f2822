import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedgroup.core import (LaplaceNoise, Location, NoiseStream, PrivacyBudget, RangeQuery, count_in_range, distance,
                           laplace_from_uniform, sample_laplace, substream)

coord = st.floats(-1e6, 1e6, allow_nan=False)


def test_distance_examples():
    assert distance(Location(0, 0), Location(3, 4)) == 5.0
    assert distance(Location(1, 1), Location(1, 1)) == 0.0
    getcontext().prec = 40
    root2 = float(Decimal(2).sqrt())
    assert distance(Location(0, 0), Location(1, 1)) == pytest.approx(root2, abs=1e-9)
    assert abs(distance(Location(0, 0), Location(1, 1)) - 1.41421356) < 1e-8


@given(coord, coord, coord, coord, coord, coord)
def test_distance_metric_axioms(ax, ay, bx, by, cx, cy):
    a, b, c = Location(ax, ay), Location(bx, by), Location(cx, cy)
    assert distance(a, b) == distance(b, a)
    assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9 * (1 + distance(a, c))


def test_types_reject_bad_values():
    with pytest.raises(ValueError):
        Location(float("nan"), 0)
    with pytest.raises(ValueError):
        Location(0, float("inf"))
    with pytest.raises(ValueError):
        RangeQuery(Location(0, 0), 0.0)
    with pytest.raises(ValueError):
        PrivacyBudget(0.0)
    with pytest.raises(ValueError):
        LaplaceNoise(scale=-1.0)


def test_count_in_range_examples():
    q = RangeQuery(Location(0, 0), 2.0)
    assert count_in_range([], q) == 0
    assert count_in_range([Location(0, 0), Location(0, 2)], q) == 1
    pts = [Location(0.1, 0), Location(1, 1), Location(-1, 0.5), Location(5, 5), Location(0, -3)]
    assert count_in_range(pts, q) == 3


@given(st.lists(st.tuples(coord, coord), max_size=40), coord, coord, st.floats(1e-3, 1e6))
def test_count_never_exceeds_records(pts, cx, cy, radius):
    q = RangeQuery(Location(cx, cy), radius)
    n = count_in_range(np.array(pts, dtype=float).reshape(-1, 2), q)
    assert 0 <= n <= len(pts)
    assert n == sum(distance(Location(x, y), q.center) < radius for x, y in pts)


@given(st.floats(0, 2 * math.pi), st.floats(0.5, 100))
def test_boundary_crossing_changes_count_by_one(angle, radius):
    q = RangeQuery(Location(0, 0), radius)
    delta = 1e-6 * radius
    inside = Location((radius - delta) * math.cos(angle), (radius - delta) * math.sin(angle))
    outside = Location((radius + delta) * math.cos(angle), (radius + delta) * math.sin(angle))
    others = [Location(0, 0), Location(10 * radius, 0)]
    assert count_in_range(others + [inside], q) - count_in_range(others + [outside], q) == 1


def test_laplace_unit_scale_moments():
    x = sample_laplace(LaplaceNoise(1.0, seed=11, tag="moments"), size=1_000_000)
    assert -0.01 <= x.mean() <= 0.01
    assert 1.96 <= x.var() <= 2.04


def test_laplace_budget_scale_variance():
    noise = LaplaceNoise.for_budget(PrivacyBudget(0.3), seed=5, tag="budget")
    x = sample_laplace(noise, size=1_000_000)
    assert noise.variance == pytest.approx(2 / 0.09)
    assert x.var() == pytest.approx(2 / 0.09, rel=0.03)


def test_laplace_deterministic_by_position():
    noise = LaplaceNoise(2.0, seed=42, tag="det", key=(3, 7))
    block = sample_laplace(noise, position=0, size=100)
    assert sample_laplace(noise, position=37) == block[37]
    assert sample_laplace(noise, position=37) == sample_laplace(noise, position=37)
    other = LaplaceNoise(2.0, seed=43, tag="det", key=(3, 7))
    assert sample_laplace(other, position=37) != block[37]


def test_stream_seek_and_scatter_agree():
    s = NoiseStream(9, "seek", 1)
    block = s.laplace(1.0, 500)
    assert np.array_equal(NoiseStream(9, "seek", 1).seek(120).laplace(1.0, 10), block[120:130])
    s.seek(3)
    assert s.laplace(1.0, 1)[0] == block[3]
    positions = np.array([400, 2, 250, 2])
    assert np.array_equal(NoiseStream(9, "seek", 1).laplace_at(1.0, positions), block[positions])
    sparse = np.array([10, 10_000_000])
    got = NoiseStream(9, "seek", 1).laplace_at(1.0, sparse)
    assert got[0] == block[10]


def test_string_and_integer_keys_select_distinct_streams():
    a = NoiseStream(1, "t", "group", 1).laplace(1.0, 4)
    b = NoiseStream(1, "t", "mpc", 1).laplace(1.0, 4)
    c = NoiseStream(1, "t", 1, 1).laplace(1.0, 4)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    assert np.array_equal(a, NoiseStream(1, "t", "group", 1).laplace(1.0, 4))


def test_uniforms_strictly_inside_unit_interval():
    u = NoiseStream(0, "u").uniform(200_000)
    assert u.min() > 0.0 and u.max() < 1.0
    assert np.all(np.isfinite(laplace_from_uniform(u, 1.0)))


def test_laplace_inverse_cdf_quantiles():
    u = np.array([0.25, 0.5, 0.75])
    assert np.allclose(laplace_from_uniform(u, 1.0), [-math.log(2), 0.0, math.log(2)])


def test_substreams_are_reproducible():
    a = substream(3, "x", 1, 2).integers(0, 1 << 30, 5)
    b = substream(3, "x", 1, 2).integers(0, 1 << 30, 5)
    c = substream(3, "x", 2, 1).integers(0, 1 << 30, 5)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(0, 5000))
def test_any_position_matches_block(seed, pos):
    noise = LaplaceNoise(1.5, seed=seed, tag="prop")
    assert sample_laplace(noise, position=pos) == sample_laplace(noise, size=pos + 1)[pos]
