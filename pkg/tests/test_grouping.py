import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import TOY_GRID
from fedgroup.grouping import (GroupConstraint, Grouping, complement, exhaustive_group, greedy_group,
                               optimal_group_bruteforce, read_grouping, validate_grouping, write_grouping)
from fedgroup.simgraph import SimilarityGraph, build_exact


def random_graph(m, density, rng):
    edges = [(i, j, 0.9) for i, j in itertools.combinations(range(1, m + 1), 2) if rng.random() < density]
    return SimilarityGraph.from_edges(m, edges)


def complete(m):
    return SimilarityGraph.from_edges(m, [(i, j, 0.9) for i, j in itertools.combinations(range(1, m + 1), 2)])


def cycle(m):
    return SimilarityGraph.from_edges(m, [(min(i, i % m + 1), max(i, i % m + 1), 0.9) for i in range(1, m + 1)])


@pytest.fixture
def toy_graph(toy_silos):
    return build_exact(toy_silos, TOY_GRID)


def test_complement_examples(toy_graph):
    assert complement(toy_graph).edge_set() == {(1, 4), (2, 4), (3, 4)}
    assert complement(complete(6)).edge_set() == set()


@given(st.integers(0, 2**32), st.integers(1, 15), st.floats(0, 1))
def test_complement_is_an_involution(seed, m, density):
    g = random_graph(m, density, np.random.default_rng(seed))
    assert complement(complement(g)).edge_set() == g.edge_set()


def test_greedy_on_toy_graph(toy_graph):
    grouping = greedy_group(toy_graph)
    assert grouping.lambda_ == 2
    assert grouping.groups() == [[1, 2, 3], [4]]


def test_greedy_trivial_cases():
    empty = SimilarityGraph.from_edges(5, [])
    assert greedy_group(empty).lambda_ == 5
    assert greedy_group(empty).groups() == [[1], [2], [3], [4], [5]]
    assert greedy_group(complete(7)).lambda_ == 1
    assert greedy_group(SimilarityGraph.from_edges(0, [])).lambda_ == 0


def test_global_cap_on_complete_graph():
    grouping = greedy_group(complete(5), GroupConstraint.global_(2))
    assert grouping.lambda_ == 3
    assert sorted(grouping.sizes().tolist()) == [1, 2, 2]
    assert validate_grouping(complete(5), grouping, GroupConstraint.global_(2)) == []
    # enumeration: no partition of 5 owners into groups of size <= 2 uses fewer than 3 groups
    best = min(len(p) for p in _set_partitions(list(range(5))) if all(len(b) <= 2 for b in p))
    assert best == 3


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1:]
        yield [[first]] + part


def test_personal_caps_use_min_over_members():
    g = complete(4)
    a = greedy_group(g, GroupConstraint.personal([3, 1, 3, 3]))
    assert a.groups() == [[1, 3, 4], [2]]
    b = greedy_group(g, GroupConstraint.personal([2, 3, 3, 3]))
    assert b.groups() == [[1, 2], [3, 4]]
    for grouping, caps in ((a, [3, 1, 3, 3]), (b, [2, 3, 3, 3])):
        assert validate_grouping(g, grouping, GroupConstraint.personal(caps)) == []
    with pytest.raises(ValueError):
        GroupConstraint.personal([1, 0])
    with pytest.raises(ValueError):
        greedy_group(g, GroupConstraint.personal([2, 2]))


@settings(max_examples=100)
@given(st.integers(0, 2**32), st.integers(1, 40), st.floats(0.05, 0.95), st.integers(1, 6))
def test_constrained_greedy_respects_caps(seed, m, density, t):
    rng = np.random.default_rng(seed)
    g = random_graph(m, density, rng)
    glob = GroupConstraint.global_(t)
    assert validate_grouping(g, greedy_group(g, glob), glob) == []
    pers = GroupConstraint.personal(rng.integers(1, 6, m).tolist())
    assert validate_grouping(g, greedy_group(g, pers), pers) == []


@settings(max_examples=200)
@given(st.integers(0, 2**32), st.integers(1, 60), st.floats(0.1, 0.9))
def test_greedy_bound_and_validity(seed, m, density):
    g = random_graph(m, density, np.random.default_rng(seed))
    grouping = greedy_group(g)
    assert grouping.lambda_ <= complement(g).max_degree() + 1
    assert validate_grouping(g, grouping) == []


def test_greedy_is_deterministic():
    g = random_graph(40, 0.5, np.random.default_rng(1))
    assert np.array_equal(greedy_group(g).assignment, greedy_group(g).assignment)


def test_exhaustive_examples(toy_graph):
    ex = exhaustive_group(toy_graph)
    assert ex.lambda_ == 2 and sorted(map(sorted, ex.groups())) == [[1, 2, 3], [4]]
    one_edge = SimilarityGraph.from_edges(6, [(2, 5, 0.9)])
    assert exhaustive_group(one_edge).lambda_ == 5
    assert exhaustive_group(SimilarityGraph.from_edges(6, [])).lambda_ == 6
    with pytest.raises(ValueError):
        exhaustive_group(SimilarityGraph.from_edges(201, []))


def test_exhaustive_first_group_is_a_maximum_clique():
    rng = np.random.default_rng(5)
    for _ in range(60):
        m = int(rng.integers(2, 45))
        g = random_graph(m, float(rng.uniform(0.2, 0.9)), rng)
        ref = nx.Graph()
        ref.add_nodes_from(range(1, m + 1))
        ref.add_edges_from(g.edge_set())
        omega = max(len(c) for c in nx.find_cliques(ref))
        groups = exhaustive_group(g).groups()
        assert max(len(x) for x in groups) == omega
        assert len(groups[0]) == omega


def test_bruteforce_examples(toy_graph):
    assert optimal_group_bruteforce(toy_graph).lambda_ == 2
    assert optimal_group_bruteforce(complete(8)).lambda_ == 1
    c5 = cycle(5)
    assert optimal_group_bruteforce(c5).lambda_ == 3
    # hand enumeration: cliques of C5 are vertices and edges, so 2 groups cover at most 4 owners
    assert all(len(a) + len(b) < 5 for a, b in itertools.combinations(
        [{v} for v in range(1, 6)] + [set(e) for e in c5.edge_set()], 2))
    with pytest.raises(ValueError):
        optimal_group_bruteforce(SimilarityGraph.from_edges(13, []))


def test_bruteforce_matches_partition_enumeration():
    rng = np.random.default_rng(8)
    for _ in range(40):
        m = int(rng.integers(1, 8))
        g = random_graph(m, float(rng.uniform(0.2, 0.8)), rng)
        edges = g.edge_set()
        best = min(len(p) for p in _set_partitions(list(range(1, m + 1)))
                   if all((a, b) in edges for blk in p for a, b in itertools.combinations(sorted(blk), 2)))
        assert optimal_group_bruteforce(g).lambda_ == best


def test_validate_reports_violations(toy_graph):
    bad = Grouping.from_groups([[1, 4], [2, 3]])
    problems = validate_grouping(toy_graph, bad)
    assert any("clique" in p and "1, 4" in p for p in problems)
    too_big = Grouping.from_groups([[1, 2, 3], [4]])
    problems = validate_grouping(toy_graph, too_big, GroupConstraint.global_(2))
    assert any(p.startswith("constraint") for p in problems)
    assert validate_grouping(toy_graph, Grouping([1, 1, 1])) != []
    assert validate_grouping(toy_graph, Grouping([1, 1, 3, 3])) != []


def test_grouping_file_round_trip(tmp_path, toy_graph):
    g = greedy_group(toy_graph)
    write_grouping(g, tmp_path / "groups.txt")
    back = read_grouping(tmp_path / "groups.txt")
    assert np.array_equal(back.assignment, g.assignment)
    (tmp_path / "bad.txt").write_text("2 3\n1 1\n2 1\n")
    with pytest.raises(ValueError):
        read_grouping(tmp_path / "bad.txt")
