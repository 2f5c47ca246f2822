"""Partition owners into disjoint r-groups (cliques of the similarity graph).

* :func:`greedy_group` -- lowest-available colour on the complement graph,
  optionally with group-size caps.
* :func:`exhaustive_group` -- repeatedly peel off a maximum clique.
* :func:`optimal_group_bruteforce` -- exact minimum clique partition, small m.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fedgroup import kernels
from fedgroup.simgraph import SimilarityGraph

EXHAUSTIVE_CAP = 200
BRUTEFORCE_CAP = 12


@dataclass
class Grouping:
    """``assignment[k]`` is the 1-based group id of owner ``k + 1``."""

    assignment: np.ndarray

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=np.int64)

    @property
    def m(self) -> int:
        return len(self.assignment)

    @property
    def lambda_(self) -> int:
        return int(self.assignment.max()) if len(self.assignment) else 0

    def groups(self) -> list[list[int]]:
        """Owner ids (1-based) per group, ordered by group id."""
        out = [[] for _ in range(self.lambda_)]
        for owner, gid in enumerate(self.assignment.tolist(), start=1):
            out[gid - 1].append(owner)
        return out

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.lambda_ + 1)[1:]

    @classmethod
    def from_groups(cls, groups, m: int | None = None) -> "Grouping":
        m = m if m is not None else sum(len(g) for g in groups)
        assignment = np.zeros(m, dtype=np.int64)
        for gid, members in enumerate(groups, start=1):
            for u in members:
                assignment[u - 1] = gid
        return cls(assignment)


@dataclass(frozen=True)
class GroupConstraint:
    kind: str = "none"
    t: int | None = None
    t_u: tuple | None = None

    @classmethod
    def none(cls):
        return cls()

    @classmethod
    def global_(cls, t: int):
        if t < 1:
            raise ValueError("global group-size cap must be >= 1")
        return cls("global", t=int(t))

    @classmethod
    def personal(cls, t_u):
        t_u = tuple(int(x) for x in t_u)
        if any(x < 1 for x in t_u):
            raise ValueError("every personal cap t_u must be >= 1")
        return cls("personal", t_u=t_u)

    def caps(self, m: int) -> np.ndarray:
        if self.kind == "none":
            return np.full(m, max(m, 1), dtype=np.int64)
        if self.kind == "global":
            return np.full(m, self.t, dtype=np.int64)
        if self.kind == "personal":
            if len(self.t_u) != m:
                raise ValueError(f"need {m} personal caps, got {len(self.t_u)}")
            if min(self.t_u, default=1) < 1:
                raise ValueError("every personal cap t_u must be >= 1")
            return np.asarray(self.t_u, dtype=np.int64)
        raise ValueError(f"unknown constraint kind {self.kind!r}")


@dataclass
class UnweightedGraph:
    m: int
    src: np.ndarray
    dst: np.ndarray

    def edge_set(self) -> set[tuple[int, int]]:
        return set(zip(self.src.tolist(), self.dst.tolist()))

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """0-based symmetric CSR (indptr, indices), neighbours sorted."""
        a = np.concatenate([self.src, self.dst]) - 1
        b = np.concatenate([self.dst, self.src]) - 1
        order = np.lexsort((b, a))
        a, b = a[order], b[order]
        indptr = np.zeros(self.m + 1, dtype=np.int64)
        np.cumsum(np.bincount(a, minlength=self.m), out=indptr[1:])
        return indptr, b.astype(np.int64)

    def max_degree(self) -> int:
        if self.m == 0 or len(self.src) == 0:
            return 0
        deg = np.bincount(self.src - 1, minlength=self.m) + np.bincount(self.dst - 1, minlength=self.m)
        return int(deg.max())


def complement(g) -> UnweightedGraph:
    adj = g.adjacency_matrix() if isinstance(g, SimilarityGraph) else _adjacency(g)
    miss = ~adj
    np.fill_diagonal(miss, False)
    iu, ju = np.nonzero(np.triu(miss, k=1))
    return UnweightedGraph(g.m, iu.astype(np.int64) + 1, ju.astype(np.int64) + 1)


def _adjacency(g: UnweightedGraph) -> np.ndarray:
    a = np.zeros((g.m, g.m), dtype=bool)
    a[g.src - 1, g.dst - 1] = True
    a[g.dst - 1, g.src - 1] = True
    return a


def greedy_group(g: SimilarityGraph, constraint: GroupConstraint | None = None, impl=None) -> Grouping:
    """Greedy grouping in ascending owner id; at most (complement max degree + 1) groups unconstrained."""
    constraint = constraint or GroupConstraint.none()
    caps = constraint.caps(g.m)
    if g.m == 0:
        return Grouping(np.zeros(0, dtype=np.int64))
    indptr, indices = complement(g).csr()
    return Grouping(kernels.greedy_color(indptr, indices, caps, impl=impl))


# -- maximum clique (bitset branch and bound, colouring bound) -----------------

def _bitsets(g) -> list[int]:
    nbrs = [0] * g.m
    for i, j in zip(g.src.tolist(), g.dst.tolist()):
        nbrs[i - 1] |= 1 << (j - 1)
        nbrs[j - 1] |= 1 << (i - 1)
    return nbrs


def _bits(x: int):
    while x:
        low = x & -x
        yield low.bit_length() - 1
        x ^= low


def _colour_bound(cand: int, nbrs: list[int]) -> list[tuple[int, int]]:
    """Greedy colouring of ``cand``; returns (vertex, colour) in non-decreasing colour order."""
    out = []
    colour = 0
    uncoloured = cand
    while uncoloured:
        colour += 1
        avail = uncoloured
        while avail:
            v = (avail & -avail).bit_length() - 1
            avail &= ~nbrs[v] & ~(1 << v)
            uncoloured &= ~(1 << v)
            out.append((v, colour))
    return out


def maximum_clique(nbrs: list[int], cand: int) -> list[int]:
    """A maximum clique inside vertex bitset ``cand`` (0-based, sorted)."""
    best: list[int] = []

    def expand(clique: list[int], p: int):
        nonlocal best
        order = _colour_bound(p, nbrs)
        for v, colour in reversed(order):
            if len(clique) + colour <= len(best):
                return
            clique.append(v)
            newp = p & nbrs[v]
            if newp:
                expand(clique, newp)
            elif len(clique) > len(best):
                best = sorted(clique)
            clique.pop()
            p &= ~(1 << v)

    if cand:
        expand([], cand)
    return best


def exhaustive_group(g: SimilarityGraph, cap: int = EXHAUSTIVE_CAP) -> Grouping:
    """Repeatedly extract a maximum clique among the unassigned owners."""
    if g.m > cap:
        raise ValueError(f"exhaustive grouping refused: m={g.m} exceeds cap {cap}")
    nbrs = _bitsets(g)
    remaining = (1 << g.m) - 1
    groups = []
    while remaining:
        clique = maximum_clique(nbrs, remaining)
        groups.append([v + 1 for v in clique])
        for v in clique:
            remaining &= ~(1 << v)
    return Grouping.from_groups(groups, g.m)


def optimal_group_bruteforce(g: SimilarityGraph, cap: int = BRUTEFORCE_CAP) -> Grouping:
    """Minimum clique partition by exhaustive search over set partitions."""
    if g.m > cap:
        raise ValueError(f"brute-force oracle refused: m={g.m} exceeds {cap}")
    m = g.m
    if m == 0:
        return Grouping(np.zeros(0, dtype=np.int64))
    nbrs = _bitsets(g)
    best = [list(range(1, m + 1))]  # m singletons
    best_k = m
    groups: list[int] = []  # member bitsets
    assign = [0] * m

    def search(v: int):
        nonlocal best_k
        if len(groups) >= best_k:
            return
        if v == m:
            best_k = len(groups)
            best[0] = assign.copy()
            return
        for k, members in enumerate(groups):
            if members & ~nbrs[v] == 0:
                groups[k] |= 1 << v
                assign[v] = k + 1
                search(v + 1)
                groups[k] = members
        if len(groups) + 1 < best_k:
            groups.append(1 << v)
            assign[v] = len(groups)
            search(v + 1)
            groups.pop()

    search(0)
    return Grouping(best[0])


def validate_grouping(g: SimilarityGraph, grouping: Grouping,
                      constraint: GroupConstraint | None = None) -> list[str]:
    """Violations of coverage, disjointness, the clique condition and size caps (empty = ok)."""
    problems = []
    a = grouping.assignment
    if len(a) != g.m:
        return [f"coverage: grouping has {len(a)} owners, graph has {g.m}"]
    if g.m and a.min() < 1:
        problems.append(f"coverage: owners {np.nonzero(a < 1)[0] + 1} unassigned")
    if g.m and set(np.unique(a).tolist()) != set(range(1, grouping.lambda_ + 1)):
        problems.append("group ids are not contiguous 1..lambda")
    edges = g.edge_set()
    for gid, members in enumerate(grouping.groups(), start=1):
        for x in range(len(members)):
            for y in range(x + 1, len(members)):
                if (members[x], members[y]) not in edges:
                    problems.append(f"clique: group {gid} has non-adjacent owners {members[x]}, {members[y]}")
    if constraint is not None and constraint.kind != "none":
        caps = constraint.caps(g.m)
        sizes = grouping.sizes()
        for owner, gid in enumerate(a.tolist(), start=1):
            if gid >= 1 and sizes[gid - 1] > caps[owner - 1]:
                problems.append(f"constraint: owner {owner} in group {gid} of size "
                                f"{sizes[gid - 1]} > cap {caps[owner - 1]}")
    return problems


GROUPERS = {
    "greedy": greedy_group,
    "exhaustive": exhaustive_group,
    "bruteforce": optimal_group_bruteforce,
}


def write_grouping(grouping: Grouping, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{grouping.m} {grouping.lambda_}\n")
        for owner, gid in enumerate(grouping.assignment.tolist(), start=1):
            fh.write(f"{owner} {gid}\n")


def read_grouping(path) -> Grouping:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: bad grouping header")
        m, lam = int(header[0]), int(header[1])
        assignment = np.zeros(m, dtype=np.int64)
        for line in fh:
            parts = line.split()
            if parts:
                assignment[int(parts[0]) - 1] = int(parts[1])
    grouping = Grouping(assignment)
    if grouping.lambda_ != lam:
        raise ValueError(f"{path}: header says lambda={lam}, file has {grouping.lambda_}")
    return grouping
