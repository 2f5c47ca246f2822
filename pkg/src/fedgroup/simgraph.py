"""Spatial similarity graph over data owners (exact, DP, MPC and hybrid builds).

Owners are numbered 1..m externally; edge arrays use the same ids.  Pairs are
always enumerated i < j in row-major order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fedgroup.core import PrivacyBudget
from fedgroup.mpcsim import MpcCost, MpcSession, secure_cosine
from fedgroup.silo import NOISY, CountVector, GridSpec, SpatialSilo

STRATEGIES = ("exact", "dp", "mpc", "hybrid")


@dataclass
class SimilarityGraph:
    m: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    r: float = 0.5

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.int64)
        self.dst = np.asarray(self.dst, dtype=np.int64)
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if not (len(self.src) == len(self.dst) == len(self.weight)):
            raise ValueError("edge arrays differ in length")
        if len(self.src):
            if np.any(self.src >= self.dst):
                raise ValueError("edges must satisfy i < j (no self loops)")
            if self.src.min() < 1 or self.dst.max() > self.m:
                raise ValueError("edge endpoint outside 1..m")
            order = np.lexsort((self.dst, self.src))
            self.src, self.dst, self.weight = self.src[order], self.dst[order], self.weight[order]
            dup = (np.diff(self.src) == 0) & (np.diff(self.dst) == 0)
            if np.any(dup):
                raise ValueError("duplicate edges")

    @classmethod
    def from_edges(cls, m: int, edges, r: float = 0.5) -> "SimilarityGraph":
        """``edges`` is an iterable of ``(i, j)`` or ``(i, j, w)``; pairs are normalised to i < j."""
        src, dst, w = [], [], []
        for e in edges:
            i, j = int(e[0]), int(e[1])
            i, j = min(i, j), max(i, j)
            src.append(i)
            dst.append(j)
            w.append(float(e[2]) if len(e) > 2 else 1.0)
        return cls(m, src, dst, w, r)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    def edge_set(self) -> set[tuple[int, int]]:
        return set(zip(self.src.tolist(), self.dst.tolist()))

    def edges(self):
        return list(zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist()))

    def adjacency_matrix(self) -> np.ndarray:
        """Dense boolean adjacency, 0-based."""
        a = np.zeros((self.m, self.m), dtype=bool)
        a[self.src - 1, self.dst - 1] = True
        a[self.dst - 1, self.src - 1] = True
        return a

    def neighbor_sets(self) -> list[set[int]]:
        """0-based neighbour sets."""
        nbrs = [set() for _ in range(self.m)]
        for i, j in zip(self.src.tolist(), self.dst.tolist()):
            nbrs[i - 1].add(j - 1)
            nbrs[j - 1].add(i - 1)
        return nbrs

    def degrees(self) -> np.ndarray:
        return (np.bincount(self.src - 1, minlength=self.m)
                + np.bincount(self.dst - 1, minlength=self.m))

    def weight_of(self, i: int, j: int) -> float | None:
        i, j = min(i, j), max(i, j)
        hit = np.nonzero((self.src == i) & (self.dst == j))[0]
        return float(self.weight[hit[0]]) if len(hit) else None


@dataclass(frozen=True)
class GraphBuildConfig:
    r: float = 0.5
    r_l: float | None = None
    r_u: float | None = None
    strategy: str = "hybrid"
    epsilon_graph: float = 1.0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.r_l is None:
            object.__setattr__(self, "r_l", self.r - 0.1)
        if self.r_u is None:
            object.__setattr__(self, "r_u", self.r + 0.1)
        if not self.r_l <= self.r <= self.r_u:
            raise ValueError(f"need r_l <= r <= r_u, got {self.r_l}, {self.r}, {self.r_u}")
        PrivacyBudget(self.epsilon_graph)


@dataclass
class HybridAudit:
    pruned: int = 0
    fast_inserted: int = 0
    mpc_resolved: int = 0

    @property
    def pairs(self) -> int:
        return self.pruned + self.fast_inserted + self.mpc_resolved

    @property
    def mpc_fraction(self) -> float:
        return self.mpc_resolved / self.pairs if self.pairs else 0.0


def _values(v) -> np.ndarray:
    return np.asarray(getattr(v, "values", v), dtype=np.float64)


def cosine_similarity(v_a, v_b) -> float:
    """``v.w / (|v| |w|)``, or 0 when either norm is zero."""
    a, b = _values(v_a), _values(v_b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    na, nb = float(a @ a), float(b @ b)
    if na <= 0.0 or nb <= 0.0:
        return 0.0
    return float(a @ b) / math.sqrt(na * nb)


def cosine_matrix(vectors: np.ndarray) -> np.ndarray:
    """All-pairs cosine with the same arithmetic as :func:`cosine_similarity`."""
    x = np.asarray(vectors, dtype=np.float64)
    gram = x @ x.T
    sq = np.diag(gram).copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = gram / np.sqrt(np.outer(sq, sq))
    zero = sq <= 0.0
    cos[zero, :] = 0.0
    cos[:, zero] = 0.0
    return cos


def _threshold_graph(cos: np.ndarray, r: float) -> SimilarityGraph:
    m = cos.shape[0]
    iu, ju = np.triu_indices(m, k=1)
    w = cos[iu, ju]
    keep = w > r
    return SimilarityGraph(m, iu[keep] + 1, ju[keep] + 1, w[keep], r)


def exact_vectors(silos, grid: GridSpec) -> np.ndarray:
    """Stacked exact count vectors (coordinator-side use only in non-private builds)."""
    return np.stack([s.exact_count_vector(grid).values for s in silos]) if silos else np.empty((0, grid.size))


def build_exact(silos, grid: GridSpec, r: float = 0.5) -> SimilarityGraph:
    """Non-private construction: edge iff exact similarity > r."""
    if not silos:
        return SimilarityGraph(0, [], [], [], r)
    return _threshold_graph(cosine_matrix(exact_vectors(silos, grid)), r)


def _noisy_matrix(noisy_vectors) -> tuple[np.ndarray, float]:
    eps = set()
    rows = []
    for v in noisy_vectors:
        if not isinstance(v, CountVector) or v.kind != NOISY:
            raise ValueError("DP graph construction accepts only noisy count vectors")
        eps.add(v.epsilon_used)
        rows.append(v.values)
    if len(eps) > 1:
        raise ValueError(f"noisy vectors carry different epsilons: {sorted(eps)}")
    return np.stack(rows) if rows else np.empty((0, 0)), (eps.pop() if eps else float("nan"))


def build_dp(noisy_vectors, r: float = 0.5) -> SimilarityGraph:
    """Edge iff noisy cosine > r; weight is the noisy cosine."""
    x, _ = _noisy_matrix(noisy_vectors)
    if len(x) == 0:
        return SimilarityGraph(0, [], [], [], r)
    return _threshold_graph(cosine_matrix(x), r)


def release_noisy_vectors(silos, grid: GridSpec, epsilon_graph: float, seed: int = 0) -> list[CountVector]:
    budget = PrivacyBudget(epsilon_graph)
    return [s.noisy_count_vector(grid, budget, seed) for s in silos]


def build_mpc(silos, grid: GridSpec, r: float = 0.5, seed: int = 0,
              round_latency: float = 1e-3) -> tuple[SimilarityGraph, MpcCost]:
    """Every pair resolved by ``secure_cosine``; edge iff exact weight > r."""
    m = len(silos)
    total = MpcCost(round_latency=round_latency)
    src, dst, w = [], [], []
    for i in range(m):
        for j in range(i + 1, m):
            weight, cost = _secure_pair(silos[i], silos[j], grid, seed, round_latency)
            total = total + cost
            if weight > r:
                src.append(i + 1)
                dst.append(j + 1)
                w.append(weight)
    return SimilarityGraph(m, src, dst, w, r), total


def _secure_pair(a: SpatialSilo, b: SpatialSilo, grid, seed, round_latency):
    session = MpcSession(seed=seed, key=(a.owner_id, b.owner_id), round_latency=round_latency)
    va = a.mpc_input_vector(grid, session.name)
    vb = b.mpc_input_vector(grid, session.name)
    weight, _ = secure_cosine(va, vb, session=session)
    return weight, session.close()


def build_hybrid(silos, grid: GridSpec, config: GraphBuildConfig, seed: int = 0,
                 noisy_vectors=None, round_latency: float = 1e-3
                 ) -> tuple[SimilarityGraph, MpcCost, HybridAudit]:
    """Noisy-cosine filter; borderline pairs escalate to ``secure_cosine``.

    Per pair with noisy weight ``w``: ``w < r_l`` prunes, ``w > r_u`` inserts
    with weight ``w``, anything else is resolved exactly and inserted iff the
    exact weight exceeds ``r``.
    """
    if not config.r_l <= config.r <= config.r_u:
        raise ValueError("threshold ordering violated")
    if noisy_vectors is None:
        noisy_vectors = release_noisy_vectors(silos, grid, config.epsilon_graph, seed)
    x, _ = _noisy_matrix(noisy_vectors)
    m = len(silos)
    audit = HybridAudit()
    total = MpcCost(round_latency=round_latency)
    if m == 0:
        return SimilarityGraph(0, [], [], [], config.r), total, audit
    noisy = cosine_matrix(x)
    src, dst, w = [], [], []
    for i in range(m):
        row = noisy[i]
        for j in range(i + 1, m):
            wt = row[j]
            if wt < config.r_l:
                audit.pruned += 1
            elif wt > config.r_u:
                audit.fast_inserted += 1
                src.append(i + 1)
                dst.append(j + 1)
                w.append(float(wt))
            else:
                audit.mpc_resolved += 1
                exact, cost = _secure_pair(silos[i], silos[j], grid, seed, round_latency)
                total = total + cost
                if exact > config.r:
                    src.append(i + 1)
                    dst.append(j + 1)
                    w.append(exact)
    return SimilarityGraph(m, src, dst, w, config.r), total, audit


def build_graph(silos, grid: GridSpec, config: GraphBuildConfig, seed: int = 0):
    """Dispatch on ``config.strategy``; returns ``(graph, cost, audit)``."""
    if config.strategy == "exact":
        return build_exact(silos, grid, config.r), MpcCost(), None
    if config.strategy == "dp":
        vecs = release_noisy_vectors(silos, grid, config.epsilon_graph, seed)
        return build_dp(vecs, config.r), MpcCost(), None
    if config.strategy == "mpc":
        g, cost = build_mpc(silos, grid, config.r, seed)
        return g, cost, None
    return build_hybrid(silos, grid, config, seed)


@dataclass(frozen=True)
class Fidelity:
    precision: float
    recall: float
    f1: float


def edge_fidelity(candidate: SimilarityGraph, truth: SimilarityGraph) -> Fidelity:
    """Edge-presence precision / recall / F1.

    Conventions: precision is 1 when the candidate has no edges, recall is 1
    when the truth has no edges, and F1 is 0 when both are 0.
    """
    if candidate.m != truth.m:
        raise ValueError(f"node count mismatch: {candidate.m} vs {truth.m}")
    c, t = candidate.edge_set(), truth.edge_set()
    hit = len(c & t)
    precision = hit / len(c) if c else 1.0
    recall = hit / len(t) if t else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return Fidelity(precision, recall, f1)


# -- text format: header "m r", then "i j w" per edge --------------------------

def write_graph(graph: SimilarityGraph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{graph.m} {graph.r}\n")
        for i, j, w in zip(graph.src.tolist(), graph.dst.tolist(), graph.weight.tolist()):
            fh.write(f"{i} {j} {w:.6f}\n")


def read_graph(path) -> SimilarityGraph:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: bad graph header")
        m, r = int(header[0]), float(header[1])
        edges = []
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'i j w'")
            edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
    return SimilarityGraph.from_edges(m, edges, r)
