"""A single data owner: private records, grid count vectors, and the release log.

Anything that leaves a silo goes through a method that writes a
:class:`Release` entry to the federation's :class:`ReleaseLog`.  Only two
kinds are legitimate in a private run: Laplace-perturbed values (``noisy``)
and secret shares handed to an MPC session (``share``).  The plaintext
reference engine is the one caller that releases ``exact`` values, which is
precisely what an audit should flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from fedgroup import kernels
from fedgroup.core import NoiseStream, PrivacyBudget, RangeQuery, as_points, in_range_mask

NOISY = "noisy"
SHARE = "share"
EXACT = "exact"
RAW = "raw"
_PRIVATE_KINDS = frozenset({NOISY, SHARE})


@dataclass(frozen=True)
class GridSpec:
    """``cells_per_axis`` x ``cells_per_axis`` grid over a bounding box."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float
    cells_per_axis: int

    def __post_init__(self):
        if not (self.max_x > self.min_x and self.max_y > self.min_y):
            raise ValueError("degenerate grid bounding box")
        if self.cells_per_axis < 1:
            raise ValueError("cells_per_axis must be >= 1")

    @property
    def bbox(self):
        return (self.min_x, self.min_y, self.max_x, self.max_y)

    @property
    def size(self) -> int:
        return self.cells_per_axis * self.cells_per_axis

    @property
    def diagonal(self) -> float:
        return math.hypot(self.max_x - self.min_x, self.max_y - self.min_y)

    @classmethod
    def from_points(cls, points: np.ndarray, cells_per_axis: int, pad: float = 1e-9) -> "GridSpec":
        """Grid covering the extent of ``points`` (padded when the extent is flat)."""
        pts = as_points(points)
        if len(pts) == 0:
            raise ValueError("cannot derive a grid from zero points")
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        span = np.maximum(hi - lo, pad)
        hi = np.where(hi - lo < pad, lo + span, hi)
        return cls(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]), cells_per_axis)

    def cell_of(self, x: float, y: float) -> int:
        k = self.cells_per_axis
        col = min(max(math.floor(((x - self.min_x) / (self.max_x - self.min_x)) * k), 0), k - 1)
        row = min(max(math.floor(((self.max_y - y) / (self.max_y - self.min_y)) * k), 0), k - 1)
        return row * k + col


@dataclass
class CountVector:
    values: np.ndarray
    kind: str = EXACT
    epsilon_used: float | None = None
    owner_id: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.kind not in (EXACT, NOISY):
            raise ValueError(f"unknown count vector kind {self.kind!r}")
        if self.kind == NOISY and not self.epsilon_used:
            raise ValueError("noisy count vectors must carry the epsilon used")

    def __len__(self):
        return len(self.values)


@dataclass(slots=True)
class Release:
    owner_id: int
    kind: str
    purpose: str
    epsilon: float | None
    n_values: int
    session: str | None = None


class ReleaseLog:
    """Append-only record of every value that crosses a silo boundary."""

    def __init__(self):
        self.entries: list[Release] = []

    def record(self, owner_id, kind, purpose, n_values=1, epsilon=None, session=None):
        if kind == NOISY and not epsilon:
            raise ValueError("noisy releases must be tagged with their epsilon")
        self.entries.append(Release(int(owner_id), kind, purpose, epsilon, int(n_values), session))

    def violations(self) -> list[Release]:
        """Entries that are neither DP-protected nor secret shares."""
        return [e for e in self.entries if e.kind not in _PRIVATE_KINDS]

    def epsilon_spent(self, owner_id: int) -> float:
        """Total epsilon an owner has released under, summed naively over releases.

        A vector release counts once (its cells are disjoint); repeated scalar
        releases add up.
        """
        total = 0.0
        for e in self.entries:
            if e.owner_id == owner_id and e.kind == NOISY:
                total += e.epsilon * (1 if e.purpose.endswith("vector") else e.n_values)
        return total

    def __len__(self):
        return len(self.entries)

    def clear(self):
        self.entries.clear()


class SpatialSilo:
    """One owner's private database ``records`` (an ``(n, 2)`` array)."""

    def __init__(self, owner_id: int, records, attributes=None, log: ReleaseLog | None = None):
        self.owner_id = int(owner_id)
        self.records = as_points(records)
        if attributes is not None:
            attributes = np.asarray(attributes, dtype=np.float64)
            if attributes.shape != (len(self.records),):
                raise ValueError("one attribute per record required")
            if np.any(attributes < 0):
                raise ValueError("attributes must be non-negative")
        self.attributes = attributes
        self.log = log if log is not None else ReleaseLog()

    def __len__(self):
        return len(self.records)

    def __repr__(self):
        return f"SpatialSilo(owner_id={self.owner_id}, n={len(self.records)})"

    # private computations -- never logged, never returned to a coordinator

    def exact_count_vector(self, grid: GridSpec) -> CountVector:
        pts = self.records
        owner = np.zeros(len(pts), dtype=np.int64)
        counts = kernels.grid_counts(pts[:, 0], pts[:, 1], owner, grid.bbox, grid.cells_per_axis, 1)[0]
        return CountVector(counts, EXACT, owner_id=self.owner_id)

    def partial_count(self, q: RangeQuery) -> int:
        if len(self.records) == 0:
            return 0
        return int(np.count_nonzero(in_range_mask(self.records, q)))

    def truncated_partial_sum(self, q: RangeQuery, theta: float) -> float:
        if not theta > 0:
            raise ValueError(f"truncation theta must be positive, got {theta}")
        if self.attributes is None:
            raise ValueError(f"silo {self.owner_id} has no attribute column")
        if len(self.records) == 0:
            return 0.0
        mask = in_range_mask(self.records, q)
        return float(np.minimum(self.attributes[mask], theta).sum())

    # releases

    def noisy_count_vector(self, grid: GridSpec, budget: PrivacyBudget, seed: int = 0) -> CountVector:
        exact = self.exact_count_vector(grid).values
        noise = NoiseStream(seed, "count-vector", self.owner_id).laplace(budget.laplace_scale(1.0), len(exact))
        self.log.record(self.owner_id, NOISY, "count-vector", len(exact), budget.epsilon)
        return CountVector(exact + noise, NOISY, budget.epsilon, owner_id=self.owner_id)

    def noisy_partial_count(self, q: RangeQuery, budget: PrivacyBudget, seed: int = 0,
                            query_id: int = 0, trial: int = 0) -> float:
        stream = partial_noise_stream(seed, self.owner_id, query_id).seek(trial)
        value = self.partial_count(q) + float(stream.laplace(budget.laplace_scale(1.0), 1)[0])
        self.log.record(self.owner_id, NOISY, "partial-count", 1, budget.epsilon)
        return value

    def mpc_input_vector(self, grid: GridSpec, session: str) -> CountVector:
        """Exact count vector handed straight into an MPC session as shares."""
        v = self.exact_count_vector(grid)
        self.log.record(self.owner_id, SHARE, "count-vector", len(v), session=session)
        return v


def partial_noise_stream(seed: int, owner_id: int, query_id: int) -> NoiseStream:
    return NoiseStream(seed, "partial-count", owner_id, query_id)


def build_count_vector(silo: SpatialSilo, grid: GridSpec) -> CountVector:
    return silo.exact_count_vector(grid)


def noisy_count_vector(silo: SpatialSilo, grid: GridSpec, budget: PrivacyBudget, seed: int = 0) -> CountVector:
    return silo.noisy_count_vector(grid, budget, seed)


def partial_count(silo: SpatialSilo, q: RangeQuery) -> int:
    return silo.partial_count(q)


def noisy_partial_count(silo: SpatialSilo, q: RangeQuery, budget: PrivacyBudget, seed: int = 0,
                        query_id: int = 0, trial: int = 0) -> float:
    return silo.noisy_partial_count(q, budget, seed, query_id, trial)


def truncated_partial_sum(silo: SpatialSilo, q: RangeQuery, theta: float) -> float:
    return silo.truncated_partial_sum(q, theta)
