"""Geometry, range counting, the Laplace mechanism and seeded randomness.

Every random draw in the package goes through :func:`substream` /
:class:`NoiseStream`.  A stream is identified by ``(master seed, role tag,
*key)`` and is *position addressable*: draw ``k`` of a stream is the same
value no matter how the draws are batched, so vectorised and per-call code
paths agree bit for bit.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

_TWO53 = float(1 << 53)


@dataclass(frozen=True)
class Location:
    """A planar point.  Latitude/longitude are treated as plain x/y."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite location ({self.x}, {self.y})")


@dataclass(frozen=True)
class RangeQuery:
    center: Location
    radius: float

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"query radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    def laplace_scale(self, sensitivity: float = 1.0) -> float:
        return sensitivity / self.epsilon


def distance(a: Location, b: Location) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def as_points(records) -> np.ndarray:
    """Coerce a list of :class:`Location` (or an ``(n, 2)`` array) to float64 ``(n, 2)``."""
    if isinstance(records, np.ndarray):
        pts = np.asarray(records, dtype=np.float64)
        if pts.size == 0:
            return pts.reshape(0, 2)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"expected an (n, 2) array, got shape {pts.shape}")
        return pts
    records = list(records)
    if not records:
        return np.empty((0, 2), dtype=np.float64)
    return np.array([(r.x, r.y) for r in records], dtype=np.float64)


def in_range_mask(points: np.ndarray, q: RangeQuery) -> np.ndarray:
    # hypot keeps the vectorised path consistent with distance()
    d = np.hypot(points[:, 0] - q.center.x, points[:, 1] - q.center.y)
    return d < q.radius


def count_in_range(records, q: RangeQuery) -> int:
    """Number of records strictly closer than ``q.radius`` to ``q.center``."""
    pts = as_points(records)
    if len(pts) == 0:
        return 0
    return int(np.count_nonzero(in_range_mask(pts, q)))


# -- randomness ---------------------------------------------------------------

def tag_id(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def _key_part(k) -> int:
    return tag_id(k) if isinstance(k, str) else int(k)


def _seed_sequence(seed: int, tag: str, key: Sequence) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(tag_id(tag), *map(_key_part, key)))


def substream(seed: int, tag: str, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, tag, *key)``.

    Used for non-noise randomness (data generation, dealer material).
    """
    return np.random.Generator(np.random.PCG64(_seed_sequence(seed, tag, key)))


class NoiseStream:
    """Position-addressable stream of open-interval uniforms.

    Each draw consumes exactly one 64-bit PCG64 output, so ``seek(k)`` followed
    by a draw yields the k-th value of the stream.
    """

    def __init__(self, seed: int, tag: str, *key: int):
        self.seed = int(seed)
        self.tag = tag
        self.key = tuple(_key_part(k) for k in key)
        self._state0 = np.random.PCG64(_seed_sequence(self.seed, tag, self.key)).state
        self._bitgen = np.random.PCG64()
        self._bitgen.state = self._state0
        self.position = 0

    def seek(self, position: int) -> "NoiseStream":
        if position < 0:
            raise ValueError("stream position must be non-negative")
        if position < self.position:
            self._bitgen.state = self._state0
            self.position = 0
        if position > self.position:
            self._bitgen.advance(position - self.position)
            self.position = position
        return self

    def uniform(self, n: int) -> np.ndarray:
        raw = self._bitgen.random_raw(n)
        self.position += n
        # top 53 bits, shifted by half a unit: values lie strictly inside (0, 1)
        return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) / _TWO53

    def laplace(self, scale: float, n: int) -> np.ndarray:
        return laplace_from_uniform(self.uniform(n), scale)

    def laplace_at(self, scale: float, positions: Iterable[int]) -> np.ndarray:
        """Draws at arbitrary stream positions (sorted internally, returned in input order)."""
        positions = np.asarray(list(positions) if not isinstance(positions, np.ndarray) else positions,
                               dtype=np.int64)
        if positions.size == 0:
            return np.empty(0)
        lo, hi = int(positions.min()), int(positions.max())
        if hi - lo + 1 <= 4 * positions.size + 64:
            self.seek(lo)
            block = self.laplace(scale, hi - lo + 1)
            return block[positions - lo]
        out = np.empty(positions.size)
        for idx in np.argsort(positions, kind="stable"):
            self.seek(int(positions[idx]))
            out[idx] = self.laplace(scale, 1)[0]
        return out


def laplace_from_uniform(u: np.ndarray, scale: float) -> np.ndarray:
    """Inverse-CDF transform of uniforms in (0, 1) to Laplace(0, scale)."""
    centred = u - 0.5
    return -scale * np.sign(centred) * np.log1p(-2.0 * np.abs(centred))


@dataclass(frozen=True)
class LaplaceNoise:
    """A Laplace(0, scale) source bound to one named substream."""

    scale: float
    seed: int = 0
    tag: str = "laplace"
    key: tuple = ()

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"Laplace scale must be positive, got {self.scale}")

    @classmethod
    def for_budget(cls, budget: PrivacyBudget, sensitivity: float = 1.0, **stream) -> "LaplaceNoise":
        return cls(scale=budget.laplace_scale(sensitivity), **stream)

    def stream(self) -> NoiseStream:
        return NoiseStream(self.seed, self.tag, *self.key)

    @property
    def variance(self) -> float:
        return 2.0 * self.scale ** 2


def sample_laplace(noise: LaplaceNoise, position: int = 0, size: int | None = None):
    """Draw from ``noise`` starting at stream ``position``.

    Returns a float when ``size`` is None, else an array of ``size`` draws.
    """
    stream = noise.stream().seek(position)
    if size is None:
        return float(stream.laplace(noise.scale, 1)[0])
    return stream.laplace(noise.scale, size)
