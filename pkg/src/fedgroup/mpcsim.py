"""Functional simulation of two-party / chain MPC over the ring Z_{2^64}.

This is NOT cryptographically secure.  It reproduces the results of the
secure protocols exactly and keeps an honest tally of communication rounds
and bytes, so cost comparisons are meaningful.  Secrets are additively
shared; multiplications use Beaver triples from a seeded trusted dealer.

Cost model
----------
* ``secure_sum`` over m parties is a chain: party 1 masks its input with a
  random ring element, each party adds its input and forwards, so the
  masked total reaches party m after ``m - 1`` rounds.  Parties 1 and m then
  hold two additive shares of the total and open them to the coordinator
  (16 bytes, not counted as an inter-party round).
* ``secure_cosine`` on length-T vectors: one round of input sharing
  (``2*8*T`` bytes), one round opening the Beaver masks of ``3T`` products
  (``4*8*3T`` bytes) and one round revealing the three aggregates (48 bytes).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from fedgroup.core import substream

RING_BITS = 64
_MASK = (1 << RING_BITS) - 1
SCALE_BITS = 20
VALUE_BOUND = 1 << 43
INT_BOUND = 1 << 63
WORD = 8

_session_ids = itertools.count(1)


class MpcOverflowError(ArithmeticError):
    pass


@dataclass
class MpcCost:
    rounds: int = 0
    bytes: int = 0
    sessions: int = 0
    round_latency: float = 1e-3

    @property
    def simulated_latency(self) -> float:
        """Seconds, ``rounds * round_latency``."""
        return self.rounds * self.round_latency

    def __add__(self, other: "MpcCost") -> "MpcCost":
        return MpcCost(self.rounds + other.rounds, self.bytes + other.bytes,
                       self.sessions + other.sessions, self.round_latency)

    def scaled(self, k: int) -> "MpcCost":
        return MpcCost(self.rounds * k, self.bytes * k, self.sessions * k, self.round_latency)


@dataclass(frozen=True)
class Share:
    value: int
    party: int


@dataclass(frozen=True)
class FixedPoint:
    """Two's-complement fixed point number stored as a ring element."""

    raw: int
    scale_bits: int = SCALE_BITS

    @classmethod
    def encode(cls, x: float, scale_bits: int = SCALE_BITS) -> "FixedPoint":
        if not abs(x) < VALUE_BOUND:
            raise MpcOverflowError(f"|{x}| exceeds the fixed-point bound 2^43")
        return cls(round(x * (1 << scale_bits)) & _MASK, scale_bits)

    def decode(self) -> float:
        signed = self.raw - (1 << RING_BITS) if self.raw >> (RING_BITS - 1) else self.raw
        return signed / (1 << self.scale_bits)


def share(secret: int, rng: np.random.Generator, parties=(0, 1)) -> tuple[Share, Share]:
    """Split a ring element into two uniformly random additive shares."""
    r = int(rng.integers(0, 1 << 64, dtype=np.uint64))
    return Share(r, parties[0]), Share((secret - r) & _MASK, parties[1])


def reconstruct(*shares: Share) -> int:
    return sum(s.value for s in shares) & _MASK


def to_signed(x: int) -> int:
    x &= _MASK
    return x - (1 << RING_BITS) if x >> (RING_BITS - 1) else x


class MpcSession:
    """Cost tally, dealer randomness and (optionally) per-party transcripts."""

    def __init__(self, seed: int = 0, key: tuple = (), round_latency: float = 1e-3,
                 record_transcript: bool = False, name: str | None = None):
        self.name = name or f"mpc-{next(_session_ids)}"
        self.dealer = substream(seed, "mpc-dealer", *key)
        self.cost = MpcCost(round_latency=round_latency)
        self.record_transcript = record_transcript
        self.transcripts: dict[int, list] = {}
        self.closed = False

    def send(self, src: int, dst: int, payload, n_words: int):
        self.cost.bytes += WORD * n_words
        if self.record_transcript:
            self.transcripts.setdefault(dst, []).append((src, payload))

    def round(self, n: int = 1):
        self.cost.rounds += n

    def random_ring(self, n: int | None = None):
        if n is None:
            return int(self.dealer.integers(0, 1 << 64, dtype=np.uint64))
        return self.dealer.integers(0, 1 << 64, size=n, dtype=np.uint64)

    def close(self) -> MpcCost:
        if not self.closed:
            self.cost.sessions += 1
            self.closed = True
        return self.cost


def cost_report(session: MpcSession | None) -> MpcCost:
    """Totals of a (closed) session; an absent session costs nothing."""
    if session is None:
        return MpcCost()
    return session.close()


# -- secure summation ----------------------------------------------------------

class ChainSum:
    """Masked chain aggregation leaving the total split between two parties.

    ``leader_share + tail_share == sum(inputs)`` in the ring.  Opening the
    shares (optionally after the leader adds an encoded noise term) is done by
    :meth:`open`, which can be called for many noise values at once.
    """

    def __init__(self, encoded_inputs: list[int], session: MpcSession):
        m = len(encoded_inputs)
        if m < 2:
            raise ValueError("secure summation needs at least two parties")
        self.session = session
        mask = session.random_ring()
        acc = (mask + encoded_inputs[0]) & _MASK
        for i in range(1, m):
            session.send(i - 1, i, acc if session.record_transcript else None, 1)
            acc = (acc + encoded_inputs[i]) & _MASK
        session.round(m - 1)
        self.leader_share = (-mask) & _MASK
        self.tail_share = acc
        self.m = m

    def open(self, leader_offsets: np.ndarray | None = None) -> np.ndarray:
        """Reveal ``total + offset`` to the coordinator for every offset given."""
        if leader_offsets is None:
            leader_offsets = np.zeros(1, dtype=np.uint64)
        offs = np.asarray(leader_offsets, dtype=np.uint64)
        with np.errstate(over="ignore"):
            lead = np.uint64(self.leader_share) + offs
            total = lead + np.uint64(self.tail_share)
        self.session.send(0, -1, lead if self.session.record_transcript else None, len(offs))
        self.session.send(self.m - 1, -1, self.tail_share, len(offs))
        return total


def _check_int_inputs(inputs):
    running = 0
    for x in inputs:
        if not isinstance(x, (int, np.integer)):
            raise TypeError(f"secure_sum takes integers, got {type(x).__name__}")
        x = int(x)
        running += x
        if abs(x) >= INT_BOUND or abs(running) >= INT_BOUND:
            raise MpcOverflowError("secure_sum overflow: magnitude reaches 2^63")


def secure_sum(inputs, seed: int = 0, session: MpcSession | None = None) -> tuple[int, MpcCost]:
    """Exact sum of per-party integers via the masked chain.  Rounds = m - 1."""
    inputs = list(inputs)
    _check_int_inputs(inputs)
    own = session is None
    if own:
        session = MpcSession(seed=seed, key=(len(inputs),))
    chain = ChainSum([int(x) & _MASK for x in inputs], session)
    total = to_signed(int(chain.open()[0]))
    return total, session.close() if own else session.cost


def encode_array(values: np.ndarray, scale_bits: int = SCALE_BITS) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.size and not np.all(np.abs(values) < VALUE_BOUND):
        raise MpcOverflowError("value exceeds the fixed-point bound 2^43")
    return np.round(values * (1 << scale_bits)).astype(np.int64).view(np.uint64)


def decode_array(raw: np.ndarray, scale_bits: int = SCALE_BITS) -> np.ndarray:
    return np.asarray(raw, dtype=np.uint64).view(np.int64) / float(1 << scale_bits)


def secure_noisy_sum(values, noise: np.ndarray, session: MpcSession) -> np.ndarray:
    """Fixed-point chain sum opened once per noise draw: ``sum(values) + noise[k]``.

    The leader (first party) adds each noise term to its own share before
    opening, so the coordinator only ever sees perturbed totals.
    """
    values = np.asarray(values, dtype=np.float64)
    if abs(float(values.sum())) >= VALUE_BOUND:
        raise MpcOverflowError("aggregate exceeds the fixed-point bound 2^43")
    chain = ChainSum([int(v) for v in encode_array(values)], session)
    return decode_array(chain.open(encode_array(noise)))


# -- secure cosine similarity --------------------------------------------------

def _pow2_normaliser(v: np.ndarray) -> int:
    """Exponent k with max|v| / 2^k <= 1; integer counts stay exact under the scaling."""
    peak = float(np.max(np.abs(v))) if v.size else 0.0
    if peak <= 1.0:
        return 0
    mant, exp = math.frexp(peak)
    return exp - 1 if mant == 0.5 else exp


def _beaver_dot(x0, x1, y0, y1, session: MpcSession):
    """Shares of sum_i x_i*y_i (ring arithmetic, raw scale = product of input scales)."""
    n = len(x0)
    a = session.random_ring(n)
    b = session.random_ring(n)
    with np.errstate(over="ignore"):
        c = a * b
        a0 = session.random_ring(n)
        a1 = a - a0
        b0 = session.random_ring(n)
        b1 = b - b0
        c0 = session.random_ring(n)
        c1 = c - c0
        # both parties open d = x - a and e = y - b
        d = (x0 - a0) + (x1 - a1)
        e = (y0 - b0) + (y1 - b1)
        z0 = c0 + d * b0 + e * a0 + d * e
        z1 = c1 + d * b1 + e * a1
        return np.uint64(z0.sum(dtype=np.uint64)), np.uint64(z1.sum(dtype=np.uint64)), d, e


def secure_cosine(v_a, v_b, seed: int = 0, session: MpcSession | None = None,
                  key: tuple = ()) -> tuple[float, MpcCost]:
    """Cosine of two exact count vectors computed on shares.

    Each party first rescales its own vector by a power of two (a local,
    similarity-preserving step), so every entry lies in [0, 1] and products of
    20-bit fixed-point values cannot wrap the ring.  The dot product and both
    squared norms are computed with Beaver triples; only those three aggregates
    are opened, and the division / square root happen in the clear.
    """
    va = np.asarray(getattr(v_a, "values", v_a), dtype=np.float64)
    vb = np.asarray(getattr(v_b, "values", v_b), dtype=np.float64)
    if va.shape != vb.shape or va.ndim != 1:
        raise ValueError(f"length mismatch: {va.shape} vs {vb.shape}")
    t = len(va)
    if t >= 1 << 22:
        raise MpcOverflowError("vector too long for the fixed-point ring")
    if not (np.all(np.isfinite(va)) and np.all(np.isfinite(vb))):
        raise ValueError("non-finite vector entries")

    own = session is None
    if own:
        session = MpcSession(seed=seed, key=key or (t,))

    xa = encode_array(va / 2.0 ** _pow2_normaliser(va))
    xb = encode_array(vb / 2.0 ** _pow2_normaliser(vb))

    # round 1: input sharing (A keeps xa0, sends xa1 to B; B symmetric)
    with np.errstate(over="ignore"):
        xa0 = session.random_ring(t)
        xa1 = xa - xa0
        xb1 = session.random_ring(t)
        xb0 = xb - xb1
    session.send(0, 1, xa1 if session.record_transcript else None, t)
    session.send(1, 0, xb0 if session.record_transcript else None, t)
    session.round()

    # round 2: three batched Beaver multiplications, all openings in parallel
    dot0, dot1, d1, e1 = _beaver_dot(xa0, xa1, xb0, xb1, session)
    naa0, naa1, d2, e2 = _beaver_dot(xa0, xa1, xa0, xa1, session)
    nbb0, nbb1, d3, e3 = _beaver_dot(xb0, xb1, xb0, xb1, session)
    for p, q in ((0, 1), (1, 0)):
        session.send(p, q, (d1, e1, d2, e2, d3, e3) if session.record_transcript else None, 6 * t)
    session.round()

    # round 3: open the three aggregates to both parties
    for p, q in ((0, 1), (1, 0)):
        session.send(p, q, None, 3)
    session.round()
    scale = float(1 << (2 * SCALE_BITS))
    with np.errstate(over="ignore"):
        dot = int(np.uint64(dot0 + dot1).view(np.int64)) / scale
        naa = int(np.uint64(naa0 + naa1).view(np.int64)) / scale
        nbb = int(np.uint64(nbb0 + nbb1).view(np.int64)) / scale
    cost = session.close() if own else session.cost
    if naa <= 0 or nbb <= 0:
        return 0.0, cost
    return dot / math.sqrt(naa * nbb), cost


def secure_cosine_cost(t: int) -> MpcCost:
    """Closed-form cost of one ``secure_cosine`` session on length-``t`` vectors."""
    return MpcCost(rounds=3, bytes=WORD * (2 * t + 12 * t + 6), sessions=1)


def secure_sum_cost(m: int, openings: int = 1) -> MpcCost:
    return MpcCost(rounds=m - 1, bytes=WORD * (m - 1 + 2 * openings), sessions=1)
