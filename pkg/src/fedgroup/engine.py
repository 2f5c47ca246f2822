"""End-to-end query engines over a federation of silos.

Engines
-------
plaintext  exact sum of partial answers (non-private reference / ground truth)
dp         every owner adds Lap(s/eps) to its partial answer; Var = 2 m s^2/eps^2
mpc        one chain secure sum over all owners plus one Lap(s/eps); Var = 2 s^2/eps^2
fedgroup   secure sum inside each group plus one Lap(s/eps) per group; Var = 2 lambda s^2/eps^2

(``s`` is the per-record sensitivity: 1 for COUNT, ``theta`` for truncated SUM.)

Repeated trials of one query are evaluated in a batch: partial answers and
the secure aggregation are computed once, and trial ``t`` uses position ``t``
of every noise stream.  ``answer_*(..., trial=t)`` returns exactly element
``t`` of the corresponding batch.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from fedgroup import kernels
from fedgroup.core import NoiseStream, PrivacyBudget, RangeQuery
from fedgroup.grouping import Grouping
from fedgroup.mpcsim import MpcCost, MpcSession, secure_noisy_sum
from fedgroup.silo import EXACT, NOISY, SHARE, GridSpec, ReleaseLog, SpatialSilo, partial_noise_stream

ENGINES = ("plaintext", "dp", "mpc", "fedgroup")


class Federation:
    """Silos 1..m sharing one release log, plus an optional grouping.

    Records are also packed into flat arrays so per-owner partial answers are
    computed in one kernel pass; that computation is each owner's own local
    work and is never logged as a release.
    """

    def __init__(self, silos: list[SpatialSilo], grid: GridSpec, grouping: Grouping | None = None,
                 log: ReleaseLog | None = None):
        ids = [s.owner_id for s in silos]
        if ids != list(range(1, len(silos) + 1)):
            raise ValueError("owner ids must be 1..m in order")
        self.silos = silos
        self.grid = grid
        self.log = log if log is not None else ReleaseLog()
        for s in silos:
            s.log = self.log
        self._grouping = None
        self.grouping = grouping
        self._packed = None

    @property
    def m(self) -> int:
        return len(self.silos)

    @property
    def grouping(self) -> Grouping | None:
        return self._grouping

    @grouping.setter
    def grouping(self, grouping: Grouping | None):
        if grouping is not None and grouping.m != self.m:
            raise ValueError(f"grouping covers {grouping.m} owners, federation has {self.m}")
        self._grouping = grouping

    def packed(self):
        if self._packed is None:
            sizes = [len(s) for s in self.silos]
            n = sum(sizes)
            pts = np.concatenate([s.records for s in self.silos]) if n else np.empty((0, 2))
            owner = np.repeat(np.arange(self.m, dtype=np.int64), sizes)
            attrs = None
            if self.silos and all(s.attributes is not None for s in self.silos):
                attrs = np.concatenate([s.attributes for s in self.silos]) if n else np.empty(0)
            self._packed = (np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]), owner, attrs)
        return self._packed

    def partial_counts(self, q: RangeQuery) -> np.ndarray:
        xs, ys, owner, _ = self.packed()
        return kernels.disc_counts(xs, ys, owner, q.center.x, q.center.y, q.radius, self.m)

    def partial_sums(self, q: RangeQuery, theta: float) -> np.ndarray:
        if not theta > 0:
            raise ValueError(f"truncation theta must be positive, got {theta}")
        xs, ys, owner, attrs = self.packed()
        if attrs is None:
            raise ValueError("SUM/AVG queries need an attribute on every silo")
        return kernels.disc_sums(xs, ys, owner, np.minimum(attrs, theta),
                                 q.center.x, q.center.y, q.radius, self.m)


@dataclass
class QueryResult:
    answer: float
    true_answer: float
    engine: str
    epsilon_query: float
    lambda_or_m: int
    mpc_cost: MpcCost | None = None
    wall_time: float = 0.0
    defined: bool = True

    @property
    def error(self) -> float:
        return self.answer - self.true_answer


@dataclass
class TrialBatch:
    """Answers of repeated identical queries (trial positions ``positions``)."""

    answers: np.ndarray
    true_answer: float
    engine: str
    epsilon_query: float
    lambda_or_m: int
    positions: np.ndarray
    mpc_cost: MpcCost | None = None
    wall_time: float = 0.0
    defined: np.ndarray | None = None

    @property
    def errors(self) -> np.ndarray:
        return self.answers - self.true_answer

    def result(self, k: int = 0) -> QueryResult:
        return QueryResult(float(self.answers[k]), self.true_answer, self.engine, self.epsilon_query,
                           self.lambda_or_m, self.mpc_cost, self.wall_time,
                           bool(self.defined[k]) if self.defined is not None else True)


def theoretical_variance(engine: str, m: int, lam: int, epsilon: float, sensitivity: float = 1.0) -> float:
    instances = {"plaintext": 0, "dp": m, "mpc": 1, "fedgroup": lam}[engine]
    return 2.0 * instances * sensitivity ** 2 / epsilon ** 2


def _positions(trials, start):
    if isinstance(trials, (int, np.integer)):
        return np.arange(start, start + int(trials), dtype=np.int64)
    return np.asarray(trials, dtype=np.int64)


def _partials(fed: Federation, q: RangeQuery, theta):
    if theta is None:
        return fed.partial_counts(q).astype(np.float64), 1.0, "partial-count"
    return fed.partial_sums(q, theta), float(theta), "partial-sum"


def _dp(fed, q, eps, pos, seed, query_id, theta):
    partials, sens, purpose = _partials(fed, q, theta)
    scale = sens / eps
    tag = "partial-count" if theta is None else "partial-sum"
    answers = np.zeros(len(pos))
    for k, s in enumerate(fed.silos):
        noise = (partial_noise_stream(seed, s.owner_id, query_id) if theta is None
                 else NoiseStream(seed, tag, s.owner_id, query_id)).laplace_at(scale, pos)
        answers += partials[k] + noise
        fed.log.record(s.owner_id, NOISY, purpose, len(pos), eps)
    return answers, float(partials.sum()), fed.m, None


def _secure_group_answers(fed, members, partials, noise, seed, key, purpose, round_latency):
    """Noisy total of one group's partials; members' raw values stay inside the session."""
    session = MpcSession(seed=seed, key=key, round_latency=round_latency)
    for u in members:
        fed.log.record(u, SHARE, purpose, 1, session=session.name)
    out = secure_noisy_sum(partials[np.asarray(members) - 1], noise, session)
    return out, session.close()


def _mpc(fed, q, eps, pos, seed, query_id, theta, round_latency=1e-3):
    partials, sens, purpose = _partials(fed, q, theta)
    noise = NoiseStream(seed, "mpc-noise" if theta is None else "mpc-noise-sum", query_id).laplace_at(sens / eps, pos)
    members = list(range(1, fed.m + 1))
    if fed.m == 1:
        fed.log.record(1, NOISY, purpose, len(pos), eps)
        return partials[0] + noise, float(partials.sum()), 1, MpcCost(round_latency=round_latency)
    answers, cost = _secure_group_answers(fed, members, partials, noise, seed, ("mpc", query_id),
                                          purpose, round_latency)
    return answers, float(partials.sum()), 1, cost


def _fedgroup(fed, q, eps, pos, seed, query_id, theta, round_latency=1e-3):
    if fed.grouping is None:
        raise ValueError("fedgroup engine needs a grouping on the federation")
    partials, sens, purpose = _partials(fed, q, theta)
    scale = sens / eps
    answers = np.zeros(len(pos))
    total_cost = MpcCost(round_latency=round_latency)
    for gid, members in enumerate(fed.grouping.groups(), start=1):
        noise = NoiseStream(seed, "group-noise" if theta is None else "group-noise-sum",
                            gid, query_id).laplace_at(scale, pos)
        if len(members) == 1:
            answers += partials[members[0] - 1] + noise
            fed.log.record(members[0], NOISY, purpose, len(pos), eps)
            continue
        out, cost = _secure_group_answers(fed, members, partials, noise, seed, ("group", gid, query_id),
                                          purpose, round_latency)
        answers += out
        total_cost = total_cost + cost
    return answers, float(partials.sum()), fed.grouping.lambda_, total_cost


def _plaintext(fed, q, eps, pos, seed, query_id, theta):
    partials, _, purpose = _partials(fed, q, theta)
    for s in fed.silos:
        fed.log.record(s.owner_id, EXACT, purpose, 1)
    total = float(partials.sum())
    return np.full(len(pos), total), total, 0, None


_RUNNERS = {"plaintext": _plaintext, "dp": _dp, "mpc": _mpc, "fedgroup": _fedgroup}


def run_trials(engine: str, fed: Federation, q: RangeQuery, epsilon: float, trials=1, *,
               seed: int = 0, query_id: int = 0, start: int = 0, theta: float | None = None) -> TrialBatch:
    """Evaluate ``trials`` repetitions of one query (COUNT, or truncated SUM when ``theta`` is set)."""
    if engine not in _RUNNERS:
        raise ValueError(f"unknown engine {engine!r}")
    if engine != "plaintext":
        PrivacyBudget(epsilon)
    pos = _positions(trials, start)
    t0 = time.perf_counter()
    answers, true, count, cost = _RUNNERS[engine](fed, q, epsilon, pos, seed, query_id, theta)
    wall = time.perf_counter() - t0
    return TrialBatch(answers, true, engine, epsilon, count, pos, cost, wall)


def _single(engine, fed, q, epsilon, seed, query_id, trial, theta=None) -> QueryResult:
    return run_trials(engine, fed, q, epsilon, [trial], seed=seed, query_id=query_id, theta=theta).result(0)


def answer_plaintext(fed: Federation, q: RangeQuery) -> QueryResult:
    """Exact federated count.  Not private: every partial is released in the clear."""
    return _single("plaintext", fed, q, float("nan"), 0, 0, 0)


def answer_dp_baseline(fed, q, epsilon, *, seed=0, query_id=0, trial=0) -> QueryResult:
    return _single("dp", fed, q, epsilon, seed, query_id, trial)


def answer_mpc_baseline(fed, q, epsilon, *, seed=0, query_id=0, trial=0) -> QueryResult:
    return _single("mpc", fed, q, epsilon, seed, query_id, trial)


def answer_fedgroup(fed, q, epsilon, *, seed=0, query_id=0, trial=0) -> QueryResult:
    return _single("fedgroup", fed, q, epsilon, seed, query_id, trial)


def answer_sum(fed, q, epsilon, theta, engine="fedgroup", *, seed=0, query_id=0, trial=0) -> QueryResult:
    """Range SUM of the truncated attribute; noise scale ``theta / epsilon``."""
    if not theta > 0:
        raise ValueError(f"truncation theta must be positive, got {theta}")
    return _single(engine, fed, q, epsilon, seed, query_id, trial, theta=theta)


def avg_trials(engine, fed, q, epsilon, theta, trials=1, *, seed=0, query_id=0, start=0,
               split: float = 0.5) -> TrialBatch:
    """Noisy SUM / noisy COUNT with budget ``split * eps`` and ``(1 - split) * eps``.

    Trials whose noisy count is <= 0 are flagged undefined and answer NaN.
    """
    if not 0 < split < 1:
        raise ValueError("budget split must lie in (0, 1)")
    if not theta > 0:
        raise ValueError(f"truncation theta must be positive, got {theta}")
    t0 = time.perf_counter()
    eps_sum, eps_cnt = epsilon * split, epsilon * (1 - split)
    if engine == "plaintext":
        eps_sum = eps_cnt = float("nan")
    s = run_trials(engine, fed, q, eps_sum, trials, seed=seed, query_id=query_id, start=start, theta=theta)
    c = run_trials(engine, fed, q, eps_cnt, trials, seed=seed, query_id=query_id, start=start)
    defined = c.answers > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        answers = np.where(defined, s.answers / np.where(defined, c.answers, 1.0), np.nan)
    true = s.true_answer / c.true_answer if c.true_answer > 0 else float("nan")
    cost = None
    if s.mpc_cost is not None or c.mpc_cost is not None:
        cost = (s.mpc_cost or MpcCost()) + (c.mpc_cost or MpcCost())
    return TrialBatch(answers, true, engine, epsilon, s.lambda_or_m, s.positions, cost,
                      time.perf_counter() - t0, defined)


def answer_avg(fed, q, epsilon, theta, engine="fedgroup", *, seed=0, query_id=0, trial=0,
               split: float = 0.5) -> QueryResult:
    return avg_trials(engine, fed, q, epsilon, theta, [trial], seed=seed, query_id=query_id,
                      split=split).result(0)
