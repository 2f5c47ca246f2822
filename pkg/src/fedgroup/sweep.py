"""Benchmark sweeps over (m, engine, epsilon) cells.

Every cell is seeded from ``(master seed, engine, m, epsilon)`` only, so
results do not depend on sweep order, worker count or resumption.  Finished
cells are cached as JSON next to the output CSV and reused on re-runs.
"""

from __future__ import annotations

import hashlib
import json
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from fedgroup.dataio import (LoadedDataset, SyntheticSpec, generate_synthetic, load_checkins, make_queries,
                             mean_absolute_error, mean_relative_error, read_silos, results_csv)
from fedgroup.engine import ENGINES, Federation, run_trials, theoretical_variance
from fedgroup.grouping import GROUPERS, GroupConstraint
from fedgroup.simgraph import GraphBuildConfig, build_graph


@dataclass
class ExperimentConfig:
    ms: list = field(default_factory=lambda: [500])
    epsilons: list = field(default_factory=lambda: [0.2, 0.3, 0.4, 0.5])
    engines: list = field(default_factory=lambda: ["dp", "fedgroup"])
    data: str | None = None
    data_format: str = "silos"
    records_per_owner: tuple = (50, 50)
    clusters: int = 50
    spread: float = 3.0
    box: tuple = (0.0, 0.0, 100.0, 100.0)
    cells: int = 16
    strategy: str = "exact"
    r: float = 0.5
    r_l: float | None = None
    r_u: float | None = None
    epsilon_graph: float = 1.0
    grouping: str = "greedy"
    group_cap: int | None = None
    trials: int = 100
    queries: int = 20
    radius_fraction: float = 0.05
    seed: int = 0
    mpc_cap: int = 5000
    timing: bool = True
    workers: int = 1

    def __post_init__(self):
        for e in self.engines:
            if e not in ENGINES:
                raise ValueError(f"unknown engine {e!r}")
        if self.grouping not in GROUPERS:
            raise ValueError(f"unknown grouping algorithm {self.grouping!r}")
        if any(m < 1 for m in self.ms):
            raise ValueError("m must be >= 1")
        if any(not e > 0 for e in self.epsilons):
            raise ValueError("epsilon must be positive")
        if self.trials < 2 or self.queries < 1:
            raise ValueError("need trials >= 2 and queries >= 1")
        GraphBuildConfig(self.r, self.r_l, self.r_u, self.strategy, self.epsilon_graph)

    def fingerprint(self) -> str:
        d = asdict(self)
        for k in ("ms", "epsilons", "engines", "workers", "timing"):
            d.pop(k)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def derive_seed(master: int, *parts) -> int:
    key = [int(master) & 0xFFFFFFFF]
    for p in parts:
        if isinstance(p, str):
            key.append(zlib.crc32(p.encode()))
        elif isinstance(p, float):
            key.append(zlib.crc32(repr(p).encode()))
        else:
            key.append(int(p) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(key).generate_state(1, np.uint64)[0] >> np.uint64(1))


def cell_seed(master: int, engine: str, m: int, epsilon: float) -> int:
    return derive_seed(master, "cell", engine, m, float(epsilon))


def load_dataset(cfg: ExperimentConfig, m: int) -> LoadedDataset:
    if cfg.data is None:
        rpo = cfg.records_per_owner
        spec = SyntheticSpec(m=m, records_per_owner=rpo if rpo[0] != rpo[1] else rpo[0],
                             cluster_count=min(cfg.clusters, m), cluster_spread=cfg.spread, box=tuple(cfg.box),
                             seed=derive_seed(cfg.seed, "data"), cells_per_axis=cfg.cells)
        return generate_synthetic(spec)
    if cfg.data_format == "gowalla":
        return load_checkins(cfg.data, limit_owners=m, cells_per_axis=cfg.cells)
    ds = read_silos(cfg.data)
    if len(ds.silos) < m:
        raise ValueError(f"{cfg.data} has {len(ds.silos)} owners, fewer than m={m}")
    return LoadedDataset(ds.silos[:m], ds.grid, 0, None if ds.labels is None else ds.labels[:m])


def prepare(cfg: ExperimentConfig, m: int):
    """Federation (with grouping when needed), query workload and ground truth for one m."""
    ds = load_dataset(cfg, m)
    fed = Federation(ds.silos, ds.grid)
    if "fedgroup" in cfg.engines:
        gcfg = GraphBuildConfig(cfg.r, cfg.r_l, cfg.r_u, cfg.strategy, cfg.epsilon_graph)
        graph, _, _ = build_graph(ds.silos, ds.grid, gcfg, seed=derive_seed(cfg.seed, "graph", m))
        constraint = GroupConstraint.global_(cfg.group_cap) if cfg.group_cap else GroupConstraint.none()
        grouper = GROUPERS[cfg.grouping]
        fed.grouping = grouper(graph, constraint) if cfg.grouping == "greedy" else grouper(graph)
    queries = make_queries(ds, cfg.queries, cfg.radius_fraction, seed=derive_seed(cfg.seed, "queries", m))
    truths = np.array([float(fed.partial_counts(q).sum()) for q in queries])
    return fed, queries, truths


def run_cell(cfg: ExperimentConfig, fed: Federation, queries, truths, engine: str, eps: float) -> dict:
    seed = cell_seed(cfg.seed, engine, fed.m, eps)
    row = {"engine": engine, "m": fed.m, "epsilon": float(eps), "seed": seed}
    answers = np.empty((len(queries), cfg.trials))
    wall = 0.0
    rounds = nbytes = 0
    count = 0
    for qi, q in enumerate(queries):
        batch = run_trials(engine, fed, q, eps, cfg.trials, seed=seed, query_id=qi)
        answers[qi] = batch.answers
        wall += batch.wall_time
        count = batch.lambda_or_m
        if batch.mpc_cost is not None:
            rounds += batch.mpc_cost.rounds
            nbytes += batch.mpc_cost.bytes
    errors = answers - truths[:, None]
    row.update(
        lambda_or_m=count,
        mre=mean_relative_error(answers.ravel(), np.repeat(truths, cfg.trials)),
        mae=mean_absolute_error(answers.ravel(), np.repeat(truths, cfg.trials)),
        var_emp=float(np.var(errors, ddof=1)),
        var_theory=theoretical_variance(engine, fed.m, count, eps),
        wall_ms=1000.0 * wall / len(queries) if cfg.timing else None,
        mpc_rounds=rounds // len(queries) if engine in ("mpc", "fedgroup") else 0,
        mpc_bytes=nbytes // len(queries) if engine in ("mpc", "fedgroup") else 0,
    )
    return row


_MARK_COLUMNS = ("lambda_or_m", "mre", "mae", "var_emp", "var_theory", "wall_ms", "mpc_rounds", "mpc_bytes")


def _marked(engine, m, eps, seed, marker):
    row = {"engine": engine, "m": m, "epsilon": float(eps), "seed": seed}
    row.update({c: marker for c in _MARK_COLUMNS})
    return row


def _cell_path(cache_dir: Path, cfg: ExperimentConfig, engine, m, eps) -> Path:
    return cache_dir / f"{cfg.fingerprint()}-{engine}-{m}-{eps!r}-{int(cfg.timing)}.json"


def _cell_task(args):
    cfg, fed, queries, truths, engine, eps = args
    return run_cell(cfg, fed, queries, truths, engine, eps)


def run_sweep(cfg: ExperimentConfig, cache_dir: str | Path | None = None, progress=None) -> list[dict]:
    """Rows ordered by (m, engine, epsilon) as listed in the config."""
    cache = Path(cache_dir) if cache_dir else None
    if cache:
        cache.mkdir(parents=True, exist_ok=True)
    rows = []
    for m in cfg.ms:
        cells = [(e, eps) for e in cfg.engines for eps in cfg.epsilons]
        results: dict = {}
        todo = []
        for engine, eps in cells:
            if engine == "mpc" and m > cfg.mpc_cap:
                results[(engine, eps)] = _marked(engine, m, eps, cell_seed(cfg.seed, engine, m, eps), "skipped")
                _say(progress, f"cell {engine} m={m} eps={eps}: skipped (mpc cap {cfg.mpc_cap})")
                continue
            path = _cell_path(cache, cfg, engine, m, eps) if cache else None
            if path is not None and path.exists():
                results[(engine, eps)] = json.loads(path.read_text())
                _say(progress, f"cell {engine} m={m} eps={eps}: cached")
                continue
            todo.append((engine, eps))
        if todo:
            t0 = time.perf_counter()
            try:
                fed, queries, truths = prepare(cfg, m)
            except Exception as exc:  # noqa: BLE001
                _say(progress, f"m={m}: preparation failed: {exc}")
                for engine, eps in todo:
                    results[(engine, eps)] = _marked(engine, m, eps, cell_seed(cfg.seed, engine, m, eps), "failed")
                todo = []
            else:
                _say(progress, f"m={m}: prepared in {time.perf_counter() - t0:.2f}s"
                     + (f", lambda={fed.grouping.lambda_}" if fed.grouping is not None else ""))
            outcomes = _execute(cfg, fed if todo else None, queries if todo else None,
                                truths if todo else None, todo)
            for (engine, eps), outcome in zip(todo, outcomes):
                if isinstance(outcome, Exception):
                    _say(progress, f"cell {engine} m={m} eps={eps}: failed: {outcome}")
                    results[(engine, eps)] = _marked(engine, m, eps, cell_seed(cfg.seed, engine, m, eps), "failed")
                    continue
                results[(engine, eps)] = outcome
                if cache:
                    _cell_path(cache, cfg, engine, m, eps).write_text(json.dumps(outcome))
                _say(progress, f"cell {engine} m={m} eps={eps}: mae={outcome['mae']:.3f}")
        rows.extend(results[c] for c in cells)
    return rows


def _execute(cfg, fed, queries, truths, todo):
    if not todo:
        return []
    tasks = [(cfg, fed, queries, truths, e, eps) for e, eps in todo]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_cell_task, t) for t in tasks]
            return [_outcome(f.result) for f in futures]
    return [_outcome(lambda t=t: _cell_task(t)) for t in tasks]


def _outcome(fn):
    try:
        return fn()
    except Exception as exc:  # noqa: BLE001
        return exc


def _say(stream, msg):
    if stream is not None:
        print(msg, file=stream, flush=True)


def write_rows(rows, path) -> None:
    results_csv(rows, path)
