"""Command-line interface: ``fedgroup {gen-data,build-graph,group,query,bench}``.

Every option can also be given in a ``--config`` file of ``key = value``
lines (keys are option names with or without leading dashes; ``-`` and ``_``
are interchangeable).  Command-line flags override the file.

On failure the process exits non-zero and prints a single line to stderr::

    error: <ExceptionType>: <message>
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from fedgroup.core import Location, RangeQuery
from fedgroup.dataio import LoadedDataset, SyntheticSpec, generate_synthetic, load_checkins, read_silos, write_silos
from fedgroup.engine import ENGINES, Federation, avg_trials, run_trials
from fedgroup.grouping import (GROUPERS, GroupConstraint, complement, read_grouping, validate_grouping,
                               write_grouping)
from fedgroup.simgraph import GraphBuildConfig, build_exact, build_graph, edge_fidelity, read_graph, write_graph
from fedgroup.sweep import ExperimentConfig, run_sweep, write_rows


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _floats(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in str(text).split(",") if x.strip()]


def _words(text):
    return [x.strip() for x in str(text).split(",") if x.strip()]


def _range(text):
    parts = [int(x) for x in str(text).replace(":", "-").split("-") if x.strip()]
    if len(parts) == 1:
        return (parts[0], parts[0])
    if len(parts) == 2:
        return (parts[0], parts[1])
    raise argparse.ArgumentTypeError(f"expected N or LO-HI, got {text!r}")


def _on_off(text):
    v = str(text).strip().lower()
    if v in ("on", "1", "true", "yes"):
        return True
    if v in ("off", "0", "false", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def read_config(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.lstrip("-").replace("-", "_")] = value
    return out


def _common(p):
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--config", help="key = value file supplying defaults")
    p.add_argument("--out", help="output path")


def _data_args(p):
    p.add_argument("--data", help="dataset file (silo format unless --format gowalla)")
    p.add_argument("--format", dest="data_format", choices=["silos", "gowalla"], default="silos")
    p.add_argument("--limit-owners", type=int, help="Gowalla: keep the first N users")
    p.add_argument("--cells", type=int, default=16, help="grid cells per axis (Gowalla input)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fedgroup", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="generate a synthetic clustered federation")
    _common(p)
    p.add_argument("--m", type=int, default=500)
    p.add_argument("--records-per-owner", type=_range, default=(50, 50))
    p.add_argument("--clusters", type=int, default=50)
    p.add_argument("--spread", type=float, default=3.0)
    p.add_argument("--box", type=_floats, default=[0.0, 0.0, 100.0, 100.0])
    p.add_argument("--cells", type=int, default=16)
    p.add_argument("--attribute-scale", type=float, default=None)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("build-graph", help="build the owner similarity graph")
    _common(p)
    _data_args(p)
    p.add_argument("--strategy", choices=["exact", "dp", "mpc", "hybrid"], default="hybrid")
    p.add_argument("--r", type=float, default=0.5)
    p.add_argument("--r-l", type=float, default=None)
    p.add_argument("--r-u", type=float, default=None)
    p.add_argument("--epsilon-graph", type=float, default=1.0)
    p.add_argument("--compare-exact", type=_on_off, nargs="?", const=True, default=False)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("group", help="partition owners into groups")
    _common(p)
    p.add_argument("--graph", required=False)
    p.add_argument("--algorithm", choices=sorted(GROUPERS), default="greedy")
    p.add_argument("--group-cap", type=int, default=None, help="global group-size cap t")
    p.add_argument("--personal-caps", help="file with one cap t_u per owner (greedy only)")
    p.set_defaults(func=cmd_group)

    p = sub.add_parser("query", help="answer one range query")
    _common(p)
    _data_args(p)
    p.add_argument("--grouping", help="grouping file (fedgroup engine)")
    p.add_argument("--engine", choices=ENGINES, default="fedgroup")
    p.add_argument("--epsilon", type=float, default=0.3)
    p.add_argument("--x", type=float)
    p.add_argument("--y", type=float)
    p.add_argument("--radius", type=float)
    p.add_argument("--aggregate", choices=["count", "sum", "avg"], default="count")
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--query-id", type=int, default=0)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="sweep engines x m x epsilon and write the results CSV")
    _common(p)
    p.add_argument("--data")
    p.add_argument("--format", dest="data_format", choices=["silos", "gowalla"], default="silos")
    p.add_argument("--ms", type=_ints, default=[500])
    p.add_argument("--epsilons", type=_floats, default=[0.2, 0.3, 0.4, 0.5])
    p.add_argument("--engines", type=_words, default=["dp", "fedgroup"])
    p.add_argument("--records-per-owner", type=_range, default=(50, 50))
    p.add_argument("--clusters", type=int, default=50)
    p.add_argument("--spread", type=float, default=3.0)
    p.add_argument("--box", type=_floats, default=[0.0, 0.0, 100.0, 100.0])
    p.add_argument("--cells", type=int, default=16)
    p.add_argument("--strategy", choices=["exact", "dp", "mpc", "hybrid"], default="exact")
    p.add_argument("--r", type=float, default=0.5)
    p.add_argument("--r-l", type=float, default=None)
    p.add_argument("--r-u", type=float, default=None)
    p.add_argument("--epsilon-graph", type=float, default=1.0)
    p.add_argument("--grouping", choices=sorted(GROUPERS), default="greedy")
    p.add_argument("--group-cap", type=int, default=None)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--queries", type=int, default=20)
    p.add_argument("--radius-fraction", type=float, default=0.05)
    p.add_argument("--mpc-cap", type=int, default=5000)
    p.add_argument("--timing", type=_on_off, default=True, help="on: record wall_ms; off: leave it blank")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--fresh", action="store_true", help="ignore cached cells")
    p.set_defaults(func=cmd_bench)
    return parser


def _load(args) -> LoadedDataset:
    if not args.data:
        raise CliError("--data is required")
    if args.data_format == "gowalla":
        return load_checkins(args.data, args.limit_owners, args.cells)
    ds = read_silos(args.data)
    if args.limit_owners:
        ds = LoadedDataset(ds.silos[:args.limit_owners], ds.grid)
    return ds


def _require_out(args):
    if not args.out:
        raise CliError("--out is required")
    return args.out


def cmd_gen_data(args) -> int:
    rpo = args.records_per_owner
    spec = SyntheticSpec(m=args.m, records_per_owner=rpo[0] if rpo[0] == rpo[1] else rpo,
                         cluster_count=args.clusters, cluster_spread=args.spread, box=tuple(args.box),
                         seed=args.seed, cells_per_axis=args.cells, attribute_scale=args.attribute_scale)
    ds = generate_synthetic(spec)
    write_silos(ds, _require_out(args))
    print(f"wrote {len(ds.silos)} silos, {sum(len(s) for s in ds.silos)} records to {args.out}")
    return 0


def cmd_build_graph(args) -> int:
    ds = _load(args)
    cfg = GraphBuildConfig(args.r, args.r_l, args.r_u, args.strategy, args.epsilon_graph)
    graph, cost, audit = build_graph(ds.silos, ds.grid, cfg, seed=args.seed)
    if args.out:
        write_graph(graph, args.out)
    report = {"m": graph.m, "edges": graph.n_edges, "strategy": cfg.strategy,
              "mpc_rounds": cost.rounds, "mpc_bytes": cost.bytes, "mpc_sessions": cost.sessions}
    if audit is not None:
        report.update(pruned=audit.pruned, fast_inserted=audit.fast_inserted, mpc_resolved=audit.mpc_resolved)
    if args.compare_exact:
        fid = edge_fidelity(graph, build_exact(ds.silos, ds.grid, cfg.r))
        report.update(precision=fid.precision, recall=fid.recall, f1=fid.f1)
    print(json.dumps(report))
    return 0


def cmd_group(args) -> int:
    if not args.graph:
        raise CliError("--graph is required")
    graph = read_graph(args.graph)
    if args.personal_caps:
        caps = [int(x) for x in Path(args.personal_caps).read_text().split()]
        constraint = GroupConstraint.personal(caps)
    elif args.group_cap:
        constraint = GroupConstraint.global_(args.group_cap)
    else:
        constraint = GroupConstraint.none()
    if args.algorithm == "greedy":
        grouping = GROUPERS["greedy"](graph, constraint)
    else:
        if constraint.kind != "none":
            raise CliError(f"{args.algorithm} grouping does not support size caps")
        grouping = GROUPERS[args.algorithm](graph)
    if args.out:
        write_grouping(grouping, args.out)
    bound = complement(graph).max_degree() + 1
    problems = validate_grouping(graph, grouping, constraint)
    print(json.dumps({"m": grouping.m, "lambda": grouping.lambda_, "bound": bound,
                      "bound_ok": grouping.lambda_ <= bound, "valid": not problems}))
    for p in problems:
        print(f"violation: {p}", file=sys.stderr)
    return 0 if not problems else 3


def cmd_query(args) -> int:
    ds = _load(args)
    fed = Federation(ds.silos, ds.grid)
    if args.grouping:
        fed.grouping = read_grouping(args.grouping)
    if args.engine == "fedgroup" and fed.grouping is None:
        raise CliError("fedgroup engine needs --grouping")
    if None in (args.x, args.y, args.radius):
        raise CliError("--x, --y and --radius are required")
    q = RangeQuery(Location(args.x, args.y), args.radius)
    if args.aggregate == "avg":
        batch = avg_trials(args.engine, fed, q, args.epsilon, args.theta or 0.0, [args.trial],
                           seed=args.seed, query_id=args.query_id)
    else:
        theta = args.theta if args.aggregate == "sum" else None
        if args.aggregate == "sum" and not theta:
            raise CliError("--theta is required for sum")
        batch = run_trials(args.engine, fed, q, args.epsilon, [args.trial], seed=args.seed,
                           query_id=args.query_id, theta=theta)
    res = batch.result(0)
    out = {"engine": res.engine, "aggregate": args.aggregate, "answer": res.answer,
           "true_answer": res.true_answer, "defined": res.defined, "epsilon": res.epsilon_query,
           "lambda_or_m": res.lambda_or_m, "wall_ms": 1000 * res.wall_time,
           "mpc_rounds": res.mpc_cost.rounds if res.mpc_cost else 0,
           "mpc_bytes": res.mpc_cost.bytes if res.mpc_cost else 0,
           "audit_violations": len(fed.log.violations())}
    print(json.dumps(out))
    return 0


def cmd_bench(args) -> int:
    out = _require_out(args)
    cfg = ExperimentConfig(
        ms=args.ms, epsilons=args.epsilons, engines=args.engines, data=args.data, data_format=args.data_format,
        records_per_owner=tuple(args.records_per_owner), clusters=args.clusters, spread=args.spread,
        box=tuple(args.box), cells=args.cells, strategy=args.strategy, r=args.r, r_l=args.r_l, r_u=args.r_u,
        epsilon_graph=args.epsilon_graph, grouping=args.grouping, group_cap=args.group_cap,
        trials=args.trials, queries=args.queries, radius_fraction=args.radius_fraction, seed=args.seed,
        mpc_cap=args.mpc_cap, timing=args.timing, workers=args.workers)
    cache = Path(str(out) + ".cells")
    if args.fresh and cache.exists():
        for f in cache.glob("*.json"):
            f.unlink()
    rows = run_sweep(cfg, cache_dir=cache, progress=sys.stderr)
    write_rows(rows, out)
    print(f"wrote {len(rows)} rows to {out}", file=sys.stderr)
    return 0


def _apply_config(parser, argv):
    """Re-parse with defaults taken from ``--config`` (flags still win)."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    values = read_config(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    unknown = sorted(set(values) - known)
    if unknown:
        raise CliError(f"unknown config key(s): {', '.join(unknown)}")
    sub.set_defaults(**values)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
