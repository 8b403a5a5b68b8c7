"""``incrq`` command line: run, explain, generate, bench."""

from __future__ import annotations

import argparse
import logging
import os
import statistics
import sys
import time
from pathlib import Path

from incrq.core.values import Bag
from incrq.errors import IncrqError
from incrq.evaluator.interp import evaluate
from incrq.runtime import compile_query, explain, ingest_batch, init_state
from incrq.runtime.engine import MetricsRow
from incrq.workbench import fixtures
from incrq.workbench.io import write_csv, write_rows
from incrq.workbench.session import MODES, SessionConfig, load_plan_term, run_session


def _indexed(values: list[str] | None, flag: str) -> dict:
    out: dict = {}
    for item in values or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise SystemExit(f"{flag} expects N=VALUE, got {item!r}")
        try:
            out[int(key)] = value
        except ValueError:
            raise SystemExit(f"{flag}: source index must be an integer, got {key!r}") from None
    return out


def _setup_logging() -> None:
    level = os.environ.get("INCRQ_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args: argparse.Namespace) -> int:
    if args.explain:
        return cmd_explain(args)
    config = SessionConfig(
        plan=args.plan,
        sources=_indexed(args.source, "--source"),
        batches=_indexed(args.batches, "--batches"),
        deletes=_indexed(args.deletes, "--deletes"),
        schemas=_indexed(args.schema, "--schema"),
        invariant=tuple(args.invariant or ()),
        mode=args.mode,
        iterations=args.iterations,
        float_tol=args.float_tol,
        epsilon=args.epsilon,
        seed=args.seed,
        out=args.out,
        metrics=args.metrics,
        strict_deletes=args.strict_deletes,
    )
    return run_session(config)


def cmd_explain(args: argparse.Namespace) -> int:
    try:
        term = load_plan_term(args.plan, args.iterations)
        plan = compile_query(term, invariant_sources=args.invariant or (), float_key_epsilon=args.epsilon)
    except (IncrqError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(explain(plan))
    return 0


def _write_epochs(out: Path, epochs: list, sources: int) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for i in range(sources):
        write_csv(out / f"initial_{i}.csv", sorted(epochs[0].get(i, Bag()), key=repr))
        batch_dir = out / f"batches_{i}"
        batch_dir.mkdir(exist_ok=True)
        for k, epoch in enumerate(epochs[1:], start=1):
            write_csv(batch_dir / f"{k:04d}.csv", sorted(epoch.get(i, Bag()), key=repr))


def cmd_generate(args: argparse.Namespace) -> int:
    out = Path(args.out)
    try:
        if args.kind == "pairs":
            epochs = fixtures.groupby_avg_data(args.seed, args.n, args.batches, args.batch_size)
            _write_epochs(out, epochs, 1)
        elif args.kind == "join":
            epochs = fixtures.join_data(args.seed, args.n, args.batches, args.batch_size)
            _write_epochs(out, epochs, 2)
        elif args.kind == "squares":
            epochs = fixtures.kmeans_data(args.seed, args.n, args.batches, args.batch_size)
            _write_epochs(out, epochs, 1)
        elif args.kind == "rmat":
            graph = fixtures.pagerank_data(
                args.seed, args.nodes, args.edges, args.batches, args.new_nodes, args.batch_size, dedup=args.dedup
            )
            _write_epochs(out, graph.epochs, 1)
            write_csv(out / "edges.csv", graph.edges[-1])
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.kind} data to {out}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    fx = fixtures.get_fixture(args.fixture)
    term = fx.build()
    if args.fixture == "pagerank":
        epochs = fx.data(args.seed).epochs
    else:
        epochs = fx.data(args.seed, args.initial, args.batches, args.batch_size)
    plan = compile_query(term, float_key_epsilon=fx.epsilon)
    state = init_state(plan, epochs[0])
    cumulative = dict(epochs[0])
    rows = []
    for k, delta in enumerate(epochs[1:], start=1):
        started = time.perf_counter()
        state, _ = ingest_batch(plan, state, delta)
        incr_ms = (time.perf_counter() - started) * 1000.0
        cumulative = {i: cumulative.get(i, Bag()).union(b) for i, b in delta.items()}
        started = time.perf_counter()
        evaluate(term, cumulative)
        batch_ms = (time.perf_counter() - started) * 1000.0
        rows.append((k, incr_ms, batch_ms, state.metrics[-1].h_tuples))
        print(f"epoch {k:3d}  incremental {incr_ms:9.2f} ms  batch {batch_ms:9.2f} ms  h_tuples {rows[-1][3]}")
    tail = rows[1:] or rows
    print(
        f"median incremental {statistics.median(r[1] for r in tail):.2f} ms, "
        f"median batch {statistics.median(r[2] for r in tail):.2f} ms"
    )
    if args.metrics:
        write_rows(args.metrics, MetricsRow.FIELDS, (m.as_row() for m in state.metrics))
    if args.gnuplot:
        with open(args.gnuplot, "w", encoding="utf-8") as fh:
            fh.write("# epoch incremental_ms batch_ms\n")
            for k, incr, batch, _ in rows:
                fh.write(f"{k} {incr:.3f} {batch:.3f}\n")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="incrq", description="Incremental query compiler and runtime.")
    sub = parser.add_subparsers(dest="command", required=True)

    def plan_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--plan", required=True, help="plan file in the DSL, or a fixture name")
        p.add_argument("--invariant", type=int, action="append", help="source index held invariant")
        p.add_argument("--epsilon", type=float, help="approximate float key matching threshold")
        p.add_argument("--iterations", type=int, help="override the repeat count")

    run = sub.add_parser("run", help="replay batches through a plan")
    plan_flags(run)
    run.add_argument("--source", action="append", metavar="N=PATH", help="initial data for source N")
    run.add_argument("--batches", action="append", metavar="N=DIR", help="batch directory for source N")
    run.add_argument("--deletes", action="append", metavar="N=DIR", help="deletion directory for source N")
    run.add_argument("--schema", action="append", metavar="N=TYPES", help="column types, e.g. 0=int,int")
    run.add_argument("--mode", choices=MODES, default="incremental")
    run.add_argument("--float-tol", type=float, default=1e-9)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", help="snapshot directory")
    run.add_argument("--metrics", help="metrics CSV path")
    run.add_argument("--strict-deletes", action="store_true", help="check deletions against the live data")
    run.add_argument("--explain", action="store_true", help="print the compiled plan and exit")
    run.set_defaults(func=cmd_run)

    exp = sub.add_parser("explain", help="print h, merger and answer of a plan")
    plan_flags(exp)
    exp.set_defaults(func=cmd_explain)

    gen = sub.add_parser("generate", help="write a synthetic dataset")
    gen.add_argument("kind", choices=("pairs", "join", "squares", "rmat"))
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--n", type=int, default=10_000, help="initial size")
    gen.add_argument("--batches", type=int, default=9)
    gen.add_argument("--batch-size", type=int, default=1_000, help="batch size (edges per increment for rmat)")
    gen.add_argument("--nodes", type=int, default=1_000)
    gen.add_argument("--edges", type=int, default=10_000)
    gen.add_argument("--new-nodes", type=int, default=100)
    gen.add_argument("--dedup", action="store_true", help="drop repeated R-MAT edges")
    gen.set_defaults(func=cmd_generate)

    bench = sub.add_parser("bench", help="time incremental against batch epochs on a fixture")
    bench.add_argument("fixture", choices=sorted(fixtures.FIXTURES))
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--initial", type=int, default=10_000)
    bench.add_argument("--batches", type=int, default=9)
    bench.add_argument("--batch-size", type=int, default=1_000)
    bench.add_argument("--metrics", help="metrics CSV path")
    bench.add_argument("--gnuplot", help="write epoch timings as a gnuplot data file")
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
