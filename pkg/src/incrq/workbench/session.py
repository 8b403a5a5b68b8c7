"""Replaying batch directories through a compiled plan."""

from __future__ import annotations

import logging
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, TextIO

from incrq.core.values import EMPTY_BAG, Bag, bag_equals
from incrq.errors import IncrqError
from incrq.evaluator import terms as T
from incrq.evaluator.interp import evaluate
from incrq.runtime import compile_query, explain, ingest_batch, ingest_deletion, init_state
from incrq.runtime.engine import MetricsRow
from incrq.workbench.dsl import parse_plan
from incrq.workbench.fixtures import FIXTURES
from incrq.workbench.io import Schema, batch_files, is_flat, load_batch, snapshot_text, write_rows

log = logging.getLogger("incrq.session")

MODES = ("incremental", "batch-oracle", "both")


@dataclass
class SessionConfig:
    plan: str  # path to a plan file, or a fixture name
    sources: dict = field(default_factory=dict)  # source -> initial data file
    batches: dict = field(default_factory=dict)  # source -> batch directory
    deletes: dict = field(default_factory=dict)  # source -> deletion directory
    schemas: dict = field(default_factory=dict)  # source -> Schema
    invariant: tuple = ()
    mode: str = "incremental"
    iterations: int | None = None
    float_tol: float = 1e-9
    epsilon: float | None = None
    seed: int = 0
    out: str | None = None
    metrics: str | None = None
    strict_deletes: bool = False

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {', '.join(MODES)}")
        if self.float_tol < 0:
            raise ValueError("float tolerance must be non-negative")
        if self.iterations is not None and self.iterations < 1:
            raise ValueError("iterations must be at least 1")


def load_plan_term(plan: str, iterations: int | None = None) -> T.Term:
    """A fixture name or a plan file; ``iterations`` overrides a root repeat count."""
    if plan in FIXTURES:
        term = FIXTURES[plan].build()
    else:
        term = parse_plan(Path(plan).read_text(encoding="utf-8"))
    if iterations is not None:
        if not isinstance(term, T.Repeat):
            raise ValueError("--iterations only applies to repeat queries")
        term = replace(term, count=iterations)
    return term


def _epoch_files(dirs: dict) -> list[dict]:
    listing = {i: batch_files(d) for i, d in dirs.items()}
    n = max((len(v) for v in listing.values()), default=0)
    return [{i: files[k] for i, files in listing.items() if k < len(files)} for k in range(n)]


def _load(files: dict, schemas: dict) -> dict:
    return {i: load_batch(p, schema=schemas.get(i)) for i, p in files.items()}


class _Cumulative:
    def __init__(self) -> None:
        self.data: dict[int, Bag] = {}

    def add(self, batch: dict) -> None:
        for i, bag in batch.items():
            self.data[i] = self.data.get(i, EMPTY_BAG).union(bag)

    def remove(self, batch: dict) -> None:
        for i, bag in batch.items():
            self.data[i], _ = self.data.get(i, EMPTY_BAG).difference(bag)


def run_session(config: SessionConfig, stderr: TextIO | None = None) -> int:
    """0 on success, 1 on an oracle mismatch, 2 on any other error."""
    stderr = stderr or sys.stderr
    try:
        config.validate()
        return _run(config, stderr)
    except (IncrqError, ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=stderr)
        return 2


def _run(config: SessionConfig, stderr: TextIO) -> int:
    term = load_plan_term(config.plan, config.iterations)
    schemas = {i: (s if isinstance(s, Schema) else Schema.parse(s)) for i, s in config.schemas.items()}
    initial = _load(config.sources, schemas)
    inserts = _epoch_files(config.batches)
    deletes = _epoch_files(config.deletes)
    epochs = max(len(inserts), len(deletes))
    out = Path(config.out) if config.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    incremental = config.mode in ("incremental", "both")
    oracle = config.mode in ("batch-oracle", "both")
    plan = state = None
    if incremental:
        plan = compile_query(
            term,
            invariant_sources=config.invariant,
            float_key_epsilon=config.epsilon,
            checks="strict" if config.strict_deletes else "lax",
        )
        log.info("plan:\n%s", explain(plan))
        state = init_state(plan, initial)
    cumulative = _Cumulative()
    cumulative.add({i: EMPTY_BAG for i in T.source_indices(term)})
    cumulative.add(initial)
    metrics: list[MetricsRow] = []
    mismatches = 0

    def step(epoch: int, answer: Any) -> None:
        nonlocal mismatches
        expected = None
        if oracle:
            started = time.perf_counter()
            expected = evaluate(term, cumulative.data)
            metrics.append(
                MetricsRow(epoch, 0, sum(len(b) for b in cumulative.data.values()), 0, 0,
                           (time.perf_counter() - started) * 1000.0, "batch", 0)
            )
        shown = answer if incremental else expected
        if incremental and oracle and not bag_equals(answer, expected, config.float_tol):
            mismatches += 1
            print(f"mismatch at epoch {epoch}: incremental and batch answers differ", file=stderr)
        if out is not None:
            (out / f"epoch_{epoch:04d}.{'csv' if is_flat(shown) else 'txt'}").write_text(snapshot_text(shown), encoding="utf-8")

    step(0, state.answer() if state is not None else None)
    for k in range(epochs):
        if k < len(inserts):
            batch = _load(inserts[k], schemas)
            cumulative.add(batch)
            if state is not None:
                state, _ = ingest_batch(plan, state, batch)
        if k < len(deletes):
            gone = _load(deletes[k], schemas)
            cumulative.remove(gone)
            if state is not None:
                state, _ = ingest_deletion(plan, state, gone)
        step(k + 1, state.answer() if state is not None else None)

    if state is not None:
        metrics = sorted(state.metrics + metrics, key=lambda r: (r.epoch, r.mode))
    if config.metrics:
        write_rows(config.metrics, MetricsRow.FIELDS, (m.as_row() for m in metrics))
    return 1 if mismatches else 0
