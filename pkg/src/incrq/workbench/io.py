"""Batch files in, snapshots and metrics out."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from incrq.core.values import Bag, canonical_items, to_text
from incrq.errors import DataFormatError

COLUMN_TYPES = ("int", "float", "str", "bool", "bag")


@dataclass(frozen=True)
class Column:
    name: str | None
    type: str


@dataclass(frozen=True)
class Schema:
    columns: tuple

    @classmethod
    def parse(cls, text: str) -> "Schema":
        """``"int,int"`` or ``"x:float,y:float"``."""
        cols = []
        for part in text.split(","):
            part = part.strip()
            if not part:
                raise ValueError(f"empty column in schema {text!r}")
            name, _, kind = part.rpartition(":")
            if kind not in COLUMN_TYPES:
                raise ValueError(f"unknown column type {kind!r}; expected one of {', '.join(COLUMN_TYPES)}")
            cols.append(Column(name or None, kind))
        return cls(tuple(cols))

    def __len__(self) -> int:
        return len(self.columns)


def _json_element(v: Any) -> Any:
    if isinstance(v, list):
        return tuple(_json_element(x) for x in v)
    if isinstance(v, (bool, int, float, str)):
        return v
    raise ValueError(f"unsupported element {v!r}")


def _convert(raw: Any, kind: str) -> Any:
    if kind == "int":
        if isinstance(raw, bool):
            raise ValueError("boolean where an integer was expected")
        if isinstance(raw, float):
            if not raw.is_integer():
                raise ValueError(f"{raw!r} is not an integer")
            return int(raw)
        return int(raw)
    if kind == "float":
        if isinstance(raw, bool):
            raise ValueError("boolean where a number was expected")
        return float(raw)
    if kind == "str":
        return raw if isinstance(raw, str) else json.dumps(raw)
    if kind == "bool":
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in ("true", "1"):
            return True
        if text in ("false", "0"):
            return False
        raise ValueError(f"{raw!r} is not a boolean")
    if kind == "bag":
        items = json.loads(raw) if isinstance(raw, str) else raw
        if not isinstance(items, list):
            raise ValueError("bag columns hold a JSON array")
        return Bag(_json_element(x) for x in items)
    raise ValueError(f"unknown column type {kind!r}")


def _row(values: Sequence[Any], schema: Schema | None) -> Any:
    if schema is None:
        converted = [_guess(v) for v in values]
    else:
        if len(values) != len(schema):
            raise ValueError(f"expected {len(schema)} columns, found {len(values)}")
        converted = [_convert(v, col.type) for v, col in zip(values, schema.columns)]
    return converted[0] if len(converted) == 1 else tuple(converted)


def _guess(v: Any) -> Any:
    if not isinstance(v, str):
        return _json_element(v) if isinstance(v, list) else v
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def load_csv(path: str | os.PathLike, schema: Schema | None = None) -> Bag:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for n, record in enumerate(csv.reader(fh), start=1):
            if not record or all(not c.strip() for c in record):
                continue
            try:
                rows.append(_row([c.strip() for c in record], schema))
            except (ValueError, json.JSONDecodeError) as exc:
                raise DataFormatError(str(exc), n, str(path)) from None
    return Bag(rows)


def load_jsonl(path: str | os.PathLike, schema: Schema | None = None) -> Bag:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if isinstance(obj, dict):
                    if schema is not None and all(c.name for c in schema.columns):
                        values = [obj[c.name] for c in schema.columns]
                    else:
                        values = list(obj.values())
                elif isinstance(obj, list):
                    values = obj
                else:
                    values = [obj]
                rows.append(_row(values, schema))
            except (ValueError, KeyError, json.JSONDecodeError) as exc:
                raise DataFormatError(f"{type(exc).__name__}: {exc}", n, str(path)) from None
    return Bag(rows)


def load_batch(path: str | os.PathLike, fmt: str | None = None, schema: Schema | None = None) -> Bag:
    """Load a CSV or JSONL file (format taken from the extension when not given)."""
    fmt = fmt or _format_of(path)
    if fmt == "csv":
        return load_csv(path, schema)
    if fmt == "jsonl":
        return load_jsonl(path, schema)
    raise DataFormatError(f"unknown batch format {fmt!r}", None, str(path))


def _format_of(path: str | os.PathLike) -> str:
    suffix = Path(path).suffix.lower()
    return {".csv": "csv", ".jsonl": "jsonl", ".json": "jsonl"}.get(suffix, "csv")


def batch_files(directory: str | os.PathLike) -> list[Path]:
    """Batch files of a directory in lexicographic order (hidden files skipped)."""
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"batch directory not found: {d}")
    return sorted(p for p in d.iterdir() if p.is_file() and not p.name.startswith("."))


# ---------------------------------------------------------------------------
# writing


def _is_atom(v: Any) -> bool:
    return isinstance(v, (bool, int, float, str))


def _csv_cell(v: Any) -> str:
    return to_text(v) if not isinstance(v, str) else v


def is_flat(answer: Any) -> bool:
    if not isinstance(answer, Bag):
        return False
    return all(_is_atom(x) or (isinstance(x, tuple) and x and all(_is_atom(y) for y in x)) for x in answer.distinct())


def snapshot_text(answer: Any) -> str:
    """CSV rows (canonical order) for flat bags, canonical value text otherwise."""
    if is_flat(answer):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for item in canonical_items(answer):
            writer.writerow([_csv_cell(x) for x in item] if isinstance(item, tuple) else [_csv_cell(item)])
        return buf.getvalue()
    return to_text(answer) + "\n"


def write_rows(path: str | os.PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def write_csv(path: str | os.PathLike, rows: Iterable[Sequence[Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in rows:
            writer.writerow([_csv_cell(x) if not isinstance(x, Bag) else json.dumps(canonical_json(x)) for x in row])


def canonical_json(v: Any) -> Any:
    if isinstance(v, Bag):
        return [canonical_json(x) for x in canonical_items(v)]
    if isinstance(v, tuple):
        return [canonical_json(x) for x in v]
    return v
