"""Input-output specifications, output distances and the error function."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .dsl import (
    MAX_LIST_LEN,
    Program,
    TokenInventory,
    Value,
    as_value,
    default_inventory,
    execute,
    format_value,
    is_valid_value,
)

# Null penalty offset; any non-Null list distance is at most MAX_LIST_LEN.
NULL_PENALTY = MAX_LIST_LEN
# Per-element cost of a length mismatch under Manhattan distance; exceeds
# the largest in-range element difference (255 - (-256) = 511).
MISMATCH_COST = 512

METRICS = ("edit", "manhattan")


class SpecificationError(ValueError):
    pass


@dataclass(frozen=True)
class IOExample:
    input: Value
    output: Value

    def __post_init__(self):
        for field in ("input", "output"):
            v = getattr(self, field)
            if not is_valid_value(v):
                raise SpecificationError(f"invalid {field} value {v!r}")


@dataclass(frozen=True)
class Specification:
    examples: tuple

    def __post_init__(self):
        if len(self.examples) < 1:
            raise SpecificationError("a specification needs at least one example")

    @classmethod
    def from_pairs(cls, pairs) -> "Specification":
        return cls(tuple(IOExample(as_value(i), as_value(o)) for i, o in pairs))

    def __len__(self):
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    @property
    def inputs(self) -> tuple:
        return tuple(e.input for e in self.examples)

    @property
    def outputs(self) -> tuple:
        return tuple(e.output for e in self.examples)

    def to_json(self) -> list:
        return [{"input": format_value(e.input), "output": format_value(e.output)}
                for e in self.examples]

    @classmethod
    def from_json(cls, rows) -> "Specification":
        try:
            return cls.from_pairs((r["input"], r["output"]) for r in rows)
        except (KeyError, TypeError) as exc:
            raise SpecificationError(f"malformed example: {exc}") from exc


def load_spec(path) -> Specification:
    """Read a JSON-lines specification file (one example per line)."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise SpecificationError(f"{path}:{lineno}: {exc}") from exc
    return Specification.from_json(rows)


def save_spec(spec: Specification, path) -> None:
    with open(path, "w") as f:
        for row in spec.to_json():
            f.write(json.dumps(row) + "\n")


# ---------------------------------------------------------------------------
# distances


def _seq(v) -> tuple:
    return (v,) if isinstance(v, int) else v


def _kind_differs(a, b) -> int:
    return int(isinstance(a, int) != isinstance(b, int))


def _null_distance(other: Value) -> int:
    n = 1 if other is None else len(_seq(other))
    return max(n, 1) + NULL_PENALTY


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Unit-cost edit distance between two sequences."""
    if a == b:
        return 0
    # strip shared prefix / suffix, they never change the distance
    i = 0
    n = min(len(a), len(b))
    while i < n and a[i] == b[i]:
        i += 1
    a, b = a[i:], b[i:]
    j = 0
    n = min(len(a), len(b))
    while j < n and a[-1 - j] == b[-1 - j]:
        j += 1
    if j:
        a, b = a[:-j], b[:-j]
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for k, y in enumerate(b, start=1):
            cur.append(min(prev[k] + 1, cur[k - 1] + 1, prev[k - 1] + (x != y)))
        prev = cur
    return prev[-1]


def edit_distance(a: Value, b: Value) -> int:
    if a is None and b is None:
        return 0
    if a is None:
        return _null_distance(b)
    if b is None:
        return _null_distance(a)
    # max with the kind flag keeps Int 5 and List [5] apart while staying a metric
    return max(levenshtein(_seq(a), _seq(b)), _kind_differs(a, b))


def manhattan_distance(a: Value, b: Value) -> int:
    if a is None and b is None:
        return 0
    if a is None:
        return _null_distance(b) * MISMATCH_COST
    if b is None:
        return _null_distance(a) * MISMATCH_COST
    xs, ys = _seq(a), _seq(b)
    d = sum(abs(x - y) for x, y in zip(xs, ys))
    return max(d + MISMATCH_COST * abs(len(xs) - len(ys)), _kind_differs(a, b))


def _metric_fn(metric: str):
    if metric == "edit":
        return edit_distance
    if metric == "manhattan":
        return manhattan_distance
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


def error(program: Program, spec: Specification, metric: str = "edit",
          inventory: TokenInventory | None = None) -> tuple[tuple, int]:
    """Per-example distances and their sum (the ranking scalar)."""
    dist = _metric_fn(metric)
    inv = inventory or default_inventory()
    vec = tuple(dist(execute(program, e.input, inv), e.output) for e in spec.examples)
    return vec, sum(vec)


def satisfies(program: Program, spec: Specification,
              inventory: TokenInventory | None = None) -> bool:
    """Exact agreement with every example output."""
    inv = inventory or default_inventory()
    return all(execute(program, e.input, inv) == e.output for e in spec.examples)
