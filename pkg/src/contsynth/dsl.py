"""List-manipulation DSL: tokens, programs and a total interpreter.

Values are plain Python objects:

* ``int`` for integers,
* ``tuple`` of ``int`` for lists,
* ``None`` for Null, the absorbing error value.

Every integer stays in ``[MIN_INT, MAX_INT]``; any operation that would leave
that range yields Null instead of raising.  A program is a pipeline: each
token transforms the current value, left to right.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence, Union

MIN_INT = -256
MAX_INT = 255
MAX_LIST_LEN = 20

Value = Union[int, tuple, None]

KINDS = ("first-order", "map", "filter", "count", "scanl1", "zipwith")


class UnknownToken(ValueError):
    """Raised when program text names a token missing from the inventory."""

    def __init__(self, name: str):
        super().__init__(f"unknown token {name!r}")
        self.name = name


class EmptyProgram(ValueError):
    pass


class InventoryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# value helpers


def as_value(obj) -> Value:
    """Normalize ints / int sequences (e.g. parsed JSON) into a DSL value."""
    if obj is None:
        return None
    if isinstance(obj, bool):
        raise TypeError("booleans are not DSL values")
    if isinstance(obj, int):
        return obj
    return tuple(int(x) for x in obj)


def is_valid_value(v: Value) -> bool:
    """True for a non-Null value respecting the range and length bounds."""
    if v is None:
        return False
    if isinstance(v, int):
        return MIN_INT <= v <= MAX_INT
    return len(v) <= MAX_LIST_LEN and all(MIN_INT <= x <= MAX_INT for x in v)


def format_value(v: Value):
    """JSON-friendly form of a value (Null becomes ``None``)."""
    if isinstance(v, tuple):
        return list(v)
    return v


def _as_list(v):
    return (v,) if isinstance(v, int) else v


def _checked(xs: tuple):
    if xs and (min(xs) < MIN_INT or max(xs) > MAX_INT):
        return None
    return xs


def _checked_int(x: int):
    return x if MIN_INT <= x <= MAX_INT else None


# ---------------------------------------------------------------------------
# token semantics


def _trunc_div(d: int) -> Callable[[int], int]:
    def f(x):
        q = abs(x) // d
        return q if x >= 0 else -q

    return f


_LAMBDAS = {
    "+1": lambda x: x + 1,
    "-1": lambda x: x - 1,
    "*2": lambda x: x * 2,
    "*3": lambda x: x * 3,
    "*4": lambda x: x * 4,
    "/2": _trunc_div(2),
    "/3": _trunc_div(3),
    "/4": _trunc_div(4),
    "*-1": lambda x: -x,
    "**2": lambda x: x * x,
}

_PREDICATES = {
    ">0": lambda x: x > 0,
    "<0": lambda x: x < 0,
    "even": lambda x: x % 2 == 0,
    "odd": lambda x: x % 2 == 1,
}

_BINOPS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "min": min,
    "max": max,
}


def _head(v):
    xs = _as_list(v)
    return xs[0] if xs else None


def _last(v):
    xs = _as_list(v)
    return xs[-1] if xs else None


def _minimum(v):
    xs = _as_list(v)
    return min(xs) if xs else None


def _maximum(v):
    xs = _as_list(v)
    return max(xs) if xs else None


def _sum(v):
    return _checked_int(sum(_as_list(v)))


def _first_order(param: str):
    simple = {
        "head": _head,
        "last": _last,
        "reverse": lambda v: _as_list(v)[::-1],
        "sort": lambda v: tuple(sorted(_as_list(v))),
        "sum": _sum,
        "minimum": _minimum,
        "maximum": _maximum,
    }
    if param in simple:
        return simple[param]
    m = re.fullmatch(r"(take|drop):(\d+)", param)
    if m is None:
        raise InventoryError(f"unknown first-order function {param!r}")
    k = int(m.group(2))
    if m.group(1) == "take":
        return lambda v: _as_list(v)[:k]
    return lambda v: _as_list(v)[k:]


def _map(param: str):
    f = _LAMBDAS[param]
    return lambda v: _checked(tuple(map(f, _as_list(v))))


def _filter(param: str):
    pred = _PREDICATES[param]
    return lambda v: tuple(filter(pred, _as_list(v)))


def _count(param: str):
    pred = _PREDICATES[param]
    return lambda v: sum(1 for x in _as_list(v) if pred(x))


def _scanl1(param: str):
    op = _BINOPS[param]

    def run(v):
        xs = _as_list(v)
        if not xs:
            return ()
        acc = xs[0]
        out = [acc]
        for x in xs[1:]:
            acc = op(acc, x)
            if acc < MIN_INT or acc > MAX_INT:
                return None
            out.append(acc)
        return tuple(out)

    return run


def _zipwith(param: str):
    # self-zip: pairs the current list with itself, keeping every token unary
    op = _BINOPS[param]
    return lambda v: _checked(tuple(op(x, x) for x in _as_list(v)))


_BUILDERS = {
    "first-order": _first_order,
    "map": _map,
    "filter": _filter,
    "count": _count,
    "scanl1": _scanl1,
    "zipwith": _zipwith,
}


def build_semantics(kind: str, param: str) -> Callable:
    try:
        builder = _BUILDERS[kind]
    except KeyError:
        raise InventoryError(f"unknown token kind {kind!r}") from None
    try:
        return builder(param)
    except KeyError:
        raise InventoryError(f"unknown {kind} parameter {param!r}") from None


# ---------------------------------------------------------------------------
# tokens, inventories, programs


@dataclass(frozen=True)
class Token:
    id: int
    name: str
    kind: str
    param: str

    def __str__(self):
        return self.name


class TokenInventory:
    """Ordered token set with dense 1-based ids."""

    def __init__(self, tokens: Sequence[Token]):
        tokens = tuple(tokens)
        if len(tokens) < 2:
            raise InventoryError("an inventory needs at least two tokens")
        names = [t.name for t in tokens]
        if len(set(names)) != len(names):
            raise InventoryError("duplicate token names in inventory")
        for i, t in enumerate(tokens, start=1):
            if t.id != i:
                raise InventoryError(f"token ids must be dense from 1, got {t.id} at {i}")
        self.tokens = tokens
        self.by_name = {t.name: t for t in tokens}
        # index-aligned semantics table, used by the hot evaluation loop
        self.fns = tuple(build_semantics(t.kind, t.param) for t in tokens)

    @classmethod
    def from_specs(cls, specs: Iterable[tuple[str, str, str]]) -> "TokenInventory":
        """Build from ``(name, kind, param)`` triples, assigning ids in order."""
        return cls([Token(i, n, k, p) for i, (n, k, p) in enumerate(specs, start=1)])

    def subset(self, names: Sequence[str]) -> "TokenInventory":
        """A new inventory holding the named tokens (renumbered densely)."""
        picked = []
        for n in names:
            if n not in self.by_name:
                raise UnknownToken(n)
            t = self.by_name[n]
            picked.append((t.name, t.kind, t.param))
        return TokenInventory.from_specs(picked)

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, index: int) -> Token:
        return self.tokens[index]

    def __eq__(self, other):
        return isinstance(other, TokenInventory) and self.tokens == other.tokens

    def __hash__(self):
        return hash(self.tokens)

    def __repr__(self):
        return f"TokenInventory({len(self)} tokens)"

    def program(self, indices: Iterable[int]) -> "Program":
        """Program from 0-based inventory indices."""
        return Program(tuple(self.tokens[i] for i in indices))

    def indices(self, program: "Program") -> tuple[int, ...]:
        return tuple(t.id - 1 for t in program)

    def dump(self, path) -> None:
        with open(path, "w") as f:
            for t in self.tokens:
                f.write(f"{t.id}\t{t.name}\t{t.kind}\t{t.param}\n")


def load_inventory(path) -> TokenInventory:
    """Read an ``id<TAB>name<TAB>kind<TAB>param`` inventory file."""
    tokens = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise InventoryError(f"{path}:{lineno}: expected 4 tab-separated fields")
        tokens.append(Token(int(parts[0]), parts[1], parts[2], parts[3]))
    return TokenInventory(tokens)


@lru_cache(maxsize=None)
def default_inventory() -> TokenInventory:
    """The canonical 41-token inventory shipped with the package."""
    with resources.as_file(resources.files("contsynth") / "data" / "dsl41.tsv") as p:
        return load_inventory(p)


@dataclass(frozen=True)
class Program:
    tokens: tuple

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return Program(self.tokens[i])
        return self.tokens[i]

    def __add__(self, other: "Program") -> "Program":
        return Program(self.tokens + other.tokens)

    def __str__(self):
        return format_program(self)

    def __repr__(self):
        return f"Program<{format_program(self)}>"


def token_semantics(token: Token, v: Value) -> Value:
    """Apply a single token; total, Null in gives Null out."""
    if v is None:
        return None
    return build_semantics(token.kind, token.param)(v)


def run_fns(fns: Sequence[Callable], v: Value) -> Value:
    for f in fns:
        if v is None:
            return None
        v = f(v)
    return v


def execute(program: Program, value: Value, inventory: TokenInventory | None = None) -> Value:
    """Run ``program`` on ``value``.

    Never raises on domain errors; those produce Null, which propagates.
    """
    inv = inventory or default_inventory()
    fns = []
    for t in program:
        if 0 < t.id <= len(inv) and inv.tokens[t.id - 1] == t:
            fns.append(inv.fns[t.id - 1])
        else:
            fns.append(build_semantics(t.kind, t.param))
    return run_fns(fns, value)


def parse_program(text: str, inventory: TokenInventory | None = None) -> Program:
    inv = inventory or default_inventory()
    names = [n.strip() for n in re.split(r"[,\n]", text)]
    names = [n for n in names if n]
    if not names:
        raise EmptyProgram("program text contains no tokens")
    tokens = []
    for n in names:
        if n not in inv.by_name:
            raise UnknownToken(n)
        tokens.append(inv.by_name[n])
    return Program(tuple(tokens))


def format_program(program: Program) -> str:
    return ",".join(t.name for t in program)
