"""Random target programs, their specifications and token statistics."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .dsl import (
    MAX_INT,
    MAX_LIST_LEN,
    MIN_INT,
    Program,
    TokenInventory,
    default_inventory,
    format_program,
    parse_program,
    run_fns,
)
from .mapping import TokenProbabilities
from .specification import IOExample, Specification

N_PROBES = 50
MIN_INPUT_LEN = 3
MAX_REJECTIONS = 100_000
MAX_INPUT_ATTEMPTS = 2_000


class GenerationExhausted(RuntimeError):
    pass


class SpecGenerationExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class CorpusEntry:
    program: Program
    spec: Specification

    @property
    def length(self) -> int:
        return len(self.program)

    def to_json(self) -> dict:
        return {"program": format_program(self.program), "length": self.length,
                "examples": self.spec.to_json()}

    @classmethod
    def from_json(cls, obj: dict, inventory: TokenInventory | None = None) -> "CorpusEntry":
        return cls(parse_program(obj["program"], inventory), Specification.from_json(obj["examples"]))


def random_input(rng: np.random.Generator, value_range=(MIN_INT, MAX_INT),
                 min_len: int = MIN_INPUT_LEN, max_len: int = MAX_LIST_LEN) -> tuple:
    n = int(rng.integers(min_len, max_len + 1))
    return tuple(rng.integers(value_range[0], value_range[1] + 1, size=n).tolist())


def make_probes(rng: np.random.Generator, count: int = N_PROBES, value_range=(MIN_INT, MAX_INT)) -> list:
    return [random_input(rng, value_range) for _ in range(count)]


def _outputs(fns, probes):
    return [run_fns(fns, x) for x in probes]


def is_redundant(program: Program, probes: Sequence, inventory: TokenInventory | None = None) -> bool:
    """True if deleting one token, or two adjacent tokens, leaves every probe output unchanged.

    This is an empirical, probe-relative test, not a proof of equivalence.
    """
    if not probes:
        raise ValueError("redundancy check needs at least one probe input")
    inv = inventory or default_inventory()
    fns = [inv.fns[t.id - 1] for t in program]
    target = _outputs(fns, probes)
    n = len(fns)
    for width in (1, 2):
        for i in range(n - width + 1):
            if _outputs(fns[:i] + fns[i + width:], probes) == target:
                return True
    return False


def generate_program(length: int, rng: np.random.Generator, inventory: TokenInventory | None = None,
                     probes: Optional[Sequence] = None) -> Program:
    """Uniformly drawn program with no removable token, rejection-sampled."""
    if length < 1:
        raise ValueError("length must be >= 1")
    inv = inventory or default_inventory()
    probes = make_probes(rng) if probes is None else probes
    for _ in range(MAX_REJECTIONS):
        idx = rng.integers(0, len(inv), size=length).tolist()
        prog = inv.program(idx)
        fns = [inv.fns[i] for i in idx]
        if all(v is None for v in _outputs(fns, probes)):
            continue
        if not is_redundant(prog, probes, inv):
            return prog
    raise GenerationExhausted(f"no acceptable program of length {length} after {MAX_REJECTIONS} draws")


def _informative(x: tuple) -> bool:
    return any(v < 0 for v in x) and any(v % 2 == 0 for v in x)


def generate_spec(program: Program, s: int, rng: np.random.Generator,
                  inventory: TokenInventory | None = None, value_range=(MIN_INT, MAX_INT)) -> Specification:
    """``s`` examples on random inputs for which the program does not fail.

    The first input always holds a negative and an even value.
    """
    inv = inventory or default_inventory()
    fns = [inv.fns[t.id - 1] for t in program]
    examples = []
    for j in range(s):
        for _ in range(MAX_INPUT_ATTEMPTS):
            x = random_input(rng, value_range)
            if j == 0 and not _informative(x):
                continue
            y = run_fns(fns, x)
            if y is not None:
                examples.append(IOExample(x, y))
                break
        else:
            raise SpecGenerationExhausted(f"no valid input found for {format_program(program)}")
    return Specification(tuple(examples))


def generate_corpus(lengths: Iterable[int], count_per_length: int, seed: int,
                    inventory: TokenInventory | None = None, s: int = 5,
                    value_range=(MIN_INT, MAX_INT)) -> list:
    """Deduplicated corpus, ``count_per_length`` entries for each length."""
    inv = inventory or default_inventory()
    rng = np.random.default_rng(seed)
    probes = make_probes(rng, value_range=value_range)
    seen = set()
    entries = []
    for length in lengths:
        made = 0
        while made < count_per_length:
            prog = generate_program(length, rng, inv, probes)
            if prog.tokens in seen:
                continue
            try:
                spec = generate_spec(prog, s, rng, inv, value_range)
            except SpecGenerationExhausted:
                continue
            seen.add(prog.tokens)
            entries.append(CorpusEntry(prog, spec))
            made += 1
    return entries


def estimate_token_probs(corpus: Sequence[CorpusEntry], inventory: TokenInventory | None = None) -> TokenProbabilities:
    """Relative token frequencies over all corpus programs, floored."""
    if not corpus:
        raise ValueError("cannot estimate token probabilities from an empty corpus")
    inv = inventory or default_inventory()
    counts = np.zeros(len(inv))
    for entry in corpus:
        for t in entry.program:
            counts[t.id - 1] += 1
    return TokenProbabilities.from_weights(counts)


def save_corpus(entries: Sequence[CorpusEntry], path) -> None:
    with open(path, "w") as f:
        for e in entries:
            f.write(json.dumps(e.to_json()) + "\n")


def load_corpus(path, inventory: TokenInventory | None = None) -> list:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            out.append(CorpusEntry.from_json(json.loads(line), inventory))
    return out
