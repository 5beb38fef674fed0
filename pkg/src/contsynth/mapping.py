"""Genome-to-program mapping schemes.

Every scheme is total: any finite real vector of the right dimension decodes
to a program (or, for dynamic bin mapping, to a list of candidate programs).
Internally decoding works on 0-based inventory indices; the public ``*_map``
functions wrap the result into :class:`~contsynth.dsl.Program` objects.

Bins live on the unit interval: a coordinate ``g`` is first pushed through
the standard normal CDF, ``u = Phi(g)``, and ``u`` is looked up in the
cumulative token probabilities.  The two end bins therefore cover the
unbounded tails of the real line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtr, ndtri

from .dsl import Program, TokenInventory, UnknownToken

PROB_FLOOR = 1e-4

SCHEME_NAMES = ("bin", "dynamic-bin", "single-group", "multi-group", "dynamic-multi-group")


class DegenerateProbabilities(ValueError):
    pass


class LengthExceedsInventory(ValueError):
    pass


class GenomeDimensionError(ValueError):
    pass


class LayoutMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# token probabilities and bin layouts


@dataclass(frozen=True)
class TokenProbabilities:
    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1 or len(p) < 1:
            raise DegenerateProbabilities("probabilities must be a non-empty vector")
        if abs(p.sum() - 1) > 1e-9 or p.min() < PROB_FLOOR * (1 - 1e-9):
            raise DegenerateProbabilities("probabilities must sum to 1 and respect the floor")
        object.__setattr__(self, "p", p)

    @classmethod
    def from_weights(cls, weights, floor: float = PROB_FLOOR) -> "TokenProbabilities":
        """Normalize nonnegative weights, then lift every entry to ``floor``.

        ``p_i = floor + (1 - K * floor) * w_i / sum(w)`` keeps the sum at one
        and every entry at or above the floor.
        """
        w = np.asarray(weights, dtype=float)
        k = len(w)
        if k == 0 or not np.all(np.isfinite(w)) or np.any(w < 0):
            raise DegenerateProbabilities("weights must be finite and nonnegative")
        if k * floor >= 1:
            raise DegenerateProbabilities(f"floor {floor} too large for {k} tokens")
        total = w.sum()
        q = np.full(k, 1.0 / k) if total <= 0 else w / total
        return cls(floor + (1 - k * floor) * q)

    @classmethod
    def uniform(cls, k: int) -> "TokenProbabilities":
        return cls(np.full(k, 1.0 / k))

    def __len__(self):
        return len(self.p)


def load_probabilities(path, inventory: TokenInventory) -> TokenProbabilities:
    """Read ``token_name<TAB>probability`` lines; missing tokens get weight 0.

    Values are normalized; they are floored only if some entry falls below
    the floor.
    """
    w = np.zeros(len(inventory))
    for line in Path(path).read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        name, value = line.rsplit("\t", 1)
        if name not in inventory.by_name:
            raise UnknownToken(name)
        w[inventory.by_name[name].id - 1] = float(value)
    total = w.sum()
    if total > 0 and np.all(w >= 0) and (w / total).min() >= PROB_FLOOR:
        # already a valid distribution up to scale: keep it as written
        return TokenProbabilities(w / total)
    return TokenProbabilities.from_weights(w)


def save_probabilities(probs: TokenProbabilities, inventory: TokenInventory, path) -> None:
    with open(path, "w") as f:
        for t, v in zip(inventory, probs.p):
            f.write(f"{t.name}\t{float(v)!r}\n")


@dataclass(frozen=True)
class BinLayout:
    boundaries: np.ndarray

    @property
    def n_tokens(self) -> int:
        return len(self.boundaries) - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    def lookup(self, u) -> np.ndarray:
        """0-based bin index for each ``u`` in [0, 1]."""
        idx = np.searchsorted(self.boundaries, u, side="right") - 1
        return np.clip(idx, 0, self.n_tokens - 1)

    def midpoint(self, j: int) -> float:
        return 0.5 * (self.boundaries[j] + self.boundaries[j + 1])

    def edge_genomes(self) -> tuple[float, float]:
        """Innermost genome values that still decode to the first and last bin.

        Every g below ``lo`` lands in the first bin and every g above ``hi``
        in the last, so clipping to ``[lo, hi]`` never changes a decoding.
        """
        b = self.boundaries
        return _step_until(float(ndtri(b[1])), -1.0, lambda g: ndtr(g) < b[1]), \
            _step_until(float(ndtri(b[-2])), 1.0, lambda g: ndtr(g) >= b[-2])


def _step_until(g: float, direction: float, ok) -> float:
    # ndtri is accurate to a few ulps; walk outwards with growing steps
    step = max(abs(g), 1.0) * 1e-16
    while not ok(g):
        g += direction * step
        step *= 2
    return g


def build_layout(probs: TokenProbabilities) -> BinLayout:
    b = np.concatenate(([0.0], np.cumsum(probs.p)))
    b[-1] = 1.0
    if np.any(np.diff(b) <= 0):
        raise DegenerateProbabilities("bin boundaries are not strictly increasing")
    return BinLayout(b)


def uniform_layout(k: int) -> BinLayout:
    return build_layout(TokenProbabilities.uniform(k))


# ---------------------------------------------------------------------------
# index-level decoders


def bin_indices(g, layout: BinLayout) -> tuple:
    return tuple(layout.lookup(ndtr(np.asarray(g, dtype=float))).tolist())


def top_indices(values, count: int) -> list:
    """Indices of the ``count`` largest values, largest first, ties to lower index."""
    return np.argsort(-np.asarray(values, dtype=float), kind="stable")[:count].tolist()


def admissible_k(length: int, n_tokens: int) -> list:
    """Group counts k dividing ``length`` such that each group fits in the inventory."""
    return [k for k in range(1, length + 1) if length % k == 0 and length // k <= n_tokens]


def decode_k(g0: float, length: int, n_tokens: int) -> int:
    ks = admissible_k(length, n_tokens)
    i = min(int(math.floor(float(ndtr(g0)) * len(ks))), len(ks) - 1)
    return ks[i]


def length_hint(g_last: float, max_length: int) -> int:
    """Length suggested by the extra dynamic-bin coordinate (equal bins)."""
    return min(int(math.floor(float(ndtr(g_last)) * max_length)), max_length - 1) + 1


# ---------------------------------------------------------------------------
# schemes


class MappingScheme:
    """Base class; subclasses fix how a genome becomes candidate programs."""

    name = ""

    def __init__(self, length: int):
        if length < 1:
            raise ValueError("program length must be >= 1")
        self.length = length

    def dimension(self, n_tokens: int) -> int:
        raise NotImplementedError

    def check(self, n_tokens: int) -> None:
        """Raise if the scheme cannot work with an inventory of this size."""

    def decode(self, g, layout: BinLayout) -> list:
        """Candidate index tuples, in checking order."""
        raise NotImplementedError

    def decode_batch(self, X, layout: BinLayout) -> list:
        """``decode`` applied to every row of ``X``."""
        return [self.decode(g, layout) for g in X]

    def __eq__(self, other):
        return type(self) is type(other) and self.length == other.length

    def __hash__(self):
        return hash((self.name, self.length))

    def __repr__(self):
        return f"{type(self).__name__}({self.length})"


class Bin(MappingScheme):
    name = "bin"

    def dimension(self, n_tokens):
        return self.length

    def decode(self, g, layout):
        return [bin_indices(g, layout)]

    def decode_batch(self, X, layout):
        rows = layout.lookup(ndtr(np.asarray(X, dtype=float))).tolist()
        return [[tuple(r)] for r in rows]


class DynamicBin(MappingScheme):
    """Bin mapping over ``length`` (the maximum) plus a length coordinate.

    All prefixes are candidates; the length coordinate is decoded only as a
    diagnostic hint.
    """

    name = "dynamic-bin"

    def dimension(self, n_tokens):
        return self.length + 1

    def decode(self, g, layout):
        full = bin_indices(np.asarray(g)[: self.length], layout)
        return [full[:t] for t in range(1, self.length + 1)]

    def decode_batch(self, X, layout):
        X = np.asarray(X, dtype=float)
        rows = layout.lookup(ndtr(X[:, : self.length])).tolist()
        return [[tuple(r[:t]) for t in range(1, self.length + 1)] for r in rows]


class SingleGroup(MappingScheme):
    name = "single-group"

    def dimension(self, n_tokens):
        return n_tokens

    def check(self, n_tokens):
        if self.length > n_tokens:
            raise LengthExceedsInventory(
                f"single-group mapping needs length <= {n_tokens}, got {self.length}")

    def decode(self, g, layout):
        self.check(len(g))
        return [tuple(top_indices(g, self.length))]


class MultiGroup(MappingScheme):
    name = "multi-group"

    def dimension(self, n_tokens):
        return self.length * n_tokens

    def decode(self, g, layout):
        groups = np.asarray(g, dtype=float).reshape(self.length, -1)
        return [tuple(np.argmax(groups, axis=1).tolist())]

    def decode_batch(self, X, layout):
        X = np.asarray(X, dtype=float)
        rows = np.argmax(X.reshape(len(X), self.length, -1), axis=2).tolist()
        return [[tuple(r)] for r in rows]


class DynamicMultiGroup(MappingScheme):
    name = "dynamic-multi-group"

    def dimension(self, n_tokens):
        return 1 + self.length * n_tokens

    def check(self, n_tokens):
        if not admissible_k(self.length, n_tokens):
            raise LengthExceedsInventory("no group count fits this inventory")

    def decode(self, g, layout):
        g = np.asarray(g, dtype=float)
        n_tokens = (len(g) - 1) // self.length
        k = decode_k(g[0], self.length, n_tokens)
        per = self.length // k
        groups = g[1:].reshape(self.length, n_tokens)
        out = []
        for i in range(k):
            out.extend(top_indices(groups[i], per))
        return [tuple(out)]


_SCHEMES = {cls.name: cls for cls in (Bin, DynamicBin, SingleGroup, MultiGroup, DynamicMultiGroup)}


def make_scheme(name: str, length: int) -> MappingScheme:
    try:
        return _SCHEMES[name](length)
    except KeyError:
        raise ValueError(f"unknown mapping scheme {name!r}; expected one of {SCHEME_NAMES}") from None


def genome_dimension(scheme: MappingScheme, n_tokens: int) -> int:
    return scheme.dimension(n_tokens)


# ---------------------------------------------------------------------------
# program-level API


def _check_dim(g, expected: int) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.shape != (expected,):
        raise GenomeDimensionError(f"genome has shape {g.shape}, expected ({expected},)")
    return g


def _check_layout(layout: BinLayout, inventory: TokenInventory) -> None:
    if layout.n_tokens != len(inventory):
        raise LayoutMismatch(f"layout has {layout.n_tokens} bins for {len(inventory)} tokens")


def bin_map(g, layout: BinLayout, inventory: TokenInventory) -> Program:
    _check_layout(layout, inventory)
    g = np.asarray(g, dtype=float)
    if g.ndim != 1 or len(g) < 1:
        raise GenomeDimensionError("bin genome must be a non-empty vector")
    return inventory.program(bin_indices(g, layout))


def single_group_map(g, length: int, inventory: TokenInventory) -> Program:
    g = _check_dim(g, len(inventory))
    scheme = SingleGroup(length)
    return inventory.program(scheme.decode(g, None)[0])


def multi_group_map(g, length: int, inventory: TokenInventory) -> Program:
    g = _check_dim(g, length * len(inventory))
    return inventory.program(MultiGroup(length).decode(g, None)[0])


def dynamic_multi_group_map(g, length: int, inventory: TokenInventory) -> Program:
    g = _check_dim(g, 1 + length * len(inventory))
    return inventory.program(DynamicMultiGroup(length).decode(g, None)[0])


def dynamic_bin_map(g, layout: BinLayout, inventory: TokenInventory) -> list:
    """All prefixes of the decoded maximum-length program, shortest first."""
    _check_layout(layout, inventory)
    g = np.asarray(g, dtype=float)
    if g.ndim != 1 or len(g) < 2:
        raise GenomeDimensionError("dynamic bin genome needs at least two coordinates")
    return [inventory.program(c) for c in DynamicBin(len(g) - 1).decode(g, layout)]


def learned_mean(scheme: MappingScheme, probs: TokenProbabilities, layout: BinLayout) -> np.ndarray:
    """Initial mean that decodes to the most probable token everywhere.

    Bin-style coordinates sit at the CDF-inverse of the dominant token's bin
    midpoint.  Group coordinates get centred log-probabilities, so the argmax
    picks the dominant token.
    """
    n_tokens = len(probs)
    best = int(np.argmax(probs.p))
    if isinstance(scheme, (Bin, DynamicBin)):
        m = np.full(scheme.dimension(n_tokens), float(ndtri(layout.midpoint(best))))
        if isinstance(scheme, DynamicBin):
            m[-1] = 0.0
        return m
    logits = np.log(probs.p) - np.log(probs.p).mean()
    if isinstance(scheme, SingleGroup):
        return logits
    m = np.tile(logits, scheme.length)
    if isinstance(scheme, DynamicMultiGroup):
        m = np.concatenate(([0.0], m))
    return m
