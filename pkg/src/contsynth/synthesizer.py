"""The synthesis loop: sample genomes, decode, evaluate, then update or restart."""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr

from . import cmaes
from .dsl import Program, TokenInventory, default_inventory, format_program
from .mapping import (
    BinLayout,
    TokenProbabilities,
    build_layout,
    learned_mean,
    make_scheme,
    uniform_layout,
)
from .restart import BudgetExhausted, RestartBudget, RestartPolicy, apply_restart
from .specification import Specification, _metric_fn, satisfies

CHECK_MODES = ("full", "sub")
GENE_INITS = ("normal", "learned")
BIN_TYPES = ("uniform", "biased")

SOLVED = "Solved"
TIMEOUT = "Timeout"
STAGNATED = "Stagnated"

# restart-log policy name for a restart from the initial configuration
FRESH_START = "fresh"

# evaluation cache entries kept per run before the cache is flushed
CACHE_LIMIT = 400_000

# genome clipping for bin schemes: "edge" clips each token coordinate to the
# innermost values that still decode to the end bins (see BinLayout.edge_genomes);
# a number b clips to [-b, b] and must keep Phi(-b) inside both end bins
EDGE_BOUND = "edge"
GENOME_BOUND = EDGE_BOUND
BIN_SCHEMES = ("bin", "dynamic-bin")


class ConfigError(ValueError):
    pass


class MissingProbabilities(ConfigError):
    pass


@dataclass(frozen=True)
class SynthesisConfig:
    """Everything that determines a synthesis run, apart from the spec.

    ``restart=False`` is the no-restart engine: the first stagnation signal
    ends the run.  ``max_evals`` optionally caps the number of candidate
    evaluations, which gives a budget independent of machine speed.
    ``genome_bound`` clips the genomes fed back into the update of bin
    schemes (decoding always uses the raw sample): ``"edge"`` clips to the
    inner edges of the end bins, a number ``b`` to ``[-b, b]``, and
    ``None`` disables clipping.
    """

    length: int
    scheme: str = "bin"
    metric: str = "edit"
    policy: RestartPolicy = RestartPolicy(pb=True, cb=True)
    restart: bool = True
    bins: str = "uniform"
    probs: Optional[TokenProbabilities] = field(default=None, repr=False, compare=False)
    gene_init: str = "normal"
    check: str = "full"
    time_budget: float = 60.0
    max_evals: Optional[int] = None
    seed: int = 0
    sigma0: float = 1.0
    lam: Optional[int] = None
    max_lambda: int = 4096
    genome_bound: Optional[float | str] = GENOME_BOUND
    workers: int = 1

    @classmethod
    def setup(cls, name: str, length: int, probs: Optional[TokenProbabilities] = None,
              **overrides) -> "SynthesisConfig":
        """Named configurations: best, no-restart, multi-group, uniform-bin, sub-check."""
        base = dict(length=length, scheme="bin", policy=RestartPolicy(pb=True, cb=True),
                    restart=True, bins="biased", probs=probs, check="full")
        if name == "best":
            pass
        elif name == "no-restart":
            base["restart"] = False
        elif name == "multi-group":
            base["scheme"] = "multi-group"
        elif name == "uniform-bin":
            base["bins"] = "uniform"
        elif name == "sub-check":
            base["check"] = "sub"
        else:
            raise ConfigError(f"unknown setup {name!r}")
        base.update(overrides)
        return cls(**base)

    @property
    def policy_name(self) -> str:
        return self.policy.name if self.restart else "none"

    def validate(self, inventory: TokenInventory) -> None:
        if self.length < 1:
            raise ConfigError("length must be >= 1")
        if self.check not in CHECK_MODES:
            raise ConfigError(f"check must be one of {CHECK_MODES}")
        if self.gene_init not in GENE_INITS:
            raise ConfigError(f"gene_init must be one of {GENE_INITS}")
        if self.bins not in BIN_TYPES:
            raise ConfigError(f"bins must be one of {BIN_TYPES}")
        try:
            _metric_fn(self.metric)
            scheme = make_scheme(self.scheme, self.length)
            scheme.check(len(inventory))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        needs_probs = self.bins == "biased" or self.gene_init == "learned"
        if needs_probs and self.probs is None:
            raise MissingProbabilities("biased bins / learned init need token probabilities")
        if self.probs is not None and len(self.probs) != len(inventory):
            raise ConfigError("token probabilities do not match the inventory size")
        if not self.sigma0 > 0:
            raise ConfigError("sigma0 must be positive")
        if self.genome_bound is not None:
            self._check_bound(inventory)

    def _check_bound(self, inventory: TokenInventory) -> None:
        if isinstance(self.genome_bound, str):
            if self.genome_bound != EDGE_BOUND:
                raise ConfigError(f"genome_bound must be a number, {EDGE_BOUND!r} or None")
            return
        if self.scheme not in BIN_SCHEMES:
            return
        # the clip must stay inside the end bins or it would change programs
        probs = self.probs if self.bins == "biased" else TokenProbabilities.uniform(len(inventory))
        edge = min(probs.p[0], probs.p[-1])
        if not ndtr(-self.genome_bound) < edge:
            raise ConfigError(f"genome_bound {self.genome_bound} reaches past the end bins")

    def to_dict(self) -> dict:
        return {
            "length": self.length, "scheme": self.scheme, "metric": self.metric,
            "policy": self.policy_name, "bins": self.bins, "gene_init": self.gene_init,
            "check": self.check, "time_budget": self.time_budget,
            "max_evals": self.max_evals, "seed": self.seed, "sigma0": self.sigma0,
            "lam": self.lam, "max_lambda": self.max_lambda, "genome_bound": self.genome_bound,
        }


@dataclass
class SynthesisResult:
    found: Optional[Program]
    wall_time: float
    generations: int
    restarts: int
    programs_explored: int
    stop_reason: str
    restart_log: list = field(default_factory=list)

    @property
    def solved(self) -> bool:
        return self.found is not None

    def to_dict(self, config: Optional[SynthesisConfig] = None) -> dict:
        out = {
            "found": None if self.found is None else format_program(self.found),
            "wall_time": self.wall_time,
            "generations": self.generations,
            "restarts": self.restarts,
            "programs_explored": self.programs_explored,
            "stop_reason": self.stop_reason,
            "restart_log": self.restart_log,
        }
        if config is not None:
            out["config"] = config.to_dict()
        return out


class Evaluator:
    """Scores candidate index tuples against a spec.

    Scores are memoized per candidate, and the intermediate values of every
    proper prefix are memoized too, so a fresh candidate usually costs a
    single token application per example.
    """

    def __init__(self, spec: Specification, inventory: TokenInventory, metric: str = "edit"):
        self.inputs = spec.inputs
        self.outputs = spec.outputs
        self.fns = inventory.fns
        self.dist = _metric_fn(metric)
        self.cache: dict = {}
        self.prefixes: dict = {(): self.inputs}
        # per-example memo of output value -> distance to the expected output
        self.distances = [{} for _ in self.outputs]

    def values(self, prefix: tuple) -> tuple:
        """Per-example values after running ``prefix``."""
        vals = self.prefixes.get(prefix)
        if vals is None:
            f = self.fns[prefix[-1]]
            vals = tuple(None if v is None else f(v) for v in self.values(prefix[:-1]))
            if len(self.prefixes) >= CACHE_LIMIT:
                self.prefixes = {(): self.inputs}
            self.prefixes[prefix] = vals
        return vals

    def score(self, idx: tuple) -> int:
        hit = self.cache.get(idx)
        if hit is not None:
            return hit
        f = self.fns[idx[-1]]
        total = 0
        for v, out, memo in zip(self.values(idx[:-1]), self.outputs, self.distances):
            if v is not None:
                v = f(v)
            d = memo.get(v)
            if d is None:
                if len(memo) >= CACHE_LIMIT:
                    memo.clear()
                d = memo[v] = self.dist(v, out)
            total += d
        if len(self.cache) >= CACHE_LIMIT:
            self.cache.clear()
        self.cache[idx] = total
        return total


def expand_candidates(candidates: Sequence[tuple], mode: str) -> list:
    """Candidates in scan order; ``sub`` adds every prefix, shortest first."""
    if mode == "full":
        return list(candidates)
    seen, out = set(), []
    for c in candidates:
        for t in range(1, len(c) + 1):
            p = c[:t]
            if p not in seen:
                seen.add(p)
                out.append(p)
    return out


def check_candidates(programs: Sequence[Program], spec: Specification, mode: str = "full",
                     inventory: TokenInventory | None = None) -> tuple[Optional[Program], int]:
    """First satisfying candidate in scan order, and the number of tests run."""
    inv = inventory or default_inventory()
    tested = 0
    for idx in expand_candidates([inv.indices(p) for p in programs], mode):
        tested += 1
        prog = inv.program(idx)
        if satisfies(prog, spec, inv):
            return prog, tested
    return None, tested


def initialize_genes(config: SynthesisConfig, probs: Optional[TokenProbabilities],
                     layout: BinLayout, n_tokens: int) -> np.ndarray:
    scheme = make_scheme(config.scheme, config.length)
    if config.gene_init == "normal":
        return np.zeros(scheme.dimension(n_tokens))
    if probs is None:
        raise MissingProbabilities("learned gene initialization needs token probabilities")
    return learned_mean(scheme, probs, layout)


def _clip_bounds(config: SynthesisConfig, layout: BinLayout) -> Optional[tuple]:
    # argmax decoding is not clip-invariant, so only bin schemes are bounded
    if config.genome_bound is None or config.scheme not in BIN_SCHEMES:
        return None
    if config.genome_bound == EDGE_BOUND:
        return layout.edge_genomes()
    return -float(config.genome_bound), float(config.genome_bound)


def synthesize(spec: Specification, config: SynthesisConfig,
               inventory: TokenInventory | None = None, trace=None) -> SynthesisResult:
    """Search for a program of ``config.length`` tokens satisfying ``spec``.

    ``trace`` may be a :class:`~contsynth.cmaes.TraceWriter` receiving one
    row per generation.
    """
    inv = inventory or default_inventory()
    config.validate(inv)
    t0 = time.perf_counter()
    n_tokens = len(inv)
    scheme = make_scheme(config.scheme, config.length)
    layout = build_layout(config.probs) if config.bins == "biased" else uniform_layout(n_tokens)
    n = scheme.dimension(n_tokens)
    rng = np.random.default_rng(config.seed)
    evaluator = Evaluator(spec, inv, config.metric)
    m0 = initialize_genes(config, config.probs, layout, n_tokens)
    state = cmaes.init(cmaes.default_params(n, lam=config.lam), m0, config.sigma0)
    budget = RestartBudget(max_lambda=max(config.max_lambda, state.lam))
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    bounds = _clip_bounds(config, layout)

    def evaluate(decoded):
        cands = expand_candidates(decoded, config.check)
        return cands, [evaluator.score(c) for c in cands]

    generations = explored = 0
    history: list = []
    restart_log: list = []
    found = None
    stop = TIMEOUT
    try:
        while True:
            if time.perf_counter() - t0 >= config.time_budget:
                break
            if config.max_evals is not None and explored >= config.max_evals:
                break
            X = cmaes.sample(state, rng)
            decoded = scheme.decode_batch(X, layout)
            results = list(pool.map(evaluate, decoded)) if pool else [evaluate(d) for d in decoded]
            generations += 1
            fvals = np.empty(len(X))
            for k, (cands, scores) in enumerate(results):
                explored += len(cands)
                fvals[k] = min(scores)
                if found is None and fvals[k] == 0:
                    found = inv.program(cands[scores.index(0)])
            best = float(fvals.min())
            if trace is not None:
                trace.write(state, best)
            if found is not None:
                stop = SOLVED
                break
            history.append(best)
            reason = cmaes.check_stagnation(state, history)
            if reason is None:
                # clipped genomes decode to the same programs but keep the
                # mean out of the flat tails of the mapping
                parents = X
                if bounds is not None:
                    parents = X.copy()
                    cols = parents[:, : config.length]
                    np.clip(cols, bounds[0], bounds[1], out=cols)
                state = cmaes.update(state, cmaes.rank(parents, fvals))
                continue
            if not config.restart:
                stop = STAGNATED
                break
            policy_name = config.policy.name
            try:
                state = apply_restart(config.policy, state, rng, budget)
            except BudgetExhausted:
                # the population cap ends this regime; start over from the
                # initial configuration, as IPOP-style schemes do
                state = cmaes.init(cmaes.default_params(n, lam=config.lam), m0, config.sigma0)
                budget.restart_count += 1
                policy_name = FRESH_START
            restart_log.append({"generation": generations, "reason": str(reason),
                                "policy": policy_name, "lambda": state.lam, "best_f": best})
            history = []
    finally:
        if pool is not None:
            pool.shutdown()
    if found is not None and not satisfies(found, spec, inv):
        raise AssertionError(f"internal error: {found} does not satisfy the specification")
    return SynthesisResult(found=found, wall_time=time.perf_counter() - t0,
                           generations=generations, restarts=budget.restart_count,
                           programs_explored=explored, stop_reason=stop,
                           restart_log=restart_log)
