"""Batch benchmarks: every (corpus entry x configuration x seed) run, as CSV.

The CSV holds one row per run, a blank line, then an aggregate table with
one row per configuration.  Without ``timing`` no wall-clock value reaches
the file, so identical inputs give byte-identical output.
"""
from __future__ import annotations

import csv
import io
import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Optional, Sequence

import numpy as np

from .corpus import CorpusEntry, estimate_token_probs
from .dsl import TokenInventory, default_inventory, format_program
from .mapping import TokenProbabilities
from .restart import RestartPolicy
from .synthesizer import SynthesisConfig, SynthesisResult, synthesize

CSV_VERSION = 1
THREADS_ENV = "CONTSYNTH_THREADS"

ROW_FIELDS = ["config", "entry", "target", "length", "seed", "solved", "found",
              "stop_reason", "generations", "restarts", "programs_explored"]
AGG_FIELDS = ["config", "runs", "solved", "percentage", "mean_programs_explored"]
TIME_FIELDS = ["time_min", "time_q25", "time_median", "time_q75", "time_max"]


def config_label(config: SynthesisConfig) -> str:
    return "/".join([config.scheme, config.policy_name, config.bins, config.check, config.metric])


def config_matrix(length: int, schemes=("bin",), policies=("PB+CB",), bins=("biased",),
                  checks=("full",), metrics=("edit",), probs: Optional[TokenProbabilities] = None,
                  **common) -> list:
    """Cross product of the configuration axes, in a fixed order."""
    out = []
    for scheme, pol, b, check, metric in itertools.product(schemes, policies, bins, checks, metrics):
        policy = RestartPolicy.parse(pol)
        restart = policy != RestartPolicy()
        if not restart:
            policy = RestartPolicy(pb=True, cb=True)
        out.append(SynthesisConfig(length=length, scheme=scheme, policy=policy, restart=restart,
                                   bins=b, probs=probs, check=check, metric=metric, **common))
    return out


def run_seed(base: int, entry_index: int) -> int:
    return base * 100_000 + entry_index


def percentage(solved: int, total: int) -> str:
    """``100 * solved / total`` rounded half-up to one decimal, computed exactly."""
    if total == 0:
        return "0.0"
    value = Decimal(100 * solved) / Decimal(total)
    return str(value.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


@dataclass
class BenchRow:
    config: str
    entry: int
    target: str
    length: int
    seed: int
    result: SynthesisResult

    def as_dict(self, timing: bool) -> dict:
        r = self.result
        d = {"config": self.config, "entry": self.entry, "target": self.target,
             "length": self.length, "seed": self.seed, "solved": int(r.solved),
             "found": "" if r.found is None else format_program(r.found),
             "stop_reason": r.stop_reason, "generations": r.generations,
             "restarts": r.restarts, "programs_explored": r.programs_explored}
        if timing:
            d["wall_time"] = f"{r.wall_time:.3f}"
        return d


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)
    timing: bool = False

    def configs(self) -> list:
        return list(dict.fromkeys(r.config for r in self.rows))

    def aggregate(self, config: str) -> dict:
        rows = [r for r in self.rows if r.config == config]
        solved = [r for r in rows if r.result.solved]
        out = {"config": config, "runs": len(rows), "solved": len(solved),
               "percentage": percentage(len(solved), len(rows)),
               "mean_programs_explored": f"{np.mean([r.result.programs_explored for r in rows]):.1f}"}
        if self.timing:
            # synthesis time is only defined for solved runs
            times = [r.result.wall_time for r in solved]
            qs = np.quantile(times, [0, .25, .5, .75, 1]) if times else [float("nan")] * 5
            out.update({k: f"{q:.3f}" for k, q in zip(TIME_FIELDS, qs)})
        return out

    def solved_entries(self, config: str) -> set:
        return {r.entry for r in self.rows if r.config == config and r.result.solved}

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# contsynth bench v{CSV_VERSION}\n")
        row_fields = ROW_FIELDS + (["wall_time"] if self.timing else [])
        w = csv.DictWriter(buf, row_fields, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow(r.as_dict(self.timing))
        buf.write("\n")
        agg_fields = AGG_FIELDS + (TIME_FIELDS if self.timing else [])
        w = csv.DictWriter(buf, agg_fields, lineterminator="\n")
        w.writeheader()
        for c in self.configs():
            w.writerow(self.aggregate(c))
        return buf.getvalue()


def worker_count(requested: int) -> int:
    cap = os.environ.get(THREADS_ENV)
    n = max(1, requested)
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def _run_one(job):
    # the inventory travels as plain tokens: its semantics are closures
    entry, config, tokens = job
    return synthesize(entry.spec, config, TokenInventory(tokens))


def run_bench(corpus: Sequence[CorpusEntry], configs: Sequence[SynthesisConfig],
              seeds: Sequence[int] = (0,), workers: int = 1, timing: bool = False,
              inventory: TokenInventory | None = None, progress=None) -> BenchReport:
    """Run every (config, seed, entry) combination; rows come back in that order.

    Configurations with biased bins and no probabilities use the corpus's
    own token frequencies.
    """
    inv = inventory or default_inventory()
    corpus_probs = None
    jobs, meta = [], []
    for config in configs:
        if config.bins == "biased" and config.probs is None:
            if corpus_probs is None:
                corpus_probs = estimate_token_probs(corpus, inv)
            config = replace(config, probs=corpus_probs)
        label = config_label(config)
        for base in seeds:
            for i, entry in enumerate(corpus):
                seed = run_seed(base, i)
                jobs.append((entry, replace(config, seed=seed, length=entry.length), inv.tokens))
                meta.append((label, i, format_program(entry.program), entry.length, seed))
    n_workers = worker_count(workers)
    if n_workers > 1:
        with ProcessPoolExecutor(n_workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_run_one(job))
            if progress is not None:
                progress(len(results), len(jobs), results[-1])
    rows = [BenchRow(*m, result=r) for m, r in zip(meta, results)]
    return BenchReport(rows, timing=timing)


def read_aggregates(text: str) -> list:
    """Parse the aggregate table back out of a bench CSV."""
    blocks = text.split("\n\n")
    if len(blocks) < 2:
        raise ValueError("no aggregate block in bench output")
    return list(csv.DictReader(io.StringIO(blocks[1])))


def read_rows(text: str) -> list:
    body = "\n".join(l for l in text.split("\n\n")[0].splitlines() if not l.startswith("#"))
    return list(csv.DictReader(io.StringIO(body)))
