"""Command-line frontend: ``contsynth {gen-corpus,synth,bench,cma-selftest}``."""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import cmaes
from .bench import config_matrix, run_bench, worker_count
from .corpus import estimate_token_probs, generate_corpus, load_corpus, save_corpus
from .dsl import default_inventory, load_inventory
from .mapping import SCHEME_NAMES, load_probabilities, save_probabilities
from .restart import RestartPolicy
from .specification import METRICS, load_spec
from .synthesizer import BIN_TYPES, CHECK_MODES, GENE_INITS, SynthesisConfig, synthesize

EXIT_SOLVED, EXIT_ERROR, EXIT_UNSOLVED = 0, 1, 2


def parse_lengths(text: str) -> list:
    """``5-10`` or ``4,6,8`` or ``4``."""
    out = []
    for part in text.split(","):
        if "-" in part.strip()[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _csv_list(text: str) -> list:
    return [t.strip() for t in text.split(",") if t.strip()]


def _inventory(args):
    return load_inventory(args.dsl) if getattr(args, "dsl", None) else default_inventory()


def _probs(args, inv):
    return load_probabilities(args.probs, inv) if args.probs else None


# ---------------------------------------------------------------------------


def cmd_gen_corpus(args) -> int:
    inv = _inventory(args)
    corpus = generate_corpus(parse_lengths(args.lengths), args.count, args.seed, inv, s=args.examples)
    save_corpus(corpus, args.out)
    if args.probs_out:
        save_probabilities(estimate_token_probs(corpus, inv), inv, args.probs_out)
    print(f"wrote {len(corpus)} entries to {args.out}", file=sys.stderr)
    return 0


def cmd_synth(args) -> int:
    inv = _inventory(args)
    spec = load_spec(args.spec)
    policy = RestartPolicy.parse(args.policy)
    restart = policy != RestartPolicy()
    config = SynthesisConfig(
        length=args.length, scheme=args.scheme, metric=args.metric,
        policy=policy if restart else RestartPolicy(pb=True, cb=True), restart=restart,
        bins=args.bins, probs=_probs(args, inv), gene_init=args.init, check=args.check,
        time_budget=args.budget, max_evals=args.max_evals, seed=args.seed,
        sigma0=args.sigma0, lam=args.lam, max_lambda=args.max_lambda,
        workers=worker_count(args.workers))
    trace = cmaes.TraceWriter(args.trace) if args.trace else None
    try:
        result = synthesize(spec, config, inv, trace=trace)
    finally:
        if trace is not None:
            trace.close()
    json.dump(result.to_dict(config), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_SOLVED if result.solved else EXIT_UNSOLVED


def cmd_bench(args) -> int:
    inv = _inventory(args)
    corpus = load_corpus(args.corpus, inv)
    if not corpus:
        raise ValueError(f"corpus {args.corpus} is empty")
    configs = config_matrix(
        corpus[0].length, schemes=_csv_list(args.scheme), policies=_csv_list(args.policy),
        bins=_csv_list(args.bins), checks=_csv_list(args.check), metrics=_csv_list(args.metric),
        probs=_probs(args, inv), time_budget=args.budget, max_evals=args.max_evals,
        gene_init=args.init)
    seeds = [int(s) for s in _csv_list(args.seeds)]

    def progress(done, total, result):
        if args.verbose:
            print(f"[{done}/{total}] {result.stop_reason} {result.wall_time:.1f}s", file=sys.stderr)

    report = run_bench(corpus, configs, seeds, workers=args.workers, timing=args.timing,
                       inventory=inv, progress=progress)
    text = report.to_csv()
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return 0


def _sphere(x):
    return float(np.dot(x, x))


def _rosenbrock(x):
    return float(np.sum(100 * (x[1:] - x[:-1] ** 2) ** 2 + (1 - x[:-1]) ** 2))


def selftest(seeds: int = 20, out=sys.stdout) -> bool:
    """Optimizer self-test: convergence on two test functions plus invariants."""
    ok = True

    def report(name, passed, detail):
        nonlocal ok
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}", file=out)

    finals = []
    for s in range(seeds):
        r = cmaes.fmin(_sphere, np.full(10, 3.0), 2.0, seed=s, max_evals=5000, ftarget=1e-10)
        finals.append(r.fbest)
    hits = sum(f < 1e-10 for f in finals)
    report("sphere-10", hits >= math.ceil(0.9 * seeds),
           f"{hits}/{seeds} below 1e-10, median {np.median(finals):.2e}")

    hits = 0
    for s in range(seeds):
        r = cmaes.fmin(_rosenbrock, np.zeros(5), 0.5, seed=s, max_evals=50_000, ftarget=1e-6)
        hits += r.fbest < 1e-6
    report("rosenbrock-5", hits >= math.ceil(0.8 * seeds), f"{hits}/{seeds} below 1e-6")

    rng = np.random.default_rng(0)
    state = cmaes.init(cmaes.default_params(6), rng.normal(size=6), 0.7)
    X = cmaes.sample(state, rng)
    # sphere values keep exp finite, so both transforms stay strictly increasing
    f = np.array([_sphere(x) for x in X])
    base = cmaes.update(state, cmaes.rank(X, f))
    same = all(
        _states_equal(base, cmaes.update(state, cmaes.rank(X, g(f))))
        for g in (lambda v: 2 * v + 7, np.exp))
    report("rank-invariance", same, "states after monotone transforms are identical")

    state = cmaes.init(cmaes.default_params(5), np.zeros(5), 0.5)
    rng = np.random.default_rng(1)
    spd = True
    for _ in range(1000):
        X = cmaes.sample(state, rng)
        state = cmaes.update(state, cmaes.rank(X, np.array([_rosenbrock(x) for x in X])))
        if cmaes.check_stagnation(state) is not None:
            state = cmaes.init(state.params, state.mean, 0.5)
        spd &= bool(np.all(np.linalg.eigvalsh(state.C) > 0))
    report("covariance-spd", spd, "C stays positive definite over 1000 updates")
    return ok


def _states_equal(a, b) -> bool:
    for name in ("mean", "C", "p_sigma", "p_c", "B", "D"):
        if not np.array_equal(getattr(a, name), getattr(b, name)):
            return False
    return a.sigma == b.sigma and a.gen == b.gen and a.eval_count == b.eval_count


def cmd_cma_selftest(args) -> int:
    return 0 if selftest(args.seeds) else EXIT_ERROR


# ---------------------------------------------------------------------------


def _add_search_flags(p, multi: bool):
    many = " (comma-separated list)" if multi else ""
    p.add_argument("--scheme", default="bin", help=f"one of {', '.join(SCHEME_NAMES)}{many}")
    p.add_argument("--policy", default="PB+CB", help=f"restart policy, or 'none'{many}")
    p.add_argument("--bins", default="biased" if multi else "uniform", help=f"{'|'.join(BIN_TYPES)}{many}")
    p.add_argument("--check", default="full", help=f"{'|'.join(CHECK_MODES)}{many}")
    p.add_argument("--metric", default="edit", help=f"{'|'.join(METRICS)}{many}")
    p.add_argument("--probs", help="token probability file (name<TAB>prob)")
    p.add_argument("--init", default="normal", choices=GENE_INITS, help="gene initialization")
    p.add_argument("--budget", type=float, default=60.0, help="seconds per synthesis run")
    p.add_argument("--max-evals", type=int, help="cap on candidate evaluations per run")
    p.add_argument("--dsl", help="token inventory TSV (default: the built-in 41 tokens)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="contsynth", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="generate random target programs and their specs")
    p.add_argument("--lengths", required=True, help="e.g. 5-10 or 4")
    p.add_argument("--count", type=int, default=100, help="programs per length")
    p.add_argument("--examples", type=int, default=5, help="examples per spec")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--probs-out", help="also write token frequencies here")
    p.add_argument("--dsl")
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("synth", help="synthesize a program for one spec file (JSON lines)")
    p.add_argument("spec")
    p.add_argument("--length", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sigma0", type=float, default=1.0)
    p.add_argument("--lam", type=int)
    p.add_argument("--max-lambda", type=int, default=4096)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--trace", help="write a per-generation CSV trace here")
    _add_search_flags(p, multi=False)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="run a configuration matrix over a corpus")
    p.add_argument("corpus")
    p.add_argument("--seeds", default="0", help="comma-separated base seeds")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    p.add_argument("--timing", action="store_true", help="add wall-clock columns (not reproducible)")
    p.add_argument("-v", "--verbose", action="store_true")
    _add_search_flags(p, multi=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("cma-selftest", help="optimizer convergence and invariant checks")
    p.add_argument("--seeds", type=int, default=20)
    p.set_defaults(func=cmd_cma_selftest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"contsynth: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
