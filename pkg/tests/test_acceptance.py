"""Acceptance checks at their stated tolerances, one summary line each."""
import itertools
import time

import numpy as np
import pytest
from scipy.special import ndtr, ndtri

from conftest import record
from contsynth import cmaes
from contsynth.bench import run_bench
from contsynth.cli import main
from contsynth.corpus import estimate_token_probs, generate_corpus, save_corpus
from contsynth.dsl import default_inventory, execute, parse_program
from contsynth.mapping import build_layout, make_scheme
from contsynth.restart import INIT_BOX, BudgetExhausted, RestartBudget, RestartPolicy, apply_restart
from contsynth.specification import satisfies
from contsynth.synthesizer import SynthesisConfig, synthesize

INV = default_inventory()
STATE_FIELDS = ("mean", "C", "p_sigma", "p_c", "B", "D")


def same_state(a, b):
    return (all(np.array_equal(getattr(a, k), getattr(b, k)) for k in STATE_FIELDS)
            and a.sigma == b.sigma and a.gen == b.gen and a.eval_count == b.eval_count)


def sphere(x):
    return float(np.dot(x, x))


def rosenbrock(x):
    return float(np.sum(100 * (x[1:] - x[:-1] ** 2) ** 2 + (1 - x[:-1]) ** 2))


# --- 1 --------------------------------------------------------------------------------------


def test_c1_table_program():
    prog = parse_program("Map(+1),Sort,Filter(Even),Reverse", INV)
    x = (5, 0, -3, 1, 4)
    out = execute(prog, x)
    times = []
    for _ in range(200):
        t0 = time.perf_counter()
        execute(prog, x)
        times.append(time.perf_counter() - t0)
    worst = max(times)
    ok = out == (6, 2, -2) and worst < 1e-3
    record(1, ok, f"output {list(out)}, slowest of 200 calls {worst * 1e6:.0f} us")
    assert ok


# --- 2 --------------------------------------------------------------------------------------


def test_c2_cmaes_convergence():
    t0 = time.perf_counter()
    sphere_hits = sum(
        cmaes.fmin(sphere, np.full(10, 3.0), 2.0, seed=s, max_evals=5000, ftarget=1e-10).fbest < 1e-10
        for s in range(20))
    rosen_hits = sum(
        cmaes.fmin(rosenbrock, np.zeros(5), 0.5, seed=s, max_evals=50_000, ftarget=1e-6).fbest < 1e-6
        for s in range(20))
    elapsed = time.perf_counter() - t0
    ok = sphere_hits >= 18 and rosen_hits >= 16 and elapsed < 120
    record(2, ok, f"sphere {sphere_hits}/20, rosenbrock {rosen_hits}/20, {elapsed:.1f} s")
    assert ok


# --- 3 --------------------------------------------------------------------------------------


def test_c3_rank_invariance():
    rng = np.random.default_rng(0)
    trials = ok_count = 0
    for n in (2, 5, 10, 20):
        s = cmaes.init(cmaes.default_params(n), rng.normal(size=n), 0.5 + rng.random())
        for _ in range(25):
            X = cmaes.sample(s, rng)
            f = np.array([sphere(x) for x in X])
            base = cmaes.update(s, cmaes.rank(X, f))
            for g in (lambda v: 2 * v + 7, np.exp):
                trials += 1
                ok_count += same_state(base, cmaes.update(s, cmaes.rank(X, g(f))))
            s = base
    ok = ok_count == trials
    record(3, ok, f"{ok_count}/{trials} updates bit-identical under 2f+7 and exp(f)")
    assert ok


# --- 4 --------------------------------------------------------------------------------------


def test_c4_bin_stability():
    corpus = generate_corpus([4], 50, seed=0)
    layout = build_layout(estimate_token_probs(corpus))
    b = layout.boundaries
    scheme = make_scheme("bin", 4)
    rng = np.random.default_rng(0)
    changes = 0
    for _ in range(10_000):
        g = rng.normal(scale=1.5, size=4)
        u = ndtr(g)
        room = np.min(np.abs(u[:, None] - b[None, :]), axis=1)
        # strictly inside half the distance to the nearest boundary
        target = u + rng.uniform(-1, 1, size=4) * room / 2 * (1 - 1e-9)
        g2 = ndtri(np.clip(target, 1e-300, 1 - 1e-16))
        changes += scheme.decode(g, layout) != scheme.decode(g2, layout)
    ok = changes == 0
    record(4, ok, f"{changes} program changes over 10^4 perturbed genomes")
    assert ok


# --- 5 --------------------------------------------------------------------------------------

SMALL_TOKENS = ["Head", "Reverse", "Sort", "Sum", "Map(+1)", "Map(*2)", "Filter(Even)", "Take(2)"]


@pytest.mark.slow
def test_c5_reduced_inventory():
    t0 = time.perf_counter()
    inv = INV.subset(SMALL_TOKENS)
    corpus = generate_corpus([2], 30, seed=0, inventory=inv)
    probs = estimate_token_probs(corpus, inv)
    every = [inv.program(idx) for idx in itertools.product(range(8), repeat=2)]
    assert len(every) == 64
    solvable = sum(any(satisfies(p, e.spec, inv) for p in every) for e in corpus)
    solved = sound = 0
    for i, e in enumerate(corpus):
        r = synthesize(e.spec, SynthesisConfig.setup("best", 2, probs, time_budget=10, seed=i), inv)
        if r.solved:
            solved += 1
            sound += all(execute(r.found, ex.input, inv) == ex.output for ex in e.spec)
    elapsed = time.perf_counter() - t0
    ok = solvable == 30 and solved >= 27 and sound == solved and elapsed < 600
    record(5, ok, f"solved {solved}/30 (enumeration: {solvable}/30 solvable), "
                  f"re-check {sound}/{solved}, {elapsed:.0f} s")
    assert ok


# --- 6 and 7 ----------------------------------------------------------------------------------

BUDGET = 60.0
SETUPS = ("best", "no-restart", "multi-group", "uniform-bin")


@pytest.fixture(scope="module")
def corpus_runs():
    corpus = generate_corpus([4], 50, seed=0)
    probs = estimate_token_probs(corpus)
    runs = {}
    for name in SETUPS:
        cfg = SynthesisConfig.setup(name, 4, probs, time_budget=BUDGET)
        t0 = time.perf_counter()
        report = run_bench(corpus, [cfg], seeds=[0], workers=1)
        runs[name] = (report, time.perf_counter() - t0)
    return corpus, runs


def solved_set(runs, name):
    report, _ = runs[name]
    return report.solved_entries(report.configs()[0])


@pytest.mark.slow
def test_c6_best_setup_rate(corpus_runs):
    corpus, runs = corpus_runs
    report, elapsed = runs["best"]
    solved = solved_set(runs, "best")
    for row in report.rows:
        if row.result.solved:
            assert satisfies(row.result.found, corpus[row.entry].spec)
    rate = len(solved) / len(corpus)
    ok = rate >= 0.8 and elapsed <= 3600
    record(6, ok, f"best setup solved {len(solved)}/50 ({100 * rate:.0f}%), {elapsed / 60:.1f} min")
    assert ok


@pytest.mark.slow
def test_c7_ordering(corpus_runs):
    _, runs = corpus_runs
    best, nores = solved_set(runs, "best"), solved_set(runs, "no-restart")
    multi, uni = solved_set(runs, "multi-group"), solved_set(runs, "uniform-bin")
    a = len(best) >= len(nores) and bool(best - nores)
    b = len(best) >= len(multi)
    c = len(best) >= len(uni)
    ok = a and b and c
    record(7, ok, f"PB+CB {len(best)} vs no-restart {len(nores)} (only PB+CB: {len(best - nores)}); "
                  f"bin {len(best)} vs multi-group {len(multi)}; biased {len(best)} vs uniform {len(uni)}")
    assert ok


# --- 8 --------------------------------------------------------------------------------------


def evolved_state(lam=10):
    rng = np.random.default_rng(0)
    s = cmaes.init(cmaes.default_params(4, lam), np.full(4, 1.5), 0.8)
    for _ in range(30):
        X = cmaes.sample(s, rng)
        s = cmaes.update(s, cmaes.rank(X, [float(np.sum(np.arange(1, 5) * x**2)) for x in X]))
    return s


def test_c8_restart_semantics():
    failures = []
    s = evolved_state()
    budget = RestartBudget(max_lambda=64)
    cur, lams = s, []
    try:
        while True:
            cur = apply_restart(RestartPolicy(pb=True), cur, np.random.default_rng(0), budget)
            lams.append(cur.lam)
    except BudgetExhausted:
        pass
    if lams != [20, 40, 64]:
        failures.append(f"PB sequence {lams}")
    cb = apply_restart(RestartPolicy(cb=True), s, np.random.default_rng(0), RestartBudget())
    if cb.condition() != 1.0:
        failures.append(f"CB cond {cb.condition()}")
    rng = np.random.default_rng(1)
    for _ in range(1000):
        m = apply_restart(RestartPolicy(mb=True), s, rng, RestartBudget()).mean
        if m.min() < INIT_BOX[0] or m.max() > INIT_BOX[1]:
            failures.append(f"MB mean {m}")
            break
    for flags in itertools.product([False, True], repeat=3):
        p = RestartPolicy(*flags)
        new = apply_restart(p, s, np.random.default_rng(2), RestartBudget())
        kept = [] if p.mb else ["mean"]
        kept += [] if p.cb else ["C", "p_sigma", "p_c", "B", "D"]
        for k in kept:
            if not np.array_equal(getattr(new, k), getattr(s, k)):
                failures.append(f"{p.name} changed {k}")
        if not p.pb and new.lam != s.lam:
            failures.append(f"{p.name} changed lambda")
    ok = not failures
    record(8, ok, "PB doubling to cap, CB cond 1, MB in box, unflagged bit-identical"
           if ok else "; ".join(failures))
    assert ok


# --- 9 --------------------------------------------------------------------------------------


def test_c9_bench_reproducible(tmp_path):
    corpus_path = tmp_path / "corpus.jsonl"
    save_corpus(generate_corpus([3], 6, seed=4), corpus_path)
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        code = main(["bench", str(corpus_path), "--seeds", "0,1", "--workers", "1",
                     "--policy", "PB+CB,none", "--bins", "biased,uniform",
                     "--budget", "600", "--max-evals", "5000", "--out", str(out)])
        assert code == 0
        outs.append(out.read_bytes())
    ok = outs[0] == outs[1]
    record(9, ok, f"two bench runs, {len(outs[0])} bytes each, identical={ok}")
    assert ok
