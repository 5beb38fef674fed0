"""
CMA-ES on two test functions
============================

The optimizer is a plain ask/tell state machine; ``fmin`` wraps it in a loop.
"""

import numpy as np

from contsynth import cmaes


def sphere(x):
    return float(np.dot(x, x))


def rosenbrock(x):
    return float(np.sum(100 * (x[1:] - x[:-1] ** 2) ** 2 + (1 - x[:-1]) ** 2))


r = cmaes.fmin(sphere, np.full(10, 3.0), 2.0, seed=0, max_evals=5000, ftarget=1e-10)
print(f"sphere-10:     f={r.fbest:.2e} after {r.evals} evaluations")

r = cmaes.fmin(rosenbrock, np.zeros(5), 0.5, seed=0, max_evals=50_000, ftarget=1e-6)
print(f"rosenbrock-5:  f={r.fbest:.2e} after {r.evals} evaluations")
print("x =", np.round(r.xbest, 4))

# the same loop by hand
state = cmaes.init(cmaes.default_params(4), np.ones(4), 0.5)
rng = np.random.default_rng(1)
for gen in range(40):
    X = cmaes.sample(state, rng)
    f = [sphere(x) for x in X]
    state = cmaes.update(state, cmaes.rank(X, f))
    if gen % 10 == 0:
        print(f"gen {gen:3d}  sigma={state.sigma:.3e}  cond(C)={state.condition():.1f}  best={min(f):.2e}")

# only the ranking of f matters: a monotone transform gives the identical state
X = cmaes.sample(state, rng)
f = np.array([sphere(x) for x in X])
a = cmaes.update(state, cmaes.rank(X, f))
b = cmaes.update(state, cmaes.rank(X, np.exp(f)))
print("identical after exp(f):", np.array_equal(a.C, b.C) and np.array_equal(a.mean, b.mean))
