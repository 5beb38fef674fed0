"""A from-scratch CMA-ES with an ask/rank/tell style functional interface.

The state is an immutable snapshot: :func:`update` returns a new
:class:`CmaState` and never touches its argument, which keeps restarts and
rank-invariance checks simple to reason about.

Typical loop::

    params = default_params(n)
    state = init(params, m0, sigma0)
    while ...:
        X = sample(state, rng)
        f = [objective(x) for x in X]
        state = update(state, rank(X, f))
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

# indicator threshold constant in the p_c update
ALPHA = 1.5
MAX_CONDITION = 1e14
TOLX_FACTOR = 1e-12


class DimensionMismatch(ValueError):
    pass


class NotEnoughRanked(ValueError):
    pass


class StagnationReason(enum.Enum):
    NO_EFFECT_AXIS = "NoEffectAxis"
    NO_EFFECT_COORD = "NoEffectCoord"
    CONDITION_COV = "ConditionCov"
    TOL_X = "TolX"
    TOL_STAGNATION = "TolStagnation"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class CmaParams:
    """Static strategy parameters for dimension ``n`` and population ``lam``.

    Attributes
    ----------
    n : int
        Search-space dimension.
    lam : int
        Population size (lambda).
    mu : int
        Number of parents used in recombination.
    weights : numpy.ndarray
        Positive, decreasing recombination weights summing to one.
    mu_w : float
        Variance-effective selection mass ``1 / sum(w**2)``.
    c_sigma, d_sigma : float
        Cumulation constant and damping of step-size control.
    c_c, c_1, c_mu : float
        Cumulation constant for ``p_c`` and the rank-one / rank-mu learning rates.
    alpha : float
        The ``p_c`` update is stalled when ``||p_sigma|| > alpha * sqrt(n)``.
    chi_n : float
        Approximation of ``E||N(0, I)||``.
    lazy_eigen : bool
        Amortize the eigendecomposition over several generations; ``False``
        decomposes every generation.
    """

    n: int
    lam: int
    mu: int
    weights: np.ndarray = field(repr=False)
    mu_w: float
    c_sigma: float
    d_sigma: float
    c_c: float
    c_1: float
    c_mu: float
    alpha: float = ALPHA
    chi_n: float = 0.0
    lazy_eigen: bool = True

    @property
    def eigen_interval(self) -> int:
        if not self.lazy_eigen:
            return 1
        return max(1, int(1.0 / (10 * self.n * (self.c_1 + self.c_mu))))


def default_popsize(n: int) -> int:
    return 4 + int(math.floor(3 * math.log(n)))


def default_params(n: int, lam: Optional[int] = None, lazy_eigen: bool = True) -> CmaParams:
    """Standard strategy parameters for dimension ``n``.

    ``lam`` overrides the default population size ``4 + floor(3 ln n)``.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    lam = default_popsize(n) if lam is None else int(lam)
    if lam < 2:
        raise ValueError("population size must be >= 2")
    mu = lam // 2
    raw = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mu_w = float(1.0 / np.sum(weights**2))

    c_sigma = (mu_w + 2) / (n + mu_w + 5)
    d_sigma = 1 + 2 * max(0.0, math.sqrt((mu_w - 1) / (n + 1)) - 1) + c_sigma
    c_c = (4 + mu_w / n) / (n + 4 + 2 * mu_w / n)
    c_1 = 2 / ((n + 1.3) ** 2 + mu_w)
    c_mu = min(1 - c_1, 2 * (mu_w - 2 + 1 / mu_w) / ((n + 2) ** 2 + mu_w))
    chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n**2))
    return CmaParams(n=n, lam=lam, mu=mu, weights=weights, mu_w=mu_w,
                     c_sigma=c_sigma, d_sigma=d_sigma, c_c=c_c, c_1=c_1, c_mu=c_mu,
                     chi_n=chi_n, lazy_eigen=lazy_eigen)


@dataclass(frozen=True)
class CmaState:
    """Dynamic state of the search distribution N(m, sigma^2 C).

    ``B`` and ``D`` cache the eigendecomposition ``C = B diag(D**2) B^T``,
    so ``D`` holds the standard deviations along the principal axes.
    """

    params: CmaParams
    mean: np.ndarray
    sigma: float
    C: np.ndarray
    p_sigma: np.ndarray
    p_c: np.ndarray
    B: np.ndarray
    D: np.ndarray
    sigma0: float
    gen: int = 0
    eval_count: int = 0
    eigen_gen: int = 0

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def lam(self) -> int:
        return self.params.lam

    def condition(self) -> float:
        ev = np.linalg.eigvalsh(self.C)
        if ev[0] <= 0:
            return math.inf
        return float(ev[-1] / ev[0])

    def invsqrt_C(self) -> np.ndarray:
        return (self.B / self.D) @ self.B.T


def init(params: CmaParams, m0, sigma0: float) -> CmaState:
    m0 = np.array(m0, dtype=float)
    if m0.shape != (params.n,):
        raise DimensionMismatch(f"initial mean has shape {m0.shape}, expected ({params.n},)")
    if not sigma0 > 0:
        raise ValueError("sigma0 must be positive")
    n = params.n
    return CmaState(params=params, mean=m0, sigma=float(sigma0), C=np.eye(n),
                    p_sigma=np.zeros(n), p_c=np.zeros(n), B=np.eye(n), D=np.ones(n),
                    sigma0=float(sigma0))


def sample(state: CmaState, rng: np.random.Generator) -> np.ndarray:
    """Draw ``lam`` genomes (rows) from N(m, sigma^2 C)."""
    z = rng.standard_normal((state.lam, state.n))
    return state.mean + state.sigma * (z * state.D) @ state.B.T


def rank(genomes, fvalues) -> np.ndarray:
    """Genomes sorted by ascending objective value (stable for ties)."""
    order = np.argsort(np.asarray(fvalues, dtype=float), kind="stable")
    return np.asarray(genomes)[order]


def _decompose(C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ev, B = np.linalg.eigh(C)
    # guard against round-off producing tiny negative eigenvalues
    ev = np.maximum(ev, np.finfo(float).tiny)
    return B, np.sqrt(ev)


def update(state: CmaState, ranked) -> CmaState:
    """One CMA-ES generation update from genomes sorted best first.

    Only the first ``mu`` rows of ``ranked`` enter the update, so the result
    depends on the ordering of objective values and not on their magnitudes.
    """
    p = state.params
    ranked = np.asarray(ranked, dtype=float)
    if ranked.ndim != 2 or ranked.shape[0] < p.mu:
        raise NotEnoughRanked(f"need at least mu={p.mu} ranked genomes")
    if ranked.shape[1] != p.n:
        raise DimensionMismatch("ranked genomes have the wrong dimension")
    n = p.n
    m_old, sigma = state.mean, state.sigma
    x = ranked[: p.mu]
    m_new = p.weights @ x
    y_w = (m_new - m_old) / sigma

    p_sigma = ((1 - p.c_sigma) * state.p_sigma
               + math.sqrt(p.c_sigma * (2 - p.c_sigma) * p.mu_w) * (state.invsqrt_C() @ y_w))
    ps_norm = float(np.linalg.norm(p_sigma))
    sigma_new = sigma * math.exp((p.c_sigma / p.d_sigma) * (ps_norm / p.chi_n - 1))

    h = 1.0 if ps_norm <= p.alpha * math.sqrt(n) else 0.0
    p_c = (1 - p.c_c) * state.p_c + h * math.sqrt(p.c_c * (2 - p.c_c) * p.mu_w) * y_w
    c_s = (1 - h * h) * p.c_1 * p.c_c * (2 - p.c_c)

    y = (x - m_old) / sigma
    rank_mu = (y.T * p.weights) @ y
    C = ((1 - p.c_1 - p.c_mu + c_s) * state.C
         + p.c_1 * np.outer(p_c, p_c)
         + p.c_mu * rank_mu)
    C = np.triu(C) + np.triu(C, 1).T

    gen = state.gen + 1
    B, D, eigen_gen = state.B, state.D, state.eigen_gen
    if gen - eigen_gen >= p.eigen_interval:
        B, D = _decompose(C)
        eigen_gen = gen
    return replace(state, mean=m_new, sigma=sigma_new, C=C, p_sigma=p_sigma, p_c=p_c,
                   B=B, D=D, gen=gen, eval_count=state.eval_count + ranked.shape[0],
                   eigen_gen=eigen_gen)


def stagnation_window(n: int, lam: int) -> int:
    return 10 + math.ceil(30 * n / lam)


def check_stagnation(state: CmaState, recent_best: Sequence[float] = ()) -> Optional[StagnationReason]:
    """Return why the search has stalled, or ``None`` while it is healthy.

    ``recent_best`` is the per-generation best objective value since the
    last (re)start, oldest first.
    """
    m, sigma = state.mean, state.sigma
    diag = np.sqrt(np.diag(state.C))
    if sigma * max(float(diag.max()), float(np.abs(state.p_c).max())) < TOLX_FACTOR * state.sigma0:
        return StagnationReason.TOL_X
    if state.condition() > MAX_CONDITION:
        return StagnationReason.CONDITION_COV
    steps = 0.1 * sigma * state.D * state.B  # column i is the step along axis i
    for i in range(state.n):
        if np.all(m + steps[:, i] == m):
            return StagnationReason.NO_EFFECT_AXIS
    if np.any(m + 0.2 * sigma * diag == m):
        return StagnationReason.NO_EFFECT_COORD
    w = stagnation_window(state.n, state.lam)
    if len(recent_best) >= w:
        recent = np.asarray(recent_best[-w:], dtype=float)
        if recent.max() == recent.min():
            return StagnationReason.TOL_STAGNATION
    return None


# ---------------------------------------------------------------------------
# plain minimization driver and trace export


@dataclass
class MinimizeResult:
    xbest: np.ndarray
    fbest: float
    evals: int
    state: CmaState
    stop: str


def fmin(objective: Callable[[np.ndarray], float], m0, sigma0: float, *,
         seed=None, max_evals: int = 10_000, ftarget: float = -math.inf,
         lam: Optional[int] = None, callback=None) -> MinimizeResult:
    """Minimize ``objective`` without restarts.

    Stops at ``ftarget``, at ``max_evals`` or on stagnation.
    """
    rng = np.random.default_rng(seed)
    state = init(default_params(len(m0), lam), m0, sigma0)
    xbest, fbest, evals = np.array(m0, dtype=float), math.inf, 0
    history: list[float] = []
    while True:
        X = sample(state, rng)
        f = np.array([objective(x) for x in X])
        evals += len(f)
        i = int(np.argmin(f))
        if f[i] < fbest:
            xbest, fbest = X[i].copy(), float(f[i])
        history.append(float(f[i]))
        if fbest <= ftarget:
            stop = "ftarget"
        elif evals >= max_evals:
            stop = "maxevals"
        else:
            reason = check_stagnation(state, history)
            stop = str(reason) if reason else ""
        if not stop:
            state = update(state, rank(X, f))
        if callback is not None:
            callback(state, float(f[i]))
        if stop:
            return MinimizeResult(xbest, fbest, evals, state, stop)


TRACE_FIELDS = ["gen", "sigma", "cond_C", "norm_m", "best_f", "eval_count"]


class TraceWriter:
    """Per-generation CSV trace of the distribution's state variables."""

    def __init__(self, path_or_file, with_mean: bool = False):
        self._own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        self._f = open(path_or_file, "w", newline="") if self._own else path_or_file
        self._writer = csv.writer(self._f)
        self.with_mean = with_mean
        self._header_done = False

    def write(self, state: CmaState, best_f: float) -> None:
        if not self._header_done:
            header = list(TRACE_FIELDS)
            if self.with_mean:
                header += [f"m{i}" for i in range(state.n)]
            self._writer.writerow(header)
            self._header_done = True
        row = [state.gen, repr(state.sigma), repr(state.condition()),
               repr(float(np.linalg.norm(state.mean))), repr(float(best_f)), state.eval_count]
        if self.with_mean:
            row += [repr(float(v)) for v in state.mean]
        self._writer.writerow(row)

    def close(self) -> None:
        if self._own:
            self._f.close()
        else:
            self._f.flush()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
