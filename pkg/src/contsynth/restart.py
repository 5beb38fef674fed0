"""Restart policies built from three flags: PB, MB and CB.

* PB doubles the population size (capped by the budget),
* MB re-draws the mean uniformly from the initialization box,
* CB resets the covariance matrix and both evolution paths.

Every restart also resets the step size to its initial value.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .cmaes import CmaState, default_params

DEFAULT_MAX_LAMBDA = 4096
INIT_BOX = (-2.0, 2.0)

POLICY_NAMES = ("none", "PB", "MB", "CB", "PB+MB", "PB+CB", "MB+CB", "PB+MB+CB")


class BudgetExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class RestartPolicy:
    pb: bool = False
    mb: bool = False
    cb: bool = False

    @property
    def name(self) -> str:
        parts = [flag for flag, on in (("PB", self.pb), ("MB", self.mb), ("CB", self.cb)) if on]
        return "+".join(parts) or "none"

    def __str__(self):
        return self.name

    @classmethod
    def parse(cls, text: str) -> "RestartPolicy":
        """Parse ``PB+CB`` style names; ``none`` gives the all-false policy."""
        text = text.strip()
        if text.lower() in ("none", "no-restart", ""):
            return cls()
        flags = {part.strip().upper() for part in text.split("+")}
        unknown = flags - {"PB", "MB", "CB"}
        if unknown:
            raise ValueError(f"unknown restart flag(s) {sorted(unknown)} in {text!r}")
        return cls(pb="PB" in flags, mb="MB" in flags, cb="CB" in flags)


@dataclass
class RestartBudget:
    max_lambda: int = DEFAULT_MAX_LAMBDA
    restart_count: int = 0


def apply_restart(policy: RestartPolicy, state: CmaState, rng: np.random.Generator,
                  budget: RestartBudget, box: tuple = INIT_BOX) -> CmaState:
    """Restart ``state`` under ``policy``; the input state is left untouched.

    Raises :class:`BudgetExhausted` when PB is requested but the population
    is already at ``budget.max_lambda``.
    """
    params = state.params
    if policy.pb:
        if params.lam >= budget.max_lambda:
            raise BudgetExhausted(f"population already at cap {budget.max_lambda}")
        lam = min(2 * params.lam, budget.max_lambda)
        params = default_params(params.n, lam=lam, lazy_eigen=params.lazy_eigen)

    changes = dict(params=params, sigma=state.sigma0)
    if policy.mb:
        changes["mean"] = rng.uniform(box[0], box[1], size=state.n)
    if policy.cb:
        n = state.n
        changes.update(C=np.eye(n), p_sigma=np.zeros(n), p_c=np.zeros(n),
                       B=np.eye(n), D=np.ones(n), eigen_gen=state.gen)
    budget.restart_count += 1
    return replace(state, **changes)
