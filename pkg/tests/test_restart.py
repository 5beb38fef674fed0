import itertools

import numpy as np
import pytest

from contsynth import cmaes
from contsynth.restart import (
    INIT_BOX,
    POLICY_NAMES,
    BudgetExhausted,
    RestartBudget,
    RestartPolicy,
    apply_restart,
)

FIELDS = ("mean", "C", "p_sigma", "p_c", "B", "D")


def evolved_state(n=4, lam=None, gens=30, seed=0):
    """A state with non-trivial C, paths and mean."""
    rng = np.random.default_rng(seed)
    s = cmaes.init(cmaes.default_params(n, lam), np.full(n, 1.5), 0.8)
    for _ in range(gens):
        X = cmaes.sample(s, rng)
        s = cmaes.update(s, cmaes.rank(X, [float(np.sum(np.arange(1, n + 1) * x**2)) for x in X]))
    return s


ALL_POLICIES = [RestartPolicy(*flags) for flags in itertools.product([False, True], repeat=3)]


def test_policy_names_round_trip():
    assert sorted(p.name for p in ALL_POLICIES) == sorted(POLICY_NAMES)
    for p in ALL_POLICIES:
        assert RestartPolicy.parse(p.name) == p
    assert RestartPolicy.parse("no-restart") == RestartPolicy()
    with pytest.raises(ValueError):
        RestartPolicy.parse("PB+XX")


def test_pb_doubles_lambda_up_to_cap():
    s = evolved_state(lam=10)
    budget = RestartBudget(max_lambda=64)
    lams = []
    for _ in range(3):
        s = apply_restart(RestartPolicy(pb=True), s, np.random.default_rng(0), budget)
        lams.append(s.lam)
    assert lams == [20, 40, 64]
    with pytest.raises(BudgetExhausted):
        apply_restart(RestartPolicy(pb=True), s, np.random.default_rng(0), budget)
    assert budget.restart_count == 3


def test_pb_rederives_params():
    s = evolved_state(lam=10)
    new = apply_restart(RestartPolicy(pb=True), s, np.random.default_rng(0), RestartBudget())
    ref = cmaes.default_params(s.n, lam=20)
    assert new.params.mu == ref.mu
    assert np.array_equal(new.params.weights, ref.weights)


def test_pb_only_keeps_mean_and_covariance():
    s = evolved_state(lam=10)
    new = apply_restart(RestartPolicy(pb=True), s, np.random.default_rng(0), RestartBudget())
    assert new.lam == 20
    assert np.array_equal(new.mean, s.mean) and np.array_equal(new.C, s.C)


def test_cb_gives_identity():
    s = evolved_state()
    assert s.condition() > 1.5
    new = apply_restart(RestartPolicy(cb=True), s, np.random.default_rng(0), RestartBudget())
    assert new.condition() == 1.0
    assert np.array_equal(new.C, np.eye(s.n))
    assert not new.p_sigma.any() and not new.p_c.any()
    assert new.lam == s.lam and np.array_equal(new.mean, s.mean)


def test_mb_draws_inside_box():
    s = evolved_state()
    rng = np.random.default_rng(0)
    means = []
    for _ in range(200):
        means.append(apply_restart(RestartPolicy(mb=True), s, rng, RestartBudget()).mean)
    means = np.array(means)
    assert means.min() >= INIT_BOX[0] and means.max() <= INIT_BOX[1]
    assert not np.any(np.all(means == s.mean, axis=1))
    # roughly uniform: every quarter of the box is visited
    assert len(np.unique(np.floor(means[:, 0]))) == 4


def test_full_policy_changes_everything():
    s = evolved_state(lam=10)
    new = apply_restart(RestartPolicy(True, True, True), s, np.random.default_rng(1), RestartBudget())
    assert new.lam == 20 and new.condition() == 1.0
    assert not np.array_equal(new.mean, s.mean)


@pytest.mark.parametrize("policy", ALL_POLICIES, ids=lambda p: p.name)
def test_unflagged_components_bit_identical(policy):
    s = evolved_state(lam=10)
    new = apply_restart(policy, s, np.random.default_rng(3), RestartBudget())
    assert new.sigma == s.sigma0
    assert new.gen == s.gen and new.eval_count == s.eval_count
    if not policy.pb:
        assert new.params is s.params
    if not policy.mb:
        assert np.array_equal(new.mean, s.mean)
    if not policy.cb:
        for name in ("C", "p_sigma", "p_c", "B", "D"):
            assert np.array_equal(getattr(new, name), getattr(s, name))
    # the input state is never modified
    ref = evolved_state(lam=10)
    for name in FIELDS:
        assert np.array_equal(getattr(s, name), getattr(ref, name))


def test_repeated_pb_sequence():
    s = evolved_state(lam=8, gens=1)
    budget = RestartBudget(max_lambda=4096)
    seen = [s.lam]
    while True:
        try:
            s = apply_restart(RestartPolicy(pb=True), s, np.random.default_rng(0), budget)
        except BudgetExhausted:
            break
        seen.append(s.lam)
    assert seen == [8 * 2**r for r in range(10)]
    assert max(seen) <= budget.max_lambda
