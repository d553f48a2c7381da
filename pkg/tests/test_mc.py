import itertools

import numpy as np
import pytest

from conftest import random_mdp, strategy_values
from upmdp.bench import UavConfig, example_pmc, gen_uav
from upmdp.mc import (BatchChecker, InfiniteReward, bounded_reach, evaluate_spec,
                      expected_reward, qualitative, reach_prob)
from upmdp.pmdp import InstantiatedMdp, instantiate, parse_spec


def closed_form(v):
    return 0.1 * v * (1 - v) ** 2 + 0.5 * v ** 3 * (1 - v)


def fig1(v):
    return instantiate(example_pmc(), {"v": v})


@pytest.mark.parametrize("v, expected", [(0.5, 0.04375), (0.25, 0.019921875), (0.8, 0.0544)])
def test_example_values(backend, v, expected):
    assert reach_prob(fig1(v)).value == pytest.approx(expected, abs=1e-12)


def test_example_closed_form(backend):
    for v in np.random.default_rng(1).uniform(0.01, 0.99, 100):
        assert abs(reach_prob(fig1(v)).value - closed_form(v)) <= 1e-6


def test_target_everything():
    m = fig1(0.3).with_target(range(8))
    assert reach_prob(m, direction="max").value == 1.0
    assert reach_prob(m, direction="min").value == 1.0


def test_qualitative_example():
    q = qualitative(fig1(0.4))
    assert {6, 7} <= q.prob0
    assert 3 in q.prob1
    assert not (q.prob0 & q.prob1)
    q = qualitative(fig1(0.4), target=[0])
    assert 0 in q.prob1


def test_qualitative_all_paths():
    rows = {(0, "a"): [(1, 0.5), (2, 0.5)], (1, "a"): [(2, 1.0)], (2, "a"): [(2, 1.0)]}
    m = InstantiatedMdp.from_rows(3, 0, rows, [2])
    assert qualitative(m, direction="min").prob1 == frozenset({0, 1, 2})


def test_qualitative_direction():
    # state 0: action a loops forever, action b goes to the target
    rows = {(0, "a"): [(0, 1.0)], (0, "b"): [(1, 1.0)], (1, "a"): [(1, 1.0)]}
    m = InstantiatedMdp.from_rows(2, 0, rows, [1])
    assert 0 in qualitative(m, direction="max").prob1
    assert 0 in qualitative(m, direction="min").prob0
    assert reach_prob(m, direction="max").value == 1.0
    assert reach_prob(m, direction="min").value == 0.0


def test_bounded_examples(backend):
    m = fig1(0.5)
    assert bounded_reach(m, k=0).value == 0.0
    assert bounded_reach(m.with_target([0]), k=0).value == 1.0
    assert bounded_reach(m, k=3).value == pytest.approx(0.04375, abs=1e-15)
    assert bounded_reach(m, k=2).value == 0.0


def test_bounded_monotone_and_limit(backend):
    rng = np.random.default_rng(7)
    for _ in range(20):
        m, _, _ = random_mdp(rng)
        for d in ("max", "min"):
            vals = [bounded_reach(m, k=k, direction=d).value for k in range(0, 60)]
            assert all(b >= a - 1e-15 for a, b in zip(vals, vals[1:]))
        # geometric convergence on these tiny models
        vals = [bounded_reach(m, k=k).value for k in (500, 2000)]
        exact = reach_prob(m, tol=1e-13).value
        assert abs(vals[-1] - exact) <= 1e-8


def test_oracle_equivalence(backend):
    rng = np.random.default_rng(2024)
    for _ in range(50):
        m, rows, target = random_mdp(rng)
        vals = strategy_values(m.n_states, rows, target)
        hi = reach_prob(m, direction="max", tol=1e-12).value
        lo = reach_prob(m, direction="min", tol=1e-12).value
        assert hi == pytest.approx(vals[:, 0].max(), abs=1e-8)
        assert lo == pytest.approx(vals[:, 0].min(), abs=1e-8)


def test_properties_random(backend):
    rng = np.random.default_rng(5)
    for _ in range(100):
        m, rows, target = random_mdp(rng, max_states=6, max_actions=3)
        hi = reach_prob(m, direction="max")
        lo = reach_prob(m, direction="min")
        assert 0.0 <= lo.value <= hi.value + 1e-12 <= 1.0 + 1e-12
        q0 = qualitative(m, direction="max")
        x, _ = BatchChecker(m, "reach", "max").solve_all(m.probs)
        assert all(x[0, s] == 0.0 for s in q0.prob0)
        assert all(x[0, s] == 1.0 for s in q0.prob1)
        for res, d in ((hi, "max"), (lo, "min")):
            # fixing the extracted strategy reproduces the optimum
            chain = m.restrict(res.strategy)
            again = reach_prob(chain, direction=d).value
            assert abs(again - res.value) <= 2e-6


def test_pmc_degeneracy():
    for v in (0.1, 0.5, 0.9):
        m = fig1(v)
        assert abs(reach_prob(m, direction="max").value - reach_prob(m, direction="min").value) <= 2e-6


def test_strategy_soundness_uav(backend):
    model, dist = gen_uav()
    from upmdp.sampling import draw
    from upmdp.pmdp import instantiate_many
    samples = draw(dist, model.parameters, 5, 11)
    for u in samples:
        m = instantiate(model, u)
        res = reach_prob(m, direction="max")
        chain = m.restrict(res.strategy)
        assert abs(reach_prob(chain).value - res.value) <= 2e-6
        assert set(res.strategy.values()) <= set(m.actions)


def test_max_strategy_escapes_end_component():
    # both actions of state 0 are optimal-looking at value 1 if the self-loop is picked blindly
    rows = {(0, "a"): [(0, 1.0)], (0, "b"): [(1, 1.0)], (1, "a"): [(1, 1.0)]}
    m = InstantiatedMdp.from_rows(2, 0, rows, [1])
    res = reach_prob(m, direction="max")
    assert res.strategy[0] == "b"


def test_tie_break_lowest_action():
    rows = {(0, "b"): [(1, 1.0)], (0, "a"): [(1, 1.0)], (1, "a"): [(1, 1.0)]}
    m = InstantiatedMdp.from_rows(2, 0, rows, [1])
    assert reach_prob(m, direction="min").strategy[0] == "a"


# -- expected reward --------------------------------------------------------------

def test_reward_examples(backend):
    rows = {(0, "a"): [(1, 1.0)], (1, "a"): [(1, 1.0)]}
    m = InstantiatedMdp.from_rows(2, 0, rows, [1], {(0, "a"): 3.0})
    assert expected_reward(m).value == pytest.approx(3.0, abs=1e-9)
    assert expected_reward(m.with_target([0])).value == 0.0
    rows = {(0, "a"): [(1, 0.5), (2, 0.5)], (1, "a"): [(2, 1.0)], (2, "a"): [(2, 1.0)]}
    m = InstantiatedMdp.from_rows(3, 0, rows, [2], {(0, "a"): 1.0, (1, "a"): 1.0})
    assert expected_reward(m).value == pytest.approx(1.5, abs=1e-6)
    assert expected_reward(m, direction="max").value == pytest.approx(1.5, abs=1e-6)


def test_reward_infinite():
    rows = {(0, "a"): [(1, 0.5), (2, 0.5)], (1, "a"): [(1, 1.0)], (2, "a"): [(2, 1.0)]}
    m = InstantiatedMdp.from_rows(3, 0, rows, [2], {(0, "a"): 1.0})
    with pytest.raises(InfiniteReward):
        expected_reward(m)


def test_reward_min_zero_cycle(backend):
    # a zero-reward self-loop must not be mistaken for a free way to the target
    rows = {(0, "wait"): [(0, 1.0)], (0, "go"): [(1, 1.0)], (1, "a"): [(1, 1.0)]}
    m = InstantiatedMdp.from_rows(2, 0, rows, [1], {(0, "go"): 2.0})
    res = expected_reward(m, direction="min")
    assert res.value == pytest.approx(2.0, abs=1e-9)
    assert res.strategy[0] == "go"
    with pytest.raises(InfiniteReward):
        expected_reward(m, direction="max")


def reward_values(n, rows, target, rew):
    """Expected reward from state 0 for every memoryless strategy (inf if not almost sure)."""
    acts = [sorted(a for (s2, a) in rows if s2 == s) for s in range(n)]
    tmask = np.zeros(n, dtype=bool)
    tmask[list(target)] = True
    out = []
    for choice in itertools.product(*acts):
        P = np.zeros((n, n))
        r = np.zeros(n)
        for s, a in enumerate(choice):
            r[s] = rew[(s, a)]
            for t, p in rows[(s, a)]:
                P[s, t] += p
        can = tmask.copy()
        while True:
            new = can | ((P > 0) & can[None, :]).any(axis=1)
            if (new == can).all():
                break
            can = new
        bad = ~can
        while True:
            new = bad | ((P > 0) & bad[None, :]).any(axis=1)
            new &= ~tmask
            if (new == bad).all():
                break
            bad = new
        if bad[0]:
            out.append(np.inf)
            continue
        q = ~bad & ~tmask
        x = np.zeros(n)
        if q.any():
            x[q] = np.linalg.solve(np.eye(q.sum()) - P[np.ix_(q, q)], r[q])
        out.append(x[0])
    return np.array(out)


def test_reward_oracle(backend):
    rng = np.random.default_rng(99)
    checked = 0
    for _ in range(200):
        m, rows, target = random_mdp(rng, max_states=4)
        rew = {k: float(rng.integers(0, 4)) for k in rows}
        m = InstantiatedMdp.from_rows(m.n_states, 0, rows, target, rew, check=False)
        vals = reward_values(m.n_states, rows, target, rew)
        for d, ref in (("min", vals.min()), ("max", vals.max())):
            if np.isinf(ref):
                with pytest.raises(InfiniteReward):
                    expected_reward(m, direction=d, tol=1e-12)
            else:
                assert expected_reward(m, direction=d, tol=1e-12).value == pytest.approx(ref, abs=1e-7)
                checked += 1
    assert checked > 100


def test_evaluate_spec_examples():
    res = evaluate_spec(fig1(0.5), parse_spec("P <= 0.13"))
    assert res.value == pytest.approx(0.04375, abs=1e-12) and res.satisfied
    assert not evaluate_spec(fig1(0.5), parse_spec("P > 0.13")).satisfied
    assert evaluate_spec(fig1(0.5), parse_spec("P <= 0.13 step=2")).value == 0.0


def test_spec_needs_direction_on_mdp():
    model, _ = gen_uav(UavConfig(grid=(2, 1, 1), obstacles=frozenset(), target=frozenset({(1, 0, 0)}),
                                 zones=1))
    with pytest.raises(ValueError):
        BatchChecker.for_spec(model, parse_spec("P >= 0.5"))


def test_batch_matches_single_and_workers(backend):
    model = example_pmc()
    from upmdp.pmdp import instantiate_many
    v = np.random.default_rng(3).uniform(0.01, 0.99, (600, 1))
    probs = instantiate_many(model, v)
    bc = BatchChecker(model, "reach", None)
    one = bc.solve(probs, workers=1)
    many = bc.solve(probs, workers=3, chunk=100)
    assert np.array_equal(one, many)
    assert np.max(np.abs(one - closed_form(v[:, 0]))) <= 1e-12
