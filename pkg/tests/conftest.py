import itertools

import numpy as np
import pytest

from upmdp import kernels
from upmdp.pmdp import InstantiatedMdp


@pytest.fixture(params=kernels.available_backends())
def backend(request, monkeypatch):
    """Run the test once per importable kernel backend."""
    impl = kernels.load_backend(request.param)
    monkeypatch.setattr(kernels, "iterate", impl.iterate)
    monkeypatch.setattr(kernels, "log_binomial_tail", impl.log_binomial_tail)
    return request.param


def random_mdp(rng, max_states=3, max_actions=2):
    """Small random MDP with a random nonempty target set, as (model, rows, target)."""
    n = int(rng.integers(1, max_states + 1))
    rows = {}
    for s in range(n):
        for a in range(int(rng.integers(1, max_actions + 1))):
            k = int(rng.integers(1, n + 1))
            succ = rng.choice(n, size=k, replace=False)
            p = rng.dirichlet(np.ones(k))
            rows[(s, f"a{a}")] = [(int(t), float(q)) for t, q in zip(succ, p)]
    target = [s for s in range(n) if rng.random() < 0.4] or [int(rng.integers(n))]
    return InstantiatedMdp.from_rows(n, 0, rows, target, check=False), rows, target


def strategy_values(n, rows, target):
    """Reachability value at every state for every memoryless deterministic strategy.

    Each induced chain is solved exactly: states that cannot reach the target get 0,
    the rest solve ``(I - P) x = b`` restricted to the undecided states.
    """
    acts = [sorted(a for (s2, a) in rows if s2 == s) for s in range(n)]
    tmask = np.zeros(n, dtype=bool)
    tmask[list(target)] = True
    out = []
    for choice in itertools.product(*acts):
        P = np.zeros((n, n))
        for s, a in enumerate(choice):
            for t, p in rows[(s, a)]:
                P[s, t] += p
        # graph reachability to the target in the induced chain
        reach = tmask.copy()
        changed = True
        while changed:
            new = reach | ((P > 0) & reach[None, :]).any(axis=1)
            changed = bool((new != reach).any())
            reach = new
        x = np.zeros(n)
        x[tmask] = 1.0
        q = reach & ~tmask
        if q.any():
            A = np.eye(q.sum()) - P[np.ix_(q, q)]
            b = P[np.ix_(q, tmask)].sum(axis=1)
            x[q] = np.linalg.solve(A, b)
        out.append(x)
    return np.array(out)
