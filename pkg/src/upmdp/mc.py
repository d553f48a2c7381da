"""Explicit-state model checking of concrete MDPs.

Reachability (unbounded and step-bounded) and expected cumulative reward
until reaching a target, both optimised over memoryless deterministic
strategies.  Unbounded measures use value iteration anchored by graph-based
prob0/prob1 sets.  All numerics run through :mod:`upmdp.kernels` on a batch
of probability vectors that share one support graph, which is what lets a
whole sample set be checked with a single precomputation.
"""
from __future__ import annotations

from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import kernels
from .pmdp import Specification, is_pmc

__all__ = [
    "DEFAULT_TOL",
    "CheckResult",
    "QualitativeSets",
    "InfiniteReward",
    "ConvergenceError",
    "BatchChecker",
    "qualitative",
    "reach_prob",
    "bounded_reach",
    "expected_reward",
    "evaluate_spec",
]

DEFAULT_TOL = 1e-6
MAX_ITER = 1_000_000
_TIE_EPS = 1e-12


class InfiniteReward(ArithmeticError):
    """The target is reached with probability < 1, so the expected reward is infinite."""


class ConvergenceError(RuntimeError):
    pass


@dataclass
class CheckResult:
    value: float
    strategy: dict = field(default_factory=dict)
    satisfied: bool | None = None
    iterations: int = 0


@dataclass(frozen=True)
class QualitativeSets:
    prob0: frozenset
    prob1: frozenset


# -- graph algorithms ----------------------------------------------------------

class _Graph:
    """Support graph of a model: successor sets per choice, predecessor choices per state."""

    def __init__(self, m):
        self.n = m.n_states
        self.state_ptr = np.asarray(m.state_ptr)
        self.choice_ptr = np.asarray(m.choice_ptr)
        self.owner = np.asarray(m.choice_state)
        dest = np.asarray(m.dest)
        probs = getattr(m, "probs", None)
        self.succ = []
        for c in range(len(self.choice_ptr) - 1):
            lo, hi = self.choice_ptr[c], self.choice_ptr[c + 1]
            ts = dest[lo:hi]
            if probs is not None:
                ts = ts[np.asarray(probs)[lo:hi] > 0]
            self.succ.append(tuple(sorted(set(ts.tolist()))))
        self.pred = [[] for _ in range(self.n)]
        for c, ts in enumerate(self.succ):
            for t in ts:
                self.pred[t].append(c)

    def choices(self, s):
        return range(int(self.state_ptr[s]), int(self.state_ptr[s + 1]))

    def exists_pre_closure(self, seed: np.ndarray, allowed: np.ndarray) -> np.ndarray:
        """States in ``allowed`` that can reach ``seed`` via some choice (plus ``seed``)."""
        reach = seed.copy()
        queue = deque(np.flatnonzero(seed).tolist())
        while queue:
            t = queue.popleft()
            for c in self.pred[t]:
                s = int(self.owner[c])
                if not reach[s] and allowed[s]:
                    reach[s] = True
                    queue.append(s)
        return reach

    def forall_pre_closure(self, seed: np.ndarray) -> np.ndarray:
        """Least set containing ``seed`` and every state all of whose choices hit the set."""
        inside = seed.copy()
        # count, per choice, whether it already has a successor inside
        hit = np.zeros(len(self.succ), dtype=bool)
        missing = np.array([len(self.choices(s)) for s in range(self.n)])
        queue = deque(np.flatnonzero(seed).tolist())
        while queue:
            t = queue.popleft()
            for c in self.pred[t]:
                if hit[c]:
                    continue
                hit[c] = True
                s = int(self.owner[c])
                missing[s] -= 1
                if missing[s] == 0 and not inside[s]:
                    inside[s] = True
                    queue.append(s)
        return inside


def _prob0_max(g: _Graph, target):
    return ~g.exists_pre_closure(target, np.ones(g.n, dtype=bool))


def _prob0_min(g: _Graph, target):
    return ~g.forall_pre_closure(target)


def _prob1_max(g: _Graph, target):
    u = ~_prob0_max(g, target)
    while True:
        # choices staying inside u
        stay = np.array([all(u[t] for t in ts) for ts in g.succ], dtype=bool)
        r = target.copy()
        queue = deque(np.flatnonzero(target).tolist())
        while queue:
            t = queue.popleft()
            for c in g.pred[t]:
                s = int(g.owner[c])
                if not r[s] and u[s] and stay[c]:
                    r[s] = True
                    queue.append(s)
        if np.array_equal(r, u):
            return u
        u = r


def _prob1_min(g: _Graph, target):
    p0 = _prob0_min(g, target)
    return ~g.exists_pre_closure(p0, ~target)


def qualitative(m, target: Iterable[int] | np.ndarray | None = None,
                direction: str = "max") -> QualitativeSets:
    """States whose optimal reachability value is exactly 0 / exactly 1."""
    tmask = _target_mask(m, target)
    g = _Graph(m)
    if direction == "min":
        p0, p1 = _prob0_min(g, tmask), _prob1_min(g, tmask)
    else:
        p0, p1 = _prob0_max(g, tmask), _prob1_max(g, tmask)
    return QualitativeSets(frozenset(np.flatnonzero(p0).tolist()),
                           frozenset(np.flatnonzero(p1).tolist()))


def _target_mask(m, target) -> np.ndarray:
    if target is None:
        mask = np.asarray(m.target, dtype=bool).copy()
    else:
        target = np.asarray(target)
        if target.dtype == bool and target.shape == (m.n_states,):
            mask = target.copy()
        else:
            mask = np.zeros(m.n_states, dtype=bool)
            mask[np.asarray(list(target), dtype=np.int64)] = True
    if not mask.any():
        raise ValueError("target set is empty")
    return mask


# -- batched solver --------------------------------------------------------------

class BatchChecker:
    """Solve one measure for many probability vectors over the same support graph.

    ``model`` supplies the structure (a :class:`~upmdp.pmdp.PMdp` or an
    :class:`~upmdp.pmdp.InstantiatedMdp`); ``solve`` takes a ``(B, E)`` array
    of edge probabilities, one row per instantiation.
    """

    def __init__(self, model, measure: str = "reach", direction: str | None = "max",
                 target=None, step: int | None = None, tol: float = DEFAULT_TOL):
        if tol <= 0:
            raise ValueError("tol must be positive")
        self.model = model
        self.measure = measure
        self.maximize = direction != "min"
        self.direction = "min" if direction == "min" else "max"
        self.step = step
        self.tol = tol
        self.target = _target_mask(model, target)
        self.n_states = model.n_states
        self.state_ptr = np.ascontiguousarray(model.state_ptr, dtype=np.int64)
        self.choice_ptr = np.ascontiguousarray(model.choice_ptr, dtype=np.int64)
        self.dest = np.ascontiguousarray(model.dest, dtype=np.int64)
        n_choices = len(self.choice_ptr) - 1
        self.zero_rew = np.zeros(n_choices)
        self.all_ok = np.ones(n_choices, dtype=np.uint8)
        self.graph = _Graph(model)
        g = self.graph

        if measure == "reach":
            if self.maximize:
                self.prob0, self.prob1 = _prob0_max(g, self.target), _prob1_max(g, self.target)
            else:
                self.prob0, self.prob1 = _prob0_min(g, self.target), _prob1_min(g, self.target)
            maybe = ~(self.prob0 | self.prob1)
            self.x0 = np.where(self.prob1, 1.0, 0.0)
            if not self.maximize:
                self.x0[maybe] = 1.0
            self.active = maybe.astype(np.uint8)
        elif measure == "bounded":
            if step is None or step < 0:
                raise ValueError("bounded reachability needs a step bound k >= 0")
            self.x0 = self.target.astype(float)
            self.active = (~self.target).astype(np.uint8)
        elif measure == "reward":
            rew = getattr(model, "choice_rewards", None)
            if rew is None:
                rew = getattr(model, "rewards", None)
            if rew is None or isinstance(rew, dict):
                raise ValueError("model has no reward structure")
            self.rew = np.ascontiguousarray(rew, dtype=float)
            if self.maximize:
                self.finite = _prob1_min(g, self.target)
                self.ok = self.all_ok
            else:
                self.finite = _prob1_max(g, self.target)
                self.ok = np.array([all(self.finite[t] for t in ts) for ts in g.succ],
                                   dtype=np.uint8)
            self.active = (self.finite & ~self.target).astype(np.uint8)
            self.x0 = np.zeros(self.n_states)
            if not self.maximize:
                self.proper = self._proper_policy()
        else:
            raise ValueError(f"unknown measure {measure!r}")

    @classmethod
    def for_spec(cls, model, spec: Specification, tol: float = DEFAULT_TOL) -> "BatchChecker":
        direction = spec.direction
        if direction is None and not is_pmc(model):
            raise ValueError("specification needs max or min for an MDP")
        return cls(model, spec.measure, direction, None, spec.step, tol)

    def _proper_policy(self) -> np.ndarray:
        """Graph attractor to the target using only choices that stay in the finite region."""
        chosen = np.zeros(len(self.ok), dtype=np.uint8)
        assigned = self.target.copy()
        g = self.graph
        frontier = True
        while frontier:
            newly = []
            for s in np.flatnonzero(self.finite & ~assigned):
                for c in g.choices(s):
                    if self.ok[c] and any(assigned[t] for t in g.succ[c]):
                        chosen[c] = 1
                        newly.append(s)
                        break
            assigned[newly] = True
            frontier = bool(newly)
        return chosen

    def _run(self, probs, x, ok, maximize, tol, max_iter, rew):
        iters = kernels.iterate(self.state_ptr, self.choice_ptr, self.dest, probs, rew, x,
                                self.active, ok, maximize, tol, max_iter)
        if tol >= 0 and np.any(iters >= max_iter):
            raise ConvergenceError(f"value iteration did not converge in {max_iter} sweeps")
        return iters

    def solve_all(self, probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Full value vectors ``(B, S)`` and sweep counts for each row of ``probs``."""
        probs = np.ascontiguousarray(np.atleast_2d(probs), dtype=float)
        n = probs.shape[0]
        x = np.ascontiguousarray(np.tile(self.x0, (n, 1)))
        if self.measure == "reach":
            iters = self._run(probs, x, self.all_ok, self.maximize, self.tol, MAX_ITER,
                              self.zero_rew)
        elif self.measure == "bounded":
            iters = kernels.iterate(self.state_ptr, self.choice_ptr, self.dest, probs,
                                    self.zero_rew, x, self.active, self.all_ok, self.maximize,
                                    -1.0, int(self.step))
        else:
            if self.maximize:
                iters = self._run(probs, x, self.ok, True, self.tol, MAX_ITER, self.rew)
            else:
                # evaluate a proper policy, then improve downward from that upper bound
                iters = self._run(probs, x, self.proper, True, self.tol, MAX_ITER, self.rew)
                iters = iters + self._run(probs, x, self.ok, False, self.tol, MAX_ITER, self.rew)
            x[:, ~self.finite] = np.inf
        return x, iters

    def solve(self, probs: np.ndarray, workers: int = 1, chunk: int = 256) -> np.ndarray:
        """Value at the initial state for every row of ``probs``."""
        probs = np.atleast_2d(probs)
        init = self.model.initial
        if self.measure == "reward" and not self.finite[init]:
            raise InfiniteReward(
                f"state {init} reaches the target with probability < 1 under every "
                f"{'strategy' if self.maximize else 'admissible strategy'}")
        starts = list(range(0, probs.shape[0], chunk)) or [0]

        def work(lo):
            x, _ = self.solve_all(probs[lo:lo + chunk])
            return x[:, init]

        if workers > 1 and len(starts) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(work, starts))
        else:
            parts = [work(lo) for lo in starts]
        return np.concatenate(parts) if parts else np.zeros(0)

    # -- strategies ----------------------------------------------------------
    def strategy(self, probs: np.ndarray, x: np.ndarray) -> dict:
        """Memoryless deterministic strategy achieving the computed optimum."""
        m, g = self.model, self.graph
        rew = self.rew if self.measure == "reward" else self.zero_rew
        xf = np.where(np.isfinite(x), x, 0.0)
        q = np.add.reduceat(probs * xf[self.dest], self.choice_ptr[:-1]) + rew
        usable = np.ones(len(q), dtype=bool)
        if self.measure == "reward" and not self.maximize:
            usable = self.ok.astype(bool)
        best = np.full(self.n_states, np.nan)
        for s in range(self.n_states):
            cs = [c for c in g.choices(s) if usable[c]] or list(g.choices(s))
            vals = q[cs]
            best[s] = vals.max() if self.maximize else vals.min()
        strategy: dict[int, int] = {}

        def near(c, eps):
            s = int(g.owner[c])
            if not usable[c]:
                return False
            scale = max(1.0, abs(best[s]))
            return q[c] >= best[s] - eps * scale if self.maximize else q[c] <= best[s] + eps * scale

        def lowest(s, pred):
            for c in g.choices(s):
                if pred(c):
                    return c
            return int(g.state_ptr[s])

        progress = None
        if self.measure == "reach" and self.maximize:
            progress = ~self.prob0 & ~self.target
        elif self.measure == "reward" and not self.maximize:
            progress = self.finite & ~self.target
        elif self.measure == "reach":
            for s in np.flatnonzero(self.prob0):
                strategy[s] = lowest(s, lambda c: all(self.prob0[t] for t in g.succ[c]))

        if progress is not None:
            # among (near-)optimal choices prefer one that moves closer to the target,
            # so that ties inside end components do not stall the induced chain
            assigned = self.target.copy()
            for eps in (_TIE_EPS, max(self.tol, _TIE_EPS)):
                while True:
                    newly = []
                    for s in np.flatnonzero(progress & ~assigned):
                        for c in g.choices(s):
                            if near(c, eps) and any(assigned[t] for t in g.succ[c]):
                                strategy[s] = c
                                newly.append(s)
                                break
                    if not newly:
                        break
                    assigned[newly] = True
        for s in range(self.n_states):
            if s not in strategy:
                strategy[s] = lowest(s, lambda c: near(c, _TIE_EPS))
        return {int(s): m.actions[c] for s, c in sorted(strategy.items())}


# -- single-model entry points ----------------------------------------------------

def _single(m, checker: BatchChecker) -> CheckResult:
    if checker.measure == "reward" and not checker.finite[m.initial]:
        raise InfiniteReward(f"initial state {m.initial} reaches the target with probability < 1")
    probs = np.ascontiguousarray(m.probs, dtype=float)
    x, iters = checker.solve_all(probs[None, :])
    value = float(x[0, m.initial])
    return CheckResult(value, checker.strategy(probs, x[0]), None, int(iters[0]))


def reach_prob(m, target=None, direction: str = "max", tol: float = DEFAULT_TOL) -> CheckResult:
    """Optimal probability of eventually reaching ``target`` from the initial state."""
    return _single(m, BatchChecker(m, "reach", direction, target, None, tol))


def bounded_reach(m, target=None, k: int = 0, direction: str = "max") -> CheckResult:
    """Optimal probability of reaching ``target`` within ``k`` steps (exactly k backups)."""
    return _single(m, BatchChecker(m, "bounded", direction, target, k))


def expected_reward(m, target=None, direction: str = "min", tol: float = DEFAULT_TOL) -> CheckResult:
    """Optimal expected reward accumulated until reaching ``target``."""
    return _single(m, BatchChecker(m, "reward", direction, target, None, tol))


def evaluate_spec(m, spec: Specification, tol: float = DEFAULT_TOL) -> CheckResult:
    res = _single(m, BatchChecker.for_spec(m, spec, tol))
    res.satisfied = spec.holds(res.value)
    return res
