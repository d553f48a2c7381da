"""Scenario-optimisation bounds on the satisfaction probability.

Two regimes:

* sample-dependent threshold (all N samples satisfy by construction): the
  satisfaction probability is at least ``(1 - beta)**(1/N)`` with confidence
  ``beta`` (:func:`eta_thm1`, inverse :func:`beta_thm1`, sample size
  :func:`n_required`);
* fixed threshold with ``k`` violating samples: the bound ``t*(k)`` solves
  ``(1 - beta)/N = sum_{i<=k} C(N, i) (1-t)^i t^(N-i)`` (:func:`t_star`), with
  ``t*(N) = 0``.  The ``1/N`` factor pays for a union bound over every
  possible number of discarded samples, so the bound holds whatever ``k``
  turns out to be.

The tail is evaluated in log space; roots are found by bisection on [0, 1],
where the tail is strictly increasing in ``t`` for ``k < N``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

__all__ = [
    "ScenarioBound",
    "eta_thm1",
    "beta_thm1",
    "n_required",
    "binomial_tail",
    "log_binomial_tail",
    "t_star",
    "beta_from_bound",
    "bound_pair",
    "lower_bound",
    "discard_threshold",
    "tabulate",
    "write_table",
]


@dataclass(frozen=True)
class ScenarioBound:
    n: int
    violating: int
    beta: float
    eta: float
    mode: str  # "theorem-1" (threshold chosen from the samples) or "theorem-2" (fixed threshold)

    def __post_init__(self):
        if not 0 <= self.violating <= self.n:
            raise ValueError("violating count must lie in [0, n]")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.mode not in ("theorem-1", "theorem-2"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "theorem-1" and self.violating:
            raise ValueError("a sample-dependent threshold admits no violating samples")


def _check(n, beta=None, k=None):
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    if beta is not None and not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    if k is not None and not (int(k) == k and 0 <= k <= n):
        raise ValueError(f"k must be an integer in [0, {n}], got {k}")


def eta_thm1(n: int, beta: float) -> float:
    """Lower bound ``(1 - beta)**(1/n)`` when every sample satisfies."""
    _check(n, beta)
    return math.exp(math.log1p(-beta) / n)


def beta_thm1(n: int, eta: float) -> float:
    """Confidence ``1 - eta**n`` that ``eta`` lower-bounds the satisfaction probability."""
    _check(n)
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    return min(1.0, max(0.0, -math.expm1(n * math.log(eta)) if eta > 0 else 1.0))


def n_required(eta: float, beta: float) -> int:
    """Smallest ``N`` with ``eta_thm1(N, beta) >= eta``."""
    if not 0.0 < eta < 1.0 or not 0.0 < beta < 1.0:
        raise ValueError("eta and beta must lie in (0, 1)")
    n = max(1, math.ceil(math.log1p(-beta) / math.log(eta)))
    # guard against rounding in the logarithms
    while n > 1 and eta_thm1(n - 1, beta) >= eta:
        n -= 1
    while eta_thm1(n, beta) < eta:
        n += 1
    return n


def log_binomial_tail(n: int, k: int, t: float) -> float:
    return kernels.log_binomial_tail(int(n), int(k), float(t))


def binomial_tail(n: int, k: int, t: float) -> float:
    """``sum_{i=0}^{k} C(n, i) (1-t)^i t^(n-i)``: at most ``k`` failures when success has prob ``t``."""
    _check(n, k=k)
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    return min(1.0, math.exp(log_binomial_tail(n, k, t)))


def t_star(n: int, k: int, beta: float) -> float:
    """Lower bound on the satisfaction probability given ``k`` violating samples out of ``n``."""
    _check(n, beta, k)
    if k == n:
        return 0.0
    target = math.log1p(-beta) - math.log(n)
    if k == 0:
        return math.exp(target / n)
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if log_binomial_tail(n, k, mid) < target:
            lo = mid
        else:
            hi = mid
    return lo


def beta_from_bound(n: int, k: int, eta: float) -> float:
    """Confidence that ``eta`` lower-bounds the satisfaction probability; 0 means none."""
    _check(n, k=k)
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    return max(0.0, 1.0 - n * binomial_tail(n, k, eta))


def bound_pair(n: int, k: int, beta: float) -> tuple[float, float]:
    """Lower bounds on the satisfaction and on the unsatisfaction probability."""
    _check(n, beta, k)
    return t_star(n, k, beta), t_star(n, n - k, beta)


def lower_bound(n: int, violating: int, beta: float) -> ScenarioBound:
    return ScenarioBound(n, violating, beta, t_star(n, violating, beta), "theorem-2")


def discard_threshold(solutions, k: int, upper: bool = True) -> float:
    """Optimal threshold after discarding the ``k`` most extreme solutions.

    For ``<=``-specifications this is the (k+1)-th largest solution; for
    ``>=``-specifications the (k+1)-th smallest.
    """
    s = np.sort(np.asarray(solutions, dtype=float))
    if not 0 <= k < len(s):
        raise ValueError("k must lie in [0, len(solutions))")
    return float(s[-(k + 1)] if upper else s[k])


def tabulate(n: int, beta: float) -> list[tuple[int, float]]:
    """``t*(k)`` for every ``k`` in ``0..n``."""
    _check(n, beta)
    return [(k, t_star(n, k, beta)) for k in range(n + 1)]


def write_table(n: int, beta: float, fh) -> None:
    fh.write(f"# n={n}, beta={beta!r}\n")
    fh.write("k,t_star\n")
    for k, t in tabulate(n, beta):
        fh.write(f"{k},{t!r}\n")
