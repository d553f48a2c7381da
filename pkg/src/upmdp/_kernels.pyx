# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: batched Bellman iteration and the log binomial tail."""

import numpy as np

from libc.math cimport fabs, exp, log, log1p, lgamma, INFINITY
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy

ctypedef long long i64


def iterate(const i64[::1] state_ptr, const i64[::1] choice_ptr, const i64[::1] dest,
            const double[:, ::1] probs, const double[::1] choice_rew, double[:, ::1] x,
            const unsigned char[::1] active, const unsigned char[::1] choice_ok,
            bint maximize, double tol, i64 max_iter):
    """Jacobi Bellman iteration on every row of ``x`` (updated in place).

    Stops a row once the max-norm change drops below ``tol``; a negative
    ``tol`` runs exactly ``max_iter`` sweeps.  Returns sweeps per row.
    """
    cdef Py_ssize_t n_batch = x.shape[0]
    cdef Py_ssize_t n_states = x.shape[1]
    iters_arr = np.zeros(n_batch, dtype=np.int64)
    cdef i64[::1] iters = iters_arr
    cdef double *cur
    cdef double *nxt
    cdef double *tmp
    cdef Py_ssize_t b, s, c, e
    cdef i64 it
    cdef double best, q, diff, d
    cdef bint found

    cur = <double *> malloc(n_states * sizeof(double))
    nxt = <double *> malloc(n_states * sizeof(double))
    if cur == NULL or nxt == NULL:
        free(cur)
        free(nxt)
        raise MemoryError()
    try:
        with nogil:
            for b in range(n_batch):
                for s in range(n_states):
                    cur[s] = x[b, s]
                    nxt[s] = x[b, s]
                it = 0
                while it < max_iter:
                    diff = 0.0
                    for s in range(n_states):
                        if not active[s]:
                            continue
                        found = False
                        best = 0.0
                        for c in range(state_ptr[s], state_ptr[s + 1]):
                            if not choice_ok[c]:
                                continue
                            q = choice_rew[c]
                            for e in range(choice_ptr[c], choice_ptr[c + 1]):
                                q = q + probs[b, e] * cur[dest[e]]
                            if not found or (maximize and q > best) or (not maximize and q < best):
                                best = q
                                found = True
                        if found:
                            nxt[s] = best
                            d = fabs(best - cur[s])
                            if d > diff:
                                diff = d
                    tmp = cur
                    cur = nxt
                    nxt = tmp
                    it += 1
                    if tol >= 0.0 and diff < tol:
                        break
                for s in range(n_states):
                    x[b, s] = cur[s]
                iters[b] = it
    finally:
        free(cur)
        free(nxt)
    return iters_arr


def log_binomial_tail(i64 n, i64 k, double t):
    """log of sum_{i=0}^{k} C(n, i) (1-t)^i t^(n-i)."""
    cdef double lt, l1t, base, m, term, total, comp, y, tt
    cdef i64 i
    if k < 0:
        return -INFINITY
    if k >= n:
        return 0.0
    if t <= 0.0:
        return -INFINITY
    if t >= 1.0:
        return 0.0
    lt = log(t)
    l1t = log1p(-t)
    base = lgamma(n + 1.0)
    m = -INFINITY
    for i in range(k + 1):
        term = base - lgamma(i + 1.0) - lgamma(n - i + 1.0) + i * l1t + (n - i) * lt
        if term > m:
            m = term
    # Neumaier-compensated sum of exp(term - max)
    total = 0.0
    comp = 0.0
    for i in range(k + 1):
        term = base - lgamma(i + 1.0) - lgamma(n - i + 1.0) + i * l1t + (n - i) * lt
        y = exp(term - m)
        tt = total + y
        if fabs(total) >= fabs(y):
            comp += (total - tt) + y
        else:
            comp += (y - tt) + total
        total = tt
    return m + log(total + comp)
