"""Pure numpy versions of the compiled kernels (same signatures and semantics)."""
import math

import numpy as np
from scipy.special import gammaln


def iterate(state_ptr, choice_ptr, dest, probs, choice_rew, x, active, choice_ok,
            maximize, tol, max_iter):
    state_ptr = np.asarray(state_ptr)
    choice_ptr = np.asarray(choice_ptr)
    dest = np.asarray(dest)
    n_batch = x.shape[0]
    iters = np.zeros(n_batch, dtype=np.int64)
    act = np.asarray(active).astype(bool)
    ok = np.asarray(choice_ok).astype(bool)

    n_choices = len(choice_ptr) - 1
    owner = np.repeat(np.arange(len(state_ptr) - 1), np.diff(state_ptr))
    sel = np.flatnonzero(ok & act[owner])
    if sel.size == 0 or max_iter <= 0:
        # nothing to update: one (converged) sweep, or all of them when the count is fixed
        iters[:] = max(0, min(int(max_iter), 1 if tol >= 0 else int(max_iter)))
        return iters
    # states that actually get updated: active with at least one usable choice
    upd_states, seg_state = np.unique(owner[sel], return_index=True)
    lengths = choice_ptr[sel + 1] - choice_ptr[sel]
    e_idx = np.concatenate([np.arange(choice_ptr[c], choice_ptr[c + 1]) for c in sel]) \
        if n_choices else np.zeros(0, dtype=np.int64)
    seg_choice = np.concatenate(([0], np.cumsum(lengths)[:-1]))
    d_sel = dest[e_idx]
    rew = np.asarray(choice_rew)[sel]
    p_sel = np.ascontiguousarray(probs[:, e_idx])
    reduce_best = np.maximum.reduceat if maximize else np.minimum.reduceat

    live = np.arange(n_batch)
    p_live = p_sel
    for _ in range(int(max_iter)):
        xl = x[live]
        q = np.add.reduceat(p_live * xl[:, d_sel], seg_choice, axis=1) + rew
        best = reduce_best(q, seg_state, axis=1)
        diff = np.abs(best - xl[:, upd_states]).max(axis=1)
        xl[:, upd_states] = best
        x[live] = xl
        iters[live] += 1
        if tol >= 0:
            keep = ~(diff < tol)
            if not keep.all():
                live = live[keep]
                p_live = p_live[keep]
                if live.size == 0:
                    break
    return iters


def log_binomial_tail(n, k, t):
    if k < 0:
        return -math.inf
    if k >= n:
        return 0.0
    if t <= 0.0:
        return -math.inf
    if t >= 1.0:
        return 0.0
    i = np.arange(k + 1, dtype=float)
    terms = (gammaln(n + 1.0) - gammaln(i + 1.0) - gammaln(n - i + 1.0)
             + i * math.log1p(-t) + (n - i) * math.log(t))
    m = terms.max()
    return float(m + math.log(math.fsum(np.exp(terms - m))))
