"""Parametric MDPs: data model, JSON model files, instantiation, specifications."""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

from .polynomial import Polynomial, parse_expr, to_text

__all__ = [
    "ModelError",
    "NotStochastic",
    "NotGraphPreserving",
    "PMdp",
    "InstantiatedMdp",
    "Specification",
    "parse_spec",
    "load_model",
    "save_model",
    "model_from_dict",
    "instantiate",
    "instantiate_many",
    "is_pmc",
]

ROW_SUM_TOL = 1e-9
# Slack above 1 for edge values; polynomials such as 0.1*v + 0.9 may round up at the boundary.
_PROB_ONE_SLACK = 1e-12


class ModelError(ValueError):
    """Malformed model file or structurally invalid model."""


class InstantiationError(ValueError):
    def __init__(self, message: str, valuation=None, sample_index=None):
        super().__init__(message)
        self.valuation = valuation
        self.sample_index = sample_index


class NotStochastic(InstantiationError):
    def __init__(self, state, action, total, valuation=None, sample_index=None):
        super().__init__(
            f"row ({state}, {action!r}) sums to {total!r}, not 1", valuation, sample_index)
        self.state, self.action, self.total = state, action, total


class NotGraphPreserving(InstantiationError):
    def __init__(self, state, action, target, value, valuation=None, sample_index=None):
        super().__init__(
            f"edge ({state}, {action!r}) -> {target} evaluates to {value!r}, outside (0, 1]",
            valuation, sample_index)
        self.state, self.action, self.target, self.value = state, action, target, value


def _build_structure(n_states: int, rows: Mapping[tuple[int, str], Sequence[tuple[int, object]]]):
    """Sparse row-major layout ordered by (state, action name, target)."""
    keys = sorted(rows, key=lambda k: (k[0], k[1]))
    state_ptr = np.zeros(n_states + 1, dtype=np.int64)
    choice_ptr = [0]
    dest, weights, actions, choice_state = [], [], [], []
    for s, a in keys:
        state_ptr[s + 1] += 1
        for t, w in sorted(rows[(s, a)], key=lambda e: e[0]):
            dest.append(t)
            weights.append(w)
        choice_ptr.append(len(dest))
        actions.append(a)
        choice_state.append(s)
    np.cumsum(state_ptr, out=state_ptr)
    return (state_ptr, np.asarray(choice_ptr, dtype=np.int64), np.asarray(dest, dtype=np.int64),
            weights, tuple(actions), np.asarray(choice_state, dtype=np.int64))


class PMdp:
    """Parametric MDP ``(S, Act, s_I, V, P)`` with a target label and optional rewards.

    ``transitions`` maps ``(state, action)`` to a list of ``(target, Polynomial)``.
    The model is validated on construction and treated as immutable afterwards.
    """

    def __init__(self, name: str, parameters: Sequence[str], n_states: int, initial: int,
                 transitions: Mapping[tuple[int, str], Sequence[tuple[int, Polynomial]]],
                 target_label: str, labels: Sequence[Iterable[str]] | None = None,
                 rewards: Mapping[tuple[int, str], float] | None = None):
        self.name = name
        self.parameters = tuple(parameters)
        self.n_states = int(n_states)
        self.initial = int(initial)
        self.target_label = target_label
        self.labels = tuple(tuple(ls) for ls in (labels or [()] * self.n_states))
        self.transitions = {k: tuple(v) for k, v in transitions.items()}
        self.rewards = dict(rewards) if rewards else None
        self._validate()
        (self.state_ptr, self.choice_ptr, self.dest, polys, self.actions,
         self.choice_state) = _build_structure(self.n_states, self.transitions)
        self.edge_polys = tuple(polys)
        self.target = np.array([target_label in ls for ls in self.labels], dtype=bool)
        self.choice_rewards = None
        if self.rewards is not None:
            index = {(int(s), a): c for c, (s, a) in enumerate(zip(self.choice_state, self.actions))}
            self.choice_rewards = np.zeros(len(self.actions))
            for key, r in self.rewards.items():
                self.choice_rewards[index[key]] = r
        self._evaluator = None

    def _validate(self):
        if len(set(self.parameters)) != len(self.parameters):
            raise ModelError("duplicate parameter names")
        n = self.n_states
        if n < 1:
            raise ModelError("model has no states")
        if len(self.labels) != n:
            raise ModelError("labels must be given for every state")
        if not 0 <= self.initial < n:
            raise ModelError(f"initial state {self.initial} out of range")
        enabled = [0] * n
        one = Polynomial.constant(1, self.parameters)
        for (s, a), row in self.transitions.items():
            if not 0 <= s < n:
                raise ModelError(f"transition from dangling state {s}")
            if not row:
                raise ModelError(f"state {s} action {a!r} has no successors")
            enabled[s] += 1
            seen = set()
            total = Polynomial.constant(0, self.parameters)
            for t, p in row:
                if not 0 <= t < n:
                    raise ModelError(f"transition ({s}, {a!r}) to dangling state {t}")
                if t in seen:
                    raise ModelError(f"duplicate transition ({s}, {a!r}, {t})")
                seen.add(t)
                if p.is_zero():
                    raise ModelError(f"transition ({s}, {a!r}, {t}) is identically zero")
                total = total + p
            if total != one:
                raise ModelError(
                    f"row ({s}, {a!r}) does not sum to 1 symbolically: {to_text(total)}")
        for s, count in enumerate(enabled):
            if count == 0:
                raise ModelError(f"state {s} has no enabled action")
        if self.rewards is not None:
            for (s, a), r in self.rewards.items():
                if (s, a) not in self.transitions:
                    raise ModelError(f"reward for unknown choice ({s}, {a!r})")
                if not (math.isfinite(r) and r >= 0):
                    raise ModelError(f"reward for ({s}, {a!r}) must be a nonnegative real")

    @property
    def n_choices(self) -> int:
        return len(self.actions)

    @property
    def n_edges(self) -> int:
        return len(self.dest)

    def state_name(self, s: int) -> str:
        return self.labels[s][0] if self.labels[s] else str(s)

    def __eq__(self, other):
        if not isinstance(other, PMdp):
            return NotImplemented
        return (self.name == other.name and self.parameters == other.parameters
                and self.n_states == other.n_states and self.initial == other.initial
                and self.target_label == other.target_label
                and [set(ls) for ls in self.labels] == [set(ls) for ls in other.labels]
                and {k: sorted(v, key=lambda e: e[0]) for k, v in self.transitions.items()}
                == {k: sorted(v, key=lambda e: e[0]) for k, v in other.transitions.items()}
                and (self.rewards or {}) == (other.rewards or {}))

    __hash__ = None

    def __repr__(self):
        return (f"PMdp({self.name!r}, states={self.n_states}, choices={self.n_choices}, "
                f"parameters={len(self.parameters)})")

    # -- batched evaluation ------------------------------------------------
    def _compile(self):
        """Monomial basis and a sparse (monomials x edges) coefficient matrix."""
        index = {p: i for i, p in enumerate(self.parameters)}
        basis: dict[tuple, int] = {}
        rows, cols, vals = [], [], []
        for e, poly in enumerate(self.edge_polys):
            for mono, coef in poly.terms.items():
                key = tuple((index[n], k) for n, k in mono)
                j = basis.setdefault(key, len(basis))
                rows.append(j)
                cols.append(e)
                vals.append(float(coef))
        coef = sparse.csr_matrix((vals, (rows, cols)), shape=(len(basis), self.n_edges))
        return list(basis), coef.T.tocsr()

    def edge_probabilities(self, values: np.ndarray) -> np.ndarray:
        """Evaluate every edge polynomial at each row of ``values`` (B x |V|)."""
        if self._evaluator is None:
            self._evaluator = self._compile()
        basis, coef_t = self._evaluator
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if values.shape[1] != len(self.parameters):
            raise ValueError(
                f"expected {len(self.parameters)} parameter values per sample, got {values.shape[1]}")
        mono = np.ones((values.shape[0], len(basis)))
        for j, key in enumerate(basis):
            for i, k in key:
                mono[:, j] *= values[:, i] if k == 1 else values[:, i] ** k
        return np.asarray(coef_t @ mono.T).T.copy()


@dataclass(frozen=True, eq=False)
class InstantiatedMdp:
    """Concrete MDP ``M[u]`` in sparse row-major form.

    Choices of state ``s`` are ``state_ptr[s]:state_ptr[s+1]``; edges of choice
    ``c`` are ``choice_ptr[c]:choice_ptr[c+1]`` with targets ``dest`` and
    probabilities ``probs``.
    """

    n_states: int
    initial: int
    state_ptr: np.ndarray
    choice_ptr: np.ndarray
    dest: np.ndarray
    probs: np.ndarray
    actions: tuple
    choice_state: np.ndarray
    target: np.ndarray
    rewards: np.ndarray | None = None
    valuation: dict | None = None
    labels: tuple = field(default=())

    @classmethod
    def from_rows(cls, n_states: int, initial: int,
                  rows: Mapping[tuple[int, str], Sequence[tuple[int, float]]],
                  target: Iterable[int], rewards: Mapping[tuple[int, str], float] | None = None,
                  check: bool = True) -> "InstantiatedMdp":
        """Build a concrete MDP directly; zero-probability edges are dropped."""
        rows = {k: [(t, float(p)) for t, p in v if p != 0] for k, v in rows.items()}
        for s in range(n_states):
            if not any(k[0] == s for k in rows):
                raise ModelError(f"state {s} has no enabled action")
        state_ptr, choice_ptr, dest, probs, actions, choice_state = _build_structure(n_states, rows)
        probs = np.asarray(probs, dtype=float)
        mask = np.zeros(n_states, dtype=bool)
        mask[list(target)] = True
        rew = None
        if rewards is not None:
            rew = np.zeros(len(actions))
            for c, (s, a) in enumerate(zip(choice_state, actions)):
                rew[c] = rewards.get((int(s), a), 0.0)
        m = cls(n_states, initial, state_ptr, choice_ptr, dest, probs, actions, choice_state, mask, rew)
        if check:
            _check_rows(m.probs[None, :], m, None)
        return m

    @property
    def n_choices(self) -> int:
        return len(self.actions)

    def choices(self, s: int) -> range:
        return range(int(self.state_ptr[s]), int(self.state_ptr[s + 1]))

    def successors(self, c: int):
        lo, hi = self.choice_ptr[c], self.choice_ptr[c + 1]
        return zip(self.dest[lo:hi].tolist(), self.probs[lo:hi].tolist())

    def with_target(self, target: Iterable[int]) -> "InstantiatedMdp":
        mask = np.zeros(self.n_states, dtype=bool)
        mask[list(target)] = True
        return _replace(self, target=mask)

    def restrict(self, strategy: Mapping[int, str]) -> "InstantiatedMdp":
        """Induced Markov chain under a memoryless deterministic strategy."""
        rows = {}
        rewards = {} if self.rewards is not None else None
        for s in range(self.n_states):
            chosen = strategy.get(s)
            for c in self.choices(s):
                if chosen is None or self.actions[c] == chosen:
                    rows[(s, self.actions[c])] = list(self.successors(c))
                    if rewards is not None:
                        rewards[(s, self.actions[c])] = float(self.rewards[c])
                    break
        return InstantiatedMdp.from_rows(self.n_states, self.initial, rows,
                                         np.flatnonzero(self.target), rewards, check=False)


def _replace(m, **kw):
    from dataclasses import replace
    return replace(m, **kw)


def _check_rows(probs: np.ndarray, m, values, params=()):
    """Row-sum and graph-preservation checks on a (B x E) probability matrix."""
    bad = (probs <= 0.0) | (probs > 1.0 + _PROB_ONE_SLACK) | ~np.isfinite(probs)
    if bad.any():
        b, e = np.argwhere(bad)[0]
        c = int(np.searchsorted(m.choice_ptr, e, side="right") - 1)
        val = None if values is None else dict(zip(params, np.atleast_2d(values)[b].tolist()))
        raise NotGraphPreserving(int(m.choice_state[c]), m.actions[c], int(m.dest[e]),
                                 float(probs[b, e]), val, int(b))
    sums = np.add.reduceat(probs, m.choice_ptr[:-1], axis=1)
    off = np.abs(sums - 1.0) > ROW_SUM_TOL
    if off.any():
        b, c = np.argwhere(off)[0]
        val = None if values is None else dict(zip(params, np.atleast_2d(values)[b].tolist()))
        raise NotStochastic(int(m.choice_state[c]), m.actions[c], float(sums[b, c]), val, int(b))


def _valuation_row(m: PMdp, u: Mapping[str, float]) -> np.ndarray:
    missing = [p for p in m.parameters if p not in u]
    if missing:
        raise KeyError(f"valuation does not assign parameter(s) {missing}")
    extra = [p for p in u if p not in m.parameters]
    if extra:
        raise KeyError(f"valuation assigns unknown parameter(s) {extra}")
    return np.array([[float(u[p]) for p in m.parameters]])


def instantiate_many(m: PMdp, values: np.ndarray, check: bool = True) -> np.ndarray:
    """Edge probabilities for a batch of valuations (rows in ``m.parameters`` order)."""
    probs = m.edge_probabilities(values)
    if check:
        _check_rows(probs, m, values, m.parameters)
    return probs


def instantiate(m: PMdp, u: Mapping[str, float]) -> InstantiatedMdp:
    """Concrete MDP ``M[u]``; raises if ``u`` is not well-defined or not graph-preserving."""
    row = _valuation_row(m, u)
    probs = instantiate_many(m, row)[0]
    return InstantiatedMdp(m.n_states, m.initial, m.state_ptr, m.choice_ptr, m.dest, probs,
                           m.actions, m.choice_state, m.target, m.choice_rewards,
                           dict(zip(m.parameters, row[0].tolist())), m.labels)


def is_pmc(m) -> bool:
    return bool(np.all(np.diff(m.state_ptr) == 1))


# -- model files -------------------------------------------------------------

def model_from_dict(doc: Mapping) -> PMdp:
    try:
        name = str(doc.get("name", "model"))
        params = [str(p) for p in doc["parameters"]]
        states = doc["states"]
        initial = int(doc["initial"])
        target_label = str(doc["target_label"])
        trans = doc["transitions"]
    except (KeyError, TypeError) as exc:
        raise ModelError(f"missing or malformed field: {exc}") from exc
    ids = [int(st["id"]) for st in states]
    if sorted(ids) != list(range(len(ids))):
        raise ModelError("state ids must be 0..n-1, each exactly once")
    labels = [()] * len(ids)
    for st in states:
        labels[int(st["id"])] = tuple(st.get("labels", ()))
    rows: dict[tuple[int, str], list] = {}
    for i, tr in enumerate(trans):
        try:
            s, a, t, expr = int(tr["from"]), str(tr["action"]), int(tr["to"]), tr["prob"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"transition #{i}: malformed entry ({exc})") from exc
        try:
            poly = parse_expr(str(expr), params)
        except ValueError as exc:
            raise ModelError(f"transition #{i} ({s}, {a!r}, {t}): {exc}") from exc
        rows.setdefault((s, a), []).append((t, poly))
    for (s, a), row in rows.items():
        if len({t for t, _ in row}) != len(row):
            dup = next(t for t in {t for t, _ in row} if sum(1 for x, _ in row if x == t) > 1)
            raise ModelError(f"duplicate transition ({s}, {a!r}, {dup})")
    rewards = None
    if doc.get("rewards") is not None:
        rewards = {}
        for r in doc["rewards"]:
            rewards[(int(r["state"]), str(r["action"]))] = float(r["value"])
    return PMdp(name, params, len(ids), initial, rows, target_label, labels, rewards)


def load_model(path) -> PMdp:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return model_from_dict(doc)


def model_to_dict(m: PMdp) -> dict:
    doc = {
        "name": m.name,
        "parameters": list(m.parameters),
        "states": [{"id": s, "labels": list(m.labels[s])} for s in range(m.n_states)],
        "initial": m.initial,
        "transitions": [
            {"from": s, "action": a, "to": t, "prob": to_text(p)}
            for (s, a), row in sorted(m.transitions.items()) for t, p in sorted(row, key=lambda e: e[0])
        ],
        "target_label": m.target_label,
    }
    if m.rewards is not None:
        doc["rewards"] = [{"state": s, "action": a, "value": r}
                          for (s, a), r in sorted(m.rewards.items())]
    return doc


def save_model(m: PMdp, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(m), indent=1) + "\n")


# -- specifications ----------------------------------------------------------

_OPS = {"<": "<", "<=": "<=", "≤": "<=", ">=": ">=", "≥": ">=", ">": ">"}
_NEGATE = {"<": ">=", "<=": ">", ">=": "<", ">": "<="}


@dataclass(frozen=True)
class Specification:
    """Measure, optimisation direction, comparison operator and threshold."""

    measure: str  # "reach", "bounded" or "reward"
    direction: str | None
    op: str
    threshold: float
    step: int | None = None

    def __post_init__(self):
        if self.measure not in ("reach", "bounded", "reward"):
            raise ValueError(f"unknown measure {self.measure!r}")
        if self.direction not in ("max", "min", None):
            raise ValueError(f"unknown direction {self.direction!r}")
        if self.op not in _NEGATE:
            raise ValueError(f"unknown comparison operator {self.op!r}")
        if self.measure == "bounded":
            if self.step is None or self.step < 0:
                raise ValueError("bounded reachability needs a step bound k >= 0")
        elif self.step is not None:
            raise ValueError("step bound only applies to probability measures")
        if not math.isfinite(self.threshold):
            raise ValueError("threshold must be finite")
        if self.measure != "reward" and not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"probability threshold {self.threshold} outside [0, 1]")

    def holds(self, value: float) -> bool:
        lam = self.threshold
        return {"<": value < lam, "<=": value <= lam, ">=": value >= lam, ">": value > lam}[self.op]

    def holds_many(self, values: np.ndarray) -> np.ndarray:
        lam = self.threshold
        return {"<": np.less, "<=": np.less_equal, ">=": np.greater_equal,
                ">": np.greater}[self.op](values, lam)

    def negate(self) -> "Specification":
        return Specification(self.measure, self.direction, _NEGATE[self.op], self.threshold, self.step)

    @property
    def is_upper(self) -> bool:
        """True for ``<``/``<=`` specifications (value must stay below the threshold)."""
        return self.op in ("<", "<=")

    def __str__(self):
        head = ("E" if self.measure == "reward" else "P") + (self.direction or "")
        text = f"{head} {self.op} {self.threshold!r}"
        if self.step is not None:
            text += f" step={self.step}"
        return text


_SPEC = re.compile(
    r"^\s*(?P<m>[PE])(?P<d>max|min)?\s*(?P<op><=|>=|<|>|≤|≥)\s*(?P<lam>[-+0-9.eE]+)"
    r"(?:\s+step\s*=\s*(?P<k>\d+))?\s*$")


def parse_spec(text: str) -> Specification:
    """Parse ``<P|E><max|min|> <op> <threshold> [step=<k>]``."""
    m = _SPEC.match(text)
    if not m:
        raise ValueError(f"cannot parse specification {text!r}")
    try:
        lam = float(m["lam"])
    except ValueError as exc:
        raise ValueError(f"bad threshold in {text!r}") from exc
    k = int(m["k"]) if m["k"] is not None else None
    if m["m"] == "E":
        if k is not None:
            raise ValueError("step bounds are not supported for expected rewards")
        measure = "reward"
    else:
        measure = "bounded" if k is not None else "reach"
    return Specification(measure, m["d"], _OPS[m["op"]], lam, k)
