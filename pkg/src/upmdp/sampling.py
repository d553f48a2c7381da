"""Reproducible i.i.d. parameter samples.

Random numbers come from numpy's ``Philox`` (Philox4x64-10, counter based)
keyed directly with the 64-bit seed, so a given seed gives the same stream
on every platform.  Each double is ``(next_uint64 >> 11) * 2**-53``, i.e.
uniform on [0, 1).  Per sample, stream consumption is fixed and documented:

* uniform-box: one double per parameter, in parameter order, mapped to
  ``lo + (hi - lo) * u``;
* discrete and external-file: one double, selecting an atom/row by inverse CDF;
* mixture: one double for the component, then the component's own draws.

Samples are drawn in order, so ``draw(..., n=100)`` is a prefix of
``draw(..., n=1000)`` for the same seed.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

__all__ = [
    "UniformBox",
    "Discrete",
    "Mixture",
    "ExternalFile",
    "SampleSet",
    "SampleError",
    "draw",
    "load_samples",
    "save_samples",
    "dist_from_dict",
    "dist_to_dict",
    "load_distribution",
    "save_distribution",
]


class SampleError(ValueError):
    pass


@dataclass(frozen=True)
class UniformBox:
    box: Mapping[str, tuple[float, float]]

    def __post_init__(self):
        for p, (lo, hi) in self.box.items():
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise SampleError(f"interval for {p!r} must satisfy lo < hi, got [{lo}, {hi}]")


@dataclass(frozen=True)
class Discrete:
    atoms: Sequence[tuple[float, Mapping[str, float]]]  # (weight, valuation)

    def __post_init__(self):
        if not self.atoms:
            raise SampleError("discrete distribution needs at least one atom")
        _check_weights([w for w, _ in self.atoms])


@dataclass(frozen=True)
class Mixture:
    components: Sequence[tuple[float, object]]  # (weight, distribution)

    def __post_init__(self):
        if not self.components:
            raise SampleError("mixture needs at least one component")
        _check_weights([w for w, _ in self.components])


@dataclass(frozen=True)
class ExternalFile:
    """Empirical distribution over the rows of a sample CSV file."""

    path: str


def _check_weights(weights):
    for w in weights:
        if not (math.isfinite(w) and w > 0):
            raise SampleError(f"weights must be positive and finite, got {w}")


@dataclass(frozen=True, eq=False)
class SampleSet:
    """``n`` valuations, one row of ``values`` per sample, columns in ``params`` order."""

    params: tuple
    values: np.ndarray
    seed: int | None = None
    spec: object = None

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, i) -> dict:
        return dict(zip(self.params, self.values[i].tolist()))

    def __iter__(self):
        for row in self.values.tolist():
            yield dict(zip(self.params, row))


# -- drawing ------------------------------------------------------------------

def _rng(seed: int) -> np.random.Generator:
    if not 0 <= int(seed) < 2 ** 64:
        raise SampleError("seed must be a 64-bit unsigned integer")
    return np.random.Generator(np.random.Philox(key=int(seed)))


def _pick(weights: np.ndarray, u):
    cdf = np.cumsum(weights) / np.sum(weights)
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(weights) - 1)


class _Compiled:
    """A distribution resolved against a parameter order."""

    def __init__(self, spec, params: tuple, base: Path | None):
        self.kind = type(spec).__name__
        self.params = params
        if isinstance(spec, UniformBox):
            if set(spec.box) != set(params):
                raise SampleError(
                    f"uniform box covers {sorted(spec.box)}, model has {sorted(params)}")
            self.lo = np.array([spec.box[p][0] for p in params], dtype=float)
            self.width = np.array([spec.box[p][1] - spec.box[p][0] for p in params], dtype=float)
        elif isinstance(spec, Discrete):
            for _, val in spec.atoms:
                if set(val) != set(params):
                    raise SampleError(f"discrete atom {dict(val)} does not match parameters {params}")
            self.weights = np.array([w for w, _ in spec.atoms], dtype=float)
            self.table = np.array([[float(val[p]) for p in params] for _, val in spec.atoms])
        elif isinstance(spec, ExternalFile):
            path = Path(spec.path)
            if base is not None and not path.is_absolute():
                path = base / path
            self.table = load_samples(path, params).values
            if len(self.table) == 0:
                raise SampleError(f"{path}: no samples")
            self.weights = np.ones(len(self.table))
        elif isinstance(spec, Mixture):
            self.weights = np.array([w for w, _ in spec.components], dtype=float)
            self.parts = [_Compiled(d, params, base) for _, d in spec.components]
        else:
            raise SampleError(f"unsupported distribution {spec!r}")

    def one(self, rng) -> np.ndarray:
        if self.kind == "UniformBox":
            return self.lo + self.width * rng.random(len(self.params))
        if self.kind == "Mixture":
            i = int(_pick(self.weights, rng.random()))
            return self.parts[i].one(rng)
        return self.table[int(_pick(self.weights, rng.random()))].copy()

    def many(self, rng, n: int) -> np.ndarray:
        if self.kind == "UniformBox":
            return self.lo + self.width * rng.random((n, len(self.params)))
        if self.kind == "Mixture":
            out = np.empty((n, len(self.params)))
            for i in range(n):
                out[i] = self.one(rng)
            return out
        return self.table[_pick(self.weights, rng.random(n))]


def draw(spec, params: Sequence[str], n: int, seed: int, base: str | Path | None = None) -> SampleSet:
    """``n`` i.i.d. valuations from ``spec`` using the Philox stream keyed by ``seed``."""
    if n < 1:
        raise SampleError("n must be at least 1")
    params = tuple(params)
    compiled = _Compiled(spec, params, Path(base) if base is not None else None)
    values = compiled.many(_rng(seed), int(n))
    return SampleSet(params, values, int(seed), spec)


# -- files --------------------------------------------------------------------

def load_samples(path, params: Sequence[str]) -> SampleSet:
    """Read a CSV with a header naming exactly ``params``, one sample per row."""
    params = tuple(params)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SampleError(f"{path}: empty file") from None
        missing = [p for p in params if p not in header]
        extra = [h for h in header if h not in params]
        if missing:
            raise SampleError(f"{path}: missing column(s) {missing}")
        if extra:
            raise SampleError(f"{path}: extra column(s) {extra}")
        if len(set(header)) != len(header):
            raise SampleError(f"{path}: duplicate column names")
        cols = [header.index(p) for p in params]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise SampleError(f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}")
            vals = []
            for j in cols:
                try:
                    vals.append(float(row[j]))
                except ValueError:
                    raise SampleError(
                        f"{path}: row {lineno}, column {header[j]!r}: non-numeric cell {row[j]!r}"
                    ) from None
            rows.append(vals)
    values = np.array(rows, dtype=float).reshape(len(rows), len(params))
    return SampleSet(params, values, None, ExternalFile(str(path)))


def save_samples(samples: SampleSet, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(samples.params)
        for row in samples.values.tolist():
            w.writerow([repr(v) for v in row])


def dist_from_dict(doc: Mapping):
    kind = doc.get("kind")
    if kind == "uniform-box":
        return UniformBox({p: (float(lo), float(hi)) for p, (lo, hi) in doc["box"].items()})
    if kind == "discrete":
        return Discrete(tuple((float(a.get("weight", 1.0)), dict(a["values"])) for a in doc["atoms"]))
    if kind == "mixture":
        return Mixture(tuple((float(c.get("weight", 1.0)), dist_from_dict(c["dist"]))
                             for c in doc["components"]))
    if kind == "external-file":
        return ExternalFile(str(doc["path"]))
    raise SampleError(f"unknown distribution kind {kind!r}")


def dist_to_dict(spec) -> dict:
    if isinstance(spec, UniformBox):
        return {"kind": "uniform-box", "box": {p: [lo, hi] for p, (lo, hi) in spec.box.items()}}
    if isinstance(spec, Discrete):
        return {"kind": "discrete",
                "atoms": [{"weight": w, "values": dict(v)} for w, v in spec.atoms]}
    if isinstance(spec, Mixture):
        return {"kind": "mixture",
                "components": [{"weight": w, "dist": dist_to_dict(d)} for w, d in spec.components]}
    if isinstance(spec, ExternalFile):
        return {"kind": "external-file", "path": spec.path}
    raise SampleError(f"unsupported distribution {spec!r}")


def load_distribution(path):
    return dist_from_dict(json.loads(Path(path).read_text()))


def save_distribution(spec, path) -> None:
    Path(path).write_text(json.dumps(dist_to_dict(spec), indent=1) + "\n")
