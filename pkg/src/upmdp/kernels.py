"""Kernel backend selection.

The compiled Cython extension is used when it was built; otherwise (or when
``UPMDP_PURE_PYTHON=1`` is set) the numpy fallback is loaded.  Both expose
``iterate`` and ``log_binomial_tail`` with identical semantics.
"""
import importlib
import os

__all__ = ["BACKEND", "iterate", "log_binomial_tail", "load_backend", "available_backends"]


def load_backend(name: str):
    if name == "cython":
        return importlib.import_module("upmdp._kernels")
    if name == "python":
        return importlib.import_module("upmdp._fallback")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> list[str]:
    names = []
    for name in ("cython", "python"):
        try:
            load_backend(name)
        except ImportError:
            continue
        names.append(name)
    return names


if os.environ.get("UPMDP_PURE_PYTHON", "") not in ("", "0"):
    _impl, BACKEND = load_backend("python"), "python"
else:
    try:
        _impl, BACKEND = load_backend("cython"), "cython"
    except ImportError:
        _impl, BACKEND = load_backend("python"), "python"

iterate = _impl.iterate
log_binomial_tail = _impl.log_binomial_tail
