"""Kernel backend selection.

The hot inner loops exist twice: a Cython extension (``qsdcsim._kernels``)
and a pure NumPy twin (``qsdcsim._kernels_py``). At import the extension is
preferred when present; ``QSDCSIM_BACKEND=python`` forces the fallback and
``QSDCSIM_BACKEND=cython`` insists on the extension. ``use()`` switches at
runtime, which the benchmark and the backend parity tests rely on.
"""
from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None


def compiled_available() -> bool:
    return _compiled is not None


def _select(which: str):
    which = which.strip().lower()
    if which in ("", "auto"):
        return _compiled if _compiled is not None else _kernels_py
    if which in ("python", "numpy", "py"):
        return _kernels_py
    if which in ("cython", "compiled", "c"):
        if _compiled is None:
            raise ImportError("QSDCSIM_BACKEND requested the compiled kernels but they are not built")
        return _compiled
    raise ImportError(f"unknown backend name: {which!r}")


impl = _select(os.environ.get("QSDCSIM_BACKEND", "auto"))


def name() -> str:
    return "cython" if impl is _compiled else "python"


def use(which: str) -> None:
    """Switch the active kernel set. Not thread safe; intended for tests and benchmarks."""
    global impl
    impl = _select(which)
