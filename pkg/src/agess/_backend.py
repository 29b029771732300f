"""Backend selection for the hot numeric kernels.

Kernels are written once in numba-compatible numpy style and compiled with
``numba.njit`` when numba is importable.  Setting ``AGESS_BACKEND=numpy``
before import forces the pure-numpy path (same source, not compiled, with
numpy/scipy implementations of the loop-heavy helpers).
"""

from __future__ import annotations

import os
import types

_requested = os.environ.get("AGESS_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(f"AGESS_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

NUMBA_AVAILABLE = _numba is not None
USE_NUMBA = NUMBA_AVAILABLE and _requested == "numba"
BACKEND = "numba" if USE_NUMBA else "numpy"


def jit(fn=None, **kwargs):
    """``numba.njit(cache=True)`` when the numba backend is active, else identity.

    The undecorated function stays reachable as ``fn.py_func`` in both modes.
    """

    def wrap(f):
        if USE_NUMBA:
            opts = {"cache": True}
            opts.update(kwargs)
            try:
                return _numba.njit(**opts)(f)
            except RuntimeError:
                # no cache locator (function defined in a REPL or via exec)
                opts["cache"] = False
                return _numba.njit(**opts)(f)
        f.py_func = f
        return f

    if fn is None:
        return wrap
    return wrap(fn)


def overload(py_impl):
    """Register a numba implementation for a plain-Python helper.

    ``py_impl`` is what runs outside compiled code (typically a numpy/scipy
    call); the decorated factory returns the loop implementation numba uses
    when the helper is called from a jitted kernel.
    """

    def register(factory):
        if NUMBA_AVAILABLE:
            from numba.extending import overload as _ol

            _ol(py_impl, jit_options={"cache": True})(factory)
        return factory

    return register


def is_compiled(fn) -> bool:
    return NUMBA_AVAILABLE and isinstance(fn, _numba.core.registry.CPUDispatcher)


_PY_CLONES: dict = {}


def python_version(fn):
    """Interpreted twin of a jitted kernel whose compiled callees are interpreted too.

    Needed when a kernel must call a plain Python target function.
    """
    if not is_compiled(fn):
        return fn
    key = id(fn)
    if key not in _PY_CLONES:
        py = fn.py_func
        env = dict(py.__globals__)
        clone = types.FunctionType(py.__code__, env, py.__name__, py.__defaults__, py.__closure__)
        _PY_CLONES[key] = clone
        for name in py.__code__.co_names:
            obj = env.get(name)
            if is_compiled(obj):
                env[name] = python_version(obj)
    return _PY_CLONES[key]
