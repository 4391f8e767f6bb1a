"""Backend selection for the stencil kernels.

The compiled extension is used when it imported cleanly; otherwise the NumPy
fallback is used. Set ``REPAIRLAB_BACKEND=python`` to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_backends = {"python": _kernels_py}
if _compiled is not None:
    _backends["compiled"] = _compiled

available_backends = tuple(_backends)


def _initial_backend():
    requested = os.environ.get("REPAIRLAB_BACKEND", "").strip().lower()
    if requested:
        if requested not in _backends:
            raise ImportError(f"REPAIRLAB_BACKEND={requested!r} is not available "
                              f"(have {available_backends})")
        return requested
    return "compiled" if _compiled is not None else "python"


_active = _initial_backend()


def backend():
    """Name of the active kernel backend."""
    return _active


def set_backend(name):
    global _active
    if name not in _backends:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends}")
    _active = name


def get_module(name=None):
    return _backends[name or _active]


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def divergence(u, v):
    return _backends[_active].divergence(_c(u), _c(v))


def apply_operator(p, lam, scale=1.0):
    return _backends[_active].apply_operator(_c(p), _c(lam), float(scale))


def jacobi(rhs, lam, p0, iters, scale=1.0, weight=1.0):
    return _backends[_active].jacobi(_c(rhs), _c(lam), _c(p0), int(iters), float(scale), float(weight))


def sor_redblack(rhs, lam, p0, iters, omega, scale=1.0):
    return _backends[_active].sor_redblack(_c(rhs), _c(lam), _c(p0), int(iters), float(omega), float(scale))


def gradient_update(u, v, p):
    return _backends[_active].gradient_update(_c(u), _c(v), _c(p))
