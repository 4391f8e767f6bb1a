"""Boundary-preserving Poisson cleanup of velocity fields.

The cleanup solves ``(A + Lambda) p = -div(u)`` on interior cells, subtracts
the forward pressure gradient from interior velocities, and copies the
boundary ring from the input unchanged.
"""

import numpy as np

from . import kernels
from .fields import as_field, interior
from .poisson import PoissonSystem, relative_residual, solve_pressure


def cleanup_rhs(f):
    f = as_field(f)
    return -interior(kernels.divergence(f[0], f[1]))


def pressure_update(f, p):
    """``u - G_int p``: forward-difference update of interior velocities only."""
    f = as_field(f)
    u, v = kernels.gradient_update(f[0], f[1], p)
    return np.stack([u, v])


def cleanup_apply(f, system, solver, taper=None):
    """Apply one copied-boundary cleanup; optionally blend it in through a taper mask."""
    f = as_field(f)
    _check_dims(f, system)
    p, _ = solve_pressure(system, cleanup_rhs(f), solver)
    out = pressure_update(f, p)
    if taper is not None:
        m = taper.mask(system.H, system.W)
        out = f + m * (out - f)
    return out


def relative_system_residual(f, system, solver):
    f = as_field(f)
    _check_dims(f, system)
    rhs = cleanup_rhs(f)
    p, r = solve_pressure(system, rhs, solver)
    return relative_residual(rhs, r)


def _check_dims(f, system):
    if f.shape[1:] != (system.H, system.W):
        raise ValueError(f"field is {f.shape[1]}x{f.shape[2]} but system is {system.H}x{system.W}")


def relative_poisson_residual(f, system, solver):
    """Residual of the cleanup pressure against the unscreened Poisson system.

    Equals :func:`relative_system_residual` for pure Poisson systems; for
    screened systems it measures how far the applied correction is from
    solving the discrete constraint.
    """
    f = as_field(f)
    _check_dims(f, system)
    rhs = cleanup_rhs(f)
    p, r = solve_pressure(system, rhs, solver)
    if np.any(system.shift != 0):
        r = PoissonSystem.poisson(system.H, system.W).residual(rhs, p)
    return relative_residual(rhs, r)
