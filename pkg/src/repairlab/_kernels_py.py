"""NumPy reference implementations of the stencil kernels.

These mirror ``_kernels.pyx`` operation by operation (same summation order,
same update formulas) so the two backends agree to the last bit on IEEE
hardware without fused multiply-add.

Pressure arrays are interior-only, shape ``(H-2, W-2)``, with an implicit
zero Dirichlet ring.
"""

import numpy as np


def _neighbour_sum(p):
    pad = np.zeros((p.shape[0] + 2, p.shape[1] + 2))
    pad[1:-1, 1:-1] = p
    # order: up, down, left, right
    return ((pad[:-2, 1:-1] + pad[2:, 1:-1]) + pad[1:-1, :-2]) + pad[1:-1, 2:]


def divergence(u, v):
    H, W = u.shape
    out = np.zeros((H, W))
    out[1:-1, 1:-1] = (u[1:-1, 1:-1] - u[1:-1, :-2]) + (v[1:-1, 1:-1] - v[:-2, 1:-1])
    return out


def apply_operator(p, lam, scale):
    return scale * (4.0 * p - _neighbour_sum(p)) + lam * p


def jacobi(rhs, lam, p0, iters, scale, weight):
    p = np.array(p0, dtype=np.float64, copy=True)
    diag = 4.0 * scale + lam
    for _ in range(iters):
        jac = (rhs + scale * _neighbour_sum(p)) / diag
        if weight == 1.0:
            p = jac
        else:
            p = (1.0 - weight) * p + weight * jac
    return p


def _colour_masks(shape):
    i, j = np.indices(shape)
    red = (i + j) % 2 == 0
    return red, ~red


def sor_redblack(rhs, lam, p0, iters, omega, scale):
    p = np.array(p0, dtype=np.float64, copy=True)
    diag = 4.0 * scale + lam
    red, black = _colour_masks(p.shape)
    for _ in range(iters):
        for mask in (red, black):
            gs = (rhs + scale * _neighbour_sum(p)) / diag
            relaxed = (1.0 - omega) * p + omega * gs
            p[mask] = relaxed[mask]
    return p


def gradient_update(u, v, p):
    H, W = u.shape
    full = np.zeros((H, W))
    full[1:-1, 1:-1] = p
    u_out = np.array(u, dtype=np.float64, copy=True)
    v_out = np.array(v, dtype=np.float64, copy=True)
    u_out[1:-1, 1:-1] = u[1:-1, 1:-1] - (full[1:-1, 2:] - full[1:-1, 1:-1])
    v_out[1:-1, 1:-1] = v[1:-1, 1:-1] - (full[2:, 1:-1] - full[1:-1, 1:-1])
    return u_out, v_out
