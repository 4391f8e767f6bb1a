# cython: language_level=3
"""Compiled stencil kernels. See ``_kernels_py.py`` for the reference semantics."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline double _nbr(const double[:, ::1] p, Py_ssize_t i, Py_ssize_t j,
                        Py_ssize_t n, Py_ssize_t m) noexcept nogil:
    cdef double up = p[i - 1, j] if i > 0 else 0.0
    cdef double down = p[i + 1, j] if i < n - 1 else 0.0
    cdef double left = p[i, j - 1] if j > 0 else 0.0
    cdef double right = p[i, j + 1] if j < m - 1 else 0.0
    return ((up + down) + left) + right


def divergence(const double[:, ::1] u, const double[:, ::1] v):
    cdef Py_ssize_t H = u.shape[0], W = u.shape[1], i, j
    out = np.zeros((H, W), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(1, H - 1):
            for j in range(1, W - 1):
                o[i, j] = (u[i, j] - u[i, j - 1]) + (v[i, j] - v[i - 1, j])
    return out


def apply_operator(const double[:, ::1] p, const double[:, ::1] lam, double scale):
    cdef Py_ssize_t n = p.shape[0], m = p.shape[1], i, j
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            for j in range(m):
                o[i, j] = scale * (4.0 * p[i, j] - _nbr(p, i, j, n, m)) + lam[i, j] * p[i, j]
    return out


def jacobi(const double[:, ::1] rhs, const double[:, ::1] lam, const double[:, ::1] p0,
           int iters, double scale, double weight):
    cdef Py_ssize_t n = rhs.shape[0], m = rhs.shape[1], i, j
    cdef int it
    cdef double jac
    a = np.array(p0, dtype=np.float64, copy=True)
    b = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] cur = a
    cdef double[:, ::1] nxt = b
    cdef double[:, ::1] tmp
    with nogil:
        for it in range(iters):
            for i in range(n):
                for j in range(m):
                    jac = (rhs[i, j] + scale * _nbr(cur, i, j, n, m)) / (4.0 * scale + lam[i, j])
                    if weight == 1.0:
                        nxt[i, j] = jac
                    else:
                        nxt[i, j] = (1.0 - weight) * cur[i, j] + weight * jac
            tmp = cur
            cur = nxt
            nxt = tmp
    return np.asarray(cur)


def sor_redblack(const double[:, ::1] rhs, const double[:, ::1] lam, const double[:, ::1] p0,
                 int iters, double omega, double scale):
    cdef Py_ssize_t n = rhs.shape[0], m = rhs.shape[1], i, j
    cdef int it, colour
    cdef double gs
    out = np.array(p0, dtype=np.float64, copy=True)
    cdef double[:, ::1] p = out
    with nogil:
        for it in range(iters):
            for colour in range(2):
                for i in range(n):
                    for j in range((i + colour) % 2, m, 2):
                        gs = (rhs[i, j] + scale * _nbr(p, i, j, n, m)) / (4.0 * scale + lam[i, j])
                        p[i, j] = (1.0 - omega) * p[i, j] + omega * gs
    return out


def gradient_update(const double[:, ::1] u, const double[:, ::1] v, const double[:, ::1] p):
    cdef Py_ssize_t H = u.shape[0], W = u.shape[1], i, j
    cdef Py_ssize_t n = H - 2, m = W - 2
    cdef double right, below
    u_arr = np.array(u, dtype=np.float64, copy=True)
    v_arr = np.array(v, dtype=np.float64, copy=True)
    cdef double[:, ::1] uo = u_arr
    cdef double[:, ::1] vo = v_arr
    with nogil:
        for i in range(n):
            for j in range(m):
                right = p[i, j + 1] if j < m - 1 else 0.0
                below = p[i + 1, j] if i < n - 1 else 0.0
                uo[i + 1, j + 1] = u[i + 1, j + 1] - (right - p[i, j])
                vo[i + 1, j + 1] = v[i + 1, j + 1] - (below - p[i, j])
    return u_arr, v_arr
