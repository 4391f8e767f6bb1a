"""Dirichlet pressure systems on interior cells and the solver family.

The system acts on interior pressure arrays ``p`` of shape ``(H-2, W-2)``
with zero Dirichlet values on the ring::

    (A + Lambda) p,   A = 4 I - Sx+ - Sx- - Sy+ - Sy-

``Lambda`` is a non-negative diagonal shift (0 for pure Poisson, a constant
for the screened system, spatially varying for the geometry-aware system).
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

from . import kernels
from .fields import FieldError, boundary_distance

SOLVER_KINDS = ("jacobi", "sor", "cg", "mg", "direct")
RESIDUAL_EPS = 1e-30


class SolverConfigError(ValueError):
    """Bad solver budget or parameters."""


class UnsupportedSolverError(ValueError):
    """Solver cannot handle the requested system."""


@dataclass(frozen=True)
class TaperMask:
    """``M_w(i, j) = clip((d(i, j) - 1) / w, 0, 1)`` with ``d`` the edge distance."""

    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"taper width must be positive, got {self.width}")

    def mask(self, H, W):
        d = boundary_distance(H, W).astype(np.float64)
        return np.clip((d - 1.0) / self.width, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class PoissonSystem:
    H: int
    W: int
    shift: np.ndarray  # (H-2, W-2), non-negative

    def __post_init__(self):
        if self.H < 3 or self.W < 3:
            raise FieldError(f"grid must be at least 3x3, got {self.H}x{self.W}")
        s = np.ascontiguousarray(self.shift, dtype=np.float64)
        if s.shape != (self.H - 2, self.W - 2):
            raise FieldError(f"shift must have shape {(self.H - 2, self.W - 2)}, got {s.shape}")
        if not np.all(np.isfinite(s)) or np.any(s < 0):
            raise ValueError("shift must be finite and non-negative")
        s.setflags(write=False)
        object.__setattr__(self, "shift", s)

    @classmethod
    def poisson(cls, H, W):
        return cls(H, W, np.zeros((H - 2, W - 2)))

    @classmethod
    def screened(cls, H, W, lam):
        return cls(H, W, np.full((H - 2, W - 2), float(lam)))

    @classmethod
    def geo(cls, H, W, lam_bdry, lam_core, width):
        """Spatially varying shift ``lb + (lc - lb) * M_w`` on interior cells."""
        if not lam_bdry >= lam_core >= 0:
            raise ValueError("geo system needs lam_bdry >= lam_core >= 0")
        m = TaperMask(width).mask(H, W)[1:-1, 1:-1]
        return cls(H, W, lam_bdry + (lam_core - lam_bdry) * m)

    @property
    def interior_shape(self):
        return (self.H - 2, self.W - 2)

    @property
    def is_constant(self):
        return bool(np.all(self.shift == self.shift.flat[0]))

    @property
    def constant_shift(self):
        if not self.is_constant:
            raise UnsupportedSolverError("system shift is not spatially constant")
        return float(self.shift.flat[0])

    def apply(self, p):
        return kernels.apply_operator(p, self.shift, 1.0)

    def residual(self, rhs, p):
        return np.asarray(rhs, dtype=np.float64) - self.apply(p)

    def check_spd(self, trials=8, seed=0):
        rng = np.random.default_rng(seed)
        for _ in range(trials):
            p = rng.standard_normal(self.interior_shape)
            if not float(np.sum(p * self.apply(p))) > 0:
                return False
        return True


@dataclass(frozen=True)
class SolverSpec:
    kind: str = "jacobi"
    iters: int = 20
    omega: float = 1.5
    cycles: int = 2
    mg_sweeps: int = 2
    mg_weight: float = 0.8
    mg_coarse_sweeps: int = 20

    def __post_init__(self):
        if self.kind not in SOLVER_KINDS:
            raise SolverConfigError(f"unknown solver kind {self.kind!r}")
        if self.kind in ("jacobi", "sor", "cg") and self.iters < 1:
            raise SolverConfigError(f"{self.kind} needs an iteration budget >= 1")
        if self.kind == "mg" and self.cycles < 1:
            raise SolverConfigError("mg needs at least one V-cycle")
        if self.kind == "sor" and not 0 < self.omega < 2:
            raise SolverConfigError(f"SOR relaxation must lie in (0, 2), got {self.omega}")
        if self.mg_sweeps < 1 or self.mg_coarse_sweeps < 1 or not 0 < self.mg_weight <= 1:
            raise SolverConfigError("invalid multigrid smoothing parameters")

    def label(self):
        if self.kind in ("jacobi", "cg"):
            return f"{self.kind}:k={self.iters}"
        if self.kind == "sor":
            return f"sor:k={self.iters},omega={self.omega:g}"
        if self.kind == "mg":
            return f"mg:cycles={self.cycles}"
        return "direct"


# -- direct solve ---------------------------------------------------------

@lru_cache(maxsize=64)
def dirichlet_eigenvalues(n):
    """Eigenvalues ``4 sin^2(pi (i+1) / (2 (n+1)))`` of the 1-D Dirichlet stencil."""
    i = np.arange(n)
    ev = 4.0 * np.sin(np.pi * (i + 1) / (2.0 * (n + 1))) ** 2
    ev.setflags(write=False)
    return ev


def _dst(a, axis):
    return sfft.dst(a, type=1, norm="ortho", axis=axis)


def direct_dst_solve(rhs, lam=0.0):
    """Solve ``(A + lam I) p = rhs`` exactly in the orthonormal DST-I basis."""
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.ndim != 2 or min(rhs.shape) < 1:
        raise FieldError(f"rhs must be a non-empty 2-D interior array, got {rhs.shape}")
    if lam < 0:
        raise ValueError("shift must be non-negative")
    n, m = rhs.shape
    r_hat = _dst(_dst(rhs, 0), 1)
    denom = dirichlet_eigenvalues(n)[:, None] + dirichlet_eigenvalues(m)[None, :] + lam
    return _dst(_dst(r_hat / denom, 0), 1)


# -- conjugate gradients --------------------------------------------------

def _cg(system, rhs, iters):
    p = np.zeros(system.interior_shape)
    r = rhs.copy()
    d = r.copy()
    rr = float(np.sum(r * r))
    for _ in range(iters):
        if rr == 0.0:
            break
        Ad = system.apply(d)
        dAd = float(np.sum(d * Ad))
        if dAd <= 0.0:
            break
        a = rr / dAd
        p = p + a * d
        r = r - a * Ad
        rr_new = float(np.sum(r * r))
        d = r + (rr_new / rr) * d
        rr = rr_new
    return p


# -- geometric multigrid --------------------------------------------------

@lru_cache(maxsize=64)
def _prolong_1d(n_fine, n_coarse):
    """Linear interpolation from coarse to fine interior points.

    Fine interior point ``a`` sits at position ``a + 1`` on a grid whose
    Dirichlet boundary is at 0; it maps to coarse position ``(a + 1) / 2``.
    """
    P = np.zeros((n_fine, n_coarse))
    for a in range(n_fine):
        x = (a + 1) / 2.0
        lo = int(np.floor(x))
        w = x - lo
        for c, wt in ((lo, 1.0 - w), (lo + 1, w)):
            if 1 <= c <= n_coarse and wt > 0:
                P[a, c - 1] += wt
    P.setflags(write=False)
    return P


@dataclass
class _Level:
    shape: tuple
    scale: float
    shift: np.ndarray
    PH: np.ndarray = field(default=None)
    PW: np.ndarray = field(default=None)


def _mg_hierarchy(system):
    levels = [_Level(system.interior_shape, 1.0, system.shift)]
    while min(levels[-1].shape) > 4:
        n, m = levels[-1].shape
        nc, mc = (n - 1) // 2, (m - 1) // 2
        if nc < 1 or mc < 1:
            break
        PH, PW = _prolong_1d(n, nc), _prolong_1d(m, mc)
        fine = levels[-1]
        fine.PH, fine.PW = PH, PW
        # shift on the coarse grid: weighted average of the fine shift
        wsum = PH.T @ np.ones((n, m)) @ PW
        shift_c = (PH.T @ fine.shift @ PW) / wsum
        levels.append(_Level((nc, mc), fine.scale / 4.0, shift_c))
    return levels


def _vcycle(levels, k, rhs, p, spec):
    lev = levels[k]
    if k == len(levels) - 1:
        return kernels.jacobi(rhs, lev.shift, p, spec.mg_coarse_sweeps, lev.scale, spec.mg_weight)
    p = kernels.jacobi(rhs, lev.shift, p, spec.mg_sweeps, lev.scale, spec.mg_weight)
    r = rhs - kernels.apply_operator(p, lev.shift, lev.scale)
    r_c = 0.25 * (lev.PH.T @ r @ lev.PW)
    e_c = _vcycle(levels, k + 1, r_c, np.zeros(levels[k + 1].shape), spec)
    p = p + lev.PH @ e_c @ lev.PW.T
    return kernels.jacobi(rhs, lev.shift, p, spec.mg_sweeps, lev.scale, spec.mg_weight)


def _mg(system, rhs, spec):
    levels = _mg_hierarchy(system)
    p = np.zeros(system.interior_shape)
    for _ in range(spec.cycles):
        p = _vcycle(levels, 0, rhs, p, spec)
    return p


# -- dispatch -------------------------------------------------------------

def solve_pressure(system, rhs, solver):
    """Approximately solve ``(A + Lambda) p = rhs`` on interior cells.

    ``rhs`` may be given interior-only ``(H-2, W-2)`` or as a full grid whose
    boundary ring must be zero. Returns ``(p, residual)`` as interior arrays
    with ``residual = rhs - (A + Lambda) p``.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    if rhs.shape == (system.H, system.W):
        ring = np.ones(rhs.shape, dtype=bool)
        ring[1:-1, 1:-1] = False
        if np.any(rhs[ring] != 0):
            raise FieldError("full-grid rhs must vanish on the boundary ring")
        rhs = rhs[1:-1, 1:-1]
    if rhs.shape != system.interior_shape:
        raise FieldError(f"rhs shape {rhs.shape} does not match system {system.interior_shape}")
    rhs = np.ascontiguousarray(rhs)
    kind = solver.kind
    if kind == "direct":
        p = direct_dst_solve(rhs, system.constant_shift)
    elif kind == "jacobi":
        p = kernels.jacobi(rhs, system.shift, np.zeros_like(rhs), solver.iters, 1.0, 1.0)
    elif kind == "sor":
        p = kernels.sor_redblack(rhs, system.shift, np.zeros_like(rhs), solver.iters, solver.omega, 1.0)
    elif kind == "cg":
        p = _cg(system, rhs, solver.iters)
    elif kind == "mg":
        p = _mg(system, rhs, solver)
    else:  # pragma: no cover - guarded by SolverSpec
        raise SolverConfigError(kind)
    return p, system.residual(rhs, p)


def relative_residual(rhs, residual):
    nr = float(np.linalg.norm(rhs))
    if nr == 0.0:
        return 0.0
    return float(np.linalg.norm(residual)) / max(nr, RESIDUAL_EPS)
