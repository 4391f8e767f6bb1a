import numpy as np
import pytest

from repairlab.poisson import (PoissonSystem, SolverConfigError, SolverSpec, UnsupportedSolverError,
                               direct_dst_solve, relative_residual, solve_pressure)
from oracles import dense_poisson

SOLVERS = [SolverSpec("jacobi", 10), SolverSpec("sor", 10), SolverSpec("cg", 10),
           SolverSpec("mg", cycles=2), SolverSpec("direct")]


@pytest.mark.parametrize("solver", SOLVERS, ids=lambda s: s.label())
def test_zero_rhs(solver):
    sys_ = PoissonSystem.screened(10, 9, 2.0)
    p, r = solve_pressure(sys_, np.zeros((8, 7)), solver)
    assert np.all(p == 0) and np.all(r == 0)


def test_impulse_direct_matches_dense():
    rhs = np.zeros((4, 4))
    rhs[2, 2] = 1.0
    p, _ = solve_pressure(PoissonSystem.poisson(6, 6), rhs, SolverSpec("direct"))
    ref = np.linalg.solve(dense_poisson(6, 6), rhs.ravel())
    assert np.abs(p.ravel() - ref).max() <= 1e-10 * np.abs(ref).max()


def test_eigenvector_rhs():
    H, W = 9, 12
    i = np.arange(1, H - 1)[:, None]
    j = np.arange(1, W - 1)[None, :]
    rhs = np.sin(np.pi * i / (H - 1)) * np.sin(np.pi * j / (W - 1))
    lam = 4 * np.sin(np.pi / (2 * (H - 1))) ** 2 + 4 * np.sin(np.pi / (2 * (W - 1))) ** 2
    assert np.allclose(direct_dst_solve(rhs), rhs / lam, atol=1e-13)


def test_direct_random_and_screened_monotone(rng):
    rhs = rng.standard_normal((5, 5))
    p0 = direct_dst_solve(rhs)
    assert np.allclose(p0.ravel(), np.linalg.solve(dense_poisson(7, 7), rhs.ravel()), atol=1e-12)
    p8 = direct_dst_solve(rhs, 8.0)
    assert np.allclose(p8.ravel(), np.linalg.solve(dense_poisson(7, 7, 8.0), rhs.ravel()), atol=1e-12)
    assert np.linalg.norm(p8) < np.linalg.norm(p0)


def test_jacobi_residual_monotone(rng):
    sys_ = PoissonSystem.poisson(16, 16)
    rhs = rng.standard_normal((14, 14))
    rs = [relative_residual(rhs, solve_pressure(sys_, rhs, SolverSpec("jacobi", k))[1])
          for k in (1, 5, 10, 20, 40)]
    assert all(b <= a for a, b in zip(rs, rs[1:]))


@pytest.mark.parametrize("solver", SOLVERS[:4], ids=lambda s: s.label())
def test_iterative_solvers_reduce_residual(rng, solver):
    sys_ = PoissonSystem.geo(14, 12, 8.0, 1.0, 2.0)
    rhs = rng.standard_normal(sys_.interior_shape)
    _, r = solve_pressure(sys_, rhs, solver)
    assert relative_residual(rhs, r) < 1.0


def test_cg_converges_with_budget(rng):
    sys_ = PoissonSystem.screened(10, 10, 1.0)
    rhs = rng.standard_normal((8, 8))
    p, r = solve_pressure(sys_, rhs, SolverSpec("cg", 64))
    assert relative_residual(rhs, r) < 1e-10


def test_system_checks():
    assert PoissonSystem.geo(12, 12, 32, 4, 2).check_spd()
    with pytest.raises(UnsupportedSolverError):
        solve_pressure(PoissonSystem.geo(12, 12, 32, 4, 2), np.ones((10, 10)), SolverSpec("direct"))
    with pytest.raises(ValueError):
        PoissonSystem.screened(6, 6, -1)
    with pytest.raises(SolverConfigError):
        SolverSpec("sor", 10, omega=2.0)
    with pytest.raises(SolverConfigError):
        SolverSpec("jacobi", 0)
    with pytest.raises(SolverConfigError):
        SolverSpec("gauss")


def test_residual_definition(rng):
    sys_ = PoissonSystem.poisson(7, 8)
    rhs = rng.standard_normal((5, 6))
    assert relative_residual(rhs, sys_.residual(rhs, np.zeros((5, 6)))) == pytest.approx(1.0)
    assert relative_residual(np.zeros((2, 2)), np.zeros((2, 2))) == 0.0
