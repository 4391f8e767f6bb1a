import numpy as np
import pytest

from repairlab.hierarchy import (Hierarchy, HierarchyError, coherence_rms, hier_distortion,
                                 historical_proportions, operator_matrix, reconcile_bottom_up,
                                 reconcile_ols, reconcile_top_down)

S3 = np.array([[1, 1], [1, 0], [0, 1]], dtype=float)


@pytest.fixture
def h3():
    return Hierarchy(S3, 0, (1, 2))


def test_ols_worked_example(h3):
    assert np.allclose(reconcile_ols(h3, [3, 1, 2]), [3, 1, 2], atol=1e-14)
    assert np.allclose(reconcile_ols(h3, [4, 1, 2]), [11 / 3, 4 / 3, 7 / 3], atol=1e-14)
    x = np.array([4.0, 1.0, 2.0])
    once = reconcile_ols(h3, x)
    assert np.abs(reconcile_ols(h3, once) - once).max() < 1e-12


def test_bottom_up(h3):
    assert np.array_equal(reconcile_bottom_up(h3, [3, 1, 2]), [3, 1, 2])
    out = reconcile_bottom_up(h3, [4, 1, 2])
    assert np.array_equal(out, [3, 1, 2])
    assert np.array_equal(out, h3.S @ h3.bottom_of(out))
    assert coherence_rms(h3, out) < 1e-12


def test_top_down(h3):
    p = np.array([0.5, 0.5])
    assert np.allclose(reconcile_top_down(h3, p, [4, 0, 0]), [4, 2, 2])
    assert np.allclose(reconcile_top_down(h3, p, [4, 2, 2]), [4, 2, 2])
    out = reconcile_top_down(h3, p, [3, 1, 2])
    assert np.allclose(out, [3, 1.5, 1.5])
    assert np.mean((out - [3, 1, 2]) ** 2) == pytest.approx(0.5 / 3)
    half = reconcile_top_down(h3, p, [4, 1, 1], alpha=0.5)
    assert coherence_rms(h3, half) > 0


def test_validation():
    with pytest.raises(HierarchyError):
        Hierarchy(np.array([[1, 1], [1, 1], [0, 1]]), 0, (1, 2))
    with pytest.raises(HierarchyError):
        Hierarchy(S3, 1, (1, 2))
    with pytest.raises(HierarchyError):
        reconcile_top_down(Hierarchy(S3, 0, (1, 2)), [0.7, 0.7], [1, 1, 1])
    with pytest.raises(HierarchyError):
        Hierarchy.tree(1, 3)


def test_tree_and_json(rng):
    h = Hierarchy.tree(3, 3)
    assert (h.m, h.b) == (13, 9)
    h2 = Hierarchy.from_json(h.to_json())
    assert np.array_equal(h2.S, h.S) and h2.bottom == h.bottom
    z = rng.uniform(1, 2, (50, h.b))
    X = z @ h.S.T
    assert coherence_rms(h, X[0]) < 1e-12
    assert hier_distortion(h, lambda x: reconcile_ols(h, x), X) < 1e-20
    assert hier_distortion(h, lambda x: reconcile_bottom_up(h, x), X) < 1e-20
    p = historical_proportions(h, X)
    assert hier_distortion(h, lambda x: reconcile_top_down(h, p, x), X) > 0
    M = operator_matrix(h, lambda x: reconcile_ols(h, x))
    assert np.allclose(M, M.T) and np.allclose(M @ M, M)
