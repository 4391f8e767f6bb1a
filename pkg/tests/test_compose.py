import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from repairlab.compose import (BlendConfigError, GateSpec, blend, gate_weight, gated_apply,
                               optimal_alpha)
from repairlab.fields import divergence_rms


def test_blend_endpoints(rng):
    x, c = rng.standard_normal((2, 2, 4, 4))
    assert np.array_equal(blend(x, c, 0.0), x)
    assert np.array_equal(blend(x, c, 1.0), c)
    a = np.arange(18.0).reshape(2, 3, 3)
    assert np.array_equal(blend(a, a + 2, 0.5), a + 1)
    with pytest.raises(BlendConfigError):
        blend(x, c, 1.5)


def test_optimal_alpha_examples():
    r = optimal_alpha(np.array([1.0, 0.0]), np.zeros(2), np.array([0.0, 0.0]))
    assert r.alpha == 1.0 and r.phi(1.0) == 0.0
    # <x - y, c> >= 0 keeps the raw forecast
    r = optimal_alpha(np.array([1.0, 0.0]), np.zeros(2), np.array([2.0, 0.0]))
    assert r.alpha == 0.0 and not r.phi.full_cleanup_no_worse()
    x = np.array([1.0, 0.0])
    r = optimal_alpha(x, np.zeros(2), x + np.array([-0.5, 0.5]))
    grid = np.linspace(0, 1, 1001)
    vals = r.phi(grid)
    assert grid[np.argmin(vals)] == 1.0 and vals.min() == pytest.approx(0.5)
    assert r.alpha == 1.0
    z = optimal_alpha(x, np.zeros(2), x)
    assert z.all_optimal and z.alpha == 0.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_optimal_alpha_is_minimal(seed):
    rng = np.random.default_rng(seed)
    x, y, c = rng.standard_normal((3, 10))
    r = optimal_alpha(x, y, c)
    direct = lambda a: np.sum((x + a * (c - x) - y) ** 2)
    assert r.phi(r.alpha) == pytest.approx(direct(r.alpha), rel=1e-10)
    for a in np.linspace(0, 1, 101):
        assert direct(r.alpha) <= direct(a) + 1e-10


def test_gate_weight():
    g = GateSpec(0.6, 1.0)
    assert gate_weight(0.0, g) == 0.0
    assert gate_weight(0.3, g) == pytest.approx(0.5)
    assert gate_weight(1.2, GateSpec(0.6, 3.0)) == 1.0
    with pytest.raises(BlendConfigError):
        GateSpec(0.0)


def test_gated_apply(rng):
    const = np.ones((2, 6, 6))
    double = lambda f: 2 * f
    assert np.array_equal(gated_apply(const, double, GateSpec(0.6)), const)
    f = rng.standard_normal((2, 8, 8))
    d = divergence_rms(f)
    assert np.array_equal(gated_apply(f, double, GateSpec(d / 2, 2.0)), 2 * f)
    half = gated_apply(f, double, GateSpec(2 * d, 1.0))
    assert np.allclose(half, 1.5 * f)
