import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from repairlab.fields import (FieldError, FrameError, NormFrame, as_field, boundary_distance,
                              discrete_divergence, divergence_rms, energy, field_axpy, mse,
                              to_normalized, to_physical)
from oracles import loop_divergence


def test_constant_field_has_zero_divergence():
    f = np.stack([np.full((6, 7), 1.5), np.full((6, 7), -2.0)])
    assert np.all(discrete_divergence(f) == 0)
    assert divergence_rms(f) == 0


def test_linear_ramp_unit_divergence():
    u = np.tile(np.arange(4.0), (4, 1))
    d = discrete_divergence(np.stack([u, np.zeros((4, 4))]))
    assert np.array_equal(d[1:-1, 1:-1], np.ones((2, 2)))
    assert np.all(d[0] == 0) and np.all(d[:, 0] == 0) and np.all(d[-1] == 0) and np.all(d[:, -1] == 0)


def test_divergence_matches_loop(rng, backend):
    f = rng.standard_normal((2, 8, 8))
    assert np.array_equal(discrete_divergence(f), loop_divergence(f))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.just(2), st.integers(3, 9), st.integers(3, 9)),
              elements=st.floats(-1e3, 1e3)))
def test_divergence_rms_oracle(f):
    d = loop_divergence(f)[1:-1, 1:-1]
    assert divergence_rms(f) == pytest.approx(np.sqrt(np.sum(d ** 2) / d.size), rel=1e-12, abs=1e-12)


def test_divergence_rms_constant_two():
    u = np.tile(2.0 * np.arange(5.0), (5, 1))
    assert divergence_rms(np.stack([u, np.zeros((5, 5))])) == pytest.approx(2.0)


def test_mse_hand_computed():
    a = np.arange(18.0).reshape(2, 3, 3)
    b = a.copy()
    b[0, 0, 0] += 3
    b[1, 2, 1] -= 1
    assert mse(a, a) == 0
    assert mse(a, b) == pytest.approx(10 / 18)


def test_energy_and_axpy(rng):
    f, g = rng.standard_normal((2, 2, 5, 5))
    assert energy(np.ones((2, 3, 3))) == 2.0
    assert np.array_equal(field_axpy(f, g, 1.0), g)
    assert np.array_equal(field_axpy(f, g, 0.0), f)
    with pytest.raises(FieldError):
        mse(f, g[:, :4])


def test_frames(rng):
    f = rng.standard_normal((2, 6, 5))
    assert np.array_equal(to_physical(f, NormFrame.identity()), f)
    fr = NormFrame(1.0, 2.0, 1.0, 2.0)
    assert np.all(to_physical(np.zeros((2, 3, 3)), fr) == 1.0)
    fr = NormFrame(0.3, 1.7, -2.0, 0.2)
    assert np.abs(to_normalized(to_physical(f, fr), fr) - f).max() < 1e-12
    fit = NormFrame.fit(rng.normal(3.0, 2.0, (10, 2, 8, 8)))
    assert fit.mean_u == pytest.approx(3.0, abs=0.2) and fit.std_v == pytest.approx(2.0, rel=0.1)
    with pytest.raises(FrameError):
        NormFrame(0.0, 0.0)


def test_as_field_validation():
    with pytest.raises(FieldError):
        as_field(np.zeros((3, 4, 4)))
    with pytest.raises(FieldError):
        as_field(np.zeros((2, 2, 4)))
    bad = np.zeros((2, 4, 4))
    bad[0, 1, 1] = np.nan
    with pytest.raises(FieldError):
        as_field(bad)


def test_boundary_distance():
    d = boundary_distance(5, 6)
    assert d[0].max() == 0 and d[2, 2] == 2 and d[1, 4] == 1
