"""Exact periodic Hodge projection and spectral derivative helpers.

Fields are treated as periodic on a ``domain_size x domain_size`` square
(default 2*pi). Transforms are real-input 2-D FFTs in float64.
"""

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np

from .fields import FieldError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SpectralGrid:
    H: int
    W: int
    kx: np.ndarray  # (H, W//2+1)
    ky: np.ndarray  # (H, W//2+1)
    domain_size: float = TWO_PI

    @property
    def k2(self):
        return self.kx ** 2 + self.ky ** 2

    def nyquist_mask(self):
        """True where a real-input derivative has no well-defined sign."""
        m = np.zeros(self.kx.shape, dtype=bool)
        if self.H % 2 == 0:
            m[self.H // 2, :] = True
        if self.W % 2 == 0:
            m[:, self.W // 2] = True
        return m


@lru_cache(maxsize=32)
def spectral_grid(H, W, domain_size=TWO_PI):
    dx = domain_size / W
    dy = domain_size / H
    kx = TWO_PI * np.fft.rfftfreq(W, d=dx)
    ky = TWO_PI * np.fft.fftfreq(H, d=dy)
    ky_grid, kx_grid = np.meshgrid(ky, kx, indexing="ij")
    kx_grid.setflags(write=False)
    ky_grid.setflags(write=False)
    return SpectralGrid(H, W, kx_grid, ky_grid, domain_size)


def _check(f, min_size=4):
    a = np.asarray(f, dtype=np.float64)
    if a.ndim != 3 or a.shape[0] != 2:
        raise FieldError(f"velocity must have shape (2, H, W), got {a.shape}")
    if a.shape[1] < min_size or a.shape[2] < min_size:
        raise FieldError(f"spectral operators need H, W >= {min_size}")
    if not np.all(np.isfinite(a)):
        raise FieldError("velocity has non-finite entries")
    return a


def curl_from_streamfunction(stream, domain_size=TWO_PI):
    """Velocity ``(d(psi)/dy, -d(psi)/dx)`` of a periodic stream function."""
    stream = np.asarray(stream, dtype=np.float64)
    H, W = stream.shape
    g = spectral_grid(H, W, domain_size)
    s_hat = np.fft.rfft2(stream)
    u = np.fft.irfft2(1j * g.ky * s_hat, s=(H, W))
    v = np.fft.irfft2(-1j * g.kx * s_hat, s=(H, W))
    return np.stack([u, v])


def gradient_from_potential(phi, domain_size=TWO_PI):
    """Spectral gradient ``(d(phi)/dx, d(phi)/dy)``, Nyquist modes dropped."""
    phi = np.asarray(phi, dtype=np.float64)
    H, W = phi.shape
    g = spectral_grid(H, W, domain_size)
    p_hat = np.fft.rfft2(phi)
    p_hat[g.nyquist_mask()] = 0.0
    gx = np.fft.irfft2(1j * g.kx * p_hat, s=(H, W))
    gy = np.fft.irfft2(1j * g.ky * p_hat, s=(H, W))
    return np.stack([gx, gy])


def spectral_divergence(f, domain_size=TWO_PI):
    f = _check(f, min_size=2)
    H, W = f.shape[1:]
    g = spectral_grid(H, W, domain_size)
    div_hat = 1j * g.kx * np.fft.rfft2(f[0]) + 1j * g.ky * np.fft.rfft2(f[1])
    div_hat[g.nyquist_mask()] = 0.0
    return np.fft.irfft2(div_hat, s=(H, W))


def spectral_divergence_rms(f, domain_size=TWO_PI):
    d = spectral_divergence(f, domain_size)
    return float(np.sqrt(np.mean(d * d)))


def vorticity(f, domain_size=TWO_PI):
    """Spectral vorticity ``dv/dx - du/dy``."""
    f = _check(f, min_size=2)
    H, W = f.shape[1:]
    g = spectral_grid(H, W, domain_size)
    w_hat = 1j * g.kx * np.fft.rfft2(f[1]) - 1j * g.ky * np.fft.rfft2(f[0])
    return np.fft.irfft2(w_hat, s=(H, W))


def hodge_project(f, domain_size=TWO_PI):
    """Project a periodic velocity field onto the divergence-free subspace.

    The stream function is recovered from the spectral vorticity,
    ``psi_hat = omega_hat / |k|^2`` with the zero mode and (for even sizes)
    the Nyquist row/column set to zero, and the result is its curl plus the
    spatial mean of the input.
    """
    f = _check(f)
    H, W = f.shape[1:]
    g = spectral_grid(H, W, domain_size)
    u_hat = np.fft.rfft2(f[0])
    v_hat = np.fft.rfft2(f[1])
    k2 = g.k2.copy()
    k2[0, 0] = 1.0
    stream_hat = (1j * g.kx * v_hat - 1j * g.ky * u_hat) / k2
    stream_hat[0, 0] = 0.0
    stream_hat[g.nyquist_mask()] = 0.0
    stream = np.fft.irfft2(stream_hat, s=(H, W))
    mean = f.mean(axis=(1, 2), keepdims=True)
    return curl_from_streamfunction(stream, domain_size) + mean


def decompose(f, domain_size=TWO_PI):
    """Split ``f`` into its solenoidal part and the compressible remainder."""
    f = _check(f)
    sol = hodge_project(f, domain_size)
    return sol, f - sol
