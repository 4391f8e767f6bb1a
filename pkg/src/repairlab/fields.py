"""Grid fields, collocated difference stencils, norms and normalization frames.

A velocity field is a float64 array of shape ``(2, H, W)``: component 0 is
``u`` (x-velocity), component 1 is ``v`` (y-velocity). Row index ``i`` is the
y direction, column index ``j`` is the x direction. Grid spacing is 1.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels


class FieldError(ValueError):
    """Invalid field shape or content."""


class FrameError(ValueError):
    """Invalid normalization frame."""


def as_field(f, name="field"):
    """Validate and return ``f`` as a contiguous float64 ``(2, H, W)`` array."""
    a = np.ascontiguousarray(f, dtype=np.float64)
    if a.ndim != 3 or a.shape[0] != 2:
        raise FieldError(f"{name} must have shape (2, H, W), got {a.shape}")
    if a.shape[1] < 3 or a.shape[2] < 3:
        raise FieldError(f"{name} must be at least 3x3, got {a.shape[1]}x{a.shape[2]}")
    if not np.all(np.isfinite(a)):
        raise FieldError(f"{name} has non-finite entries")
    return a


def _same_shape(a, b):
    if a.shape != b.shape:
        raise FieldError(f"shape mismatch: {a.shape} vs {b.shape}")


def interior(a):
    """View of the interior cells ``[1:H-1, 1:W-1]`` of a scalar grid."""
    return a[..., 1:-1, 1:-1]


def boundary_distance(H, W):
    """Cell-count distance to the nearest domain edge, ``min(i, j, H-1-i, W-1-j)``."""
    i = np.arange(H)[:, None]
    j = np.arange(W)[None, :]
    return np.minimum(np.minimum(i, H - 1 - i), np.minimum(j, W - 1 - j))


def boundary_ring_mask(H, W):
    return boundary_distance(H, W) == 0


def discrete_divergence(f):
    """Backward-difference divergence on interior cells; the boundary ring is 0.

    ``div[i, j] = u[i, j] - u[i, j-1] + v[i, j] - v[i-1, j]``
    """
    f = as_field(f)
    return kernels.divergence(f[0], f[1])


def divergence_rms(f):
    """RMS of the stencil divergence over interior cells only."""
    d = interior(discrete_divergence(f))
    return float(np.sqrt(np.mean(d * d)))


def mse(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _same_shape(a, b)
    diff = a - b
    return float(np.mean(diff * diff))


def energy(f):
    """Mean of ``u**2 + v**2`` over the grid."""
    f = np.asarray(f, dtype=np.float64)
    return float(np.mean(f[0] ** 2 + f[1] ** 2))


def field_axpy(f, g, scale):
    """Return ``f + scale * (g - f)``."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    _same_shape(f, g)
    if scale == 0:
        return f.copy()
    if scale == 1:
        return g.copy()
    return f + scale * (g - f)


@dataclass(frozen=True)
class NormFrame:
    """Per-component affine normalization: ``normalized = (physical - mean) / std``."""

    mean_u: float = 0.0
    std_u: float = 1.0
    mean_v: float = 0.0
    std_v: float = 1.0

    def __post_init__(self):
        for name in ("std_u", "std_v"):
            s = getattr(self, name)
            if not (np.isfinite(s) and s > 0):
                raise FrameError(f"{name} must be positive, got {s}")
        for name in ("mean_u", "mean_v"):
            if not np.isfinite(getattr(self, name)):
                raise FrameError(f"{name} must be finite")

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def fit(cls, fields):
        """Frame from the per-component mean and std of a stack of fields."""
        a = np.asarray(fields, dtype=np.float64).reshape(-1, 2, *np.shape(fields)[-2:])
        return cls(float(a[:, 0].mean()), float(a[:, 0].std()),
                   float(a[:, 1].mean()), float(a[:, 1].std()))

    def _params(self):
        mean = np.array([self.mean_u, self.mean_v])[:, None, None]
        std = np.array([self.std_u, self.std_v])[:, None, None]
        return mean, std


def to_physical(f, frame):
    mean, std = frame._params()
    return np.asarray(f, dtype=np.float64) * std + mean


def to_normalized(f, frame):
    mean, std = frame._params()
    return (np.asarray(f, dtype=np.float64) - mean) / std
