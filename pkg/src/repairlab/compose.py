"""Blending, the closed-form controlled-mismatch optimum, and divergence gating."""

from dataclasses import dataclass

import numpy as np

from .fields import divergence_rms


class BlendConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BlendSpec:
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise BlendConfigError(f"blend alpha must lie in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class GateSpec:
    tau: float
    q: float = 1.0

    def __post_init__(self):
        if not (self.tau > 0 and self.q > 0):
            raise BlendConfigError(f"gate needs tau > 0 and q > 0, got tau={self.tau}, q={self.q}")


def blend(x, cleaned, alpha):
    """``(1 - alpha) * x + alpha * cleaned``, exact at both endpoints."""
    BlendSpec(alpha)
    x = np.asarray(x, dtype=np.float64)
    cleaned = np.asarray(cleaned, dtype=np.float64)
    if x.shape != cleaned.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {cleaned.shape}")
    if alpha == 0.0:
        return x.copy()
    if alpha == 1.0:
        return cleaned.copy()
    return x + alpha * (cleaned - x)


@dataclass(frozen=True)
class BlendQuadratic:
    """``phi(alpha) = c0 + 2 alpha c1 + alpha^2 c2`` for the blend error."""

    c0: float  # |x - y|^2
    c1: float  # <x - y, c>
    c2: float  # |c|^2

    def __call__(self, alpha):
        alpha = np.asarray(alpha, dtype=np.float64)
        return self.c0 + 2.0 * alpha * self.c1 + alpha * alpha * self.c2

    def full_cleanup_no_worse(self):
        return 2.0 * self.c1 + self.c2 <= 0.0


@dataclass(frozen=True)
class OptimalBlend:
    alpha: float
    phi: BlendQuadratic
    all_optimal: bool = False


def optimal_alpha(x, y, cleaned):
    """Minimizer over ``[0, 1]`` of ``|x + alpha (cleaned - x) - y|^2``.

    When the cleanup increment is zero every alpha is optimal; 0 is returned
    with ``all_optimal=True``.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    c = np.asarray(cleaned, dtype=np.float64).ravel() - x
    e = x - y
    phi = BlendQuadratic(float(e @ e), float(e @ c), float(c @ c))
    if phi.c2 == 0.0:
        return OptimalBlend(0.0, phi, all_optimal=True)
    a = float(np.clip(-phi.c1 / phi.c2, 0.0, 1.0))
    return OptimalBlend(a, phi)


def gate_weight(d, gate):
    """``min((d / tau)^q, 1)``."""
    if d <= 0:
        return 0.0
    return float(min((d / gate.tau) ** gate.q, 1.0))


def gated_apply(f, base_operator, gate, divergence=divergence_rms):
    """Blend toward ``base_operator(f)`` by a weight set from the raw divergence of ``f``."""
    f = np.asarray(f, dtype=np.float64)
    g = gate_weight(divergence(f), gate)
    if g == 0.0:
        return f.copy()
    cleaned = base_operator(f)
    if g == 1.0:
        return cleaned
    return f + g * (cleaned - f)
