"""Operator audits: target distortion, residuals, error decomposition,
boundary-strip divergence, and distortion-vs-rollout correlations."""

from dataclasses import dataclass
import math

import numpy as np
from scipy.stats import rankdata

from . import kernels
from .fields import as_field, boundary_distance, energy, mse
from .formats import fmt_num

EPS = 1e-30


class CorrelationError(ValueError):
    pass


def _mean_std(values):
    a = np.asarray(values, dtype=np.float64)
    return float(a.mean()), float(a.std())


@dataclass(frozen=True)
class Stat:
    mean: float
    std: float

    @classmethod
    def of(cls, values):
        return cls(*_mean_std(values))


@dataclass(frozen=True)
class OperatorAudit:
    spec: str
    n: int
    gt_div_before: Stat
    gt_div_after: Stat
    gt_distortion_mse: Stat
    relative_system_residual: Stat   # None for operators without a linear solve
    poisson_residual: Stat
    distortion_relative_to_energy: float  # percent

    def row(self):
        def pair(s):
            return ["not applicable", ""] if s is None else [fmt_num(s.mean), fmt_num(s.std)]
        return ([self.spec] + pair(self.gt_div_before) + pair(self.gt_div_after)
                + pair(self.gt_distortion_mse) + pair(self.relative_system_residual)
                + [fmt_num(self.distortion_relative_to_energy), str(self.n)])


AUDIT_HEADER = ["Operator", "GT div before", "GT div before std", "GT div after", "GT div after std",
                "GT distortion MSE", "GT distortion MSE std", "Relative system residual",
                "Relative system residual std", "Distortion relative to energy (%)", "n"]


def audit_operator(op, targets):
    """Distortion, divergence and residual audit of ``op`` on held-out valid targets.

    Divergence is measured with the operator's own metric (spectral for
    periodic operators, interior stencil otherwise).
    """
    targets = [as_field(y, "target") for y in targets]
    if not targets:
        raise ValueError("audit needs at least one target")
    before, after, dist, res, pres, en = [], [], [], [], [], []
    for y in targets:
        out = op(y)
        before.append(op.divergence(y))
        after.append(op.divergence(out))
        dist.append(mse(out, y))
        en.append(energy(y))
        r = op.residual(y)
        if r is not None:
            res.append(r)
            pres.append(op.poisson_residual(y))
    mean_energy = float(np.mean(en))
    rel = 100.0 * float(np.mean(dist)) / mean_energy if mean_energy > 0 else 0.0
    return OperatorAudit(op.spec, len(targets), Stat.of(before), Stat.of(after), Stat.of(dist),
                         Stat.of(res) if res else None, Stat.of(pres) if pres else None, rel)


@dataclass(frozen=True)
class ErrorDecomposition:
    propagated: float   # |P(x) - P(y)|^2
    distortion: float   # |P(y) - y|^2
    cross: float        # 2 <P(x) - P(y), P(y) - y>
    total: float        # |P(x) - y|^2, evaluated directly
    bias_at_x: float    # |P(x) - x|
    step_error: float   # |x - y|

    @property
    def terms(self):
        return (self.propagated, self.distortion, self.cross)

    @property
    def rollout_terms(self):
        return (self.bias_at_x, self.step_error)

    def identity_gap(self):
        """Relative mismatch between the three-term sum and the direct total."""
        s = self.propagated + self.distortion + self.cross
        return abs(s - self.total) / max(abs(self.total), EPS)


def decompose_error(op, x, y):
    """Split ``|op(x) - y|^2`` into propagated error, target distortion and a cross term.

    ``x`` plays the role of a prediction ``F(y_t)`` and ``y`` of the target
    ``y_{t+1}``; ``rollout_terms`` gives the operator bias at the prediction
    and the one-step error that enter the generic perturbation bound.
    """
    x = as_field(x)
    y = as_field(y)
    px, py = op(x), op(y)
    a = px - py
    b = py - y
    return ErrorDecomposition(float(np.sum(a * a)), float(np.sum(b * b)), 2.0 * float(np.sum(a * b)),
                              float(np.sum((px - y) ** 2)), float(np.linalg.norm(px - x)),
                              float(np.linalg.norm(x - y)))


@dataclass(frozen=True)
class StripAudit:
    spec: str
    strip_width: int
    n: int
    distortion: Stat   # MSE over strip cells
    strip_div: Stat
    core_div: Stat
    ratio: Stat


STRIP_HEADER = ["Operator regime", "Boundary-audit distortion MSE", "Boundary-audit distortion MSE std",
                "Boundary-strip div RMS", "Boundary-strip div RMS std", "Core div RMS", "Core div RMS std",
                "Strip-to-core ratio", "Strip-to-core ratio std", "strip width", "n"]


def strip_masks(H, W, width):
    d = boundary_distance(H, W)
    interior = d >= 1
    strip = interior & (d <= width)
    return strip, interior & ~strip


def strip_audit(op, targets, strip_width=2):
    """Divergence split between the boundary-adjacent strip and the core after cleanup."""
    targets = [as_field(y, "target") for y in targets]
    if not targets:
        raise ValueError("strip audit needs at least one target")
    H, W = targets[0].shape[1:]
    if not 1 <= strip_width < min(H, W) / 2:
        raise ValueError(f"strip width must satisfy 1 <= w < min(H, W)/2, got {strip_width}")
    strip, core = strip_masks(H, W, strip_width)
    if not core.any():
        raise ValueError("strip width leaves no core cells")
    dist, sd, cd, ratio = [], [], [], []
    for y in targets:
        out = op(y)
        div = kernels.divergence(out[0], out[1])
        s = math.sqrt(float(np.mean(div[strip] ** 2)))
        c = math.sqrt(float(np.mean(div[core] ** 2)))
        diff = (out - y)[:, strip]
        dist.append(float(np.mean(diff * diff)))
        sd.append(s)
        cd.append(c)
        ratio.append(s / max(c, EPS))
    return StripAudit(op.spec, int(strip_width), len(targets), Stat.of(dist), Stat.of(sd),
                      Stat.of(cd), Stat.of(ratio))


def strip_row(a):
    return ([a.spec] + [fmt_num(v) for s in (a.distortion, a.strip_div, a.core_div, a.ratio)
                        for v in (s.mean, s.std)] + [str(a.strip_width), str(a.n)])


def correlate(xs, ys):
    """Pearson and Spearman (Pearson on average ranks) correlation."""
    x = np.asarray(xs, dtype=np.float64).ravel()
    y = np.asarray(ys, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise CorrelationError("inputs must have equal length")
    if len(x) < 3:
        raise CorrelationError("need at least 3 points")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise CorrelationError("inputs must be finite")
    return _pearson(x, y), _pearson(rankdata(x), rankdata(y))


def _pearson(x, y):
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(float(xc @ xc))
    sy = math.sqrt(float(yc @ yc))
    if sx == 0 or sy == 0:
        raise CorrelationError("correlation undefined for zero-variance input")
    return float(np.clip((xc @ yc) / (sx * sy), -1.0, 1.0))


CORRELATION_HEADER = ["Predictor", "Pearson r_P", "Spearman rho"]
