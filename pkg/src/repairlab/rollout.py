"""Autoregressive rollout harness and executable rollout-bound checks.

Modes:

* ``raw``      the predictor's own output is fed back.
* ``posthoc``  the raw rollout evolves; metrics are taken on ``op(state)``.
* ``inloop``   ``op`` is applied to every prediction before it is fed back.
* ``cap``      as ``inloop``, but targets are also passed through ``op``.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .fields import divergence_rms, mse
from .formats import fmt_num
from .operators import CleanupSpec, apply_in_frame
from .spectral import spectral_divergence_rms

DIV_METRICS = ("auto", "stencil", "spectral")


class RolloutConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RolloutConfig:
    T_eval: int
    spec: CleanupSpec = CleanupSpec("raw")
    theta_blow: float = 1e6
    theta_stable: float = None
    div_metric: str = "auto"
    store_fields: bool = False
    frame: object = None

    def __post_init__(self):
        if isinstance(self.spec, str):
            object.__setattr__(self, "spec", CleanupSpec.parse(self.spec))
        if int(self.T_eval) < 1:
            raise RolloutConfigError("T_eval must be >= 1")
        if not self.theta_blow > 0:
            raise RolloutConfigError("theta_blow must be positive")
        if self.theta_stable is not None and not self.theta_stable > 0:
            raise RolloutConfigError("theta_stable must be positive")
        if self.div_metric not in DIV_METRICS:
            raise RolloutConfigError(f"unknown divergence metric {self.div_metric!r}")

    @property
    def mode(self):
        return self.spec.mode


@dataclass
class RolloutTrace:
    mode: str
    operator_spec: str
    mse: np.ndarray          # steps 1..T, NaN after a blow-up
    div_rms: np.ndarray
    theta_stable: float
    theta_blow: float
    blowup: bool = False
    fields: list = field(default=None, repr=False)

    @property
    def T(self):
        return len(self.mse)

    def summary(self):
        return rollout_metrics(self)

    def csv_rows(self):
        return [[str(t + 1), fmt_num(self.mse[t]), fmt_num(self.div_rms[t])] for t in range(self.T)]


CSV_HEADER = ["step", "mse", "div_rms"]


def _divergence_fn(metric, op):
    if metric == "stencil":
        return divergence_rms
    if metric == "spectral":
        return spectral_divergence_rms
    return spectral_divergence_rms if op.periodic else divergence_rms


def raw_step1_mse(predictor, targets):
    return mse(predictor(np.array(targets[0], dtype=np.float64), 0), targets[1])


def run_rollout(predictor, targets, cfg):
    """Roll ``predictor(x, t)`` forward from ``targets[0]`` for ``cfg.T_eval`` steps."""
    targets = np.asarray(targets, dtype=np.float64)
    T = int(cfg.T_eval)
    if targets.ndim != 4 or len(targets) < T + 1:
        raise RolloutConfigError(f"need at least {T + 1} target frames, got {len(targets)}")
    mode = cfg.mode
    op = cfg.spec.build()
    div = _divergence_fn(cfg.div_metric, op)

    def repair(f):
        return apply_in_frame(op, f, cfg.frame)

    theta_stable = cfg.theta_stable
    if theta_stable is None:
        m1 = raw_step1_mse(predictor, targets)
        theta_stable = 10.0 * m1 if m1 > 0 else cfg.theta_blow

    errs = np.full(T, np.nan)
    divs = np.full(T, np.nan)
    stored = [] if cfg.store_fields else None
    blowup = False
    x = targets[0].copy()
    with np.errstate(all="ignore"):
        for t in range(T):
            pred = predictor(x, t)
            x = repair(pred) if mode in ("inloop", "cap") else pred
            if not np.all(np.isfinite(x)):
                blowup = True
                break
            shown = repair(x) if mode == "posthoc" else x
            y = repair(targets[t + 1]) if mode == "cap" else targets[t + 1]
            e = mse(shown, y)
            if not math.isfinite(e) or e > cfg.theta_blow:
                blowup = True
                break
            errs[t] = e
            divs[t] = div(shown)
            if stored is not None:
                stored.append(shown.copy())
    return RolloutTrace(mode, str(cfg.spec), errs, divs, float(theta_stable), float(cfg.theta_blow),
                        blowup, stored)


def rollout_metrics(trace):
    """Summary record; every entry is recomputable from the per-step arrays.

    After a blow-up ``mse_at_T`` and ``mse_auc`` are reported as ``inf`` so a
    diverged run can never win a comparison.
    """
    e = np.asarray(trace.mse, dtype=np.float64)
    if e.size == 0:
        raise RolloutConfigError("empty trace")
    ok = np.isfinite(e) & (e <= trace.theta_stable)
    stable = int(np.argmin(ok)) if not ok.all() else len(e)
    if trace.blowup:
        auc = at_T = math.inf
    else:
        auc = float(np.mean(e))
        at_T = float(e[-1])
    finite_div = trace.div_rms[np.isfinite(trace.div_rms)]
    return {
        "mode": trace.mode,
        "operator_spec": trace.operator_spec,
        "mse_auc": auc,
        "mse_at_T": at_T,
        "div_at_T": float(trace.div_rms[-1]) if not trace.blowup else
        (float(finite_div[-1]) if finite_div.size else math.nan),
        "stable_len": stable,
        "blowup": bool(trace.blowup),
    }


# -- bound checks -------------------------------------------------------------

@dataclass(frozen=True)
class BoundTraceInputs:
    """Inputs to ``b[t+1] = L_T L_F b[t] + L_T delta[t] + beta[t+1]``.

    ``delta`` holds ``delta_0 .. delta_{T-1}`` and ``beta`` holds
    ``beta_1 .. beta_T`` (the distortion at the step being entered).
    """

    L_T: float
    L_F: float
    delta: np.ndarray
    beta: np.ndarray = None
    b0: float = 0.0

    def __post_init__(self):
        delta = np.asarray(self.delta, dtype=np.float64).ravel()
        beta = np.zeros_like(delta) if self.beta is None else np.asarray(self.beta, dtype=np.float64).ravel()
        if beta.shape != delta.shape:
            raise ValueError("delta and beta must have the same length")
        vals = [self.L_T, self.L_F, self.b0]
        if min(vals) < 0 or np.any(delta < 0) or np.any(beta < 0):
            raise ValueError("bound inputs must be non-negative")
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "beta", beta)

    @property
    def T(self):
        return len(self.delta)


def bound_sequence(inp):
    b = np.empty(inp.T + 1)
    b[0] = inp.b0
    g = inp.L_T * inp.L_F
    for t in range(inp.T):
        b[t + 1] = g * b[t] + inp.L_T * inp.delta[t] + inp.beta[t]
    return b


@dataclass(frozen=True)
class BoundReport:
    bound: np.ndarray
    errors: np.ndarray
    margin: np.ndarray
    violations: tuple

    @property
    def ok(self):
        return not self.violations


def check_rollout_bound(errors, inp):
    """Compare error norms ``|e_t|`` (t = 0..T) with the bound recursion.

    A violation means the supplied constants are not valid Lipschitz
    factors for the rollout; it is reported, not raised.
    """
    e = np.asarray(errors, dtype=np.float64).ravel()
    if len(e) != inp.T + 1:
        raise ValueError(f"need {inp.T + 1} error norms, got {len(e)}")
    b = bound_sequence(inp)
    margin = b - e
    return BoundReport(b, e, margin, tuple(int(t) for t in np.flatnonzero(margin < 0)))


def bound_domination_check(inp1, inp2):
    """True when the first bound sequence is below the second at every step.

    Both inputs must share ``L_F`` and ``delta`` and satisfy
    ``b0_1 <= b0_2``, ``L_1 <= L_2``, ``beta_1 <= beta_2``.
    """
    if inp1.L_F != inp2.L_F or not np.array_equal(inp1.delta, inp2.delta):
        raise ValueError("domination compares operators under the same raw dynamics")
    if not (inp1.b0 <= inp2.b0 and inp1.L_T <= inp2.L_T and np.all(inp1.beta <= inp2.beta)):
        raise ValueError("inputs do not satisfy the comparison conditions")
    return bool(np.all(bound_sequence(inp1) <= bound_sequence(inp2)))


def steady_state_bound(L_T, L_F, delta_bar, beta_bar=0.0):
    """``(L_T delta_bar + beta_bar) / (1 - L_T L_F)`` for a contractive loop."""
    g = L_T * L_F
    if not g < 1:
        raise ValueError(f"steady-state bound needs L_T * L_F < 1, got {g}")
    return (L_T * delta_bar + beta_bar) / (1.0 - g)
