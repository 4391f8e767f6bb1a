"""Validation-to-deployment operator selection and rollout sweeps."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import itertools
import math

import numpy as np

from .fields import mse
from .formats import fmt_num
from .operators import CleanupSpec, SpecError, parse_operator
from .rollout import RolloutConfig, rollout_metrics, run_rollout

ALPHA_GRID = (0.0, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0)
LAMBDA_GRID = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)

# simplicity order used to break exact ties in validation score; plain raw beats an
# explicit identity operator
_RANK = {"raw": 0, "identity": 1, "fft": 1, "poisson": 1, "screened": 1, "adaptive": 2, "geo": 3,
         "direct": 4}


class ProtocolError(ValueError):
    pass


def simplicity_rank(spec):
    spec = CleanupSpec.parse(spec) if isinstance(spec, str) else spec
    if spec.mode == "raw":
        return 0
    return _RANK.get(spec.build().family, 1)


@dataclass(frozen=True)
class Candidate:
    """A rule with a hyperparameter grid, e.g.
    ``Candidate("PostHoc-Screened", "posthoc::screened:lambda={lam},k=10", {"lam": [8, 16]})``."""

    rule: str
    template: str
    grid: dict = field(default_factory=dict)

    def expand(self):
        keys = sorted(self.grid)
        out = []
        for values in itertools.product(*(self.grid[k] for k in keys)):
            params = dict(zip(keys, values))
            try:
                text = self.template.format(**params)
            except KeyError as exc:
                raise ProtocolError(f"template {self.template!r} is missing parameter {exc}") from None
            out.append((params, CleanupSpec.parse(text)))
        return out


RAW = Candidate("Raw", "raw")


@dataclass(frozen=True)
class CandidateMenu:
    candidates: tuple
    anchor: str = "posthoc::direct"

    def __post_init__(self):
        cands = tuple(self.candidates)
        if not cands:
            raise ProtocolError("empty candidate menu")
        n_raw = sum(1 for c in cands for _, s in c.expand() if s.mode == "raw")
        if n_raw != 1:
            raise ProtocolError(f"menu must contain Raw exactly once, found {n_raw}")
        anchor = CleanupSpec.parse(self.anchor)
        if anchor.build().family != "direct":
            raise ProtocolError(f"anchor must be a direct cleanup, got {self.anchor!r}")
        object.__setattr__(self, "candidates", cands)
        object.__setattr__(self, "anchor", str(anchor))

    def expand(self):
        seen = set()
        out = []
        for c in self.candidates:
            for params, spec in c.expand():
                key = str(spec)
                if key in seen:
                    raise ProtocolError(f"duplicate candidate {key!r}")
                seen.add(key)
                out.append((c.rule, params, spec))
        return out


def _cases(predictor, targets):
    targets = list(targets)
    if not targets:
        raise ProtocolError("no target trajectories")
    preds = list(predictor) if isinstance(predictor, (list, tuple)) else [predictor] * len(targets)
    if len(preds) != len(targets):
        raise ProtocolError("one predictor per trajectory required")
    return list(zip(preds, targets))


def _pmap(fn, items, jobs):
    if jobs is None or jobs <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def evaluate(spec, cases, T_eval, jobs=1):
    """Mean rollout summary of ``spec`` over ``(predictor, targets)`` cases."""
    cfg = RolloutConfig(T_eval, spec)
    sums = _pmap(lambda c: rollout_metrics(run_rollout(c[0], c[1], cfg)), cases, jobs)
    out = {"spec": str(cfg.spec)}
    for key in ("mse_at_T", "mse_auc", "div_at_T"):
        vals = np.array([s[key] for s in sums], dtype=np.float64)
        out[key] = float(vals.mean())
        out[key + "_std"] = float(vals.std()) if np.all(np.isfinite(vals)) else math.nan
    out["blowups"] = int(sum(s["blowup"] for s in sums))
    return out


@dataclass(frozen=True)
class SelectionReport:
    setting: str
    metric: str
    T_eval: int
    selected_rule: str
    selected_params: dict
    selected_spec: str
    validation: tuple     # (rule, params, spec, summary) in menu order
    test_selected: dict
    test_raw: dict
    test_direct: dict
    n_val: int
    n_test: int

    def to_json(self):
        return {
            "setting": self.setting, "metric": self.metric, "T_eval": self.T_eval,
            "selected": {"rule": self.selected_rule, "params": self.selected_params,
                         "spec": self.selected_spec},
            "validation": [{"rule": r, "params": p, "spec": s, **m} for r, p, s, m in self.validation],
            "test": {"selected": self.test_selected, "raw": self.test_raw, "direct": self.test_direct},
            "n_val": self.n_val, "n_test": self.n_test,
        }

    def table_row(self):
        params = ";".join(f"{k}={v}" for k, v in sorted(self.selected_params.items()))
        cols = [self.setting, self.selected_rule, params or "-"]
        for m in (self.test_selected, self.test_raw, self.test_direct):
            cols += [fmt_num(m["mse_at_T"]), fmt_num(m["mse_at_T_std"])]
        return cols


SELECTION_HEADER = ["Setting", "Selected rule", "Hyperparameters", "Selected MSE", "Selected MSE std",
                    "Raw MSE", "Raw MSE std", "Direct MSE", "Direct MSE std"]


def select_operator(menu, predictor, val_targets, test_targets, T_eval, metric="mse_at_T",
                    setting="synthetic", jobs=1, test_predictor=None):
    """Pick the candidate with the lowest validation ``metric``; report it with anchors on test.

    ``predictor`` is one callable shared by all trajectories or a list aligned
    with ``val_targets``; ``test_predictor`` likewise for ``test_targets``.
    Test trajectories are only used after the choice is fixed.
    """
    if metric not in ("mse_at_T", "mse_auc"):
        raise ProtocolError(f"unknown selection metric {metric!r}")
    val = _cases(predictor, val_targets)
    test = _cases(predictor if test_predictor is None else test_predictor, test_targets)
    entries = menu.expand()
    scores = _pmap(lambda e: evaluate(e[2], val, T_eval), entries, jobs)
    order = sorted(range(len(entries)), key=lambda i: (
        scores[i][metric] if math.isfinite(scores[i][metric]) else math.inf,
        simplicity_rank(entries[i][2]), str(entries[i][2])))
    best = order[0]
    rule, params, spec = entries[best]
    sel_t, raw_t, dir_t = _pmap(lambda s: evaluate(s, test, T_eval),
                                [spec, CleanupSpec("raw"), CleanupSpec.parse(menu.anchor)], jobs)
    return SelectionReport(setting, metric, int(T_eval), rule, dict(params), str(spec),
                           tuple((r, dict(p), str(s), m) for (r, p, s), m in zip(entries, scores)),
                           sel_t, raw_t, dir_t, len(val), len(test))


# -- sweeps -------------------------------------------------------------------

def _frames(cases):
    return [f for _, tr in cases for f in np.asarray(tr)[1:]]


SCREENED_HEADER = ["lambda", "mse_at_T", "mse_auc", "div_at_T", "distortion"]


def sweep_screened(predictor, targets, lambdas=LAMBDA_GRID, solver="jacobi", k=10, T_eval=20,
                   mode="posthoc", jobs=1):
    """One row per screened shift plus a trailing raw reference row (``lambda`` = ``raw``)."""
    cases = _cases(predictor, targets)
    lambdas = [float(v) for v in lambdas]
    if any(not v >= 0 for v in lambdas):
        raise ProtocolError("screened shifts must be non-negative")
    frames = _frames(cases)
    rows = []
    for lam in lambdas:
        op_text = f"screened:lambda={lam!r},k={k},solver={solver}"
        op = parse_operator(op_text)
        m = evaluate(CleanupSpec(mode, op_text), cases, T_eval, jobs)
        dist = float(np.mean([mse(op(y), y) for y in frames]))
        rows.append({"lambda": lam, "mse_at_T": m["mse_at_T"], "mse_auc": m["mse_auc"],
                     "div_at_T": m["div_at_T"], "distortion": dist})
    m = evaluate(CleanupSpec("raw"), cases, T_eval, jobs)
    rows.append({"lambda": "raw", "mse_at_T": m["mse_at_T"], "mse_auc": m["mse_auc"],
                 "div_at_T": m["div_at_T"], "distortion": 0.0})
    return rows


def best_screened(rows):
    """``(best lambda among lambda > 0, raw wins overall)``."""
    lam_rows = [r for r in rows if r["lambda"] != "raw" and r["lambda"] > 0]
    raw = [r for r in rows if r["lambda"] == "raw"][0]
    best = min(lam_rows, key=lambda r: (r["mse_at_T"], r["lambda"]))
    return best["lambda"], raw["mse_at_T"] <= best["mse_at_T"]


MISMATCH_HEADER = ["alpha", "mse_at_T", "div_at_T"]


def blended_spec(op_text, alpha):
    body, at, frame = "".join(op_text.split()).partition("@")
    return f"{body}+blend:alpha={float(alpha)!r}" + (f"@{frame}" if at else "")


@dataclass(frozen=True)
class MismatchSweep:
    operator: str
    rows: tuple

    @property
    def best_alpha(self):
        return min(self.rows, key=lambda r: (r["mse_at_T"], r["alpha"]))["alpha"]

    def phi(self, alpha):
        for r in self.rows:
            if r["alpha"] == alpha:
                return r["mse_at_T"]
        raise KeyError(alpha)

    @property
    def full_cleanup_worse(self):
        return self.phi(1.0) > self.phi(0.0)


def sweep_mismatch(predictor, targets, operator, alphas=ALPHA_GRID, T_eval=50, mode="inloop", jobs=1):
    """Final-step MSE and divergence of blended rollouts ``x + alpha (op(x) - x)``."""
    cases = _cases(predictor, targets)
    alphas = [float(a) for a in alphas]
    if any(not 0.0 <= a <= 1.0 for a in alphas):
        raise ProtocolError("alpha values must lie in [0, 1]")
    try:
        parse_operator(operator)
    except SpecError as exc:
        raise ProtocolError(str(exc)) from None
    rows = []
    for a in alphas:
        m = evaluate(CleanupSpec(mode, blended_spec(operator, a)), cases, T_eval, jobs)
        rows.append({"alpha": a, "mse_at_T": m["mse_at_T"], "div_at_T": m["div_at_T"]})
    return MismatchSweep(operator, tuple(rows))
