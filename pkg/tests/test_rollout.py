import math

import numpy as np
import pytest

from repairlab.rollout import (BoundTraceInputs, RolloutConfig, RolloutConfigError, RolloutTrace,
                               bound_domination_check, bound_sequence, check_rollout_bound,
                               rollout_metrics, run_rollout, steady_state_bound)
from repairlab.synthetic import (BoundedBenchmark, NSConfig, NSStepper, PeriodicBenchmark,
                                 generate_periodic_trajectory)


def trace(values, theta_stable=1e9, blowup=False):
    v = np.asarray(values, dtype=float)
    return RolloutTrace("raw", "identity", v, np.zeros_like(v), theta_stable, 1e12, blowup)


def test_metrics_definitions(rng):
    m = rollout_metrics(trace([0.5] * 6))
    assert m["mse_auc"] == 0.5 and m["mse_at_T"] == 0.5 and m["stable_len"] == 6
    assert rollout_metrics(trace([1, 2, 3, 4], theta_stable=2.5))["stable_len"] == 2
    v = rng.uniform(0, 1, 17)
    m = rollout_metrics(trace(v, theta_stable=0.9))
    ok = v <= 0.9
    assert m["mse_auc"] == pytest.approx(v.mean()) and m["mse_at_T"] == v[-1]
    assert m["stable_len"] == (len(v) if ok.all() else int(np.argmin(ok)))
    b = rollout_metrics(trace([1.0, np.nan, np.nan], blowup=True))
    assert b["blowup"] and math.isinf(b["mse_at_T"]) and math.isinf(b["mse_auc"])


def test_perfect_predictor_exact_projector():
    cfg = NSConfig(grid=32, seed=2)
    tr = generate_periodic_trajectory(cfg, 6)
    step = NSStepper(cfg)
    for mode in ("raw", "posthoc", "inloop", "cap"):
        spec = "raw" if mode == "raw" else f"{mode}::fft"
        s = rollout_metrics(run_rollout(step, tr, RolloutConfig(6, spec)))
        assert s["mse_at_T"] < 1e-18, mode


def test_inloop_beats_raw_on_noise_benchmark():
    pred, tr = PeriodicBenchmark(grid=32, T=10).case(0)
    raw = rollout_metrics(run_rollout(pred, tr, RolloutConfig(10, "raw")))
    inl = rollout_metrics(run_rollout(pred, tr, RolloutConfig(10, "inloop::fft")))
    assert inl["mse_at_T"] < raw["mse_at_T"]


def test_direct_inloop_on_bounded_trades_divergence_for_error():
    bench = BoundedBenchmark(T=20)
    raw, inl = [], []
    for seed in range(3):
        pred, tr = bench.case(seed)
        raw.append(rollout_metrics(run_rollout(pred, tr, RolloutConfig(20, "raw"))))
        inl.append(rollout_metrics(run_rollout(pred, tr, RolloutConfig(20, "inloop::direct"))))
    mean = lambda rows, k: np.mean([r[k] for r in rows])
    assert mean(inl, "div_at_T") < mean(raw, "div_at_T")
    assert mean(inl, "mse_at_T") > mean(raw, "mse_at_T")


def test_identity_modes_agree():
    pred, tr = BoundedBenchmark(T=8).case(1)
    base = run_rollout(pred, tr, RolloutConfig(8, "raw")).mse
    for mode in ("posthoc", "inloop", "cap"):
        assert np.array_equal(run_rollout(pred, tr, RolloutConfig(8, f"{mode}::identity")).mse, base)


def test_blowup_detection():
    tr = np.zeros((6, 2, 8, 8))
    explode = lambda x, t: x + 10.0 ** (3 * (t + 1))
    out = run_rollout(explode, tr, RolloutConfig(5, "raw", theta_blow=1e6))
    assert out.blowup and np.isnan(out.mse[-1])
    assert math.isinf(rollout_metrics(out)["mse_at_T"])


def test_config_validation():
    with pytest.raises(RolloutConfigError):
        RolloutConfig(0)
    with pytest.raises(RolloutConfigError):
        RolloutConfig(5, div_metric="l1")
    with pytest.raises(RolloutConfigError):
        run_rollout(lambda x, t: x, np.zeros((3, 2, 4, 4)), RolloutConfig(5))


def test_bound_zero_case():
    inp = BoundTraceInputs(1.0, 0.5, np.zeros(5))
    rep = check_rollout_bound(np.zeros(6), inp)
    assert rep.ok and np.all(rep.bound == 0)


def test_domination_examples():
    a = BoundTraceInputs(1.0, 0.8, np.full(6, 0.1))
    assert bound_domination_check(a, a)
    b = BoundTraceInputs(1.0, 0.8, np.full(6, 0.1), beta=np.full(6, 0.1))
    assert bound_domination_check(a, b)
    assert np.all(bound_sequence(a)[1:] < bound_sequence(b)[1:])
    with pytest.raises(ValueError):
        bound_domination_check(b, a)


def test_steady_state_requires_contraction():
    assert steady_state_bound(1.0, 0.5, 0.1, 0.05) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        steady_state_bound(1.0, 1.0, 0.1)
