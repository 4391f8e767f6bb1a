import numpy as np
import pytest

from repairlab.protocol import (RAW, Candidate, CandidateMenu, ProtocolError, best_screened,
                                blended_spec, evaluate, select_operator, simplicity_rank,
                                sweep_mismatch, sweep_screened)
from repairlab.synthetic import BoundedBenchmark, PeriodicBenchmark


def cases(bench, seeds):
    out = [bench.case(s) for s in seeds]
    return [p for p, _ in out], [t for _, t in out]


def test_menu_validation():
    with pytest.raises(ProtocolError):
        CandidateMenu((Candidate("Direct", "posthoc::direct"),))
    with pytest.raises(ProtocolError):
        CandidateMenu((RAW, RAW))
    with pytest.raises(ProtocolError):
        CandidateMenu((RAW,), anchor="posthoc::fft")
    with pytest.raises(ProtocolError):
        Candidate("S", "posthoc::screened:lambda={lam}", {"mu": [1]}).expand()
    menu = CandidateMenu((RAW, Candidate("S", "posthoc::screened:lambda={lam},k=10", {"lam": [8, 16]})))
    assert [str(s) for _, _, s in menu.expand()][1:] == ["posthoc::screened:lambda=8,k=10",
                                                         "posthoc::screened:lambda=16,k=10"]


def test_simplicity_rank():
    assert simplicity_rank("raw") < simplicity_rank("posthoc::fft") < simplicity_rank(
        "inloop::direct+gate:tau=0.6") < simplicity_rank("posthoc::geo") < simplicity_rank("posthoc::direct")


def test_raw_only_menu():
    preds, tr = cases(BoundedBenchmark(T=5), [0, 1, 2])
    rep = select_operator(CandidateMenu((RAW,)), preds[:2], tr[:2], tr[2:], 5, test_predictor=preds[2:])
    assert rep.selected_spec == "raw" and rep.test_selected == rep.test_raw


def test_exact_regime_selects_fft_inloop():
    preds, tr = cases(PeriodicBenchmark(grid=32, T=10), [0, 1, 2])
    menu = CandidateMenu((RAW, Candidate("PostHoc-FFT", "posthoc::fft"), Candidate("Proj", "inloop::fft")))
    rep = select_operator(menu, preds[:2], tr[:2], tr[2:], 10, test_predictor=preds[2:])
    assert rep.selected_spec == "inloop::fft"
    assert rep.to_json()["selected"]["rule"] == "Proj"


def test_ties_prefer_simpler():
    preds, tr = cases(BoundedBenchmark(T=4), [0, 1])
    menu = CandidateMenu((Candidate("Id", "inloop::identity"), RAW))
    rep = select_operator(menu, preds[:1], tr[:1], tr[1:], 4, test_predictor=preds[1:])
    assert rep.selected_spec == "raw"


def test_evaluate_jobs_invariant():
    preds, tr = cases(BoundedBenchmark(T=6), [0, 1, 2])
    c = list(zip(preds, tr))
    assert evaluate("inloop::jacobi:k=10", c, 6, jobs=1) == evaluate("inloop::jacobi:k=10", c, 6, jobs=3)


def test_screened_sweep_limits():
    preds, tr = cases(BoundedBenchmark(T=6), [0, 1])
    rows = sweep_screened(preds, tr, lambdas=[0.0, 1e9], T_eval=6)
    raw, big = rows[-1], rows[1]
    assert raw["lambda"] == "raw"
    assert abs(big["mse_at_T"] - raw["mse_at_T"]) <= 1e-6 * raw["mse_at_T"]
    lam, raw_wins = best_screened(rows)
    assert lam == 1e9
    with pytest.raises(ProtocolError):
        sweep_screened(preds, tr, lambdas=[-1.0], T_eval=6)


def test_mismatch_sweep_identity_rows_equal():
    preds, tr = cases(BoundedBenchmark(T=5), [0])
    sw = sweep_mismatch(preds, tr, "identity", alphas=(0.0, 0.5, 1.0), T_eval=5)
    assert len({r["mse_at_T"] for r in sw.rows}) == 1 and sw.best_alpha == 0.0
    assert not sw.full_cleanup_worse
    with pytest.raises(ProtocolError):
        sweep_mismatch(preds, tr, "identity", alphas=(1.5,), T_eval=5)


def test_blended_spec():
    assert blended_spec("direct", 0.1) == "direct+blend:alpha=0.1"
    assert blended_spec("direct @ normalized", 1) == "direct+blend:alpha=1.0@normalized"


def test_mismatched_inloop_screened_sweep_prefers_weak_screening():
    preds, tr = cases(BoundedBenchmark(T=20), [100, 101, 102, 103])
    rows = sweep_screened(preds, tr, T_eval=20, mode="inloop")
    lam, raw_wins = best_screened(rows)
    assert lam >= 16 or raw_wins
