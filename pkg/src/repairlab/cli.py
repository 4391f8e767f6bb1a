"""Command-line entry point ``repairlab``.

Exit codes: 0 success, 2 invalid input (bad flags, spec strings, files),
3 numeric failure (CFL violation, non-finite values).
"""

import argparse
import os
import platform
import sys
import time

import numpy as np

from . import __version__, kernels
from .diagnostics import (AUDIT_HEADER, CORRELATION_HEADER, STRIP_HEADER, CorrelationError,
                          audit_operator, correlate, strip_audit, strip_row)
from .fields import FieldError, FrameError, NormFrame, mse
from .formats import (FormatError, csv_text, fmt_num, read_trajectory, sha256_file, write_json,
                      write_trajectory)
from .hierarchy import (Hierarchy, HierarchyError, coherence_rms, hier_distortion,
                        historical_proportions, reconcile_bottom_up, reconcile_ols,
                        reconcile_top_down)
from .operators import GRAMMAR_HELP, CleanupSpec, SpecError, apply_in_frame, parse_operator
from .protocol import (ALPHA_GRID, LAMBDA_GRID, MISMATCH_HEADER, RAW, SCREENED_HEADER,
                       SELECTION_HEADER, Candidate, CandidateMenu, ProtocolError, evaluate,
                       select_operator, sweep_mismatch, sweep_screened)
from .rollout import CSV_HEADER, RolloutConfig, RolloutConfigError, rollout_metrics, run_rollout
from .synthetic import (BOUNDED_KINDS, BoundedBenchmark, GenerationError, NSConfig,
                        PeriodicBenchmark, generate_bounded_targets, generate_bounded_trajectory,
                        generate_hierarchy_series, generate_periodic_trajectory)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

SOLVER_SWEEP = ("jacobi:k=10", "jacobi:k=40", "mg:cycles=2", "cg:k=20", "direct") + tuple(
    f"screened:lambda={lam!r},k=10,solver=jacobi" for lam in LAMBDA_GRID)


class InputError(Exception):
    pass


class NumericError(Exception):
    pass


# -- argument helpers ---------------------------------------------------------

def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        vals = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _op(text):
    try:
        parse_operator(text)
    except SpecError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return "".join(text.split())


def _add_bench(p, default_steps):
    g = p.add_argument_group("benchmark")
    g.add_argument("--bench", choices=("periodic", "bounded"), required=True)
    g.add_argument("--seeds", type=_ints, required=True, help="trajectory seeds, e.g. 0,1,2")
    g.add_argument("--steps", type=int, default=default_steps, help="rollout horizon T_eval")
    g.add_argument("--grid", type=int, default=64, help="periodic grid size")
    g.add_argument("--nu", type=float, default=1e-3)
    g.add_argument("--dt", type=float, default=0.01)
    g.add_argument("--kind", choices=BOUNDED_KINDS, default="channel_like")
    g.add_argument("--H", type=int, default=32)
    g.add_argument("--W", type=int, default=32)
    g.add_argument("--relax", type=float, default=0.5, help="tracking gain of the bounded stepper")
    g.add_argument("--sigma-c", type=float, default=None, help="compressible noise amplitude")
    g.add_argument("--sigma-s", type=float, default=None, help="solenoidal noise amplitude")


def _bench(args, seeds=None, steps=None):
    steps = args.steps if steps is None else steps
    if steps < 1:
        raise InputError("--steps must be >= 1")
    if args.bench == "periodic":
        b = PeriodicBenchmark(grid=args.grid, T=steps, nu=args.nu, dt=args.dt,
                              sigma_c=PeriodicBenchmark.sigma_c if args.sigma_c is None else args.sigma_c,
                              sigma_s=PeriodicBenchmark.sigma_s if args.sigma_s is None else args.sigma_s)
    else:
        b = BoundedBenchmark(kind=args.kind, H=args.H, W=args.W, T=steps, relax=args.relax,
                             sigma_c=BoundedBenchmark.sigma_c if args.sigma_c is None else args.sigma_c,
                             sigma_s=BoundedBenchmark.sigma_s if args.sigma_s is None else args.sigma_s)
    cases = [b.case(s) for s in (args.seeds if seeds is None else seeds)]
    return b, cases


# -- output -------------------------------------------------------------------

class Run:
    def __init__(self, args, argv):
        self.args = args
        self.argv = list(argv)
        self.out = args.out
        os.makedirs(self.out, exist_ok=True)
        self.outputs = []
        self.inputs = {}
        self.extra = {}
        self.t0 = time.perf_counter()

    def path(self, name):
        return os.path.join(self.out, name)

    def input(self, path):
        if not os.path.isfile(path):
            raise InputError(f"input file not found: {path}")
        self.inputs[path] = sha256_file(path)
        return path

    def text(self, name, text):
        with open(self.path(name), "w", newline="") as fh:
            fh.write(text)
        self.outputs.append(name)

    def csv(self, name, header, rows):
        self.text(name, csv_text(header, rows))

    def json(self, name, obj):
        write_json(self.path(name), obj)
        self.outputs.append(name)

    def trajectory(self, name, frames):
        write_trajectory(self.path(name), frames)
        self.outputs.append(name)

    def finish(self):
        config = {k: v for k, v in sorted(vars(self.args).items()) if k != "func"}
        seeds = [v for k, v in config.items() if "seed" in k]
        write_json(self.path("manifest.json"), {
            "command": self.args.command, "argv": self.argv, "config": config, "seeds": seeds,
            "version": __version__, "numpy": np.__version__, "python": platform.python_version(),
            "kernel_backend": kernels.backend(), "inputs": self.inputs,
            "outputs": self.outputs + ["manifest.json"],
            "checksums": {n: sha256_file(self.path(n)) for n in self.outputs},
            "wall_clock_s": time.perf_counter() - self.t0, **self.extra,
        })


# -- commands -----------------------------------------------------------------

def cmd_generate(run):
    a = run.args
    if a.kind == "periodic":
        if a.seed is None:
            raise InputError("--seed is required")
        cfg = NSConfig(grid=a.grid, nu=a.nu, dt=a.dt, forcing=a.forcing, seed=a.seed)
        frames = generate_periodic_trajectory(cfg, a.steps)
        run.trajectory("periodic.vt01", frames)
        run.extra.update(kind="periodic", T=a.steps, seed=a.seed, generator=cfg.to_dict())
    elif a.kind == "bounded":
        if a.trajectory:
            frames = generate_bounded_trajectory(a.shape, a.H, a.W, a.steps, a.seed)
        else:
            frames = generate_bounded_targets(a.shape, a.H, a.W, a.count, a.seed)
        run.trajectory("bounded.vt01", frames)
        run.extra.update(kind=a.shape, T=len(frames), seed=a.seed)
    else:
        h, series = generate_hierarchy_series(a.levels, a.fanout, a.T, a.seed)
        run.json("hierarchy.json", h.to_json())
        run.csv("series.csv", list(h.labels), [[fmt_num(v) for v in row] for row in series])
        run.extra.update(kind="hierarchy", T=a.T, seed=a.seed)


def _targets(run, path):
    try:
        frames = read_trajectory(run.input(path))
    except FormatError as exc:
        raise InputError(str(exc)) from None
    if frames.shape[1] != 2:
        raise InputError(f"targets must have 2 velocity components, got {frames.shape[1]}")
    return list(frames)


def _pmap(fn, items, jobs):
    from .protocol import _pmap as pm
    return pm(fn, items, jobs)


def cmd_audit(run):
    a = run.args
    targets = _targets(run, a.targets)
    audits = _pmap(lambda s: audit_operator(parse_operator(s), targets), a.op, a.jobs)
    run.csv("audit.csv", AUDIT_HEADER, [au.row() for au in audits])


def cmd_strip(run):
    a = run.args
    targets = _targets(run, a.targets)
    audits = _pmap(lambda s: strip_audit(parse_operator(s), targets, a.width), a.op, a.jobs)
    run.csv("strip.csv", STRIP_HEADER, [strip_row(au) for au in audits])


def cmd_apply(run):
    a = run.args
    from .formats import read_field, write_field
    try:
        f = read_field(run.input(a.input))
    except FormatError as exc:
        raise InputError(str(exc)) from None
    frame = None
    if a.frame_mean or a.frame_std:
        if not (a.frame_mean and a.frame_std and len(a.frame_mean) == 2 and len(a.frame_std) == 2):
            raise InputError("--frame-mean and --frame-std each need two values u,v")
        frame = NormFrame(a.frame_mean[0], a.frame_std[0], a.frame_mean[1], a.frame_std[1])
    out = apply_in_frame(parse_operator(a.op), f, frame)
    write_field(run.path("field.vf01"), out)
    run.outputs.append("field.vf01")


def cmd_rollout(run):
    a = run.args
    spec = CleanupSpec("raw") if a.mode == "raw" else CleanupSpec(a.mode, a.op)
    bench, cases = _bench(a)
    cfg = RolloutConfig(a.steps, spec, div_metric=a.div_metric)
    traces = _pmap(lambda c: run_rollout(c[0], c[1], cfg), cases, a.jobs)
    summaries = []
    for seed, tr in zip(a.seeds, traces):
        run.csv(f"rollout_seed{seed}.csv", CSV_HEADER, tr.csv_rows())
        summaries.append({"seed": seed, **rollout_metrics(tr)})
    run.csv("summary.csv", ["seed", "mode", "operator_spec", "mse_auc", "mse_at_T", "div_at_T",
                            "stable_len", "blowup"], summaries)
    run.json("summary.json", {"benchmark": bench.to_dict(), "rollouts": summaries})


def cmd_sweep(run):
    a = run.args
    bench, cases = _bench(a)
    preds, targets = [c[0] for c in cases], [c[1] for c in cases]
    if a.sweep == "screened":
        rows = sweep_screened(preds, targets, a.lambdas, a.solver, a.k, a.steps, a.mode, a.jobs)
        run.csv("screened.csv", SCREENED_HEADER, rows)
    elif a.sweep == "mismatch":
        sw = sweep_mismatch(preds, targets, a.op, a.alphas, a.steps, a.mode, a.jobs)
        run.csv("mismatch.csv", MISMATCH_HEADER, list(sw.rows))
        run.csv("mismatch_best.csv", ["operator", "best_alpha", "full_cleanup_worse"],
                [[sw.operator, fmt_num(sw.best_alpha), fmt_num(sw.full_cleanup_worse)]])
    else:
        audit_targets = list(generate_bounded_targets(a.kind, a.H, a.W, a.count, a.target_seed)) \
            if a.bench == "bounded" else [f for _, tr in cases for f in tr[1:]]
        ops = list(a.op) if a.op else list(SOLVER_SWEEP)
        audits = _pmap(lambda s: audit_operator(parse_operator(s), audit_targets), ops, a.jobs)
        rolls = _pmap(lambda s: evaluate(CleanupSpec("inloop", s), cases, a.steps), ops, a.jobs)
        rows = [[s, fmt_num(au.gt_distortion_mse.mean),
                 fmt_num(au.relative_system_residual.mean if au.relative_system_residual else 0.0),
                 fmt_num(au.poisson_residual.mean if au.poisson_residual else 0.0),
                 fmt_num(au.distortion_relative_to_energy), fmt_num(r["mse_at_T"])]
                for s, au, r in zip(ops, audits, rolls)]
        run.csv("solver_points.csv", ["operator", "distortion", "system_residual", "poisson_residual",
                                      "distortion_rel_energy", "inloop_mse_at_T"], rows)
        mse_t = [r["mse_at_T"] for r in rolls]
        corr = []
        for name, xs in (("GT distortion MSE", [au.gt_distortion_mse.mean for au in audits]),
                         ("GT distortion relative to energy",
                          [au.distortion_relative_to_energy for au in audits]),
                         ("Poisson residual", [au.poisson_residual.mean if au.poisson_residual else 0.0
                                               for au in audits])):
            try:
                rp, rs = correlate(xs, mse_t)
                corr.append([name, fmt_num(rp), fmt_num(rs)])
            except CorrelationError as exc:
                corr.append([name, f"undefined ({exc})", ""])
        run.csv("correlation.csv", CORRELATION_HEADER, corr)


def default_menu(bench):
    if bench == "periodic":
        return CandidateMenu((RAW, Candidate("PostHoc-FFT", "posthoc::fft"),
                              Candidate("Proj-FFT", "inloop::fft"),
                              Candidate("PostHoc-Direct", "posthoc::direct")))
    return CandidateMenu((
        RAW,
        Candidate("PostHoc-Screened", "posthoc::screened:lambda={lam},k=10", {"lam": [8.0, 16.0]}),
        Candidate("AdaBlend-Screened", "posthoc::screened:lambda=8,k=10+gate:tau={tau},q={q}",
                  {"tau": [0.15, 0.3, 0.6, 1.2], "q": [0.5, 1.0, 2.0]}),
        Candidate("PostHoc-GeoScreened", "posthoc::geo:lb=32,lc={lc},w=2,k=10", {"lc": [4.0, 8.0]}),
        Candidate("PostHoc-Direct", "posthoc::direct"),
    ))


def cmd_select(run):
    a = run.args
    if set(a.seeds) & set(a.test_seeds):
        raise InputError("validation and test seeds must be disjoint")
    _, val = _bench(a)
    bench, test = _bench(a, seeds=a.test_seeds)
    if a.menu:
        menu = CandidateMenu(tuple([RAW] + [Candidate(s, s) for s in a.menu if s != "raw"]))
    else:
        menu = default_menu(a.bench)
    rep = select_operator(menu, [c[0] for c in val], [c[1] for c in val], [c[1] for c in test], a.steps,
                          metric=a.metric, setting=f"{a.bench}:{bench.kind if a.bench == 'bounded' else 'ns'}",
                          jobs=a.jobs, test_predictor=[c[0] for c in test])
    run.json("selection.json", rep.to_json())
    run.csv("selection.csv", SELECTION_HEADER, [rep.table_row()])
    run.csv("validation.csv", ["rule", "spec", "mse_at_T", "mse_auc", "div_at_T"],
            [[r, s, fmt_num(m["mse_at_T"]), fmt_num(m["mse_auc"]), fmt_num(m["div_at_T"])]
             for r, _, s, m in rep.validation])


def cmd_hier(run):
    a = run.args
    if a.hierarchy:
        import json
        try:
            with open(run.input(a.hierarchy)) as fh:
                h = Hierarchy.from_json(json.load(fh))
            series = np.loadtxt(run.input(a.series), delimiter=",", skiprows=1, ndmin=2)
        except (ValueError, KeyError) as exc:
            raise InputError(f"bad hierarchy input: {exc}") from None
        if series.shape[1] != h.m:
            raise InputError(f"series has {series.shape[1]} columns, hierarchy has {h.m} nodes")
    else:
        if a.seed is None:
            raise InputError("--seed is required when generating a hierarchy")
        h, series = generate_hierarchy_series(a.levels, a.fanout, a.T, a.seed)
    n_train = int(len(series) * a.train_frac)
    if not 1 <= n_train < len(series):
        raise InputError("train fraction leaves an empty split")
    p = historical_proportions(h, series[:n_train])
    truth = series[n_train:]
    rng = np.random.default_rng([a.noise_seed, 0x4E])
    forecasts = truth * (1.0 + a.noise * rng.standard_normal(truth.shape))
    ops = [("Raw", lambda x: np.array(x, dtype=np.float64)),
           ("OLS", lambda x: reconcile_ols(h, x)),
           ("BottomUp", lambda x: reconcile_bottom_up(h, x)),
           ("TopDown", lambda x: reconcile_top_down(h, p, x))]
    ops += [(f"TopDown-blend{al!r}", (lambda al: lambda x: reconcile_top_down(h, p, x, al))(al))
            for al in a.alphas]
    rows = []
    for name, op in ops:
        rep = op(forecasts)
        rows.append([name, fmt_num(float(np.mean((rep - truth) ** 2))),
                     fmt_num(float(np.mean([coherence_rms(h, x) for x in rep]))),
                     fmt_num(hier_distortion(h, op, truth))])
    run.csv("hier.csv", ["Operator", "MSE", "Constraint RMS", "Target distortion"], rows)
    run.json("proportions.json", {"labels": [h.labels[i] for i in h.bottom], "p": p})


# -- parser -------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(
        prog="repairlab", formatter_class=argparse.RawDescriptionHelpFormatter,
        description="Constraint-repair operators, rollouts and diagnostics.",
        epilog="operator spec grammar:\n\n" + GRAMMAR_HELP)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--jobs", type=int, default=1, help="parallel independent cells")

    g = sub.add_parser("generate", help="synthetic targets and series")
    gsub = g.add_subparsers(dest="kind", required=True)
    gp = gsub.add_parser("periodic")
    common(gp)
    gp.add_argument("--grid", type=int, default=64)
    gp.add_argument("--steps", type=int, required=True)
    gp.add_argument("--seed", type=int, required=True)
    gp.add_argument("--nu", type=float, default=1e-3)
    gp.add_argument("--dt", type=float, default=0.01)
    gp.add_argument("--forcing", type=float, default=0.0)
    gb = gsub.add_parser("bounded")
    common(gb)
    gb.add_argument("--shape", choices=BOUNDED_KINDS, default="channel_like")
    gb.add_argument("--H", type=int, default=32)
    gb.add_argument("--W", type=int, default=32)
    gb.add_argument("--count", type=int, default=20)
    gb.add_argument("--trajectory", action="store_true", help="one time-varying trajectory instead")
    gb.add_argument("--steps", type=int, default=50)
    gb.add_argument("--seed", type=int, required=True)
    gh = gsub.add_parser("hierarchy")
    common(gh)
    gh.add_argument("--levels", type=int, default=3)
    gh.add_argument("--fanout", type=int, default=3)
    gh.add_argument("--T", type=int, default=200)
    gh.add_argument("--seed", type=int, required=True)
    for sp in (gp, gb, gh):
        sp.set_defaults(func=cmd_generate)

    sp = sub.add_parser("apply", help="apply one operator to a VF01 field")
    common(sp)
    sp.add_argument("--op", type=_op, required=True)
    sp.add_argument("--input", required=True)
    sp.add_argument("--frame-mean", type=_floats, default=None, help="u,v means of the model frame")
    sp.add_argument("--frame-std", type=_floats, default=None, help="u,v stds of the model frame")
    sp.set_defaults(func=cmd_apply)

    sp = sub.add_parser("audit", help="target distortion / divergence / residual table")
    common(sp)
    sp.add_argument("--op", type=_op, action="append", required=True)
    sp.add_argument("--targets", required=True, help="VT01 file of valid targets")
    sp.set_defaults(func=cmd_audit)

    sp = sub.add_parser("strip", help="boundary-strip divergence audit")
    common(sp)
    sp.add_argument("--op", type=_op, action="append", required=True)
    sp.add_argument("--targets", required=True)
    sp.add_argument("--width", type=int, default=2)
    sp.set_defaults(func=cmd_strip)

    sp = sub.add_parser("rollout", help="autoregressive rollouts on a synthetic benchmark")
    common(sp)
    _add_bench(sp, 50)
    sp.add_argument("--mode", choices=("raw", "posthoc", "inloop", "cap"), required=True)
    sp.add_argument("--op", type=_op, default="identity")
    sp.add_argument("--div-metric", choices=("auto", "stencil", "spectral"), default="auto")
    sp.set_defaults(func=cmd_rollout)

    sw = sub.add_parser("sweep", help="screened, controlled-mismatch and solver sweeps")
    wsub = sw.add_subparsers(dest="sweep", required=True)
    ws = wsub.add_parser("screened")
    common(ws)
    _add_bench(ws, 20)
    ws.add_argument("--lambdas", type=_floats, default=LAMBDA_GRID)
    ws.add_argument("--solver", choices=("jacobi", "sor", "cg", "mg", "direct"), default="jacobi")
    ws.add_argument("--k", type=int, default=10)
    ws.add_argument("--mode", choices=("posthoc", "inloop", "cap"), default="posthoc")
    wm = wsub.add_parser("mismatch")
    common(wm)
    _add_bench(wm, 50)
    wm.add_argument("--op", type=_op, required=True)
    wm.add_argument("--alphas", type=_floats, default=ALPHA_GRID)
    wm.add_argument("--mode", choices=("posthoc", "inloop", "cap"), default="inloop")
    wv = wsub.add_parser("solvers", help="distortion and residual versus in-loop rollout error")
    common(wv)
    _add_bench(wv, 20)
    wv.add_argument("--op", type=_op, action="append", default=None)
    wv.add_argument("--count", type=int, default=20, help="held-out bounded audit targets")
    wv.add_argument("--target-seed", type=int, default=1)
    for sp in (ws, wm, wv):
        sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("select", help="validation-to-deployment operator selection")
    common(sp)
    _add_bench(sp, 50)
    sp.add_argument("--test-seeds", type=_ints, required=True)
    sp.add_argument("--menu", type=lambda t: [s for s in t.split(";") if s], default=None,
                    help="';'-separated cleanup specs (mode::operator); Raw is always included")
    sp.add_argument("--metric", choices=("mse_at_T", "mse_auc"), default="mse_at_T")
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("hier", help="hierarchical reconciliation experiment")
    common(sp)
    sp.add_argument("--hierarchy", help="hierarchy JSON")
    sp.add_argument("--series", help="series CSV, one column per node")
    sp.add_argument("--levels", type=int, default=3)
    sp.add_argument("--fanout", type=int, default=3)
    sp.add_argument("--T", type=int, default=200)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--train-frac", type=float, default=0.7)
    sp.add_argument("--noise", type=float, default=0.05)
    sp.add_argument("--noise-seed", type=int, default=0)
    sp.add_argument("--alphas", type=_floats, default=(0.1, 0.5))
    sp.set_defaults(func=cmd_hier)
    return p


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        run = Run(args, argv)
        with np.errstate(over="ignore", invalid="ignore"):
            args.func(run)
        run.finish()
    except (GenerationError, NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, SpecError, FormatError, FieldError, FrameError, HierarchyError, ProtocolError,
            RolloutConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
