"""Command-line harness: run / verify / sweep / report.

Exit codes: 0 success, 2 configuration error, 3 divergence abort,
4 failed verification certificate.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import statistics
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import config as config_mod
from . import plots
from .async_sim import run_async
from .config import ConfigError, ExperimentConfig
from .data import DataError
from .engine import DivergenceError, MetricsTrace, build_problem, run_serial
from .graph import GraphError, build_complete, build_k_regular
from .losses import LossError
from .verify import VerificationError, solve_reference, verification_report, write_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_CERT_FAILED = 4

CONFIG_ERRORS = (ConfigError, GraphError, DataError, LossError, ValueError)


def _load_config(args) -> ExperimentConfig:
    cfg = config_mod.load(args.config) if args.config else ExperimentConfig()
    overrides = list(args.set or [])
    if getattr(args, "output_dir", None):
        overrides.append(f"output_dir={args.output_dir}")
    if getattr(args, "seed", None) is not None:
        overrides.append(f"master_seed={args.seed}")
    if getattr(args, "mode", None):
        overrides.append(f"mode={args.mode}")
    return config_mod.apply_overrides(cfg, overrides)


def _atomic_write(path, writer) -> None:
    tmp = f"{path}.tmp"
    writer(tmp)
    os.replace(tmp, path)


def _execute(cfg: ExperimentConfig):
    """Run one experiment cell; returns (trace, events, comm)."""
    problem = build_problem(cfg)
    beta_star = None
    if cfg.eval.reference:
        if problem.eval_X is None:
            raise ConfigError("eval.reference requires pooled evaluation samples")
        beta_star = solve_reference(
            problem.model, problem.eval_X, problem.eval_y,
            tolerance=cfg.eval.reference_tolerance,
        ).beta_star
    if cfg.mode == "async":
        trace, events, comm = run_async(cfg, beta_star=beta_star, problem=problem)
    else:
        trace = run_serial(cfg, beta_star=beta_star, problem=problem)
        events = comm = None
    return trace, events, comm


def _summary(cfg: ExperimentConfig, trace: MetricsTrace, comm, elapsed: float) -> dict:
    final = trace.final()
    return {
        "final_d_k": final.d_k,
        "final_DF": final.DF,
        "final_DO": final.DO,
        "final_objective": final.objective,
        "final_pred_error": final.pred_error,
        "grad_steps": final.grad_steps,
        "avg_steps": final.avg_steps,
        "comm_stats": None if comm is None else {
            "total_messages": comm.total_messages,
            "lock_messages": comm.lock_messages,
            "data_messages": comm.data_messages,
            "conflicts_detected": comm.conflicts_detected,
        },
        "wall_time_s": elapsed,
        "seed": cfg.master_seed,
        "config": config_mod.to_dict(cfg),
    }


def cmd_run(args) -> int:
    try:
        cfg = _load_config(args)
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(cfg.output_dir, exist_ok=True)
    start = time.perf_counter()
    try:
        trace, events, comm = _execute(cfg)
    except DivergenceError as exc:
        print(f"divergence abort: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    elapsed = time.perf_counter() - start
    _atomic_write(os.path.join(cfg.output_dir, "trace.csv"), trace.to_csv)
    if events is not None:
        _atomic_write(os.path.join(cfg.output_dir, "events.csv"), events.to_csv)
        _atomic_write(os.path.join(cfg.output_dir, "comm_stats.json"), comm.to_json)
    summary = _summary(cfg, trace, comm, elapsed)
    _atomic_write(
        os.path.join(cfg.output_dir, "summary.json"),
        lambda p: json.dump(summary, open(p, "w"), indent=2),
    )
    if args.plot:
        plots.render_report([(cfg.mode, trace)], cfg.output_dir)
    print(f"wrote {cfg.output_dir}/trace.csv (final d_k = {trace.final().d_k:.6g})")
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        if args.complete:
            g = build_complete(args.n)
        else:
            g = build_k_regular(args.n, args.k, args.seed)
        if g.regular_degree() is None:
            print("config error: regular graph required", file=sys.stderr)
            return EXIT_CONFIG
        report = verification_report(g, n_probe_points=args.probes, seed=args.seed)
    except (VerificationError, *CONFIG_ERRORS) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.output or "verification.json"
    write_report(report, out)
    status = "pass" if report["pass"] else "FAIL"
    print(
        f"{status}: sigma2={report['sigma2']:.6g} bound={report['lemma_bound']:.6g} "
        f"eta_hat={report['eta_hat']:.6g} -> {out}"
    )
    return EXIT_OK if report["pass"] else EXIT_CERT_FAILED


def _parse_axis(spec: str):
    if "=" not in spec:
        raise ConfigError(f"axis {spec!r} must look like path=v1,v2,...")
    path, _, raw = spec.partition("=")
    values = [v for v in raw.split(",") if v != ""]
    if not values:
        raise ConfigError(f"axis {path!r} has no values")
    return path.strip(), values


SWEEP_METRICS = ["final_d_k", "final_DF", "final_DO", "final_objective", "final_pred_error"]


def cmd_sweep(args) -> int:
    try:
        base = _load_config(args)
        axes = [_parse_axis(a) for a in (args.axis or [])]
        if not axes:
            raise ConfigError("at least one --axis is required")
        seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [base.master_seed]
        if len(set(seeds)) != len(seeds):
            raise ConfigError("duplicate seeds in --seeds")
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    # cartesian product of axis values
    points = [[]]
    for path, values in axes:
        points = [pt + [(path, v)] for pt in points for v in values]

    cells = []
    try:
        for pt in points:
            for seed in seeds:
                ovs = [f"{path}={v}" for path, v in pt] + [f"master_seed={seed}"]
                cells.append((pt, seed, config_mod.apply_overrides(base, ovs)))
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    threads = max(1, int(os.environ.get("GOSSIPGRAD_THREADS", "1")))

    def run_cell(cell):
        _, _, cfg = cell
        trace, _, _ = _execute(cfg)
        return trace.final()

    try:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                finals = list(pool.map(run_cell, cells))
        else:
            finals = [run_cell(c) for c in cells]
    except DivergenceError as exc:
        print(f"divergence abort: {exc}", file=sys.stderr)
        return EXIT_DIVERGED

    os.makedirs(args.output_dir or ".", exist_ok=True)
    out_path = os.path.join(args.output_dir or ".", "sweep.csv")
    axis_names = [path for path, _ in axes]
    header = axis_names + ["seed"] + SWEEP_METRICS + ["grad_steps", "avg_steps"]

    def fmt(v):
        return "" if v is None else repr(v) if isinstance(v, float) else v

    rows = []
    for (pt, seed, _), final in zip(cells, finals):
        vals = {
            "final_d_k": final.d_k, "final_DF": final.DF, "final_DO": final.DO,
            "final_objective": final.objective, "final_pred_error": final.pred_error,
        }
        rows.append([v for _, v in pt] + [seed] + [fmt(vals[m]) for m in SWEEP_METRICS]
                    + [final.grad_steps, final.avg_steps])

    # aggregate mean/std per axis point across seeds
    agg_rows = []
    for pi, pt in enumerate(points):
        chunk = [f for (p, _, _), f in zip(cells, finals) if p == pt]
        for stat, red in (("mean", statistics.fmean), ("std", _std)):
            vals = []
            for m in SWEEP_METRICS:
                per_seed = [getattr_metric(f, m) for f in chunk]
                vals.append("" if any(v is None for v in per_seed) else repr(red(per_seed)))
            agg_rows.append([v for _, v in pt] + [stat] + vals + ["", ""])

    def write(path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
            w.writerows(agg_rows)

    _atomic_write(out_path, write)
    print(f"wrote {out_path} ({len(rows)} runs, {len(agg_rows)} aggregate rows)")
    if args.plot:
        _plot_sweep(axis_names, cells, finals, args.output_dir or ".")
    return EXIT_OK


def getattr_metric(final, name):
    return {
        "final_d_k": final.d_k, "final_DF": final.DF, "final_DO": final.DO,
        "final_objective": final.objective, "final_pred_error": final.pred_error,
    }[name]


def _std(xs):
    return statistics.pstdev(xs) if len(xs) > 1 else 0.0


def _plot_sweep(axis_names, cells, finals, out_dir):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # scatter final pred error (or d_k) against the first axis
    xs, ys = [], []
    for (pt, _, _), final in zip(cells, finals):
        y = final.pred_error if final.pred_error is not None else final.d_k
        try:
            xs.append(float(pt[0][1]))
        except ValueError:
            xs.append(len(xs))
        ys.append(y)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.scatter(xs, ys, alpha=0.7)
    ax.set_xlabel(axis_names[0])
    ax.set_ylabel("final prediction error" if any(
        f.pred_error is not None for f in finals) else "final d_k")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(os.path.join(out_dir, "sweep.png"), dpi=150)
    plt.close(fig)


def cmd_report(args) -> int:
    traces = []
    for spec in args.trace:
        label, _, path = spec.rpartition("=")
        if not label:
            label, path = os.path.basename(spec), spec
        try:
            traces.append((label, MetricsTrace.from_csv(path)))
        except (OSError, ValueError, KeyError) as exc:
            print(f"config error: cannot read trace {path}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    written = plots.render_report(traces, args.out)
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gossipgrad")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    p_run.add_argument("--config", help="YAML config path")
    p_run.add_argument("--set", action="append", metavar="PATH=VALUE",
                       help="dotted config override, repeatable")
    p_run.add_argument("--output-dir")
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--mode", choices=["serial", "async"])
    p_run.add_argument("--plot", action="store_true", help="render figures next to CSVs")
    p_run.set_defaults(func=cmd_run)

    p_ver = sub.add_parser("verify", help="spectral + regularity certificates")
    p_ver.add_argument("--n", type=int, required=True)
    p_ver.add_argument("--k", type=int, default=2)
    p_ver.add_argument("--complete", action="store_true")
    p_ver.add_argument("--probes", type=int, default=10000)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--output")
    p_ver.set_defaults(func=cmd_verify)

    p_sw = sub.add_parser("sweep", help="multi-seed / multi-topology sweep")
    p_sw.add_argument("--config", help="YAML config template")
    p_sw.add_argument("--set", action="append", metavar="PATH=VALUE")
    p_sw.add_argument("--axis", action="append", metavar="PATH=V1,V2,...",
                      help="sweep axis, repeatable")
    p_sw.add_argument("--seeds", help="comma-separated seed list")
    p_sw.add_argument("--output-dir", default=".")
    p_sw.add_argument("--plot", action="store_true")
    p_sw.set_defaults(func=cmd_sweep)

    p_rep = sub.add_parser("report", help="render figures from trace CSVs")
    p_rep.add_argument("--trace", action="append", required=True,
                       metavar="[LABEL=]PATH")
    p_rep.add_argument("--out", default="figures")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
