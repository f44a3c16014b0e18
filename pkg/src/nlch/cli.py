"""Command-line entry point.

    nlch simulate --config run.ini
    nlch figure1 --out runs/f1
    nlch sweep-gamma --gammas 10,20,40 --out runs/sweep
    nlch longtime --out runs/lt [--config lt.ini]
    nlch compare-local --out runs/local
    nlch check snapshot.bin

Exit codes: 0 success, 1 validation error or failed check, 2 runtime abort.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments as ex
from . import functionals as fn
from . import io
from .errors import SimulationError, ValidationError
from .grid import build_grid, build_kernel
from .model import ModelParams, Source

log = logging.getLogger("nlch")


def _config(args, preset: str) -> io.RunConfig:
    if args.config:
        cfg = io.parse_config(args.config)
    else:
        cfg = io.default_config(preset)
    if args.out:
        cfg = replace(cfg, output_dir=Path(args.out))
    if args.t_end is not None:
        solver = replace(cfg.solver, t_end=args.t_end)
        spec = replace(cfg.scenario, t_end=args.t_end)
        times = tuple(t for t in cfg.snapshot_times if t <= args.t_end)
        cfg = io.RunConfig(spec, solver, cfg.output_dir, times, cfg.emit_plots)
    return cfg


def _simulate(cfg: io.RunConfig, quiet: bool) -> int:
    out = cfg.output_dir
    io.write_config_echo(cfg, out)
    spec = cfg.scenario
    res = ex.run_scenario(spec, cfg.solver, snapshot_times=cfg.snapshot_times)
    io.write_series(res.records, out / "series.csv")
    names = []
    for t, u in sorted(res.snapshots.items()):
        name = io.snapshot_name(t)
        io.write_snapshot(out / name, u, length=spec.length, t=t, gamma=spec.params.gamma,
                          eps=spec.eps, p_h=spec.params.p_h)
        names.append(name)
    if cfg.emit_plots:
        io.emit_plot_scripts(out, "series.csv", names)
    rep = res.report
    if not quiet:
        print(f"{spec.name}: {rep.steps} steps in {rep.wall_time:.2f}s "
              f"(compiled={rep.compiled}), mass drift {rep.mass_drift:.3e}, "
              f"{len(names)} snapshots -> {out}")
        for v in rep.violations:
            print(f"  invariant violation: {v}")
    return 0


def cmd_simulate(args) -> int:
    if not args.config:
        raise ValidationError("simulate needs --config")
    return _simulate(_config(args, "figure1"), args.quiet)


def cmd_figure1(args) -> int:
    cfg = _config(args, "figure1")
    if not args.config:
        times = tuple(t for t in ex.FIGURE1_TIMES if t <= cfg.solver.t_end)
        cfg = replace(cfg, snapshot_times=times)
        if not args.out:
            cfg = replace(cfg, output_dir=Path("runs/figure1"))
    return _simulate(cfg, args.quiet)


def _gammas(text: str | None) -> list[float]:
    if not text:
        return [10.0, 20.0, 40.0, 80.0]
    try:
        return [float(g) for g in text.split(",")]
    except ValueError:
        raise ValidationError(f"--gammas must be comma-separated numbers, got {text!r}") from None


def cmd_sweep(args) -> int:
    cfg = _config(args, "sweep")
    gammas = _gammas(args.gammas)
    out = cfg.output_dir if args.out or args.config else Path("runs/sweep")
    io.write_config_echo(replace(cfg, output_dir=out), out)
    res = ex.run_gamma_sweep(cfg.scenario, gammas, cfg.solver, workers=args.workers)
    rows = []
    for i, r in enumerate(res.runs):
        sub = out / f"gamma_{r.gamma:g}"
        io.write_config_echo(replace(cfg, scenario=cfg.scenario.with_params(gamma=r.gamma),
                                     output_dir=sub), sub)
        if r.records:
            io.write_series(r.records, sub / "series.csv")
        if r.final is not None:
            io.write_snapshot(sub / io.snapshot_name(res.t_star), r.final,
                              length=cfg.scenario.length, t=res.t_star, gamma=r.gamma,
                              eps=cfg.scenario.eps, p_h=cfg.scenario.params.p_h)
            if cfg.emit_plots:
                io.emit_plot_scripts(sub, "series.csv", [io.snapshot_name(res.t_star)])
        rows.append({
            "gamma": r.gamma,
            "graph_residual": res.graph_residual[i],
            "complementarity_residual": res.complementarity_residual[i],
            "degiorgi_excess_sup": res.degiorgi_sup[i],
            "pairing": res.pairing[i],
            "l2_to_next": res.adjacent_l2[i] if i < len(res.adjacent_l2) else math.nan,
            "status": "ok" if r.error is None else f"failed: {r.error}",
        })
    io.write_summary(rows, out / "summary.csv")
    if not args.quiet:
        print(f"sweep t*={res.t_star:g} gammas={gammas} -> {out}")
        print(f"  graph residual decreasing (10% slack): {res.graph_residual_decreasing()}")
        print(f"  adjacent L2 decreasing: {res.distances_decreasing()}")
        print(f"  pairing decreasing: {res.pairing_decreasing()}")
        for f in res.failed:
            print(f"  {f}")
    return 2 if res.failed else 0


def cmd_longtime(args) -> int:
    cfg = _config(args, "longtime")
    out = cfg.output_dir if args.out or args.config else Path("runs/longtime")
    cfg = replace(cfg, output_dir=out)
    io.write_config_echo(cfg, out)
    rep = ex.run_longtime(cfg.scenario, cfg.solver)
    io.write_series(rep.run.records, out / "series.csv")
    rows = []
    for i, t in enumerate(rep.times):
        row = {"t": t}
        row.update({f"dist_L{k}": v[i] for k, v in rep.distances.items()})
        row.update({"relative_entropy": rep.relative_entropy[i], "ckp_lhs": rep.ckp_lhs[i],
                    "ckp_rhs": rep.ckp_rhs[i]})
        rows.append(row)
    io.write_summary(rows, out / "decay.csv")
    if cfg.emit_plots:
        io.emit_plot_scripts(out, "series.csv")
    if not args.quiet:
        last = {k: v[-1] for k, v in rep.distances.items()}
        print(f"longtime target {rep.target:.8g}: final distances {last}")
        if rep.slope is not None:
            print(f"  log relative-entropy slope over final half: {rep.slope:.6g}")
        print(f"  CKP bound holds at every sample: {rep.ckp_holds}")
    return 0


def cmd_compare_local(args) -> int:
    cfg = _config(args, "local")
    out = cfg.output_dir if args.out or args.config else Path("runs/local")
    cfg = replace(cfg, output_dir=out)
    io.write_config_echo(cfg, out)
    rep = ex.run_local_comparison(cfg.scenario, config=cfg.solver)
    rows = [{"eps": e, "l2_gap": g} for e, g in zip(rep.eps_list, rep.gaps)]
    io.write_summary(rows, out / "gaps.csv")
    io.write_series(rep.local_run.records, out / "series_local.csv")
    if not args.quiet:
        print(f"local vs nonlocal, kappa={rep.kappa:.6g}")
        for e, g in zip(rep.eps_list, rep.gaps):
            print(f"  eps={e:g}: ||u_local - u_nonlocal||_2 = {g:.6e}")
        print(f"  gap decreasing in eps: {rep.gaps_decreasing()}")
        print(f"  local entropy non-increasing: {rep.local_entropy_monotone}")
    return 0


def cmd_check(args) -> int:
    snap = io.read_snapshot(args.snapshot)
    u = snap.values
    problems = []
    if not np.all(np.isfinite(u)):
        problems.append("non-finite values")
    elif np.any(u < 0):
        idx = int(np.argmin(u))
        problems.append(f"negative density {u.flat[idx]!r} at cell {idx}")
    if problems:
        for p in problems:
            print(f"check failed: {p}", file=sys.stderr)
        return 1
    grid = build_grid(snap.dim, snap.n, snap.length)
    params = ModelParams(snap.gamma, snap.p_h, snap.eps, source=Source.GROWTH)
    kernel = build_kernel(grid, snap.eps)
    rec = fn.diagnostics(u, params, kernel, snap.t)
    violations = fn.check_invariants(rec, params, rec.mean, check_degiorgi=snap.gamma >= 20)
    if not args.quiet:
        for k, v in rec.as_dict().items():
            print(f"{k:>30s} = {v:.10g}")
    for v in violations:
        print(f"check failed: {v}", file=sys.stderr)
    return 1 if violations else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlch", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="INI run configuration")
            p.add_argument("--out", help="output directory")
            p.add_argument("--t-end", type=float, default=None, dest="t_end")
        p.add_argument("--quiet", action="store_true")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    common(sub.add_parser("simulate", help="run a config file")).set_defaults(fn=cmd_simulate)
    common(sub.add_parser("figure1", help="canned two-bump growth scenario")).set_defaults(
        fn=cmd_figure1)
    p = common(sub.add_parser("sweep-gamma", help="incompressible-limit sweep"))
    p.add_argument("--gammas", help="comma-separated, e.g. 10,20,40,80")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(fn=cmd_sweep)
    common(sub.add_parser("longtime", help="long-time convergence")).set_defaults(
        fn=cmd_longtime)
    common(sub.add_parser("compare-local", help="nonlocal vs local model")).set_defaults(
        fn=cmd_compare_local)
    p = common(sub.add_parser("check", help="invariant suite on a snapshot"), config=False)
    p.add_argument("snapshot")
    p.set_defaults(fn=cmd_check)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SimulationError as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
