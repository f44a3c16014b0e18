"""Canned scenarios and the studies built on them.

* ``scenario_figure1`` - growth from a double Gaussian, gamma=10, p_H=0.7.
* ``run_longtime`` - convergence to p_H^(1/gamma) (growth) or to the mean.
* ``run_gamma_sweep`` - incompressible-limit trends as gamma grows.
* ``run_local_comparison`` - nonlocal runs at shrinking eps vs the local model.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import functionals as fn
from .errors import SimulationError, ValidationError
from .grid import Kernel, Profile, TorusGrid, build_grid, build_kernel
from .model import ModelParams, Source, Variant
from .stepper import RunResult, Scheme, SolverConfig, run

log = logging.getLogger(__name__)

FIGURE1_TIMES = (0.0, 0.03, 0.14, 0.25)


@dataclass(frozen=True)
class InitialCondition:
    """Deterministic initial density.

    kind: ``uniform`` (value), ``double_gaussian`` (centers, widths,
    amplitudes; a sum of periodic Gaussians), ``single_bump`` (center,
    radius, amplitude; smooth, compactly supported) or ``custom`` (file,
    a snapshot written by :func:`nlch.io.write_snapshot`).
    """

    kind: str = "uniform"
    value: float = 0.5
    centers: tuple = ()
    widths: tuple = ()
    amplitudes: tuple = ()
    center: tuple = (0.5,)
    radius: float = 0.25
    amplitude: float = 0.9
    file: str = ""

    def __post_init__(self):
        if self.kind not in ("uniform", "double_gaussian", "single_bump", "custom"):
            raise ValidationError(f"unknown initial condition kind {self.kind!r}")


def _periodic_dist2(grid: TorusGrid, center) -> np.ndarray:
    center = tuple(center)
    if len(center) != grid.dim:
        raise ValidationError(f"center {center} has wrong dimension for a {grid.dim}-d grid")
    d2 = np.zeros(grid.shape)
    for x, c in zip(grid.coords(), center):
        d = np.abs(x - c) % grid.length
        d = np.minimum(d, grid.length - d)
        d2 = d2 + d * d
    return d2


def build_initial(ic: InitialCondition, grid: TorusGrid) -> np.ndarray:
    if ic.kind == "uniform":
        u = grid.full(ic.value)
    elif ic.kind == "double_gaussian":
        if not len(ic.centers) == len(ic.widths) == len(ic.amplitudes):
            raise ValidationError("centers, widths and amplitudes must have equal length")
        u = grid.zeros()
        for c, w, a in zip(ic.centers, ic.widths, ic.amplitudes):
            c = (c,) if np.isscalar(c) else tuple(c)
            u = u + a * np.exp(-_periodic_dist2(grid, c) / (2.0 * w * w))
    elif ic.kind == "single_bump":
        s = _periodic_dist2(grid, ic.center) / ic.radius ** 2
        inside = s < 1.0
        u = np.where(inside, ic.amplitude * np.exp(1.0 - 1.0 / np.where(inside, 1.0 - s, 1.0)), 0.0)
    else:
        from .io import read_snapshot
        snap = read_snapshot(ic.file)
        if snap.values.shape != grid.shape:
            raise ValidationError(f"snapshot {ic.file} has shape {snap.values.shape}, "
                                  f"scenario grid is {grid.shape}")
        u = snap.values
    if np.any(u < 0):
        raise ValidationError("initial condition has negative values")
    return u


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    dim: int = 1
    n: int = 256
    length: float = 1.0
    eps: float = 0.08
    profile: Profile = Profile.POLYBUMP
    params: ModelParams = field(default_factory=lambda: ModelParams(10.0, 0.7, 0.08))
    initial: InitialCondition = field(default_factory=InitialCondition)
    t_end: float = 0.25
    sample_every: float = 0.01
    note: str = ""

    def __post_init__(self):
        object.__setattr__(self, "profile", Profile(self.profile))
        if not math.isclose(self.eps, self.params.eps, rel_tol=1e-12):
            object.__setattr__(self, "params", replace(self.params, eps=self.eps))

    def grid(self) -> TorusGrid:
        return build_grid(self.dim, self.n, self.length)

    def kernel(self) -> Kernel:
        return build_kernel(self.grid(), self.eps, self.profile)

    def initial_field(self) -> np.ndarray:
        return build_initial(self.initial, self.grid())

    def solver(self, **kw) -> SolverConfig:
        kw.setdefault("t_end", self.t_end)
        kw.setdefault("sample_every", self.sample_every)
        return SolverConfig(**kw)

    def with_params(self, **kw) -> "ScenarioSpec":
        return replace(self, params=replace(self.params, **kw))


def scenario_figure1() -> ScenarioSpec:
    """Growth from two Gaussian bumps; gamma=10, p_H=0.7 (p_H^(1/gamma) ~ 0.965).

    Bump centres, widths and peak are a reconstruction of the published
    initial datum, not values taken from it.
    """
    return ScenarioSpec(
        name="figure1", dim=1, n=256, length=1.0, eps=0.08,
        params=ModelParams(gamma=10.0, p_h=0.7, eps=0.08, source=Source.GROWTH),
        initial=InitialCondition(kind="double_gaussian", centers=(0.35, 0.65),
                                 widths=(0.05, 0.05), amplitudes=(0.9, 0.9)),
        t_end=0.25, sample_every=0.01,
        note="reconstructed double-Gaussian initial datum (centres/widths/peak chosen by eye)",
    )


def scenario_sweep() -> ScenarioSpec:
    """Compactly supported bump (peak 0.9) for the gamma sweep, t* = 0.2."""
    return ScenarioSpec(
        name="sweep", dim=1, n=128, length=1.0, eps=0.08,
        params=ModelParams(gamma=10.0, p_h=0.7, eps=0.08),
        initial=InitialCondition(kind="single_bump", center=(0.5,), radius=0.3, amplitude=0.9),
        t_end=0.2, sample_every=0.02,
    )


def scenario_longtime(source: Source | str = Source.NONE) -> ScenarioSpec:
    """Double Gaussian on a [0, 2) torus so decay rates stay O(1)."""
    return ScenarioSpec(
        name="longtime", dim=1, n=64, length=2.0, eps=0.25,
        params=ModelParams(gamma=10.0, p_h=0.7, eps=0.25, source=Source(source)),
        initial=InitialCondition(kind="double_gaussian", centers=(0.7, 1.3),
                                 widths=(0.15, 0.15), amplitudes=(0.8, 0.8)),
        t_end=2.0, sample_every=0.05,
    )


def scenario_uniform() -> ScenarioSpec:
    return ScenarioSpec(
        name="uniform", dim=1, n=64, length=1.0, eps=0.25,
        params=ModelParams(gamma=10.0, p_h=0.7, eps=0.25),
        initial=InitialCondition(kind="uniform", value=0.5),
        t_end=50.0, sample_every=0.5,
    )


def scenario_local() -> ScenarioSpec:
    return ScenarioSpec(
        name="local", dim=1, n=64, length=1.0, eps=0.125,
        params=ModelParams(gamma=10.0, p_h=0.7, eps=0.125, source=Source.NONE),
        initial=InitialCondition(kind="double_gaussian", centers=(0.35, 0.65),
                                 widths=(0.1, 0.1), amplitudes=(0.6, 0.6)),
        t_end=0.02, sample_every=0.005,
    )


SCENARIOS = {
    "figure1": scenario_figure1,
    "sweep": scenario_sweep,
    "longtime": scenario_longtime,
    "uniform": scenario_uniform,
    "local": scenario_local,
}


def get_scenario(name: str) -> ScenarioSpec:
    try:
        return SCENARIOS[name]()
    except KeyError:
        raise ValidationError(f"unknown scenario {name!r}; known: {sorted(SCENARIOS)}") from None


def run_scenario(spec: ScenarioSpec, config: SolverConfig | None = None, **kw) -> RunResult:
    config = config or spec.solver()
    return run(spec.initial_field(), spec.params, spec.kernel(), config, **kw)


def lq_distance(u, target, grid: TorusGrid, q: float) -> float:
    diff = np.abs(np.asarray(u) - target)
    if math.isinf(q):
        return float(diff.max())
    return (grid.cell_volume * float(np.sum(diff ** q))) ** (1.0 / q)


# ---------------------------------------------------------------- long time

@dataclass
class LongtimeReport:
    target: float
    times: list[float]
    distances: dict[str, list[float]]
    relative_entropy: list[float]
    ckp_lhs: list[float]
    ckp_rhs: list[float]
    slope: float | None
    run: RunResult

    @property
    def ckp_holds(self) -> bool:
        return all(a <= b * (1 + 1e-12) + 1e-15 for a, b in zip(self.ckp_lhs, self.ckp_rhs))


def fit_log_slope(times, values, start: float) -> float:
    """Least-squares slope of log(values) over ``times >= start``."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    sel = (t >= start) & (v > 0)
    if sel.sum() < 2:
        raise ValidationError("need at least two positive samples to fit a decay rate")
    return float(np.polyfit(t[sel], np.log(v[sel]), 1)[0])


def run_longtime(spec: ScenarioSpec, config: SolverConfig | None = None,
                 qs: Sequence[float] = (1.0, 2.0, math.inf)) -> LongtimeReport:
    """Track ``||u - c*||_q`` with c* = p_H^(1/gamma) (growth) or the initial mean.

    Without growth, also fit the decay rate of the relative entropy over
    the final half of the run and evaluate both sides of the CKP bound.
    """
    grid = spec.grid()
    u0 = spec.initial_field()
    if not np.any(u0 > 0):
        raise ValidationError("long-time runs need a nonzero initial datum "
                              "(u = 0 is stationary; supply a perturbation explicitly)")
    mean0 = grid.cell_volume * float(u0.sum()) / grid.volume
    target = spec.params.homeostatic_density if spec.params.growth else mean0
    config = config or spec.solver()
    names = {q: ("inf" if math.isinf(q) else f"{q:g}") for q in qs}
    dist = {name: [] for name in names.values()}
    times, rel, lhs, rhs = [], [], [], []

    def sink(rec, u):
        times.append(rec.t)
        for q, name in names.items():
            dist[name].append(lq_distance(u, target, grid, q))
        rel.append(rec.entropy_relative)
        lhs.append(lq_distance(u, mean0, grid, 1.0))
        rhs.append(math.sqrt(max(0.0, 4.0 * grid.volume * mean0 * rec.entropy_relative)))

    res = run(u0, spec.params, spec.kernel(), config, sinks=[sink])
    slope = None
    if not spec.params.growth:
        slope = fit_log_slope(times, rel, config.t_end / 2.0)
    return LongtimeReport(target, times, dist, rel, lhs, rhs, slope, res)


# ------------------------------------------------------------------- sweep

@dataclass
class GammaRun:
    gamma: float
    records: list
    final: np.ndarray | None
    pairing: float
    error: str | None = None
    wall_time: float = 0.0


@dataclass
class SweepResult:
    gammas: list[float]
    t_star: float
    runs: list[GammaRun]
    graph_residual: list[float]
    complementarity_residual: list[float]
    degiorgi_sup: list[float]
    pairing: list[float]
    max_mean_excess: list[float]
    adjacent_l2: list[float]

    @property
    def failed(self) -> list[str]:
        return [f"gamma={r.gamma}: {r.error}" for r in self.runs if r.error]

    def graph_residual_decreasing(self, slack: float = 0.10) -> bool:
        g = self.graph_residual
        return all(b < a * (1.0 + slack) for a, b in zip(g, g[1:]))

    def distances_decreasing(self) -> bool:
        d = self.adjacent_l2
        return all(b < a for a, b in zip(d, d[1:]))

    def pairing_decreasing(self) -> bool:
        p = self.pairing
        return all(b < a for a, b in zip(p, p[1:]))


def _sweep_one(args) -> GammaRun:
    spec, config, gamma = args
    spec = spec.with_params(gamma=float(gamma))
    try:
        res = run_scenario(spec, config, check_degiorgi=True)
    except (SimulationError, ValidationError) as exc:
        return GammaRun(gamma, [], None, math.nan, error=str(exc))
    last = res.records[-1]
    return GammaRun(gamma, res.records, res.final.u, last.pairing, wall_time=res.report.wall_time)


def run_gamma_sweep(base: ScenarioSpec, gammas: Sequence[float],
                    config: SolverConfig | None = None, workers: int = 1,
                    t_star: float | None = None) -> SweepResult:
    """Identical runs at increasing gamma up to the common time ``t_star``."""
    gammas = [float(g) for g in gammas]
    if any(b <= a for a, b in zip(gammas, gammas[1:])):
        raise ValidationError(f"gammas must be strictly increasing, got {gammas}")
    if any(g < 10 for g in gammas):
        raise ValidationError("sweep gammas must all be >= 10")
    t_star = base.t_end if t_star is None else t_star
    config = config or base.solver()
    config = replace(config, t_end=t_star)
    jobs = [(base, config, g) for g in gammas]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_sweep_one, jobs))
    else:
        runs = [_sweep_one(j) for j in jobs]
    grid = base.grid()
    gr, cr, dg, pa, mm, l2 = [], [], [], [], [], []
    for r in runs:
        if r.error:
            log.warning("sweep run gamma=%g failed: %s", r.gamma, r.error)
            gr.append(math.nan); cr.append(math.nan); dg.append(math.nan)
            pa.append(math.nan); mm.append(math.nan)
            continue
        last = r.records[-1]
        gr.append(last.graph_residual)
        cr.append(last.complementarity_residual)
        dg.append(max(rec.degiorgi_excess for rec in r.records))
        pa.append(r.pairing)
        c = base.params.p_h ** (1.0 / r.gamma)
        mm.append(max(rec.mean for rec in r.records) - c)
    for a, b in zip(runs, runs[1:]):
        if a.final is None or b.final is None:
            l2.append(math.nan)
        else:
            l2.append(lq_distance(a.final, b.final, grid, 2.0))
    return SweepResult(gammas, t_star, runs, gr, cr, dg, pa, mm, l2)


# ------------------------------------------------------- local vs nonlocal

def continuum_second_moment(profile: Profile, dim: int) -> float:
    """(1/2d) int omega(z)|z|^2 dz for the unit-mass profile on the unit ball."""
    nodes, weights = np.polynomial.legendre.leggauss(32)
    r = 0.5 * (nodes + 1.0)
    wts = 0.5 * weights
    prof = Profile(profile)(r)
    jac = r ** (dim - 1)
    return float(np.sum(wts * prof * jac * r * r) / np.sum(wts * prof * jac)) / (2 * dim)


@dataclass
class LocalComparison:
    eps_list: list[float]
    kappa: float
    gaps: list[float]
    local_entropy_max_increase: float
    local_entropy_monotone: bool
    nonlocal_runs: list[RunResult]
    local_run: RunResult

    def gaps_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.gaps, self.gaps[1:]))


def run_local_comparison(spec: ScenarioSpec, eps_list: Sequence[float] | None = None,
                         config: SolverConfig | None = None,
                         entropy_tol: float = 1e-8) -> LocalComparison:
    """Run the local model (mu = p - kappa Lap u, kappa the kernel's second
    moment) against nonlocal runs at each eps, reporting ``||u_l - u_nl||_2``
    at ``t_end``.
    """
    grid = spec.grid()
    if eps_list is None:
        h = grid.h
        eps_list = [e for e in (0.25, 0.125, 0.0625) if 4 * h <= e <= grid.length / 4]
    eps_list = sorted((float(e) for e in eps_list), reverse=True)
    kappa = continuum_second_moment(spec.profile, spec.dim)
    config = config or spec.solver()
    if config.scheme is Scheme.SEMI_IMPLICIT:
        config = replace(config, scheme=Scheme.EXPLICIT)
    local_spec = spec.with_params(variant=Variant.LOCAL, kappa=kappa)
    local = run_scenario(local_spec, config)
    u_local = local.final.u
    gaps, runs = [], []
    for e in eps_list:
        s = replace(spec, eps=e, params=replace(spec.params, eps=e, variant=Variant.NONLOCAL))
        r = run_scenario(s, config)
        runs.append(r)
        gaps.append(lq_distance(r.final.u, u_local, grid, 2.0))
    s0 = fn.entropy(local_spec.initial_field(), local_spec.params, grid)
    inc = local.report.max_entropy_increase
    return LocalComparison(eps_list, kappa, gaps, inc, inc <= entropy_tol * max(1.0, s0),
                           runs, local)
