"""Time integration: forward Euler and a semi-implicit splitting.

The semi-implicit step treats ``div(u^n grad(u^{n+1}/eps^2))`` implicitly
(matrix-free conjugate gradients, same upwind face mobility as the explicit
flux) and everything else explicitly.
"""
from __future__ import annotations

import enum
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _backend
from ._backend import core
from .errors import SimulationError, ValidationError
from .functionals import DiagnosticsRecord, check_invariants, diagnostics
from .grid import Kernel, TorusGrid, as2d, check_field, convolve
from .model import ModelParams, ModelState, pressure, rhs, source_term

log = logging.getLogger(__name__)


class Scheme(str, enum.Enum):
    EXPLICIT = "explicit"
    SEMI_IMPLICIT = "semi-implicit"


@dataclass(frozen=True)
class SolverConfig:
    scheme: Scheme = Scheme.EXPLICIT
    cfl: float = 0.4
    dt_max: float = 1e-3
    t_end: float = 0.25
    negativity_tol: float = 1e-13
    linear_solver_tol: float = 1e-10
    sample_every: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not 0.0 < self.cfl <= 1.0:
            raise ValidationError(f"cfl must lie in (0, 1], got {self.cfl}")
        for name in ("dt_max", "negativity_tol", "linear_solver_tol", "sample_every"):
            if not getattr(self, name) > 0.0:
                raise ValidationError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.t_end >= 0.0:
            raise ValidationError(f"t_end must be nonnegative, got {self.t_end}")


@dataclass
class StepReport:
    dt_used: float
    max_diffusivity: float
    negativity_clipped: int = 0
    solver_iterations: int = 0


def effective_diffusivity(umax: float, params: ModelParams, grid: TorusGrid,
                          scheme: Scheme = Scheme.EXPLICIT) -> float:
    """Largest face diffusivity the explicit part of a step must resolve."""
    d = gamma_part = params.gamma * umax ** params.gamma
    if params.local:
        d = gamma_part + 4.0 * grid.dim * params.kappa * umax / grid.h ** 2
    elif Scheme(scheme) is Scheme.EXPLICIT:
        d = gamma_part + umax / params.eps ** 2
    return d


def stable_dt(u, params: ModelParams, grid: TorusGrid, cfl: float = 0.4,
              dt_max: float = math.inf, scheme: Scheme = Scheme.EXPLICIT) -> float:
    """``cfl h^2 / (2 d D_max)`` capped by ``dt_max``."""
    umax = float(np.max(u))
    d = effective_diffusivity(umax, params, grid, scheme)
    if d <= 0.0:
        return dt_max
    return min(dt_max, cfl * grid.h ** 2 / (2 * grid.dim * d))


def _finish(u: np.ndarray, t: float, negativity_tol: float) -> tuple[np.ndarray, int]:
    if not np.all(np.isfinite(u)):
        idx = int(np.flatnonzero(~np.isfinite(u))[0])
        raise SimulationError(f"non-finite density at cell {idx}", index=idx, t=t)
    neg = u < 0.0
    clipped = 0
    if neg.any():
        idx = int(np.argmin(u))
        if u.flat[idx] <= -negativity_tol:
            raise SimulationError(
                f"density {u.flat[idx]!r} at cell {idx} below -{negativity_tol} "
                "(time step too large for the upwind scheme)",
                index=idx, value=float(u.flat[idx]), t=t)
        clipped = int(neg.sum())
        u = np.where(neg, 0.0, u)
    return u, clipped


def step_explicit(state: ModelState, params: ModelParams, kernel: Kernel, dt: float,
                  negativity_tol: float = 1e-13) -> tuple[ModelState, StepReport]:
    """Forward Euler. ``dt`` should not exceed ``stable_dt``; a step that is
    too large shows up as a negativity abort rather than being refused up
    front, since uniform states tolerate any step the ODE does."""
    grid = kernel.grid
    if not dt > 0.0:
        raise ValidationError(f"dt must be positive, got {dt}")
    new = state.u + dt * rhs(state, params, kernel)
    new, clipped = _finish(new, state.t + dt, negativity_tol)
    diff = effective_diffusivity(float(state.u.max()), params, grid)
    return ModelState(new, state.t + dt), StepReport(dt, diff, clipped, 0)


def step_semi_implicit(state: ModelState, params: ModelParams, kernel: Kernel, dt: float,
                       negativity_tol: float = 1e-13,
                       linear_solver_tol: float = 1e-10) -> tuple[ModelState, StepReport]:
    if params.local:
        raise ValidationError("semi-implicit stepping is only defined for the nonlocal variant")
    if not dt > 0.0:
        raise ValidationError(f"dt must be positive, got {dt}")
    grid = kernel.grid
    fb = _backend.fallback
    u = as2d(state.u)
    eps2 = params.eps ** 2
    p = pressure(state.u, params)
    conv = convolve(kernel, state.u)
    mu = p + (state.u - conv) / eps2
    my, mx = fb.face_mobility(u, as2d(mu))
    explicit = fb.divergence_with_mobility(my, mx, as2d(p - conv / eps2), grid.h)
    b = u + dt * (explicit + as2d(source_term(state.u, params)))
    x, iters, ok = fb._cg(my, mx, b, grid.h, dt / eps2, linear_solver_tol, 10 * grid.n_cells)
    if not ok:
        raise SimulationError(f"linear solver did not converge in {iters} iterations", t=state.t)
    new, clipped = _finish(x.reshape(state.u.shape), state.t + dt, negativity_tol)
    diff = effective_diffusivity(float(state.u.max()), params, grid, Scheme.SEMI_IMPLICIT)
    return ModelState(new, state.t + dt), StepReport(dt, diff, clipped, iters)


@dataclass
class RunReport:
    steps: int = 0
    clipped: int = 0
    rejected: int = 0
    dt_min: float = math.inf
    dt_max_used: float = 0.0
    max_diffusivity: float = 0.0
    cg_iters_max: int = 0
    cg_iters_total: int = 0
    max_energy_increase: float = -math.inf
    max_entropy_increase: float = -math.inf
    max_mean: float = -math.inf
    mass_initial: float = 0.0
    mass_final: float = 0.0
    wall_time: float = 0.0
    compiled: bool = False
    violations: list[str] = field(default_factory=list)

    @property
    def mass_drift(self) -> float:
        """|M_end - M_0| / M_0."""
        if self.mass_initial == 0:
            return abs(self.mass_final)
        return abs(self.mass_final - self.mass_initial) / self.mass_initial


@dataclass
class RunResult:
    final: ModelState
    records: list[DiagnosticsRecord]
    report: RunReport
    snapshots: dict[float, np.ndarray] = field(default_factory=dict)


Sink = Callable[[DiagnosticsRecord, np.ndarray], None]


def sample_schedule(t_end: float, sample_every: float, extra: Iterable[float] = ()) -> list[float]:
    k = int(math.floor(t_end / sample_every + 1e-9))
    times = {round(i * sample_every, 12) for i in range(k + 1)}
    times.add(float(t_end))
    times.update(float(t) for t in extra if 0.0 <= t <= t_end)
    return sorted(t for t in times if t <= t_end)


def run(initial, params: ModelParams, kernel: Kernel, config: SolverConfig,
        sinks: Sequence[Sink] = (), sample_times: Iterable[float] = (),
        snapshot_times: Iterable[float] = (), monitor: bool = True,
        check_degiorgi: bool = False) -> RunResult:
    """Advance ``initial`` to ``config.t_end``, sampling diagnostics.

    Diagnostics are taken at every multiple of ``sample_every``, at
    ``t_end`` and at any extra ``sample_times``; states at
    ``snapshot_times`` are kept in the result. Structural-invariant
    violations are collected in ``report.violations`` rather than raised.
    """
    grid = kernel.grid
    u = check_field(grid, initial, "initial condition").copy()
    if np.any(u < 0):
        idx = int(np.argmin(u))
        raise ValidationError(f"initial density {u.flat[idx]!r} < 0 at cell {idx}")
    if params.local and config.scheme is Scheme.SEMI_IMPLICIT:
        raise ValidationError("semi-implicit stepping is only defined for the nonlocal variant")
    c = params.homeostatic_density
    mean0 = grid.cell_volume * float(u.sum()) / grid.volume
    if params.growth and (mean0 > c or float(u.max()) > c):
        warnings.warn(f"initial data exceed p_H^(1/gamma)={c:.6g} (mean {mean0:.6g}, "
                      f"max {float(u.max()):.6g}); mass-control bound not guaranteed",
                      stacklevel=2)

    snapshot_times = sorted({float(s) for s in snapshot_times})
    times = sample_schedule(config.t_end, config.sample_every,
                            list(sample_times) + snapshot_times)
    report = RunReport(mass_initial=grid.cell_volume * float(u.sum()),
                       compiled=_backend.COMPILED)
    records: list[DiagnosticsRecord] = []
    snapshots: dict[float, np.ndarray] = {}
    semi = config.scheme is Scheme.SEMI_IMPLICIT
    u_prev, dt_last = None, None
    t = 0.0
    start = time.perf_counter()

    def sample(t, u):
        rec = diagnostics(u, params, kernel, t, u_prev, dt_last)
        records.append(rec)
        report.violations.extend(check_invariants(rec, params, mean0,
                                                  check_degiorgi=check_degiorgi))
        for s in snapshot_times:
            if abs(s - t) <= 1e-12:
                snapshots[s] = u.copy()
        for sink in sinks:
            sink(rec, u)

    sample(t, u)
    for t_next in times[1:]:
        u2, prev2, t, stats = core.advance(
            as2d(u), kernel._oy, kernel._ox, kernel.weights, grid.h, params.eps,
            params.gamma, params.p_h, params.growth, params.local, params.kappa, semi,
            config.cfl, config.dt_max, t, t_next, config.negativity_tol,
            config.linear_solver_tol, monitor, math.nan, math.nan, 2 ** 62)
        report.steps += stats["steps"]
        report.clipped += stats["clipped"]
        report.rejected += stats["rejected"]
        report.dt_min = min(report.dt_min, stats["dt_min"])
        report.dt_max_used = max(report.dt_max_used, stats["dt_max_used"])
        report.max_diffusivity = max(report.max_diffusivity, stats["max_diffusivity"])
        report.cg_iters_max = max(report.cg_iters_max, stats["cg_iters_max"])
        report.cg_iters_total += stats["cg_iters_total"]
        report.max_energy_increase = max(report.max_energy_increase, stats["max_energy_increase"])
        report.max_entropy_increase = max(report.max_entropy_increase, stats["max_entropy_increase"])
        report.max_mean = max(report.max_mean, stats["max_mean"])
        if stats["status"] != 0:
            status = stats["status"]
            msg = {1: f"density {stats['err_value']!r} at cell {stats['err_index']} below "
                      f"-{config.negativity_tol}",
                   2: f"non-finite density at cell {stats['err_index']}",
                   3: f"linear solver did not converge in {int(stats['err_value'])} iterations",
                   }[status]
            raise SimulationError(f"run aborted near t={t:.6g}: {msg}",
                                  index=stats["err_index"], value=stats["err_value"], t=t)
        u = u2.reshape(grid.shape)
        if stats["steps"]:
            u_prev, dt_last = prev2.reshape(grid.shape), stats["dt_last"]
        sample(t, u)
    report.mass_final = grid.cell_volume * float(u.sum())
    report.wall_time = time.perf_counter() - start
    log.info("run finished: %d steps, %.2fs, %d clipped", report.steps, report.wall_time,
             report.clipped)
    return RunResult(ModelState(u, t), records, report, snapshots)
