"""Discrete energy, entropy, dissipation rates and limit residuals.

Integrals are midpoint cell sums, ``int f ~ h**d * sum(f)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from ._backend import core
from .errors import ValidationError
from .grid import Kernel, TorusGrid, as2d, convolve, forward_diff, grad, laplacian
from .model import ModelParams, b_eps, chemical_potential

# tumour zone: cells with p > TUMOR_LEVEL * p_H
TUMOR_LEVEL = 1e-3


@dataclass
class DiagnosticsRecord:
    t: float
    mass: float
    mean: float
    energy: float
    entropy: float
    entropy_relative: float
    min_u: float
    max_u: float
    ckp_gap: float
    degiorgi_excess: float
    graph_residual: float
    complementarity_residual: float
    pairing: float
    dissipation_flux: float
    dissipation_entropy_nonlocal: float
    dissipation_entropy_porous: float
    dissipation_entropy_source: float
    tumor_zone: float

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def _xlogx(x: np.ndarray) -> np.ndarray:
    safe = np.where(x > 0, x, 1.0)
    return np.where(x > 0, x * np.log(safe), 0.0)


def energy(u, params: ModelParams, kernel: Kernel) -> float:
    """Nonlocal energy; for the local variant ``kappa/2 |grad u|^2`` replaces the interaction term."""
    grid = kernel.grid
    u = np.asarray(u, dtype=np.float64)
    bulk = float(np.sum(u ** (params.gamma + 1.0))) / (params.gamma + 1.0)
    if params.local:
        inter = 0.5 * params.kappa * sum(float(np.sum(g * g)) for g in forward_diff(grid, u))
    else:
        inter = 0.5 * float(np.sum(u * b_eps(u, kernel)))
    return grid.cell_volume * (inter + bulk)


def entropy(u, params: ModelParams, grid: TorusGrid) -> float:
    c = params.homeostatic_density
    x = np.asarray(u, dtype=np.float64) / c
    return grid.cell_volume * float(np.sum(_xlogx(x) - x + 1.0))


def _mean(u, grid: TorusGrid) -> float:
    return grid.cell_volume * float(np.sum(u)) / grid.volume


def relative_entropy(u, grid: TorusGrid) -> float:
    """``int u log(u / mean(u))``; zero for constants, positive otherwise."""
    u = np.asarray(u, dtype=np.float64)
    ubar = _mean(u, grid)
    if not ubar > 0.0:
        raise ValidationError("relative entropy undefined for a zero-mass state")
    return grid.cell_volume * float(np.sum(_xlogx(u / ubar))) * ubar


def ckp_gap(u, grid: TorusGrid) -> float:
    """``4 |Omega| mean(u) Phi(u|mean) - ||u - mean||_1**2``, expected >= 0."""
    u = np.asarray(u, dtype=np.float64)
    ubar = _mean(u, grid)
    l1 = grid.cell_volume * float(np.sum(np.abs(u - ubar)))
    return 4.0 * grid.volume * ubar * relative_entropy(u, grid) - l1 * l1


def degiorgi_bound(params: ModelParams) -> float:
    return params.homeostatic_density + 2.0 * params.gamma ** (-1.0 / 3.0)


def degiorgi_excess(u, params: ModelParams) -> float:
    return max(0.0, float(np.max(u)) - degiorgi_bound(params))


def graph_residual(u, params: ModelParams, grid: TorusGrid) -> float:
    u = np.asarray(u, dtype=np.float64)
    return grid.cell_volume * float(np.sum(np.abs(u ** params.gamma * (1.0 - u))))


def _mean_face_divergence(grid: TorusGrid, a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """div(a grad v) with arithmetic-mean face coefficients."""
    out = np.zeros_like(v)
    for k in range(grid.dim):
        af = 0.5 * (a + np.roll(a, -1, axis=k))
        flux = af * (np.roll(v, -1, axis=k) - v) / grid.h
        out += (flux - np.roll(flux, 1, axis=k)) / grid.h
    return out


def complementarity_residual(u, params: ModelParams, kernel: Kernel) -> float:
    """``||p R||_1`` for the strong-form pressure operator

    R = Lap p + Lap(u^2)/(2 eps^2) - div(u grad(W*u))/eps^2 + u G(p).
    """
    grid = kernel.grid
    u = np.asarray(u, dtype=np.float64)
    eps2 = kernel.eps ** 2
    p = u ** params.gamma
    r = (laplacian(grid, p) + laplacian(grid, u * u) / (2.0 * eps2)
         - _mean_face_divergence(grid, u, convolve(kernel, u)) / eps2)
    if params.growth:
        r = r + u * (params.p_h - p)
    return grid.cell_volume * float(np.sum(np.abs(p * r)))


def entropy_dissipation(u, params: ModelParams, kernel: Kernel) -> tuple[float, float, float]:
    """Dissipation terms ``(nonlocal, porous, source)`` of the entropy identity.

    ``dPhi/dt = -(nonlocal + porous + source)``; all three are >= 0 (the
    source term is zero without growth). For the local variant the first
    term is ``kappa/c int |Lap u|^2``.
    """
    grid = kernel.grid
    u = np.asarray(u, dtype=np.float64)
    c = params.homeostatic_density
    vol = grid.cell_volume
    if params.local:
        lap = laplacian(grid, u)
        t_nl = params.kappa * vol * float(np.sum(lap * lap)) / c
    else:
        t_nl = vol * sum(float(np.sum(g * b_eps(g, kernel))) for g in grad(grid, u)) / c
    g_exp = (params.gamma + 1.0) / 2.0
    t_pm = (4.0 * params.gamma / ((params.gamma + 1.0) ** 2 * c)) * vol * sum(
        float(np.sum(g * g)) for g in grad(grid, u ** g_exp))
    if params.growth:
        logs = np.log(np.where(u > 0, u / c, 1.0))
        t_src = -vol * float(np.sum(u * logs * (params.p_h - u ** params.gamma))) / c
    else:
        t_src = 0.0
    return t_nl, t_pm, t_src


def flux_dissipation(u, params: ModelParams, kernel: Kernel) -> float:
    """``int u |grad mu|^2`` over faces with the stepper's upwind mobility."""
    grid = kernel.grid
    u = np.asarray(u, dtype=np.float64)
    mu = chemical_potential(u, params, kernel)
    return grid.cell_volume * core.upwind_dissipation(as2d(u), as2d(mu), grid.h)


def pairing_estimate(u_prev, u_next, dt: float, params: ModelParams, grid: TorusGrid) -> float:
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    u_next = np.asarray(u_next, dtype=np.float64)
    dudt = (u_next - np.asarray(u_prev, dtype=np.float64)) / dt
    return abs(grid.cell_volume * float(np.sum(dudt * u_next ** params.gamma)))


def tumor_zone(u, params: ModelParams, grid: TorusGrid) -> float:
    """Measure of ``{p > 1e-3 p_H}``."""
    p = np.asarray(u, dtype=np.float64) ** params.gamma
    return grid.cell_volume * float(np.count_nonzero(p > TUMOR_LEVEL * params.p_h))


def diagnostics(u, params: ModelParams, kernel: Kernel, t: float,
                u_prev=None, dt: float | None = None) -> DiagnosticsRecord:
    grid = kernel.grid
    u = np.asarray(u, dtype=np.float64)
    mass = grid.cell_volume * float(np.sum(u))
    mean = mass / grid.volume
    if mean > 0:
        rel = relative_entropy(u, grid)
        gap = ckp_gap(u, grid)
    else:
        rel = gap = math.nan
    if u_prev is not None and dt is not None and dt > 0:
        pairing = pairing_estimate(u_prev, u, dt, params, grid)
    else:
        pairing = math.nan
    t_nl, t_pm, t_src = entropy_dissipation(u, params, kernel)
    return DiagnosticsRecord(
        t=float(t), mass=mass, mean=mean,
        energy=energy(u, params, kernel), entropy=entropy(u, params, grid),
        entropy_relative=rel, min_u=float(u.min()), max_u=float(u.max()),
        ckp_gap=gap, degiorgi_excess=degiorgi_excess(u, params),
        graph_residual=graph_residual(u, params, grid),
        complementarity_residual=complementarity_residual(u, params, kernel),
        pairing=pairing, dissipation_flux=flux_dissipation(u, params, kernel),
        dissipation_entropy_nonlocal=t_nl, dissipation_entropy_porous=t_pm,
        dissipation_entropy_source=t_src, tumor_zone=tumor_zone(u, params, grid),
    )


def check_invariants(rec: DiagnosticsRecord, params: ModelParams, initial_mean: float,
                     mass_tol: float = 1e-10, ckp_tol: float = 1e-12,
                     check_degiorgi: bool = False) -> list[str]:
    """Return a description of every violated structural property."""
    out = []
    if rec.mass < 0:
        out.append(f"t={rec.t}: negative mass {rec.mass}")
    if rec.energy < 0:
        out.append(f"t={rec.t}: negative energy {rec.energy}")
    if rec.entropy < -1e-14:
        out.append(f"t={rec.t}: negative entropy {rec.entropy}")
    if not math.isnan(rec.ckp_gap) and rec.ckp_gap < -ckp_tol:
        out.append(f"t={rec.t}: CKP gap {rec.ckp_gap} < -{ckp_tol}")
    c = params.homeostatic_density
    if params.growth and initial_mean <= c and rec.mean > c + mass_tol:
        out.append(f"t={rec.t}: mean {rec.mean} exceeds p_H^(1/gamma)={c}")
    if check_degiorgi and rec.degiorgi_excess > 0:
        out.append(f"t={rec.t}: De Giorgi excess {rec.degiorgi_excess}")
    return out
