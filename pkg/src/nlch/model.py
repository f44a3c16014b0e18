"""Right-hand side of the nonlocal degenerate Cahn-Hilliard equation.

    du/dt - div(u grad mu) = u G(p),   mu = p + B_eps(u),   p = u**gamma

with ``B_eps(u) = (u - W*u) / eps**2`` and ``G(p) = p_H - p`` (or zero).
The local variant replaces ``B_eps(u)`` by ``-kappa * Laplacian(u)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._backend import core
from .errors import ValidationError
from .grid import Kernel, TorusGrid, as2d, check_field, convolve, laplacian


class Source(str, enum.Enum):
    GROWTH = "growth"
    NONE = "none"


class Variant(str, enum.Enum):
    NONLOCAL = "nonlocal"
    LOCAL = "local"


@dataclass(frozen=True)
class ModelParams:
    gamma: float
    p_h: float
    eps: float
    source: Source = Source.GROWTH
    variant: Variant = Variant.NONLOCAL
    # surface-tension weight of the local variant, mu = p - kappa * Lap(u)
    kappa: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "source", Source(self.source))
        object.__setattr__(self, "variant", Variant(self.variant))
        if not (self.gamma >= 1.0 and math.isfinite(self.gamma)):
            raise ValidationError(f"gamma must be >= 1, got {self.gamma}")
        if not (self.p_h > 0.0 and math.isfinite(self.p_h)):
            raise ValidationError(f"p_H must be positive, got {self.p_h}")
        if not (self.eps > 0.0):
            raise ValidationError(f"eps must be positive, got {self.eps}")
        if not (self.kappa > 0.0):
            raise ValidationError(f"kappa must be positive, got {self.kappa}")

    @property
    def homeostatic_density(self) -> float:
        """p_H**(1/gamma), the density at which G vanishes."""
        return self.p_h ** (1.0 / self.gamma)

    @property
    def growth(self) -> bool:
        return self.source is Source.GROWTH

    @property
    def local(self) -> bool:
        return self.variant is Variant.LOCAL


@dataclass
class ModelState:
    u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        if not np.all(np.isfinite(self.u)):
            raise ValidationError("state contains non-finite values")
        if np.any(self.u < 0.0):
            idx = int(np.argmin(self.u))
            raise ValidationError(f"negative density {self.u.flat[idx]!r} at cell {idx}")


def _check_nonnegative(u: np.ndarray, what: str = "density") -> None:
    if np.any(u < 0.0):
        idx = int(np.argmin(u))
        raise ValidationError(f"negative {what} {u.flat[idx]!r} at cell {idx}")


def _match(params: ModelParams, kernel: Kernel) -> None:
    if not math.isclose(params.eps, kernel.eps, rel_tol=1e-12):
        raise ValidationError(f"params.eps={params.eps} but kernel.eps={kernel.eps}")


def pressure(u: np.ndarray, params: ModelParams) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    _check_nonnegative(u)
    return u ** params.gamma


def b_eps(u: np.ndarray, kernel: Kernel) -> np.ndarray:
    """``(u - W*u) / eps**2``, summed as ``sum_y W(y)(u(x) - u(x-y))`` so that
    constants map to exactly zero."""
    u = np.asarray(u, dtype=np.float64)
    check_field(kernel.grid, u, "u")
    d = core.nonlocal_difference(as2d(u), kernel._oy, kernel._ox, kernel.weights)
    return d.reshape(u.shape) / kernel.eps ** 2


def chemical_potential(u: np.ndarray, params: ModelParams, kernel: Kernel) -> np.ndarray:
    _match(params, kernel)
    p = pressure(u, params)
    if params.local:
        return p - params.kappa * laplacian(kernel.grid, u)
    return p + b_eps(u, kernel)


def flux_divergence(u: np.ndarray, mu: np.ndarray, grid: TorusGrid) -> np.ndarray:
    """Conservative upwind finite-volume ``div(u grad mu)``.

    Face mobility is the donor cell's density: the cell with the larger
    ``mu`` loses mass across that face.
    """
    u = check_field(grid, u, "u")
    mu = check_field(grid, mu, "mu")
    _check_nonnegative(u, "mobility")
    return core.flux_divergence(as2d(u), as2d(mu), grid.h).reshape(u.shape)


def source_term(u: np.ndarray, params: ModelParams) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if not params.growth:
        return np.zeros_like(u)
    return u * (params.p_h - pressure(u, params))


def rhs(state, params: ModelParams, kernel: Kernel) -> np.ndarray:
    """``div(u grad mu) + u G(p)`` for a ModelState or a bare density array."""
    u = state.u if isinstance(state, ModelState) else np.asarray(state, dtype=np.float64)
    mu = chemical_potential(u, params, kernel)
    return flux_divergence(u, mu, kernel.grid) + source_term(u, params)
