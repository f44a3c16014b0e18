"""Periodic grids, mollifier kernels and the discrete operators on them.

Fields are plain numpy arrays shaped like ``grid.shape``: ``(n,)`` in one
dimension, ``(n, n)`` in two. Every index is taken modulo ``n``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import core
from .errors import ValidationError

__all__ = [
    "TorusGrid", "Profile", "Kernel", "build_grid", "build_kernel",
    "check_field", "convolve", "grad", "forward_diff", "laplacian", "as2d",
]


@dataclass(frozen=True)
class TorusGrid:
    """Uniform cell-centred grid on the flat torus ``[0, L)^dim``."""

    dim: int
    n: int
    length: float = 1.0

    @property
    def h(self) -> float:
        return self.length / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def n_cells(self) -> int:
        return self.n ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @property
    def volume(self) -> float:
        """|Omega| = L**dim."""
        return self.length ** self.dim

    def coords(self) -> list[np.ndarray]:
        """Cell-centre coordinates, one meshgrid array per axis."""
        x = (np.arange(self.n) + 0.5) * self.h
        if self.dim == 1:
            return [x]
        return list(np.meshgrid(x, x, indexing="ij"))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def full(self, value: float) -> np.ndarray:
        return np.full(self.shape, float(value))


def build_grid(dim: int, n: int, length: float = 1.0) -> TorusGrid:
    if dim not in (1, 2):
        raise ValidationError(f"dim must be 1 or 2, got {dim}")
    if int(n) != n or n < 8:
        raise ValidationError(f"cells per axis must be an integer >= 8, got {n}")
    if n % 2:
        raise ValidationError(f"cells per axis must be even, got {n}")
    if not (length > 0 and math.isfinite(length)):
        raise ValidationError(f"axis length must be positive, got {length}")
    return TorusGrid(int(dim), int(n), float(length))


def check_field(grid: TorusGrid, u: np.ndarray, name: str = "field") -> np.ndarray:
    """Return ``u`` as float64 after checking shape and finiteness."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != grid.shape:
        raise ValidationError(f"{name} has shape {u.shape}, grid expects {grid.shape}")
    if not np.all(np.isfinite(u)):
        bad = int(np.flatnonzero(~np.isfinite(u))[0])
        raise ValidationError(f"{name} has a non-finite value at cell {bad}")
    return u


def as2d(u: np.ndarray) -> np.ndarray:
    """(n,) -> (1, n) view; 2-d arrays pass through. Backend layout."""
    u = np.ascontiguousarray(u, dtype=np.float64)
    return u.reshape(1, -1) if u.ndim == 1 else u


class Profile(str, enum.Enum):
    POLYBUMP = "polybump"
    WENDLAND = "wendland"

    def __call__(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        inside = r < 1.0
        if self is Profile.POLYBUMP:
            vals = (1.0 - r * r) ** 3
        else:
            vals = (1.0 - r) ** 4 * (4.0 * r + 1.0)
        return np.where(inside, vals, 0.0)


@dataclass(frozen=True)
class Kernel:
    """Discrete mollifier: integer offsets ``y`` with weights ``W(y)``.

    ``offsets`` has shape ``(K, dim)``; ``weights`` sums to one.
    """

    grid: TorusGrid
    eps: float
    profile: Profile
    offsets: np.ndarray
    weights: np.ndarray
    _oy: np.ndarray = field(repr=False, compare=False)
    _ox: np.ndarray = field(repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.weights)

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {tuple(int(v) for v in y): float(w) for y, w in zip(self.offsets, self.weights)}

    def fourier_multiplier(self, mode) -> float:
        """``sum_y W(y) cos(2 pi k.y h / L)`` for integer wave vector ``mode``."""
        k = np.atleast_1d(np.asarray(mode, dtype=np.float64))
        phase = 2.0 * np.pi * (self.offsets @ k) * self.grid.h / self.grid.length
        return float(np.sum(self.weights * np.cos(phase)))

    def second_moment_coeff(self) -> float:
        """C = sum_y W(y)|y|^2 / (2 d eps^2): B_eps ~ -C Laplacian for smooth u."""
        y2 = np.sum((self.offsets * self.grid.h) ** 2, axis=1)
        return float(np.sum(self.weights * y2) / (2 * self.grid.dim * self.eps ** 2))


def build_kernel(grid: TorusGrid, eps: float, profile: Profile | str = Profile.POLYBUMP) -> Kernel:
    profile = Profile(profile)
    h = grid.h
    tol = 1e-12 * max(eps, h)
    if not eps >= 4.0 * h - tol:
        raise ValidationError(f"eps={eps} below the resolution floor 4h={4.0 * h}")
    if not eps <= grid.length / 4.0 + tol:
        raise ValidationError(f"eps={eps} above the upper bound L/4={grid.length / 4.0}")
    reach = int(math.ceil(eps / h))
    rng = np.arange(-reach, reach + 1)
    if grid.dim == 1:
        offs = rng[:, None]
    else:
        yy, xx = np.meshgrid(rng, rng, indexing="ij")
        offs = np.stack([yy.ravel(), xx.ravel()], axis=1)
    r = np.sqrt(np.sum((offs * h) ** 2, axis=1)) / eps
    vals = profile(r)
    keep = vals > 0.0
    offs = np.ascontiguousarray(offs[keep], dtype=np.int_)
    vals = vals[keep]
    weights = vals / vals.sum()
    if grid.dim == 1:
        oy = np.zeros(len(offs), dtype=np.int_)
        ox = np.ascontiguousarray(offs[:, 0])
    else:
        oy = np.ascontiguousarray(offs[:, 0])
        ox = np.ascontiguousarray(offs[:, 1])
    return Kernel(grid, float(eps), profile, offs, weights, oy, ox)


def convolve(kernel: Kernel, u: np.ndarray) -> np.ndarray:
    """Exact circular convolution ``(W * u)(x) = sum_y W(y) u(x - y)``."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != kernel.grid.shape:
        raise ValidationError(f"field shape {u.shape} does not match kernel grid {kernel.grid.shape}")
    return core.convolve(as2d(u), kernel._oy, kernel._ox, kernel.weights).reshape(u.shape)


def grad(grid: TorusGrid, u: np.ndarray) -> list[np.ndarray]:
    """Periodic central differences, one array per axis."""
    return [(np.roll(u, -1, axis=k) - np.roll(u, 1, axis=k)) / (2.0 * grid.h)
            for k in range(grid.dim)]


def forward_diff(grid: TorusGrid, u: np.ndarray) -> list[np.ndarray]:
    return [(np.roll(u, -1, axis=k) - u) / grid.h for k in range(grid.dim)]


def laplacian(grid: TorusGrid, u: np.ndarray) -> np.ndarray:
    """3-point (1-d) / 5-point (2-d) periodic stencil."""
    u = np.asarray(u, dtype=np.float64)
    return core.laplacian(as2d(u), grid.h).reshape(u.shape)
