"""Nonlocal degenerate Cahn-Hilliard equation with a growth source on the torus.

The hot loops (convolution, upwind flux, conjugate gradients, the time loop)
live in a compiled extension; ``NLCH_PURE_PYTHON=1`` or a failed build selects
the numpy fallback.
"""
from ._backend import COMPILED
from .errors import SimulationError, ValidationError
from .grid import Kernel, Profile, TorusGrid, build_grid, build_kernel, convolve, grad, laplacian
from .model import ModelParams, ModelState, Source, Variant, chemical_potential, pressure, rhs
from .stepper import Scheme, SolverConfig, run, stable_dt, step_explicit, step_semi_implicit

__version__ = "0.1.0"
