"""Threshold dynamics laboratory for the 5d focusing Hartree equation.

    i u_t + Delta u + (|x|^-3 * |u|^2) u = 0,   u radial in R^5.
"""

__version__ = "0.1.0"

from .grid import RadialGrid, integrate, make_grid, norms  # noqa: E402
from .ground_state import GroundState, solve_ground_state  # noqa: E402
from .linearized import SpectralData, compute_e0  # noqa: E402

__all__ = [
    "__version__",
    "RadialGrid",
    "make_grid",
    "integrate",
    "norms",
    "GroundState",
    "solve_ground_state",
    "SpectralData",
    "compute_e0",
]
