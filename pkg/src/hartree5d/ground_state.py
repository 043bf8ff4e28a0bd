"""Ground state of -Q + Delta Q + (|x|^-3 * Q^2) Q = 0 by Petviashvili iteration."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import RadialGrid, apply_laplacian_sector, grad_sq, laplacian_sym_sparse
from .hartree_potential import newton_convolve, z_functional

DEFAULT_WINDOW = (10.0, 22.0)
YUKAWA_POWER = 2.0


class GroundStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class GroundState:
    grid: RadialGrid
    Q: np.ndarray = field(repr=False)
    mass: float
    grad_sq: float
    z_h: float
    energy: float
    c_gn: float
    decay_rate: float
    residual: float
    iterations: int

    @property
    def potential(self) -> np.ndarray:
        """V = |x|^-3 * Q^2."""
        return newton_convolve(self.grid, self.Q**2)

    def certificate(self) -> dict:
        return {
            "n_points": self.grid.n_points,
            "r_max": self.grid.r_max,
            "mass": self.mass,
            "grad_sq": self.grad_sq,
            "z_h": self.z_h,
            "energy": self.energy,
            "c_gn": self.c_gn,
            "residual": self.residual,
            "decay_rate": self.decay_rate,
            "iterations": self.iterations,
            "grad_sq_over_mass": self.grad_sq / self.mass,
            "z_h_over_mass": self.z_h / self.mass,
        }


class HelmholtzSolver:
    """Factorized (1 - Delta_(0)) in the symmetrized basis."""

    def __init__(self, grid: RadialGrid):
        self.grid = grid
        a = sp.identity(grid.n_points, format="csc") - laplacian_sym_sparse(grid, 0).tocsc()
        self._lu = spla.splu(a)
        self._sqrt_w = np.sqrt(grid.cell_weights)

    def solve(self, f: np.ndarray) -> np.ndarray:
        return self._lu.solve(self._sqrt_w * f) / self._sqrt_w


def equation_residual(grid: RadialGrid, Q: np.ndarray, omega: float = 1.0) -> float:
    """L^2 norm of -omega Q + Delta Q + (|x|^-3 * Q^2) Q."""
    res = -omega * Q + apply_laplacian_sector(grid, Q, 0) + newton_convolve(grid, Q**2) * Q
    return float(np.sqrt(grid.integrate(res**2)))


def solve_ground_state(
    grid: RadialGrid,
    tol: float = 1e-10,
    max_iter: int = 500,
    initial: np.ndarray | None = None,
) -> GroundState:
    if not 1e-14 < tol < 1e-4:
        raise ValueError(f"tol must lie in (1e-14, 1e-4), got {tol}")
    r = grid.nodes
    if initial is None:
        initial = np.exp(-(r**2))
        initial = initial / np.sqrt(grid.integrate(initial**2))
    Q = np.array(initial, dtype=float)
    if np.any(Q < 0) or not np.any(Q > 0):
        raise ValueError("initial guess must be nonnegative and nonzero")

    helm = HelmholtzSolver(grid)
    residual = np.inf
    for it in range(1, max_iter + 1):
        nonlin = newton_convolve(grid, Q**2) * Q
        lhs = Q - apply_laplacian_sector(grid, Q, 0)
        num = grid.integrate(lhs * Q)
        den = grid.integrate(nonlin * Q)
        if not den > 1e-300:
            raise GroundStateError("iteration collapsed to the zero field")
        s = num / den
        Q = s**1.5 * helm.solve(nonlin)
        if not np.all(np.isfinite(Q)) or np.max(np.abs(Q)) < 1e-200:
            raise GroundStateError("iteration collapsed to the zero field")
        residual = equation_residual(grid, Q)
        if residual < tol:
            break
    else:
        raise GroundStateError(f"no convergence after {max_iter} iterations (residual {residual:.3e})")

    if np.any(Q <= 0):
        raise GroundStateError("converged profile is not positive")
    return _with_invariants(grid, Q, residual, it)


def ground_state_from_profile(grid: RadialGrid, Q: np.ndarray) -> GroundState:
    """Rebuild the certificate of a stored profile without iterating."""
    Q = np.array(Q, dtype=float)
    if Q.shape != (grid.n_points,) or np.any(Q <= 0):
        raise GroundStateError("stored profile must be positive and live on the grid")
    return _with_invariants(grid, Q, equation_residual(grid, Q), 0)


def _with_invariants(grid: RadialGrid, Q: np.ndarray, residual: float, iterations: int) -> GroundState:
    Q.setflags(write=False)
    mass = float(grid.integrate(Q**2))
    g = grad_sq(grid, Q)
    z = z_functional(grid, Q)
    c_gn = z / (g**1.5 * mass**0.5)
    lo, hi = DEFAULT_WINDOW
    rate = _fit_rate(grid.nodes, Q, lo, hi) if hi < grid.r_max - 5.0 else float("nan")
    return GroundState(
        grid=grid,
        Q=Q,
        mass=mass,
        grad_sq=g,
        z_h=z,
        energy=0.5 * g - 0.25 * z,
        c_gn=c_gn,
        decay_rate=rate,
        residual=residual,
        iterations=iterations,
    )


def gn_constants(gs: GroundState) -> tuple[float, float]:
    """Sharp Gagliardo-Nirenberg constant and J(Q) = 1 / C_GN."""
    return gs.c_gn, 1.0 / gs.c_gn


def gn_functional(grid: RadialGrid, u: np.ndarray) -> float:
    """J(u) = ||grad u||^3 ||u|| / Z_H(u)."""
    m = float(np.real(grid.integrate(np.abs(u) ** 2)))
    g = grad_sq(grid, u)
    return g**1.5 * m**0.5 / z_functional(grid, u)


def _fit_rate(r: np.ndarray, f: np.ndarray, lo: float, hi: float, power: float = YUKAWA_POWER) -> float:
    sel = (r >= lo) & (r <= hi)
    f = np.abs(f[sel])
    if np.count_nonzero(sel) < 2 or np.any(f <= 0):
        raise ValueError("fit window holds too few nonzero samples")
    slope = np.polyfit(r[sel], -np.log(r[sel] ** power * f), 1)[0]
    return float(slope)


def decay_rate_fit(
    gs: GroundState | tuple[RadialGrid, np.ndarray],
    window=DEFAULT_WINDOW,
    algebraic_power: float = YUKAWA_POWER,
) -> float:
    """Exponential rate a in f ~ r^-p e^{-a r}: least-squares slope of -log(r^p |f|).

    With algebraic_power = 0 this is the bare slope of -log f.  The default
    p = 2 removes the prefactor of the 5d Yukawa tail e^{-r}/r^2, which
    otherwise biases the slope by about 2/r.
    """
    grid, f = (gs.grid, gs.Q) if isinstance(gs, GroundState) else gs
    lo, hi = window
    if not (5.0 < lo < hi < grid.r_max - 5.0):
        raise ValueError(f"window {window} must lie inside (5, r_max - 5)")
    return _fit_rate(grid.nodes, np.asarray(f), lo, hi, algebraic_power)
