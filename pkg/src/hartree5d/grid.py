"""Radial grids on (0, r_max] with the 5d measure r^4 dr.

Fields are plain numpy arrays of nodal values (real or complex).  All
differential operators act on the scaled variable u = r^2 f, in which the
sector Laplacian becomes u'' - (l+1)(l+2) u / r^2.  A fourth-order
five-point stencil with parity ghosts at the origin and homogeneous
Dirichlet ghosts beyond r_max gives a symmetric pentadiagonal matrix.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

SURFACE_AREA = 8.0 * np.pi**2 / 3.0  # |S^4|
MIN_POINTS = 16


@dataclass(frozen=True)
class RadialGrid:
    """Uniform nodes r_i = i*h, i = 1..N, with trapezoid weights for r^4 dr.

    The trapezoid rule is spectrally accurate for smooth even integrands,
    which covers every regular radial field; the last node carries half a
    cell.
    """

    n_points: int
    r_max: float
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    cell_weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n_points < 1 or not self.r_max > 0:
            raise ValueError("grid needs n_points >= 1 and r_max > 0")
        h = self.r_max / self.n_points
        r = h * np.arange(1, self.n_points + 1, dtype=float)
        w = h * r**4
        w[-1] *= 0.5
        r.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "nodes", r)
        object.__setattr__(self, "cell_weights", w)

    @property
    def h(self) -> float:
        return self.r_max / self.n_points

    @property
    def surface_area(self) -> float:
        return SURFACE_AREA

    @property
    def measure(self) -> np.ndarray:
        """Full 5d quadrature weights |S^4| w_i."""
        return SURFACE_AREA * self.cell_weights

    def integrate(self, f) -> float | complex:
        f = np.asarray(f)
        if f.ndim == 0:
            f = np.full(self.n_points, f)
        _check_shape(self, f)
        return SURFACE_AREA * np.dot(self.cell_weights, f)

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        """Real L^2 inner product Re int f conj(g) over R^5."""
        return float(np.real(self.integrate(f * np.conj(g))))

    def digest(self) -> str:
        key = f"radial-grid:{self.n_points}:{self.r_max!r}".encode()
        return hashlib.sha256(key).hexdigest()

    def same_as(self, other: "RadialGrid") -> bool:
        return self.n_points == other.n_points and self.r_max == other.r_max


def make_grid(n_points: int, r_max: float) -> RadialGrid:
    if int(n_points) != n_points or n_points < MIN_POINTS:
        raise ValueError(f"n_points must be an integer >= {MIN_POINTS}, got {n_points}")
    if not np.isfinite(r_max) or r_max <= 0:
        raise ValueError(f"r_max must be positive, got {r_max}")
    return RadialGrid(int(n_points), float(r_max))


def integrate(grid: RadialGrid, f) -> float | complex:
    return grid.integrate(f)


def _check_shape(grid: RadialGrid, f: np.ndarray) -> None:
    if f.shape != (grid.n_points,):
        raise ValueError(f"field of shape {f.shape} does not live on a grid of {grid.n_points} nodes")


# -- differential operators -------------------------------------------------

_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def _check_sector(l: int) -> int:
    if int(l) != l or l < 0:
        raise ValueError(f"sector index must be a nonnegative integer, got {l}")
    return int(l)


def _stencil_apply(v: np.ndarray, coeffs: np.ndarray, ghost_m1, ghost_0) -> np.ndarray:
    n = v.shape[0]
    p = np.zeros(n + 4, dtype=v.dtype)
    p[0] = ghost_m1
    p[1] = ghost_0
    p[2 : n + 2] = v
    return sum(c * p[k : k + n] for k, c in enumerate(coeffs))


def apply_u_operator(grid: RadialGrid, u: np.ndarray, l: int) -> np.ndarray:
    """T_l u = u'' - (l+1)(l+2) u / r^2 on the scaled variable u = r^2 f."""
    l = _check_sector(l)
    h = grid.h
    r = grid.nodes
    s = 1.0 if l % 2 == 0 else -1.0
    d2 = _stencil_apply(u, _D2, s * u[0], 0.0) / h**2
    return d2 - (l + 1) * (l + 2) * u / r**2


def apply_laplacian_sector(grid: RadialGrid, f: np.ndarray, l: int = 0) -> np.ndarray:
    """Delta_(l) f = f'' + (4/r) f' - l(l+3) f / r^2, fourth-order accurate.

    The last node carries half a cell, so its row is scaled to keep the
    operator self-adjoint for the grid quadrature.
    """
    f = np.asarray(f)
    _check_shape(grid, f)
    r = grid.nodes
    out = apply_u_operator(grid, r**2 * f, l) / r**2
    out[-1] *= 2.0
    return out


def laplacian_sym_sparse(grid: RadialGrid, l: int = 0) -> sp.csr_matrix:
    """Delta_(l) in the basis y_i = sqrt(w_i) f_i, as a symmetric sparse matrix."""
    l = _check_sector(l)
    n, h, r = grid.n_points, grid.h, grid.nodes
    s = 1.0 if l % 2 == 0 else -1.0
    main = np.full(n, -30.0)
    main[0] += -s
    off1 = np.full(n - 1, 16.0)
    off2 = np.full(n - 2, -1.0)
    t = sp.diags([off2, off1, main, off1, off2], [-2, -1, 0, 1, 2], shape=(n, n), format="lil")
    t = t.tocsr() / (12.0 * h**2) - sp.diags((l + 1) * (l + 2) / r**2)
    # y = sqrt(w) f = sqrt(h) u except at the half cell
    scale = np.ones(n)
    scale[-1] = np.sqrt(2.0)
    d = sp.diags(scale)
    return (d @ t @ d).tocsr()


def laplacian_sym_dense(grid: RadialGrid, l: int = 0) -> np.ndarray:
    return laplacian_sym_sparse(grid, l).toarray()


def to_sym(grid: RadialGrid, f: np.ndarray) -> np.ndarray:
    return np.sqrt(grid.cell_weights) * f


def from_sym(grid: RadialGrid, y: np.ndarray) -> np.ndarray:
    return y / np.sqrt(grid.cell_weights)


def radial_derivative(grid: RadialGrid, f: np.ndarray, parity: int = 1) -> np.ndarray:
    """Fourth-order d/dr with even (parity=+1) or odd (-1) extension through 0.

    Dirichlet ghosts beyond r_max.
    """
    f = np.asarray(f)
    _check_shape(grid, f)
    n = f.shape[0]
    p = np.zeros(n + 4, dtype=f.dtype)
    p[2 : n + 2] = f
    p[0] = parity * f[0]  # f(-h)
    p[1] = _even_origin(f) if parity > 0 else 0.0  # f(0)
    c = _D1
    return (c[0] * p[0:n] + c[1] * p[1 : n + 1] + c[3] * p[3 : n + 3] + c[4] * p[4 : n + 4]) / grid.h


def _even_origin(f: np.ndarray) -> float:
    # even interpolant a + b r^2 + c r^4 through h, 2h, 3h evaluated at 0
    return (15.0 * f[0] - 6.0 * f[1] + f[2]) / 10.0


# -- norms ------------------------------------------------------------------


def grad_sq(grid: RadialGrid, f: np.ndarray) -> float:
    """int |grad f|^2 for a radial field, as the Dirichlet form of Delta_(0)."""
    f = np.asarray(f)
    lap = apply_laplacian_sector(grid, f, 0)
    return float(-np.real(grid.integrate(lap * np.conj(f))))


def norms(grid: RadialGrid, f: np.ndarray) -> tuple[float, float, float]:
    f = np.asarray(f)
    l2sq = float(np.real(grid.integrate(np.abs(f) ** 2)))
    g2 = max(grad_sq(grid, f), 0.0)
    return np.sqrt(l2sq), np.sqrt(g2), np.sqrt(l2sq + g2)


def h1_inner(grid: RadialGrid, f: np.ndarray, g: np.ndarray) -> float:
    """Re <f, g>_{H^1} = Re int (f conj g + grad f . conj grad g)."""
    lap = apply_laplacian_sector(grid, f, 0)
    return grid.inner(f, g) - grid.inner(lap, g)
