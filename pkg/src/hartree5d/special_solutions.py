"""Approximate special solutions V_k = sum_{j<=k} q^j Z_j, q = e^{-e0 t}.

Every field that is polynomial in q is stored as a coefficient array c of
shape (degree + 1, N) with c[j] the q^j coefficient.  Since q is real,
conjugation acts coefficientwise and R(h) closes on these arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sl
from scipy.linalg.lapack import dgecon
from scipy.optimize import brentq

from .grid import RadialGrid, from_sym, norms, to_sym
from .ground_state import GroundState, _fit_rate
from .hartree_potential import newton_convolve
from .linearized import (
    SpectralData,
    apply_block,
    assemble_sector,
    block_matrix,
    nonlinear_remainder,
)

MAX_ORDER = 6
RCOND_MIN = 1e-12


class ResolventError(RuntimeError):
    pass


def _poly_mul(a: np.ndarray, b: np.ndarray, deg: int) -> np.ndarray:
    """Coefficientwise product of two q-polynomials of fields, truncated to deg."""
    out = np.zeros((deg + 1, a.shape[1]), dtype=np.result_type(a, b))
    for i in range(min(a.shape[0], deg + 1)):
        if not np.any(a[i]):
            continue
        for j in range(min(b.shape[0], deg + 1 - i)):
            out[i + j] += a[i] * b[j]
    return out


def _poly_newton(grid: RadialGrid, a: np.ndarray) -> np.ndarray:
    return np.array([newton_convolve(grid, row) for row in a])


def remainder_coefficients(gs: GroundState, Z: np.ndarray, deg: int) -> np.ndarray:
    """q-coefficients of R(h) for h = sum_j q^j Z[j], up to q^deg."""
    grid, Q = gs.grid, gs.Q
    rho = np.real(_poly_mul(Z, np.conj(Z), deg))
    k_rho = _poly_newton(grid, rho)
    k_cross = _poly_newton(grid, Q * np.real(Z[: deg + 1]))
    out = np.zeros((deg + 1, grid.n_points), dtype=complex)
    out += k_rho * Q
    out += 2.0 * _poly_mul(k_cross, Z, deg)
    out += _poly_mul(k_rho, Z, deg)
    return 1j * out


class BlockResolvent:
    """Factorized (L - sigma) on complex fields via the real 2N block matrix."""

    def __init__(self, gs: GroundState, sigma: float, plus=None, minus=None):
        plus = plus or assemble_sector(0, "plus", gs)
        minus = minus or assemble_sector(0, "minus", gs)
        n = gs.grid.n_points
        a = block_matrix(plus, minus) - sigma * np.eye(2 * n)
        self.grid = gs.grid
        self.sigma = sigma
        with np.errstate(all="raise"):
            try:
                self._lu = sl.lu_factor(a, check_finite=True)
            except (sl.LinAlgError, FloatingPointError) as exc:
                raise ResolventError(f"singular resolvent at sigma = {sigma}") from exc
        # pivots do not reveal near-singularity; the LAPACK condition estimate does
        rcond, _ = dgecon(self._lu[0], np.linalg.norm(a, 1), norm="1")
        self.rcond = float(rcond)
        if self.rcond < RCOND_MIN:
            raise ResolventError(f"resolvent at sigma = {sigma} is numerically singular (rcond {rcond:.1e})")

    def solve(self, f: np.ndarray) -> np.ndarray:
        n = self.grid.n_points
        b = np.concatenate([to_sym(self.grid, f.real), to_sym(self.grid, f.imag)])
        x = sl.lu_solve(self._lu, b)
        return from_sym(self.grid, x[:n]) + 1j * from_sym(self.grid, x[n:])


@dataclass(frozen=True)
class ApproxSolution:
    A: float
    k: int
    e0: float
    Z: np.ndarray = field(repr=False)  # shape (k + 1, N); Z[0] = 0
    gs: GroundState = field(repr=False)

    @property
    def grid(self) -> RadialGrid:
        return self.gs.grid

    def profiles(self) -> list[np.ndarray]:
        return [self.Z[j] for j in range(1, self.k + 1)]

    def evaluate(self, t: float) -> np.ndarray:
        q = np.exp(-self.e0 * t)
        powers = q ** np.arange(self.k + 1)
        return powers @ self.Z

    def time_derivative(self, t: float) -> np.ndarray:
        q = np.exp(-self.e0 * t)
        j = np.arange(self.k + 1)
        return (-self.e0 * j * q**j) @ self.Z

    def residual(self, t: float) -> np.ndarray:
        """eps_k = d_t V + L V - R(V) by direct field arithmetic."""
        v = self.evaluate(t)
        return self.time_derivative(t) + apply_block(self.gs, v) - nonlinear_remainder(self.gs, v)

    def residual_coefficients(self) -> np.ndarray:
        """q-coefficients of eps_k, degrees 0..3k."""
        gs = self.gs
        deg = 3 * self.k
        out = -remainder_coefficients(gs, self.Z, deg)
        for j in range(1, self.k + 1):
            out[j] += apply_block(gs, self.Z[j]) - j * self.e0 * self.Z[j]
        return out


def build_profiles(A: float, k: int, sd: SpectralData, gs: GroundState | None = None) -> ApproxSolution:
    """Z_1 = A Y_+ and Z_{j+1} = (L - (j+1) e0)^{-1} [R(V_j)]_{j+1}."""
    gs = gs or sd.gs
    if int(k) != k or not 1 <= k <= MAX_ORDER:
        raise ValueError(f"order k must be in [1, {MAX_ORDER}], got {k}")
    n = gs.grid.n_points
    Z = np.zeros((k + 1, n), dtype=complex)
    Z[1] = A * sd.y_plus
    if A == 0 or k == 1:
        return ApproxSolution(float(A), int(k), sd.e0, Z, gs)
    plus = assemble_sector(0, "plus", gs)
    minus = assemble_sector(0, "minus", gs)
    for j in range(1, k):
        rhs = remainder_coefficients(gs, Z[: j + 1], j + 1)[j + 1]
        resolvent = BlockResolvent(gs, (j + 1) * sd.e0, plus, minus)
        Z[j + 1] = resolvent.solve(rhs)
    return ApproxSolution(float(A), int(k), sd.e0, Z, gs)


@dataclass(frozen=True)
class ResidualSeries:
    times: np.ndarray
    norms: np.ndarray
    slope: float


def residual_series(ap: ApproxSolution, times) -> ResidualSeries:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be an increasing sequence of at least two values")
    vals = np.array([norms(ap.grid, ap.residual(t))[2] for t in times])
    slope = float(np.polyfit(times, np.log(vals), 1)[0]) if np.all(vals > 0) else float("nan")
    return ResidualSeries(times, vals, slope)


def profile_decay_rates(ap: ApproxSolution, window=(6.0, 16.0)) -> list[float]:
    r = ap.grid.nodes
    return [_fit_rate(r, np.abs(z), *window) for z in ap.profiles()]


def default_t0(ap: ApproxSolution, fraction: float = 0.1) -> float:
    """Smallest t with ||V_k(t)||_{H^1} = fraction * ||Q||_{H^1}."""
    grid = ap.grid
    target = fraction * norms(grid, ap.gs.Q)[2]

    def gap(t):
        return norms(grid, ap.evaluate(t))[2] - target

    hi = 1.0 / ap.e0
    while gap(hi) > 0:
        hi *= 2.0
        if hi > 1e4:
            raise ValueError("perturbation never becomes small")
    lo = hi
    while gap(lo) < 0 and lo > -50.0 / ap.e0:
        lo -= 1.0 / ap.e0
    return float(brentq(gap, lo, hi, xtol=1e-14))


@dataclass(frozen=True)
class InitialData:
    u0: np.ndarray = field(repr=False)
    sign: int
    t0: float
    k: int
    grad_gap: float  # ||grad u0||^2 - ||grad Q||^2
    mass_defect: float
    energy_defect: float


def qpm_initial_data(
    sign: int,
    t0: float | None,
    k: int,
    sd: SpectralData,
    gs: GroundState | None = None,
    max_fraction: float = 0.2,
) -> InitialData:
    """u0 = Q + V_k^{A=sign}(t0), the order-k approximation of Q^{+-} at t0."""
    from .evolution import energy  # local import: evolution depends on this module

    gs = gs or sd.gs
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    ap = build_profiles(float(sign), k, sd, gs)
    if t0 is None:
        t0 = default_t0(ap)
    grid = gs.grid
    v = ap.evaluate(t0)
    if norms(grid, v)[2] > max_fraction * norms(grid, gs.Q)[2]:
        raise ValueError(f"t0 = {t0} too small: perturbation is not perturbative")
    u0 = gs.Q + v
    g = norms(grid, u0)[1] ** 2
    m = float(grid.integrate(np.abs(u0) ** 2).real)
    return InitialData(
        u0=u0,
        sign=sign,
        t0=float(t0),
        k=int(k),
        grad_gap=g - gs.grad_sq,
        mass_defect=m - gs.mass,
        energy_defect=energy(grid, u0) - gs.energy,
    )
