"""Radial reductions of the 5d convolution |x|^-3 * f.

For a density F(s) Y_l on the degree-l harmonic sector,

    (|x|^-3 * F Y_l)(r) = 8 pi^2 / (2l+3) * int_0^inf k_l(r, s) F(s) s^4 ds * Y_l,
    k_l(r, s) = min(r, s)^l / max(r, s)^(l+3),

which follows from the Gegenbauer expansion of |x - y|^-3 and Funk-Hecke.
The integral is evaluated with the grid weights by prefix/suffix sums.  The
kernel has a kink on the diagonal; the first Euler-Maclaurin correction,
-h^2 (2l+3)/12 * F(r), restores fourth-order accuracy and keeps the discrete
operator symmetric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import RadialGrid

MAX_SECTOR = 16
NEWTON_COEFFICIENT = 8.0 * np.pi**2 / 3.0


@dataclass(frozen=True)
class SectorKernelSpec:
    """Multipole data of sector l for the linearized term 2 (|x|^-3 * (Q f)) Q."""

    l: int

    def __post_init__(self) -> None:
        if int(self.l) != self.l or not 0 <= self.l <= MAX_SECTOR:
            raise ValueError(f"sector index must be in [0, {MAX_SECTOR}], got {self.l}")

    @property
    def potential_coefficient(self) -> float:
        """8 pi^2 / (2l+3): factor of the single convolution."""
        return 8.0 * np.pi**2 / (2 * self.l + 3)

    @property
    def coefficient(self) -> float:
        """16 pi^2 / (2l+3): factor of the doubled exchange term."""
        return 2.0 * self.potential_coefficient

    @staticmethod
    def degeneracy_factor(l: int) -> int:
        """(2l+3)(l+2)(l+1)/6; equals 1, 5, 14 for l = 0, 1, 2."""
        return (2 * l + 3) * (l + 2) * (l + 1) // 6

    def kernel(self, r, s):
        r = np.asarray(r, dtype=float)
        s = np.asarray(s, dtype=float)
        lo = np.minimum(r, s)
        hi = np.maximum(r, s)
        return (lo / hi) ** self.l / hi**3


def sector_integral(grid: RadialGrid, F: np.ndarray, l: int) -> np.ndarray:
    """I_l[F](r_i) = int_0^r_max k_l(r_i, s) F(s) s^4 ds, O(N) and O(h^4).

    Uses k_l(r, s) = (s/r)^l r^-3 for s <= r and (r/s)^l s^-3 for s >= r;
    the powers are formed from ratios so nothing overflows for l <= 16.
    """
    if not 0 <= l <= MAX_SECTOR:
        raise ValueError(f"sector index must be in [0, {MAX_SECTOR}], got {l}")
    r = grid.nodes
    wf = grid.cell_weights * F
    if l == 0:
        inner = np.cumsum(wf) / r**3
        outer = np.cumsum((wf / r**3)[::-1])[::-1]
        diag = wf / r**3
    else:
        # scale by r_max to keep the powers O(1)
        x = r / grid.r_max
        inner = np.cumsum(wf * x**l) / (x**l * r**3)
        outer = np.cumsum((wf / (x**l * r**3))[::-1])[::-1] * x**l
        diag = wf / r**3
    corr = grid.h**2 * (2 * l + 3) / 12.0 * F
    return inner + outer - diag - corr


def sector_kernel_matrix(grid: RadialGrid, l: int) -> np.ndarray:
    """Dense M with (M F)_i = I_l[F](r_i); the same quadrature as sector_integral."""
    spec = SectorKernelSpec(l)
    r = grid.nodes
    k = spec.kernel(r[:, None], r[None, :])
    m = k * grid.cell_weights[None, :]
    m[np.diag_indices_from(m)] -= grid.h**2 * (2 * l + 3) / 12.0
    return m


def newton_convolve(grid: RadialGrid, f: np.ndarray) -> np.ndarray:
    """(|x|^-3 * f)(r) = (8 pi^2/3) [r^-3 int_0^r f s^4 ds + int_r^R f s ds]."""
    f = np.asarray(f)
    if np.iscomplexobj(f):
        return newton_convolve(grid, f.real) + 1j * newton_convolve(grid, f.imag)
    return NEWTON_COEFFICIENT * sector_integral(grid, f, 0)


def sector_potential_apply(grid: RadialGrid, l: int, f: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """(V_(l) f)(r) = -(|x|^-3 * Q^2) f - 16 pi^2/(2l+3) * I_l[Q f](r) Q(r)."""
    spec = SectorKernelSpec(l)
    potential = newton_convolve(grid, Q * Q)
    return -potential * f - spec.coefficient * sector_integral(grid, Q * f, l) * Q


def z_functional(grid: RadialGrid, u: np.ndarray) -> float:
    """Z_H(u) = int (|x|^-3 * |u|^2) |u|^2."""
    rho = np.abs(np.asarray(u)) ** 2
    return float(grid.integrate(newton_convolve(grid, rho) * rho))


def exchange_apply(grid: RadialGrid, f: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """2 (|x|^-3 * (Q f)) Q, the radial exchange term of L_+."""
    return 2.0 * newton_convolve(grid, Q * f) * Q
