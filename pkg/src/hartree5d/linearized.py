"""Linearization around the soliton e^{it} Q.

Writing u = e^{it}(Q + h), h = h1 + i h2, the flow reads h_t + Lh = R(h) with

    L h = -L_- h2 + i L_+ h1,
    L_+ = -Delta + 1 - V - 2 (|x|^-3 * (Q .)) Q,    L_- = -Delta + 1 - V,

and V = |x|^-3 * Q^2.  Dense matrices live in the basis y_i = sqrt(w_i) f_i,
where every operator is a plain symmetric matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg as sl
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .grid import (
    RadialGrid,
    apply_laplacian_sector,
    from_sym,
    grad_sq,
    laplacian_sym_dense,
    norms,
    radial_derivative,
    to_sym,
)
from .ground_state import GroundState, _fit_rate
from .hartree_potential import MAX_SECTOR, SectorKernelSpec, newton_convolve, sector_potential_apply

Kind = Literal["plus", "minus"]
ZERO_TOL = 1e-6


class SpectralError(RuntimeError):
    pass


# -- operators --------------------------------------------------------------


@dataclass(frozen=True)
class SectorOperator:
    l: int
    kind: Kind
    matrix: np.ndarray = field(repr=False)
    grid: RadialGrid = field(repr=False)

    def apply(self, f: np.ndarray) -> np.ndarray:
        return from_sym(self.grid, self.matrix @ to_sym(self.grid, f))

    def norm(self) -> float:
        """Spectral norm (largest |eigenvalue|) by Lanczos with a fixed start vector."""
        n = self.matrix.shape[0]
        v0 = np.ones(n) / np.sqrt(n)
        top = spla.eigsh(self.matrix, k=1, which="LM", v0=v0, tol=1e-10, return_eigenvectors=False)
        return float(abs(top[0]))


def assemble_sector(l: int, kind: Kind, gs: GroundState) -> SectorOperator:
    if int(l) != l or not 0 <= l <= MAX_SECTOR:
        raise ValueError(f"sector index must be in [0, {MAX_SECTOR}], got {l}")
    if kind not in ("plus", "minus"):
        raise ValueError(f"kind must be 'plus' or 'minus', got {kind!r}")
    grid, Q = gs.grid, gs.Q
    lap_l = l if kind == "plus" else 0
    m = -laplacian_sym_dense(grid, lap_l)
    m[np.diag_indices_from(m)] += 1.0 - gs.potential
    if kind == "plus":
        spec = SectorKernelSpec(l)
        r, sw = grid.nodes, np.sqrt(grid.cell_weights)
        k = spec.kernel(r[:, None], r[None, :]) * (sw[:, None] * sw[None, :])
        k[np.diag_indices_from(k)] -= grid.h**2 * (2 * l + 3) / 12.0
        m -= spec.coefficient * (Q[:, None] * k * Q[None, :])
    m = 0.5 * (m + m.T)
    return SectorOperator(int(l), kind, m, grid)


def spectrum(op: SectorOperator, k: int) -> list[tuple[float, np.ndarray]]:
    """k lowest eigenpairs; vectors nodal with sum_i w_i f_i^2 = 1."""
    n = op.matrix.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}]")
    try:
        vals, vecs = sl.eigh(op.matrix, subset_by_index=[0, k - 1])
    except sl.LinAlgError as exc:  # pragma: no cover
        raise SpectralError(f"eigensolver failed: {exc}") from exc
    return [(float(vals[i]), from_sym(op.grid, vecs[:, i])) for i in range(k)]


def _sign_changes(f: np.ndarray, rel: float = 1e-8) -> int:
    """Sign changes of f, ignoring nodes where |f| is below rel * max |f|."""
    f = f[np.abs(f) > rel * np.max(np.abs(f))]
    return int(np.count_nonzero(np.diff(np.sign(f))))


@dataclass(frozen=True)
class SectorCounts:
    negative_plus_l0: int
    lowest_plus_l0: tuple
    lowest_plus_l1: float
    norm_plus_l1: float
    cosine_plus_l1: float
    sign_changes_plus_l1: int
    lowest_plus_l2: float
    lowest_minus: float
    norm_minus: float
    cosine_minus: float

    def as_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def _cosine(grid: RadialGrid, f: np.ndarray, g: np.ndarray) -> float:
    return float(abs(grid.inner(f, g)) / np.sqrt(grid.inner(f, f) * grid.inner(g, g)))


def sector_counts(gs: GroundState) -> SectorCounts:
    """Low spectrum of L_+ on sectors 0, 1, 2 and of L_-, with kernel alignment."""
    grid = gs.grid
    low0 = spectrum(assemble_sector(0, "plus", gs), 3)
    op1 = assemble_sector(1, "plus", gs)
    lam1, v1 = spectrum(op1, 1)[0]
    lam2 = spectrum(assemble_sector(2, "plus", gs), 1)[0][0]
    opm = assemble_sector(0, "minus", gs)
    lamm, vm = spectrum(opm, 1)[0]
    dq = radial_derivative(grid, gs.Q, parity=1)
    return SectorCounts(
        negative_plus_l0=sum(1 for lam, _ in low0 if lam < 0),
        lowest_plus_l0=tuple(lam for lam, _ in low0),
        lowest_plus_l1=lam1,
        norm_plus_l1=op1.norm(),
        cosine_plus_l1=_cosine(grid, v1, dq),
        sign_changes_plus_l1=_sign_changes(v1),
        lowest_plus_l2=lam2,
        lowest_minus=lamm,
        norm_minus=opm.norm(),
        cosine_minus=_cosine(grid, vm, gs.Q),
    )


def apply_minus(gs: GroundState, f: np.ndarray) -> np.ndarray:
    return -apply_laplacian_sector(gs.grid, f, 0) + f - gs.potential * f


def apply_plus(gs: GroundState, f: np.ndarray, l: int = 0) -> np.ndarray:
    return -apply_laplacian_sector(gs.grid, f, l) + f + sector_potential_apply(gs.grid, l, f, gs.Q)


def apply_block(gs: GroundState, h: np.ndarray) -> np.ndarray:
    """L h = -L_- h2 + i L_+ h1 for complex h = h1 + i h2."""
    h = np.asarray(h, dtype=complex)
    return -apply_minus(gs, h.imag) + 1j * apply_plus(gs, h.real)


def block_matrix(plus: SectorOperator, minus: SectorOperator) -> np.ndarray:
    """Real 2N matrix of L acting on (y1, y2)."""
    n = plus.matrix.shape[0]
    out = np.zeros((2 * n, 2 * n))
    out[:n, n:] = -minus.matrix
    out[n:, :n] = plus.matrix
    return out


def nonlinear_remainder(gs: GroundState, h: np.ndarray) -> np.ndarray:
    """R(h) = i[(K*|h|^2) Q + 2 (K*(Q h1)) h + (K*|h|^2) h], K = |x|^-3."""
    grid, Q = gs.grid, gs.Q
    h = np.asarray(h, dtype=complex)
    rho = newton_convolve(grid, np.abs(h) ** 2)
    cross = newton_convolve(grid, Q * h.real)
    return 1j * (rho * Q + 2.0 * cross * h + rho * h)


# -- e0 and the eigenfunctions ------------------------------------------------


@dataclass(frozen=True)
class SpectralData:
    """e0 and Y_pm = +-(Y1 +- i Y2), scaled so that B(Y_+, Y_-) = 1."""

    gs: GroundState = field(repr=False)
    e0: float
    Y1: np.ndarray = field(repr=False)
    Y2: np.ndarray = field(repr=False)
    chi: np.ndarray = field(repr=False)
    b_normalization: float
    negative_count_plus_l0: int
    decay_rate_Y: float
    residual_plus: float
    residual_minus: float
    reduced_eigenvalues: tuple = ()

    @property
    def grid(self) -> RadialGrid:
        return self.gs.grid

    @property
    def y_plus(self) -> np.ndarray:
        return self.Y1 + 1j * self.Y2

    @property
    def y_minus(self) -> np.ndarray:
        return -(self.Y1 - 1j * self.Y2)

    def summary(self) -> dict:
        return {
            "e0": self.e0,
            "b_normalization": self.b_normalization,
            "negative_count_plus_l0": self.negative_count_plus_l0,
            "decay_rate_Y": self.decay_rate_Y,
            "residual_plus": self.residual_plus,
            "residual_minus": self.residual_minus,
        }


def _kernel_index(vecs: np.ndarray, q_sym: np.ndarray) -> int:
    return int(np.argmax(np.abs(vecs[:, :4].T @ q_sym)))


def compute_e0(gs: GroundState, refine_steps: int = 3) -> SpectralData:
    """Unstable eigenpair of L via the reduced operator L_-^{1/2} L_+ L_-^{1/2}.

    The reduced eigenvector is polished by inverse iteration on the 2N block
    matrix, since the reduced operator squares the condition number.
    """
    grid = gs.grid
    n = grid.n_points
    plus = assemble_sector(0, "plus", gs)
    minus = assemble_sector(0, "minus", gs)
    q_sym = to_sym(grid, gs.Q)
    q_sym = q_sym / np.linalg.norm(q_sym)

    mu, U = sl.eigh(minus.matrix)
    i0 = _kernel_index(U, q_sym)
    if abs(U[:, i0] @ q_sym) < 0.999:
        raise SpectralError("kernel of L_- is not aligned with Q")
    keep = np.ones(n, dtype=bool)
    keep[i0] = False
    sqrt_minus = (U[:, keep] * np.sqrt(np.clip(mu[keep], 0.0, None))) @ U[:, keep].T
    reduced = sqrt_minus @ plus.matrix @ sqrt_minus
    reduced = 0.5 * (reduced + reduced.T)
    lam, X = sl.eigh(reduced, subset_by_index=[0, 3])
    if not lam[0] < 0:
        raise SpectralError("reduced operator has no negative eigenvalue; grid too coarse?")
    negative_reduced = int(np.sum(lam < -ZERO_TOL * max(1.0, abs(lam[0]))))
    e0 = float(np.sqrt(-lam[0]))
    chi = X[:, 0]
    y1 = sqrt_minus @ chi
    kernel_leak = abs(y1 @ U[:, i0]) / np.linalg.norm(y1)
    if kernel_leak > 1e-8:
        raise SpectralError(f"kernel leakage {kernel_leak:.2e} in Y1")
    y2 = plus.matrix @ y1 / e0

    if refine_steps > 0:
        big = block_matrix(plus, minus)
        lu = sl.lu_factor(big - e0 * np.eye(2 * n))
        x = np.concatenate([y1, y2])
        for _ in range(refine_steps):
            x = sl.lu_solve(lu, x)
            x /= np.linalg.norm(x)
        y1, y2 = x[:n], x[n:]
        # two-sided Rayleigh quotient; the left eigenvector is (y2, y1)
        # y2 is kept from the solve: recomputing it as L_+ y1 / e0 injects
        # rounding noise of size eps ||L_+|| that L_- then amplifies
        e0 = float((y1 @ plus.matrix @ y1 - y2 @ minus.matrix @ y2) / (2.0 * (y1 @ y2)))

    Y1, Y2 = from_sym(grid, y1), from_sym(grid, y2)
    # sign: A > 0 raises the gradient norm, <grad Q, grad Y1> > 0
    if grid.inner(-apply_laplacian_sector(grid, gs.Q, 0), Y1) < 0:
        Y1, Y2, chi = -Y1, -Y2, -chi
    b_raw = float(grid.inner(apply_minus(gs, Y2), Y2))
    if not b_raw > 0:
        raise SpectralError("<L_- Y2, Y2> is not positive")
    scale = 1.0 / np.sqrt(b_raw)
    Y1, Y2 = scale * Y1, scale * Y2

    res_plus, res_minus = block_residuals(gs, e0, Y1, Y2)
    count = int(np.sum(sl.eigh(plus.matrix, eigvals_only=True, subset_by_index=[0, 3]) < 0))
    if negative_reduced != 1:
        raise SpectralError(f"reduced operator has {negative_reduced} negative eigenvalues")
    rate = _fit_rate(grid.nodes, np.abs(Y1 + 1j * Y2), *_y_window(grid))
    return SpectralData(
        gs=gs,
        e0=e0,
        Y1=Y1,
        Y2=Y2,
        chi=from_sym(grid, chi),
        b_normalization=scale,
        negative_count_plus_l0=count,
        decay_rate_Y=rate,
        residual_plus=res_plus,
        residual_minus=res_minus,
        reduced_eigenvalues=tuple(float(v) for v in lam),
    )


def _y_window(grid: RadialGrid) -> tuple[float, float]:
    hi = min(16.0, grid.r_max - 5.5)
    return (6.0, hi)


def block_residuals(gs: GroundState, e0: float, Y1: np.ndarray, Y2: np.ndarray) -> tuple[float, float]:
    """Relative residuals of L_+ Y1 = e0 Y2 and L_- Y2 = -e0 Y1 in L^2."""
    grid = gs.grid

    def nrm(f):
        return np.sqrt(grid.integrate(f**2))

    rp = nrm(apply_plus(gs, Y1) - e0 * Y2) / nrm(e0 * Y2)
    rm = nrm(apply_minus(gs, Y2) + e0 * Y1) / nrm(e0 * Y1)
    return float(rp), float(rm)


def reduced_real_spectrum(sd: SpectralData) -> list[float]:
    """Real eigenvalues of L implied by the reduced operator: +-sqrt(-lambda) for lambda <= 0."""
    lam = np.array(sd.reduced_eigenvalues)
    neg = lam[lam < -ZERO_TOL]
    zero = lam[np.abs(lam) <= ZERO_TOL]
    out = sorted([-np.sqrt(-v) for v in neg] + [np.sqrt(-v) for v in neg])
    if zero.size:
        out.insert(len(out) // 2, 0.0)
    return out


# -- quadratic forms ----------------------------------------------------------


def bilinear_B(gs: GroundState, f: np.ndarray, g: np.ndarray) -> float:
    """B(f, g) = 1/2 <L_+ f1, g1> + 1/2 <L_- f2, g2>."""
    f = np.asarray(f, dtype=complex)
    g = np.asarray(g, dtype=complex)
    grid = gs.grid
    return 0.5 * grid.inner(apply_plus(gs, f.real), g.real) + 0.5 * grid.inner(apply_minus(gs, f.imag), g.imag)


def phi(gs: GroundState, h: np.ndarray) -> float:
    """Phi(h) = 1/2 ||grad h||^2 + 1/2 ||h||^2 - 1/2 int V |h|^2 - int (K*(Q h1)) Q h1."""
    grid, Q = gs.grid, gs.Q
    h = np.asarray(h, dtype=complex)
    grad = grad_sq(grid, h)
    mass = float(grid.integrate(np.abs(h) ** 2).real)
    pot = float(grid.integrate(gs.potential * np.abs(h) ** 2).real)
    q1 = Q * h.real
    exch = float(grid.integrate(newton_convolve(grid, q1) * q1))
    return 0.5 * grad + 0.5 * mass - 0.5 * pot - exch


# -- coercivity -------------------------------------------------------------


def constraint_vectors(which: str, sd: SpectralData) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Nodal fields c with <c, h1> = 0 (first list) and <c, h2> = 0 (second)."""
    gs = sd.gs
    if which == "Gperp":
        return [apply_laplacian_sector(gs.grid, gs.Q, 0)], [gs.Q]
    if which == "GperpY":
        return [sd.Y2], [gs.Q, sd.Y1]
    raise ValueError(f"unknown constraint set {which!r}")


def _block_minimum(op: np.ndarray, gram: np.ndarray, cons: list[np.ndarray], grid: RadialGrid) -> float:
    # <c, h> = sum w c h = (sqrt(w) c) . y
    c = np.array([np.sqrt(grid.cell_weights) * v for v in cons])
    z = sl.null_space(c)
    a = z.T @ op @ z
    b = z.T @ gram @ z
    vals = sl.eigh(0.5 * (a + a.T), 0.5 * (b + b.T), eigvals_only=True, subset_by_index=[0, 0])
    return float(vals[0])


def coercivity_constant(which: str, sd: SpectralData) -> float:
    """min Phi(h) / ||h||_{H^1}^2 over the constraint subspace (radial)."""
    gs = sd.gs
    grid = gs.grid
    c1, c2 = constraint_vectors(which, sd)
    gram = np.eye(grid.n_points) - laplacian_sym_dense(grid, 0)
    plus = assemble_sector(0, "plus", gs).matrix
    minus = assemble_sector(0, "minus", gs).matrix
    m1 = _block_minimum(0.5 * plus, gram, c1, grid)
    m2 = _block_minimum(0.5 * minus, gram, c2, grid)
    c = min(m1, m2)
    if not c > 0:
        raise SpectralError(f"coercivity fails on {which}: c = {c:.3e}")
    return c


def unconstrained_minimum(gs: GroundState) -> float:
    grid = gs.grid
    gram = np.eye(grid.n_points) - laplacian_sym_dense(grid, 0)
    plus = assemble_sector(0, "plus", gs).matrix
    return float(sl.eigh(0.5 * plus, gram, eigvals_only=True, subset_by_index=[0, 0])[0])


def project_constraints(grid: RadialGrid, f: np.ndarray, cons: list[np.ndarray]) -> np.ndarray:
    """L^2 projection of f onto the orthogonal complement of span(cons)."""
    basis: list[np.ndarray] = []
    for c in cons:
        v = c.astype(float).copy()
        for b in basis:
            v -= grid.inner(v, b) * b
        basis.append(v / np.sqrt(grid.inner(v, v)))
    out = f.astype(float).copy()
    for b in basis:
        out -= grid.inner(out, b) * b
    return out


def random_smooth_field(grid: RadialGrid, rng: np.random.Generator, complex_valued: bool = True, bumps: int = 4) -> np.ndarray:
    """Sum of Gaussian bumps with random centres in [0, 8] and widths in [0.5, 3]."""
    r = grid.nodes

    def one():
        centres = rng.uniform(0.0, 8.0, bumps)
        widths = rng.uniform(0.5, 3.0, bumps)
        amps = rng.standard_normal(bumps)
        return np.sum(amps[:, None] * np.exp(-(((r[None, :] - centres[:, None]) / widths[:, None]) ** 2)), axis=0)

    f = one()
    return f + 1j * one() if complex_valued else f


def antisymmetry_defects(gs: GroundState, rng: np.random.Generator, pairs: int = 50) -> np.ndarray:
    """|B(f, Lg) + B(Lf, g)| over the sum of the absolute values of its four terms."""
    grid = gs.grid
    out = np.empty(pairs)
    for i in range(pairs):
        f = random_smooth_field(grid, rng)
        g = random_smooth_field(grid, rng)
        lf, lg = apply_block(gs, f), apply_block(gs, g)
        terms = [
            0.5 * grid.inner(apply_plus(gs, f.real), lg.real),
            0.5 * grid.inner(apply_minus(gs, f.imag), lg.imag),
            0.5 * grid.inner(apply_plus(gs, lf.real), g.real),
            0.5 * grid.inner(apply_minus(gs, lf.imag), g.imag),
        ]
        out[i] = abs(sum(terms)) / sum(abs(t) for t in terms)
    return out


def coercivity_samples(which: str, sd: SpectralData, rng: np.random.Generator, samples: int = 500) -> np.ndarray:
    """Phi(h) / ||h||_{H^1}^2 for random smooth h projected onto the constraint set."""
    grid = sd.grid
    c1, c2 = constraint_vectors(which, sd)
    out = np.empty(samples)
    for i in range(samples):
        h = random_smooth_field(grid, rng)
        h = project_constraints(grid, h.real, c1) + 1j * project_constraints(grid, h.imag, c2)
        out[i] = phi(sd.gs, h) / norms(grid, h)[2] ** 2
    return out


# -- exponential growth of the Volterra problem ---------------------------------


def _even_spline(grid: RadialGrid, f: np.ndarray) -> CubicSpline:
    r = grid.nodes
    x = np.concatenate([-r[::-1], [0.0], r])
    origin = (15.0 * f[0] - 6.0 * f[1] + f[2]) / 10.0
    y = np.concatenate([f[::-1], [origin], f])
    return CubicSpline(x, y)


def volterra_kernel(r, s):
    """K(r, s) = (8 pi^2/3) s (1 - s^3/r^3) for s <= r."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    return 8.0 * np.pi**2 / 3.0 * s * (1.0 - s**3 / r**3)


@dataclass(frozen=True)
class VolterraResult:
    r: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    log_scale: np.ndarray = field(repr=False)
    growth_rate: float
    sign_changes: int


def volterra_growth_check(gs: GroundState, v0: float | None = None, window=(10.0, 25.0)) -> VolterraResult:
    """March v'' + (4/r) v' = (1 - V) v + 2 Q int_0^r K(r,s) Q v ds outward.

    The memory term is carried by the running moments I1 = int s Q v and
    I4 = int s^4 Q v, so that int_0^r K Q v = (8 pi^2/3)(I1 - I4 / r^3).
    """
    grid = gs.grid
    q_spline = _even_spline(grid, gs.Q)
    v_spline = _even_spline(grid, gs.potential)
    q0, pot0 = float(q_spline(0.0)), float(v_spline(0.0))
    if v0 is None:
        v0 = 2.0 * q0
    if v0 == 0:
        raise ValueError("v0 must be nonzero")
    c = 8.0 * np.pi**2 / 3.0

    def rhs(r, y):
        v, p, i1, i4 = y
        q = q_spline(r)
        mem = c * (i1 - i4 / r**3)
        return [p, -4.0 * p / r + (1.0 - v_spline(r)) * v + 2.0 * q * mem, r * q * v, r**4 * q * v]

    r_start = 0.5 * grid.h
    a = (1.0 - pot0) * v0 / 5.0
    y = np.array([v0 + 0.5 * a * r_start**2, a * r_start, q0 * v0 * r_start**2 / 2.0, q0 * v0 * r_start**5 / 5.0])
    nodes = grid.nodes
    vals = np.empty(grid.n_points)
    logs = np.empty(grid.n_points)
    log_scale = 0.0
    edges = np.concatenate([[r_start], np.arange(1.0, grid.r_max, 1.0), [grid.r_max]])
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (nodes > lo) & (nodes <= hi)
        t_eval = np.union1d(nodes[sel], [hi])
        sol = solve_ivp(rhs, (lo, hi), y, method="DOP853", rtol=1e-11, atol=1e-300, t_eval=t_eval)
        if not sol.success:  # pragma: no cover
            raise SpectralError(f"Volterra march failed: {sol.message}")
        vals[sel] = sol.y[0, : np.count_nonzero(sel)]
        logs[sel] = log_scale
        y = sol.y[:, -1]
        big = np.max(np.abs(y))
        if big > 1e250:  # guard: linear problem, rescale and keep the log
            y = y / big
            log_scale += np.log(big)
    signs = np.sign(vals)
    changes = int(np.count_nonzero(signs[1:] != signs[:-1]))
    logv = np.log(np.abs(vals)) + logs
    sel = (nodes >= window[0]) & (nodes <= window[1])
    rate = float(np.polyfit(nodes[sel], logv[sel] + 2.0 * np.log(nodes[sel]), 1)[0])
    return VolterraResult(nodes, vals, logs, rate, changes)


# -- scaling identity -----------------------------------------------------------


def scaling_identity_check(gs: GroundState, q_coefficient: float = 2.0) -> tuple[float, float]:
    """Least-squares kappa in L_+(c Q + r Q') = kappa Q; returns (kappa, residual / ||Q||)."""
    grid, Q = gs.grid, gs.Q
    lam_q = q_coefficient * Q + grid.nodes * radial_derivative(grid, Q, parity=1)
    image = apply_plus(gs, lam_q)
    qq = grid.inner(Q, Q)
    kappa = grid.inner(image, Q) / qq
    res = np.sqrt(grid.inner(image - kappa * Q, image - kappa * Q) / qq)
    return float(kappa), float(res)


# -- linearized propagator ---------------------------------------------------------


def linearized_growth_rate(
    gs: GroundState,
    seed: int = 0,
    dt: float = 0.02,
    t_final: float = 8.0,
    fit_from: float = 4.0,
) -> float:
    """Growth rate of ||h(t)|| under h_t = -L h (Crank-Nicolson) from random data."""
    grid = gs.grid
    n = grid.n_points
    big = block_matrix(assemble_sector(0, "plus", gs), assemble_sector(0, "minus", gs))
    eye = np.eye(2 * n)
    lu = sl.lu_factor(eye + 0.5 * dt * big)
    rhs_op = eye - 0.5 * dt * big
    rng = np.random.default_rng(seed)
    r = grid.nodes
    env = np.exp(-0.5 * r**2)
    x = np.concatenate([to_sym(grid, env * rng.standard_normal(n)), to_sym(grid, env * rng.standard_normal(n))])
    times, logs = [], []
    log_scale = 0.0
    steps = int(round(t_final / dt))
    for k in range(1, steps + 1):
        x = sl.lu_solve(lu, rhs_op @ x)
        nrm = np.linalg.norm(x)
        log_scale += np.log(nrm)
        x /= nrm
        times.append(k * dt)
        logs.append(log_scale)
    times, logs = np.array(times), np.array(logs)
    sel = times >= fit_from
    return float(np.polyfit(times[sel], logs[sel], 1)[0])
