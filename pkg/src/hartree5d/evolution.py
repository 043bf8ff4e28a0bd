"""Radial time evolution of i u_t + Delta u + (|x|^-3 * |u|^2) u = 0 and its diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import RadialGrid, apply_laplacian_sector, grad_sq, laplacian_sym_sparse, norms, radial_derivative
from .ground_state import GroundState
from .hartree_potential import newton_convolve, z_functional
from .linearized import SpectralData, bilinear_B

DT_RANGE = (1e-5, 1e-1)
MODULATION_FRACTION = 0.3
SPREADING_RADIUS = 5.0


class EvolutionError(RuntimeError):
    pass


def mass(grid: RadialGrid, u: np.ndarray) -> float:
    return float(np.real(grid.integrate(np.abs(u) ** 2)))


def energy(grid: RadialGrid, u: np.ndarray) -> float:
    """E[u] = 1/2 ||grad u||^2 - 1/4 Z_H(u)."""
    return 0.5 * grad_sq(grid, u) - 0.25 * z_functional(grid, u)


class SplitStep:
    """Strang step: exact phase half-steps around a Crank-Nicolson free step."""

    def __init__(self, grid: RadialGrid, dt: float):
        self.grid = grid
        self.dt = dt
        lap = laplacian_sym_sparse(grid, 0).astype(complex).tocsc()
        eye = sp.identity(grid.n_points, dtype=complex, format="csc")
        self._lu = spla.splu((eye - 0.5j * dt * lap).tocsc())
        self._rhs = (eye + 0.5j * dt * lap).tocsr()
        self._sqrt_w = np.sqrt(grid.cell_weights)

    def phase(self, u: np.ndarray, tau: float) -> np.ndarray:
        pot = newton_convolve(self.grid, np.abs(u) ** 2)
        return np.exp(1j * tau * pot) * u

    def linear(self, u: np.ndarray) -> np.ndarray:
        y = self._sqrt_w * u
        return self._lu.solve(self._rhs @ y) / self._sqrt_w

    def __call__(self, u: np.ndarray) -> np.ndarray:
        half = 0.5 * self.dt
        return self.phase(self.linear(self.phase(u, half)), half)


@dataclass
class EvolutionState:
    grid: RadialGrid
    u: np.ndarray = field(repr=False)
    t: float
    dt: float
    ref_mass: float
    ref_energy: float
    history: list = field(default_factory=list, repr=False)
    _stepper: SplitStep | None = field(default=None, repr=False)

    def record(self, **values) -> None:
        if self.history and not self.t > self.history[-1]["t"] and self.dt > 0:
            raise EvolutionError("history times must increase")
        self.history.append({"t": self.t, **values})


def init_state(grid: RadialGrid, u0: np.ndarray, dt: float, t: float = 0.0) -> EvolutionState:
    """dt may be negative for backward runs; |dt| must lie in (1e-5, 1e-1)."""
    lo, hi = DT_RANGE
    if not lo < abs(dt) < hi:
        raise ValueError(f"|dt| must lie in ({lo}, {hi}), got {dt}")
    u0 = np.asarray(u0, dtype=complex)
    if u0.shape != (grid.n_points,) or not np.all(np.isfinite(u0)):
        raise ValueError("initial field must be finite and live on the grid")
    return EvolutionState(grid, u0.copy(), float(t), float(dt), mass(grid, u0), energy(grid, u0))


def step(state: EvolutionState, n: int = 1) -> EvolutionState:
    if state._stepper is None or state._stepper.dt != state.dt:
        state._stepper = SplitStep(state.grid, state.dt)
    u = state.u
    for _ in range(n):
        u = state._stepper(u)
    if not np.all(np.isfinite(u)):
        raise EvolutionError("amplitude overflow")
    state.u = u
    state.t += n * state.dt
    return state


def conserved_report(state: EvolutionState) -> tuple[float, float, bool]:
    """(mass, energy, momentum_is_zero); momentum vanishes identically for radial fields."""
    return mass(state.grid, state.u), energy(state.grid, state.u), True


# -- modulation -----------------------------------------------------------------


@dataclass(frozen=True)
class Modulation:
    theta: float
    beta: float
    h: np.ndarray | None
    alpha: float


def alpha_gap(gs: GroundState, u: np.ndarray) -> float:
    """alpha(u) = | ||grad Q||^2 - ||grad u||^2 |."""
    return abs(gs.grad_sq - grad_sq(gs.grid, u))


def modulation_decompose(
    u: np.ndarray,
    t: float,
    gs: GroundState,
    prev_theta: float = 0.0,
    alpha0: float | None = None,
) -> Modulation:
    """e^{-i theta - i t} u = (1 + beta) Q + h with Im int h Q = 0 = Re int h Delta Q."""
    grid, Q = gs.grid, gs.Q
    alpha = alpha_gap(gs, u)
    if alpha0 is None:
        alpha0 = MODULATION_FRACTION * gs.grad_sq
    if alpha >= alpha0:
        return Modulation(float("nan"), float("nan"), None, alpha)
    c = grid.integrate(u * Q)
    if abs(c) == 0:
        raise EvolutionError("phase condition degenerate")
    # roots of Im(e^{-i theta - i t} c) = 0 with Re > 0, nearest prev_theta
    theta = np.angle(c) - t
    theta += 2.0 * np.pi * np.round((prev_theta - theta) / (2.0 * np.pi))
    v = np.exp(-1j * (theta + t)) * u
    lap_q = apply_laplacian_sector(grid, Q, 0)
    beta = -grid.inner(v, lap_q) / gs.grad_sq - 1.0
    h = v - (1.0 + beta) * Q
    return Modulation(float(theta), float(beta), h, alpha)


def orbit_distance(gs: GroundState, u: np.ndarray) -> float:
    """min over theta of ||u - e^{i theta} Q||_{H^1}."""
    grid, Q = gs.grid, gs.Q
    lap_q = apply_laplacian_sector(grid, Q, 0)
    c = grid.integrate(u * (Q - lap_q))
    theta = np.angle(c)
    return norms(grid, u - np.exp(1j * theta) * Q)[2]


def coefficient_projections(h: np.ndarray, sd: SpectralData) -> tuple[float, float, float]:
    """(alpha_+, alpha_-, beta_0) with alpha_+ = B(h, Y_-), alpha_- = B(h, Y_+)."""
    gs = sd.gs
    grid = gs.grid
    a_plus = bilinear_B(gs, h, sd.y_minus)
    a_minus = bilinear_B(gs, h, sd.y_plus)
    q0 = 1j * gs.Q / np.sqrt(gs.mass)
    beta0 = grid.inner(h, q0) - a_plus * grid.inner(sd.y_plus, q0) - a_minus * grid.inner(sd.y_minus, q0)
    return float(a_plus), float(a_minus), float(beta0)


# -- virial --------------------------------------------------------------------

# phi = r^2 on [0,1] and constant on [2, inf).  A cutoff that vanishes on
# [2, inf) cannot also satisfy phi'' <= 2: integrating back from r = 2 gives
# phi(r) <= (2 - r)^2, with equality at r = 1 only if phi'(1) = -2.  The
# localized virial needs phi' = 0 beyond 2, so a plateau serves the same role.
# On [1,2], phi'(1 + s) is the degree-7 polynomial matching 2s + 2 to third
# order at s = 0 and vanishing to third order at s = 1, which makes phi C^4.

def _blend_coefficients() -> np.ndarray:
    """Coefficients of phi(1 + s), s in [0, 1]."""
    rows, rhs = [], []

    def row(s, d):
        return [np.prod(np.arange(k - d + 1, k + 1)) * s ** (k - d) if k >= d else 0.0 for k in range(8)]

    for d, v in ((0, 2.0), (1, 2.0), (2, 0.0), (3, 0.0)):
        rows.append(row(0.0, d))
        rhs.append(v)
    for d in range(4):
        rows.append(row(1.0, d))
        rhs.append(0.0)
    slope = np.polynomial.Polynomial(np.linalg.solve(np.array(rows), np.array(rhs)))
    return slope.integ(k=1.0).coef


_PHI = _blend_coefficients()
PHI_PLATEAU = float(np.polynomial.Polynomial(_PHI)(1.0))


def virial_phi(r: np.ndarray, derivative: int = 0) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    poly = np.polynomial.Polynomial(_PHI).deriv(derivative)
    inner = np.polynomial.Polynomial([0.0, 0.0, 1.0]).deriv(derivative)
    outer = PHI_PLATEAU if derivative == 0 else 0.0
    return np.where(r <= 1.0, inner(r), np.where(r < 2.0, poly(r - 1.0), outer))


@dataclass(frozen=True)
class VirialConfig:
    R: float

    def __post_init__(self) -> None:
        if not self.R > 0:
            raise ValueError("cutoff radius must be positive")

    def phi_R(self, r: np.ndarray, derivative: int = 0) -> np.ndarray:
        return self.R ** (2 - derivative) * virial_phi(np.asarray(r) / self.R, derivative)


def localized_variance(grid: RadialGrid, u: np.ndarray, vc: VirialConfig) -> tuple[float, float]:
    """V_R = int phi_R |u|^2 and V_R' = 2 Im int phi_R'(r) conj(u) u_r."""
    r = grid.nodes
    v = float(np.real(grid.integrate(vc.phi_R(r) * np.abs(u) ** 2)))
    ur = radial_derivative(grid, u, parity=1)
    vp = 2.0 * float(np.imag(grid.integrate(vc.phi_R(r, 1) * np.conj(u) * ur)))
    return v, vp


def virial_rhs(grid: RadialGrid, u: np.ndarray) -> float:
    """8 ||grad u||^2 - 6 Z_H(u), the second derivative of the full variance."""
    return 8.0 * grad_sq(grid, u) - 6.0 * z_functional(grid, u)


def mass_radius(grid: RadialGrid, u: np.ndarray) -> float:
    m = mass(grid, u)
    return float(np.sqrt(np.real(grid.integrate(grid.nodes**2 * np.abs(u) ** 2)) / m))


@dataclass(frozen=True)
class VirialReport:
    t: float
    V_R: float
    V_R_prime: float
    V_R_second_fd: float
    defect_A_R: float
    threshold_target: float  # 8 (||grad Q||^2 - ||grad u||^2)
    virial_rhs: float  # 8 ||grad u||^2 - 6 Z_H(u)
    alpha: float


def virial_report(history: list[dict], vc: VirialConfig, gs: GroundState | None = None) -> list[VirialReport]:
    """Reports at interior records of an equally spaced history with keys
    t, V_R[R], V_R_prime[R], virial_rhs, grad_sq."""
    key_v, key_vp = f"V_R[{vc.R:g}]", f"V_R_prime[{vc.R:g}]"
    if len(history) < 3:
        raise ValueError("virial report needs at least three consecutive records")
    out = []
    for prev, cur, nxt in zip(history[:-2], history[1:-1], history[2:]):
        dt = 0.5 * (nxt["t"] - prev["t"])
        second = (nxt[key_vp] - prev[key_vp]) / (2.0 * dt)
        g_u = cur["grad_sq"]
        target = 8.0 * (gs.grad_sq - g_u) if gs is not None else float("nan")
        alpha = abs(gs.grad_sq - g_u) if gs is not None else float("nan")
        out.append(
            VirialReport(
                t=cur["t"],
                V_R=cur[key_v],
                V_R_prime=cur[key_vp],
                V_R_second_fd=second,
                defect_A_R=second - cur["virial_rhs"],
                threshold_target=target,
                virial_rhs=cur["virial_rhs"],
                alpha=alpha,
            )
        )
    return out


def diagnostics(
    state: EvolutionState,
    gs: GroundState | None = None,
    sd: SpectralData | None = None,
    virial_radii=(),
    prev_theta: float = 0.0,
) -> dict:
    """One history record for the current field."""
    grid, u = state.grid, state.u
    m, e, _ = conserved_report(state)
    g = grad_sq(grid, u)
    rec = {
        "mass_drift": (m - state.ref_mass) / state.ref_mass if state.ref_mass else m,
        "energy_drift": (e - state.ref_energy) / abs(state.ref_energy) if state.ref_energy else e,
        "grad_sq": g,
        "grad_norm": np.sqrt(max(g, 0.0)),
        "virial_rhs": virial_rhs(grid, u) if virial_radii else float("nan"),
        "outside_fraction": outside_fraction(grid, u, SPREADING_RADIUS),
    }
    if gs is not None:
        mod = modulation_decompose(u, state.t, gs, prev_theta)
        rec.update(alpha=mod.alpha, theta=mod.theta, beta=mod.beta)
        rec["orbit_distance"] = orbit_distance(gs, u)
        if sd is not None:
            # coefficients of h in u = e^{it}(Q + h), without modulation
            h = np.exp(-1j * state.t) * u - gs.Q
            a_p, a_m, b0 = coefficient_projections(h, sd)
            rec.update(alpha_plus=a_p, alpha_minus=a_m, beta_0=b0, h_norm=norms(grid, h)[2])
    for R in virial_radii:
        v, vp = localized_variance(grid, u, VirialConfig(R))
        rec[f"V_R[{R:g}]"] = v
        rec[f"V_R_prime[{R:g}]"] = vp
    return rec


def evolve(
    state: EvolutionState,
    t_final: float,
    record_every: int = 1,
    gs: GroundState | None = None,
    sd: SpectralData | None = None,
    virial_radii=(),
    stop=None,
) -> EvolutionState:
    """Step until |t - t_start| reaches |t_final - t_start|, recording diagnostics.

    stop(record) -> bool ends the run early (used by the blow-up proxy).
    """
    n_total = int(round(abs(t_final - state.t) / abs(state.dt)))
    theta = state.history[-1].get("theta", 0.0) if state.history else 0.0
    if not state.history:
        rec = diagnostics(state, gs, sd, virial_radii, theta)
        state.record(**rec)
    done = 0
    while done < n_total:
        n = min(record_every, n_total - done)
        step(state, n)
        done += n
        theta = state.history[-1].get("theta", theta)
        theta = 0.0 if not np.isfinite(theta) else theta
        rec = diagnostics(state, gs, sd, virial_radii, theta)
        state.history.append({"t": state.t, **rec})
        if stop is not None and stop(rec):
            break
    return state


# -- dichotomy ---------------------------------------------------------------


@dataclass(frozen=True)
class ProbeConfig:
    dt: float = 1e-3
    forward_horizon: float = 1.0
    backward_horizon: float = 6.0
    record_every: int = 10
    blowup_factor: float = 3.0
    spreading_radius: float = 5.0
    forward_fit_window: tuple = (0.0, 1.0)


@dataclass(frozen=True)
class DichotomyReport:
    sign: int
    t0: float
    forward_slope: float
    forward_slope_ratio: float  # slope / (-e0)
    backward_verdict: str  # "blow-up proxy", "spreading proxy", "inconclusive"
    backward_time: float
    max_grad_ratio: float
    min_grad_ratio: float
    crossed_threshold: bool
    spreading_monotone: bool
    outside_mass_fraction: tuple
    forward_times: tuple = field(repr=False, default=())
    forward_distances: tuple = field(repr=False, default=())

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k not in ("forward_times", "forward_distances")}
        d["outside_mass_fraction"] = list(self.outside_mass_fraction)
        return d


def outside_fraction(grid: RadialGrid, u: np.ndarray, radius: float) -> float:
    rho = np.abs(u) ** 2
    return float(np.real(grid.integrate(np.where(grid.nodes > radius, rho, 0.0))) / np.real(grid.integrate(rho)))


def dichotomy_probe(
    sign: int,
    t0: float | None,
    k: int,
    sd: SpectralData,
    gs: GroundState | None = None,
    config: ProbeConfig = ProbeConfig(),
) -> DichotomyReport:
    from .special_solutions import qpm_initial_data

    gs = gs or sd.gs
    grid = gs.grid
    data = qpm_initial_data(sign, t0, k, sd, gs)
    grad_q = np.sqrt(gs.grad_sq)

    fwd = init_state(grid, data.u0, abs(config.dt))
    n_rec = int(round(config.forward_horizon / (config.dt * config.record_every)))
    times_l, dists_l = [0.0], [orbit_distance(gs, fwd.u)]
    for _ in range(n_rec):
        step(fwd, config.record_every)
        times_l.append(fwd.t)
        dists_l.append(orbit_distance(gs, fwd.u))
    times, dists = np.array(times_l), np.array(dists_l)
    lo, hi = config.forward_fit_window
    sel = (times >= lo - 1e-12) & (times <= hi + 1e-12)
    slope = float(np.polyfit(times[sel], np.log(dists[sel]), 1)[0])

    bwd = init_state(grid, data.u0, -abs(config.dt))
    n_rec = int(round(config.backward_horizon / (config.dt * config.record_every)))
    grad_ratios = [np.sqrt(grad_sq(grid, bwd.u)) / grad_q]
    fractions = [outside_fraction(grid, bwd.u, config.spreading_radius)]
    verdict, t_hit = "inconclusive", float("nan")
    for _ in range(n_rec):
        try:
            step(bwd, config.record_every)
        except EvolutionError:
            verdict, t_hit = "blow-up proxy", bwd.t
            break
        grad_ratios.append(np.sqrt(max(grad_sq(grid, bwd.u), 0.0)) / grad_q)
        fractions.append(outside_fraction(grid, bwd.u, config.spreading_radius))
        if grad_ratios[-1] >= config.blowup_factor:
            verdict, t_hit = "blow-up proxy", bwd.t
            break
    grad_ratios = np.array(grad_ratios)
    fractions = np.array(fractions)
    crossed = bool(np.any(np.diff(np.sign(grad_ratios - 1.0)) != 0))
    monotone = bool(np.all(np.diff(fractions) > 0))
    if verdict == "inconclusive" and sign < 0 and not crossed and monotone and grad_ratios[-1] < 1.0:
        verdict = "spreading proxy"
    return DichotomyReport(
        sign=sign,
        t0=data.t0,
        forward_slope=slope,
        forward_slope_ratio=slope / (-sd.e0),
        backward_verdict=verdict,
        backward_time=t_hit,
        max_grad_ratio=float(grad_ratios.max()),
        min_grad_ratio=float(grad_ratios.min()),
        crossed_threshold=crossed,
        spreading_monotone=monotone,
        outside_mass_fraction=(float(fractions[0]), float(fractions[-1])),
        forward_times=tuple(times),
        forward_distances=tuple(dists),
    )
