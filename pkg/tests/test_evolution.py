import numpy as np
import pytest
import scipy.linalg as sl

from hartree5d.grid import from_sym, norms, to_sym
from hartree5d.linearized import assemble_sector, block_matrix
from hartree5d.evolution import (
    PHI_PLATEAU,
    EvolutionError,
    VirialConfig,
    alpha_gap,
    coefficient_projections,
    conserved_report,
    diagnostics,
    energy,
    init_state,
    localized_variance,
    mass,
    mass_radius,
    modulation_decompose,
    orbit_distance,
    outside_fraction,
    step,
    virial_phi,
    virial_report,
)
from hartree5d.special_solutions import qpm_initial_data


def test_init_refs_for_soliton(gs):
    state = init_state(gs.grid, gs.Q, 1e-3)
    assert state.ref_mass == pytest.approx(gs.mass, rel=1e-14)
    assert state.ref_energy / state.ref_mass == pytest.approx(0.5, abs=1e-6)
    assert state.history == [] and state.t == 0.0


def test_init_refs_for_threshold_data(sd):
    data = qpm_initial_data(1, None, 3, sd)
    state = init_state(sd.grid, data.u0, 1e-3)
    assert abs(state.ref_mass / sd.gs.mass - 1) < 1e-3
    assert abs(state.ref_energy / sd.gs.energy - 1) < 1e-3


def test_init_refs_for_zero(coarse_grid):
    state = init_state(coarse_grid, np.zeros(coarse_grid.n_points), 1e-3)
    assert (state.ref_mass, state.ref_energy) == (0.0, 0.0)


@pytest.mark.parametrize("dt", [1e-6, 0.2, -0.5, 0.0])
def test_step_size_range(coarse_grid, dt):
    with pytest.raises(ValueError):
        init_state(coarse_grid, np.zeros(coarse_grid.n_points), dt)


def test_rejects_non_finite_data(coarse_grid):
    u = np.zeros(coarse_grid.n_points)
    u[3] = np.nan
    with pytest.raises(ValueError):
        init_state(coarse_grid, u, 1e-3)


def test_mass_is_conserved_over_many_steps(coarse_gs):
    state = init_state(coarse_gs.grid, 0.5 * coarse_gs.Q + 0.2j * np.exp(-coarse_gs.grid.nodes**2), 1e-3)
    step(state, 10_000)
    m, _, momentum_zero = conserved_report(state)
    assert abs(m / state.ref_mass - 1) < 1e-10
    assert momentum_zero


def test_time_reversal(gs):
    u0 = gs.Q * (1 + 0.1 * np.exp(-gs.grid.nodes)) + 0.05j * np.exp(-gs.grid.nodes**2)
    state = init_state(gs.grid, u0, 1e-3)
    step(state, 200)
    state.dt = -state.dt
    step(state, 200)
    assert norms(gs.grid, state.u - u0)[2] <= 1e-9 * norms(gs.grid, u0)[2]
    assert abs(state.t) < 1e-12


def test_energy_error_is_second_order_for_stable_data(coarse_gs):
    # below the ground-state mass-energy threshold the orbit is stable and the
    # energy error is a bounded O(dt^2) offset
    drifts = []
    for dt in (1e-3, 5e-4):
        state = init_state(coarse_gs.grid, 0.5 * coarse_gs.Q, dt)
        step(state, int(round(5.0 / dt)))
        drifts.append(abs(conserved_report(state)[1] / state.ref_energy - 1))
    assert drifts[0] < 1e-5
    assert 3.0 <= drifts[0] / drifts[1] <= 5.0


def test_soliton_phase_rotation_at_short_times(gs):
    # before the unstable mode amplifies the O(dt^2) seed (growth e^{e0 t})
    state = init_state(gs.grid, gs.Q, 1e-3)
    step(state, 100)
    err = norms(gs.grid, state.u - np.exp(1j * state.t) * gs.Q)[2] / norms(gs.grid, gs.Q)[2]
    assert err < 1e-4


def test_soliton_departure_is_seeded_at_second_order(soliton_runs, gs):
    # u0 = Q is unstable: the O(dt^2) splitting error excites the e0 mode;
    # at t = 1 the orbit error still scales like dt^2 times e^{e0 t}
    errs = []
    for dt, state in soliton_runs.items():
        rec = min(state.history, key=lambda r: abs(r["t"] - 1.0))
        errs.append(rec["orbit_distance"])
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_history_times_increase(soliton_runs):
    for state in soliton_runs.values():
        t = np.array([r["t"] for r in state.history])
        assert np.all(np.diff(t) > 0)


def test_soliton_modulation_is_trivial(gs):
    mod = modulation_decompose(gs.Q * np.exp(0.3j), 0.3, gs)
    assert abs(mod.theta) < 1e-14 and abs(mod.beta) < 1e-12
    assert norms(gs.grid, mod.h)[2] < 1e-10 and mod.alpha < 1e-10


def test_modulation_of_scaled_soliton(gs):
    t = 0.2
    mod = modulation_decompose(1.01 * np.exp(1j * t) * gs.Q, t, gs)
    assert mod.beta == pytest.approx(0.01, rel=1e-8)
    assert norms(gs.grid, mod.h)[2] < 1e-10
    # |beta| and alpha / ||grad Q||^2 are the same order
    factor = (mod.alpha / gs.grad_sq) / abs(mod.beta)
    assert 0.1 <= factor <= 10.0


def test_modulation_orthogonality(sd):
    gs = sd.gs
    u = np.exp(0.7j) * (qpm_initial_data(-1, None, 3, sd).u0)
    mod = modulation_decompose(u, 0.0, gs)
    g = gs.grid
    from hartree5d.grid import apply_laplacian_sector

    lap_q = apply_laplacian_sector(g, gs.Q, 0)
    assert abs(g.inner(mod.h.imag, gs.Q)) < 1e-10 * norms(g, mod.h)[0] * norms(g, gs.Q)[0]
    assert abs(g.inner(mod.h.real, lap_q)) < 1e-10 * norms(g, mod.h)[0] * norms(g, lap_q)[0]
    assert abs(mod.theta - 0.7) < 0.1


def test_modulation_branch_switches_off(gs):
    mod = modulation_decompose(2.0 * gs.Q, 0.0, gs)
    assert mod.h is None and np.isnan(mod.theta)
    assert mod.alpha == pytest.approx(alpha_gap(gs, 2.0 * gs.Q))


def test_modulated_perturbation_decays_below_threshold(minus_forward_run, sd):
    times, sizes = [], []
    for rec in minus_forward_run.history:
        times.append(rec["t"])
        sizes.append(rec["orbit_distance"])
    slope = np.polyfit(times, np.log(sizes), 1)[0]
    assert abs(slope / -sd.e0 - 1) < 0.1


def test_projections_of_eigenfunctions(sd):
    a_p, a_m, _ = coefficient_projections(sd.y_plus, sd)
    assert a_p == pytest.approx(1.0, rel=1e-9) and abs(a_m) < 1e-9
    a_p, a_m, _ = coefficient_projections(sd.y_minus, sd)
    assert abs(a_p) < 1e-9 and a_m == pytest.approx(1.0, rel=1e-9)


def test_projections_of_phase_mode(sd):
    a_p, a_m, b0 = coefficient_projections(1j * sd.gs.Q, sd)
    assert abs(a_p) < 1e-9 and abs(a_m) < 1e-9
    assert b0 == pytest.approx(np.sqrt(sd.gs.mass), rel=1e-9)


def test_projection_decay_under_linearized_flow(coarse_sd):
    # h_t = -L h by Crank-Nicolson; e^{e0 t} alpha_+ stays constant
    gs, g = coarse_sd.gs, coarse_sd.grid
    n = g.n_points
    big = block_matrix(assemble_sector(0, "plus", gs), assemble_sector(0, "minus", gs))
    dt = 2e-3
    eye = np.eye(2 * n)
    lu = sl.lu_factor(eye + 0.5 * dt * big)
    rhs = eye - 0.5 * dt * big
    h0 = np.exp(-((g.nodes - 1) ** 2)) + 0.3j * np.exp(-(g.nodes**2) / 4)
    x = np.concatenate([to_sym(g, h0.real), to_sym(g, h0.imag)])
    start = coefficient_projections(h0, coarse_sd)[0]
    for _ in range(500):
        x = sl.lu_solve(lu, rhs @ x)
    h = from_sym(g, x[:n]) + 1j * from_sym(g, x[n:])
    end = np.exp(coarse_sd.e0 * 1.0) * coefficient_projections(h, coarse_sd)[0]
    assert abs(end / start - 1) < 1e-4


def test_virial_cutoff_profile():
    r = np.linspace(0, 2.5, 20001)
    assert np.all(virial_phi(r) >= 0)
    assert np.all(virial_phi(r, 2) <= 2 + 1e-12)
    assert np.allclose(virial_phi(r[r <= 1]), r[r <= 1] ** 2, rtol=0, atol=1e-15)
    assert np.all(virial_phi(r[r >= 2]) == PHI_PLATEAU)
    assert np.all(virial_phi(r[r >= 2], 1) == 0)
    # derivatives up to the fourth are continuous at both joins
    for x in (1.0, 2.0):
        for d in range(5):
            lo, hi = virial_phi(np.array([x - 1e-9, x + 1e-9]), d)
            assert abs(lo - hi) < 1e-5


def test_virial_config_scaling():
    vc = VirialConfig(4.0)
    assert vc.phi_R(np.array([2.0]))[0] == pytest.approx(4.0)
    with pytest.raises(ValueError):
        VirialConfig(0.0)


def test_soliton_virial_is_stationary(gs):
    # records of the exact orbit e^{it} Q
    radii = (2.0, 8.0)
    history = []
    for t in np.linspace(0.0, 0.4, 5):
        state = init_state(gs.grid, np.exp(1j * t) * gs.Q, 1e-3, t=t)
        history.append({"t": t, **diagnostics(state, virial_radii=radii)})
    scale = 24 * gs.mass
    for R in radii:
        for r in virial_report(history, VirialConfig(R), gs):
            assert abs(r.V_R_prime) < 1e-12 * scale
            assert abs(r.defect_A_R) < 1e-5 * scale


def test_virial_report_needs_history(gs):
    with pytest.raises(ValueError):
        virial_report([{"t": 0.0}], VirialConfig(2.0), gs)


def test_virial_identity_below_threshold(minus_forward_run, gs):
    # 8 G - 6 Z = 4 (G_Q - G) at the threshold energy E = M/2
    for R in (8.0, 16.0):
        reports = virial_report(minus_forward_run.history, VirialConfig(R), gs)
        for r in reports:
            four_alpha = 4 * r.alpha
            assert r.virial_rhs == pytest.approx(four_alpha, rel=2e-3)
            assert abs(r.V_R_second_fd - four_alpha) <= 0.05 * four_alpha


def test_localization_defect_falls_with_radius(minus_forward_run, gs):
    mean = {}
    for R in (1.0, 2.0):
        reports = virial_report(minus_forward_run.history, VirialConfig(R), gs)
        mean[R] = np.mean([abs(r.defect_A_R) for r in reports])
    assert mean[2.0] <= 0.5 * mean[1.0]


def test_localized_variance_of_soliton(gs):
    v, vp = localized_variance(gs.grid, gs.Q, VirialConfig(16.0))
    full = gs.grid.integrate(gs.grid.nodes**2 * gs.Q**2)
    assert v == pytest.approx(full, rel=1e-8)
    assert vp == 0.0
    assert mass_radius(gs.grid, gs.Q) == pytest.approx(np.sqrt(full / gs.mass))


def test_orbit_distance(gs):
    assert orbit_distance(gs, np.exp(2.1j) * gs.Q) < 1e-12
    d = orbit_distance(gs, 1.1 * gs.Q)
    assert d == pytest.approx(0.1 * norms(gs.grid, gs.Q)[2], rel=1e-10)


def test_blowup_proxy_backward(probe_plus):
    assert probe_plus.backward_verdict == "blow-up proxy"
    assert probe_plus.max_grad_ratio >= 3.0


def test_gradient_barrier_backward(probe_minus):
    assert not probe_minus.crossed_threshold
    assert probe_minus.max_grad_ratio < 1.0
    start, end = probe_minus.outside_mass_fraction
    assert end > 100 * start


@pytest.mark.parametrize("which", ["plus", "minus"])
def test_forward_approach_rate(probe_plus, probe_minus, which):
    probe = probe_plus if which == "plus" else probe_minus
    assert abs(probe.forward_slope_ratio - 1) < 0.10


def test_linearized_consistency(gs, sd):
    # full flow from Q + a Y1 minus the flow from Q, against the exact
    # linear flow (a/2)(e^{-e0 t} Y_+ - e^{e0 t} Y_-): the error is O(a^2)
    dt, t = 2.5e-4, 1.0
    n = int(round(t / dt))
    base = step(init_state(gs.grid, gs.Q, dt), n).u
    errs = {}
    for a in (1e-3, 1e-4):
        u = step(init_state(gs.grid, gs.Q + a * sd.Y1, dt), n).u
        h_num = np.exp(-1j * t) * (u - base)
        h_lin = 0.5 * a * (np.exp(-sd.e0 * t) * sd.y_plus - np.exp(sd.e0 * t) * sd.y_minus)
        errs[a] = norms(gs.grid, h_num - h_lin)[2]
        assert errs[a] < 0.01 * norms(gs.grid, h_lin)[2]
    # ideal ratio 100; the O(dt^2) part of the linear response keeps it a bit lower
    assert errs[1e-3] / errs[1e-4] >= 50


def test_outside_fraction(gs):
    f = outside_fraction(gs.grid, gs.Q, 0.0)
    assert f == pytest.approx(1.0)
    assert outside_fraction(gs.grid, gs.Q, 40.0) == 0.0


def test_overflow_is_reported(coarse_grid):
    with np.errstate(all="ignore"):
        state = init_state(coarse_grid, np.full(coarse_grid.n_points, 1e200, dtype=complex), 1e-3)
        with pytest.raises(EvolutionError, match="overflow"):
            step(state, 1)


def test_energy_of_soliton(gs):
    assert energy(gs.grid, gs.Q) == pytest.approx(0.5 * mass(gs.grid, gs.Q), rel=1e-6)
