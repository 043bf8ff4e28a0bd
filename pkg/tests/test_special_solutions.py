import numpy as np
import pytest

from hartree5d.grid import norms
from hartree5d.linearized import apply_block, nonlinear_remainder
from hartree5d.special_solutions import (
    MAX_ORDER,
    BlockResolvent,
    ResolventError,
    build_profiles,
    default_t0,
    profile_decay_rates,
    qpm_initial_data,
    remainder_coefficients,
    residual_series,
)


@pytest.fixture(scope="module")
def ap3(sd):
    return build_profiles(1.0, 3, sd)


def _field_scale(ap):
    return max(norms(ap.grid, z)[2] for z in ap.profiles())


def test_first_profile_is_scaled_eigenfunction(sd):
    ap = build_profiles(-0.7, 1, sd)
    assert np.array_equal(ap.Z[1], -0.7 * sd.y_plus)
    assert not np.any(ap.Z[0])


def test_first_order_residual_starts_at_q_squared(sd):
    ap = build_profiles(1.0, 1, sd)
    c = ap.residual_coefficients()
    scale = norms(sd.grid, sd.y_plus)[2]
    assert norms(sd.grid, c[0])[2] == 0.0
    assert norms(sd.grid, c[1])[2] < 1e-8 * scale
    assert norms(sd.grid, c[2])[2] > 1e-3 * scale
    t = 1.0
    direct = ap.residual(t)
    assert norms(sd.grid, direct + nonlinear_remainder(sd.gs, ap.evaluate(t)))[2] < 1e-8 * norms(sd.grid, direct)[2]


def test_zero_amplitude(sd):
    ap = build_profiles(0.0, 3, sd)
    assert not np.any(ap.Z)
    assert not np.any(ap.residual(0.5))


@pytest.mark.parametrize("k", [2, 3])
def test_recursion_closes(sd, ap3, k):
    ap = ap3 if k == 3 else build_profiles(1.0, 2, sd)
    c = ap.residual_coefficients()
    scale = _field_scale(ap)
    for j in range(1, k + 1):
        assert norms(sd.grid, c[j])[2] < 1e-8 * scale, j
    assert norms(sd.grid, c[k + 1])[2] > 1e-6 * scale


def test_coefficients_reproduce_direct_residual(ap3):
    # the q-polynomial bookkeeping against field arithmetic at three times
    c = ap3.residual_coefficients()
    for t in (0.3, 0.8, 1.5):
        q = np.exp(-ap3.e0 * t)
        poly = (q ** np.arange(c.shape[0])) @ c
        direct = ap3.residual(t)
        # eps is a small difference of O(q) terms; compare at the scale of L V
        scale = norms(ap3.grid, apply_block(ap3.gs, ap3.evaluate(t)))[2]
        assert norms(ap3.grid, poly - direct)[2] <= 1e-10 * scale


def test_profiles_solve_the_resolvent_equations(sd, ap3):
    gs = sd.gs
    for j in range(1, 3):
        rhs = remainder_coefficients(gs, ap3.Z[: j + 1], j + 1)[j + 1]
        lhs = apply_block(gs, ap3.Z[j + 1]) - (j + 1) * sd.e0 * ap3.Z[j + 1]
        assert norms(sd.grid, lhs - rhs)[0] < 1e-8 * norms(sd.grid, rhs)[0]


@pytest.mark.parametrize("k", [1, 2, 3])
def test_residual_slopes(sd, ap3, k):
    ap = ap3 if k == 3 else build_profiles(1.0, k, sd)
    series = residual_series(ap, np.linspace(2 / sd.e0, 6 / sd.e0, 9))
    assert abs(series.slope / (-(k + 1) * sd.e0) - 1) < 0.05


def test_residual_decreases_with_order(sd, ap3):
    t = 2.0 / sd.e0
    values = [norms(sd.grid, build_profiles(1.0, k, sd).residual(t))[2] for k in (1, 2)]
    values.append(norms(sd.grid, ap3.residual(t))[2])
    assert values[0] > values[1] > values[2]


def test_residual_series_rejects_bad_times(ap3):
    with pytest.raises(ValueError):
        residual_series(ap3, [1.0])
    with pytest.raises(ValueError):
        residual_series(ap3, [1.0, 0.5])


@pytest.mark.parametrize("A", [-1.0, 0.5])
def test_amplitude_scaling(sd, ap3, A):
    ap = build_profiles(A, 3, sd)
    for j in range(1, 4):
        ref = A**j * ap3.Z[j]
        assert norms(sd.grid, ap.Z[j] - ref)[2] <= 1e-10 * norms(sd.grid, ref)[2]


def test_conjugation_acts_on_coefficients(ap3):
    t = 0.9
    q = np.exp(-ap3.e0 * t)
    conj_expansion = (q ** np.arange(ap3.k + 1)) @ np.conj(ap3.Z)
    assert np.array_equal(np.conj(ap3.evaluate(t)), conj_expansion)


def test_evaluation_is_linear(ap3):
    t = 0.4
    q = np.exp(-ap3.e0 * t)
    manual = sum(q**j * ap3.Z[j] for j in range(1, 4))
    assert np.allclose(ap3.evaluate(t), manual, rtol=1e-14, atol=0)


def test_profiles_decay(ap3):
    assert all(rate > 0.2 for rate in profile_decay_rates(ap3))


@pytest.mark.parametrize("k", [0, MAX_ORDER + 1, 2.5])
def test_order_bounds(sd, k):
    with pytest.raises(ValueError):
        build_profiles(1.0, k, sd)


def test_singular_resolvent_is_refused(coarse_sd):
    # e0 itself is an eigenvalue of L; 2 e0 is not
    with pytest.raises(ResolventError, match="singular"):
        BlockResolvent(coarse_sd.gs, coarse_sd.e0)
    assert BlockResolvent(coarse_sd.gs, 2 * coarse_sd.e0).rcond > 1e-8


def test_default_start_time(ap3):
    t0 = default_t0(ap3)
    size = norms(ap3.grid, ap3.evaluate(t0))[2]
    assert size == pytest.approx(0.1 * norms(ap3.grid, ap3.gs.Q)[2], rel=1e-10)


@pytest.mark.parametrize("sign", [1, -1])
def test_threshold_initial_data(sd, sign):
    data = qpm_initial_data(sign, None, 3, sd)
    gs = sd.gs
    assert np.sign(data.grad_gap) == sign
    assert np.sign(norms(gs.grid, data.u0)[1] - np.sqrt(gs.grad_sq)) == sign
    q_size = np.exp(-sd.e0 * data.t0)
    # conservation holds to the truncation order, up to an O(1) constant
    assert abs(data.mass_defect) / gs.mass < 10 * q_size**4
    assert abs(data.energy_defect) / gs.mass < 10 * q_size**4


def test_initial_data_errors(sd):
    with pytest.raises(ValueError):
        qpm_initial_data(0, None, 3, sd)
    with pytest.raises(ValueError, match="not perturbative"):
        qpm_initial_data(1, -1.0, 3, sd)
