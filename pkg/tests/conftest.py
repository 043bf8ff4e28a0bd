import time

import pytest

from hartree5d.grid import make_grid
from hartree5d.ground_state import solve_ground_state
from hartree5d.linearized import compute_e0

SESSION_START = time.perf_counter()

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_collection_modifyitems(config, items):
    # the wall-time criterion measures the whole session, so it runs last
    last = [it for it in items if it.name == "test_criterion_13_suite_wall_time"]
    items[:] = [it for it in items if it not in last] + last


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def grid():
    return make_grid(2048, 30.0)


@pytest.fixture(scope="session")
def gs(grid):
    return solve_ground_state(grid)


@pytest.fixture(scope="session")
def sd(gs):
    return compute_e0(gs)


@pytest.fixture(scope="session")
def coarse_grid():
    return make_grid(512, 30.0)


@pytest.fixture(scope="session")
def coarse_gs(coarse_grid):
    return solve_ground_state(coarse_grid)


@pytest.fixture(scope="session")
def coarse_sd(coarse_gs):
    return compute_e0(coarse_gs)


@pytest.fixture(scope="session")
def propagated_rate(gs):
    # growth rate of the linearized flow from random data; about 20 s at N = 2048
    from hartree5d.linearized import linearized_growth_rate

    return linearized_growth_rate(gs, seed=0)


@pytest.fixture(scope="session")
def probe_plus(sd):
    from hartree5d.evolution import dichotomy_probe

    return dichotomy_probe(1, None, 5, sd)


@pytest.fixture(scope="session")
def probe_minus(sd):
    from hartree5d.evolution import dichotomy_probe

    return dichotomy_probe(-1, None, 5, sd)


@pytest.fixture(scope="session")
def soliton_runs(gs):
    """u0 = Q evolved to t = 5 at dt = 1e-3 and 5e-4."""
    from hartree5d.evolution import evolve, init_state

    runs = {}
    for dt in (1e-3, 5e-4):
        state = init_state(gs.grid, gs.Q, dt)
        evolve(state, 5.0, record_every=int(round(0.1 / dt)), gs=gs)
        runs[dt] = state
    return runs


@pytest.fixture(scope="session")
def minus_forward_run(sd):
    """Threshold data below the gradient norm of Q, evolved forward to t = 1."""
    from hartree5d.evolution import evolve, init_state
    from hartree5d.special_solutions import qpm_initial_data

    data = qpm_initial_data(-1, None, 5, sd)
    state = init_state(sd.grid, data.u0, 1e-3)
    evolve(state, 1.0, record_every=10, gs=sd.gs, sd=sd, virial_radii=(1.0, 2.0, 4.0, 8.0, 16.0))
    return state
