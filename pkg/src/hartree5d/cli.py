"""Command-line runner: ground, spectrum, profiles, evolve, virial, report.

Each command runs one pipeline stage into the output directory and writes a
manifest ``<command>.manifest.json``.  Exit status: 0 when every check of the
stage passed, 1 when a check failed or a stage raised, 2 for usage and
configuration errors.

Configuration is a plain-text file of ``key = value`` lines (``#`` starts a
comment); command-line flags override it.  Unknown keys are rejected.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .evolution import (
    EvolutionError,
    VirialConfig,
    evolve,
    init_state,
    mass_radius,
    virial_report,
)
from .grid import MIN_POINTS, RadialGrid, make_grid, norms
from .ground_state import (
    GroundState,
    GroundStateError,
    ground_state_from_profile,
    solve_ground_state,
)
from .io import FieldFileError, load_field, save_field, sha256_file, write_csv, write_json
from .linearized import (
    SpectralError,
    antisymmetry_defects,
    coercivity_constant,
    coercivity_samples,
    compute_e0,
    linearized_growth_rate,
    phi,
    scaling_identity_check,
    sector_counts,
    volterra_growth_check,
)
from .special_solutions import ResolventError, build_profiles, qpm_initial_data, residual_series

COMMANDS = ("ground", "spectrum", "profiles", "evolve", "virial", "report")
SOURCES = ("ground", "qpm+", "qpm-")
DIRECTIONS = ("forward", "backward")
BLOWUP_FACTOR = 3.0

# criterion number -> short title, for the report table
CRITERIA = {
    1: "Pohozaev certificate",
    2: "sharp-constant identity",
    3: "spectral counts",
    4: "e0 cross-validation",
    5: "linearized energy",
    6: "coercivity",
    7: "Volterra growth",
    8: "scaling identity",
    9: "residual slopes",
    10: "conservation",
    11: "dichotomy probes",
    12: "virial identity",
    13: "total wall time",
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    n_points: int = 2048
    r_max: float = 30.0
    tol: float = 1e-10
    seed: int = 0
    output: str = "runs"
    # spectrum
    samples: int = 500
    pairs: int = 50
    # profiles
    amplitude: float = 1.0
    k_max: int = 3
    # evolve
    source: str = "ground"
    direction: str = "forward"
    k: int = 5
    t0: float = math.nan  # nan: pick t0 where ||V_k||_{H^1} = 0.1 ||Q||_{H^1}
    dt: float = 1e-3
    horizon: float = 1.0
    record_every: int = 10
    virial_radii: tuple = (8.0, 16.0)
    # virial
    trajectory: str = ""
    # report
    manifests: tuple = ()
    # check thresholds
    pohozaev_tol: float = 1e-6
    residual_tol: float = 1e-8
    slope_tol: float = 0.05
    forward_slope_tol: float = 0.10
    mass_drift_tol: float = 1e-10
    energy_drift_tol: float = 1e-6
    virial_tol: float = 0.05

    def __post_init__(self) -> None:
        def need(ok: bool, msg: str) -> None:
            if not ok:
                raise ConfigError(msg)

        need(self.command in COMMANDS, f"command must be one of {COMMANDS}, got {self.command!r}")
        need(MIN_POINTS <= self.n_points <= 1 << 16, f"n_points must be in [{MIN_POINTS}, 65536]")
        need(0 < self.r_max <= 1e3, "r_max must be in (0, 1000]")
        need(1e-14 < self.tol < 1e-4, "tol must be in (1e-14, 1e-4)")
        need(self.seed >= 0, "seed must be nonnegative")
        need(1 <= self.samples <= 10**5 and 1 <= self.pairs <= 10**4, "samples/pairs out of range")
        need(1 <= self.k_max <= 6 and 1 <= self.k <= 6, "orders k, k_max must be in [1, 6]")
        need(self.amplitude != 0 and math.isfinite(self.amplitude), "amplitude must be finite and nonzero")
        need(self.source in SOURCES, f"source must be one of {SOURCES}")
        need(self.direction in DIRECTIONS, f"direction must be one of {DIRECTIONS}")
        need(1e-5 < self.dt < 1e-1, "dt must lie in (1e-5, 1e-1)")
        need(0 < self.horizon <= 100, "horizon must be in (0, 100]")
        need(self.record_every >= 1, "record_every must be positive")
        need(all(R > 0 for R in self.virial_radii), "virial radii must be positive")
        for name in ("pohozaev_tol", "residual_tol", "slope_tol", "forward_slope_tol",
                     "mass_drift_tol", "energy_drift_tol", "virial_tol"):
            need(getattr(self, name) > 0, f"{name} must be positive")

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["virial_radii"] = list(self.virial_radii)
        out["manifests"] = list(self.manifests)
        out["t0"] = None if math.isnan(self.t0) else self.t0
        return out

    @property
    def out_dir(self) -> Path:
        return Path(self.output)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(key: str, raw):
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    default = _FIELDS[key].default
    if isinstance(default, tuple):
        if isinstance(raw, (list, tuple)):
            items = list(raw)
        else:
            items = [s for s in str(raw).replace(",", " ").split() if s]
        return tuple(float(x) for x in items) if key == "virial_radii" else tuple(str(x) for x in items)
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return math.nan if raw is None or str(raw).lower() in ("", "none", "nan") else float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return str(raw)


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = _coerce(key, value)
    return out


def config_from_mapping(values: dict) -> RunConfig:
    values = {k: _coerce(k, v) for k, v in values.items()}
    if "command" not in values:
        raise ConfigError("command is required")
    return RunConfig(**values)


# -- manifest -----------------------------------------------------------------


@dataclass
class RunManifest:
    config: dict
    version: str
    grid_hash: str
    wall_time: float
    files: dict = field(default_factory=dict)  # relative name -> sha256
    headline: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)  # name -> {criterion, value, threshold, passed}

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def verify_files(self, root: Path) -> bool:
        return all(sha256_file(root / name) == digest for name, digest in self.files.items())


def load_manifest(path: str | Path) -> RunManifest:
    data = json.loads(Path(path).read_text())
    return RunManifest(**data)


def _check(criterion: int | None, value, threshold, passed: bool) -> dict:
    return {"criterion": criterion, "value": _plain(value), "threshold": _plain(threshold), "passed": bool(passed)}


def _plain(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    return x


class _Stage:
    """Collects outputs and checks of one stage."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.files: list[Path] = []
        self.headline: dict = {}
        self.checks: dict = {}

    def field(self, name: str, grid: RadialGrid, values) -> None:
        path = save_field(grid, values, self.cfg.out_dir / f"{name}.field")
        self.files += [path, path.with_suffix(".csv")]

    def json(self, name: str, obj) -> None:
        self.files.append(write_json(self.cfg.out_dir / name, _plain(obj)))

    def csv(self, name: str, header, rows) -> None:
        self.files.append(write_csv(self.cfg.out_dir / name, header, rows))

    def check(self, name: str, criterion, value, threshold, passed) -> None:
        self.checks[name] = _check(criterion, value, threshold, passed)


# -- stages -------------------------------------------------------------------


def _grid(cfg: RunConfig) -> RadialGrid:
    return make_grid(cfg.n_points, cfg.r_max)


def _ground(cfg: RunConfig, grid: RadialGrid) -> GroundState:
    """Reuse Q from the output directory if present on the same grid, else solve."""
    path = cfg.out_dir / "Q.field"
    if path.exists():
        try:
            _, Q = load_field(path, grid)
            return ground_state_from_profile(grid, Q)
        except (FieldFileError, GroundStateError):
            pass
    return solve_ground_state(grid, tol=cfg.tol)


def stage_ground(cfg: RunConfig, st: _Stage) -> RadialGrid:
    grid = _grid(cfg)
    t = time.perf_counter()
    gs = solve_ground_state(grid, tol=cfg.tol)
    solve_time = time.perf_counter() - t
    st.field("Q", grid, gs.Q)
    cert = gs.certificate()
    j_ratio = (1.0 / gs.c_gn) / (3.0 * np.sqrt(3.0) / 4.0 * gs.mass)
    cert["gn_ratio"] = j_ratio
    st.json("certificate.json", cert)
    g_ratio, z_ratio = gs.grad_sq / (3 * gs.mass), gs.z_h / (4 * gs.mass)
    st.headline.update(grad_sq_over_mass=3 * g_ratio, z_h_over_mass=4 * z_ratio, mass=gs.mass,
                       decay_rate=gs.decay_rate, gn_ratio=j_ratio)
    tol = cfg.pohozaev_tol
    st.check("pohozaev_grad", 1, abs(g_ratio - 1), tol, abs(g_ratio - 1) < tol)
    st.check("pohozaev_z", 1, abs(z_ratio - 1), tol, abs(z_ratio - 1) < tol)
    st.check("ground_solve_time", 1, solve_time, 60.0, solve_time < 60.0)
    st.check("gn_identity", 2, abs(j_ratio - 1), tol, abs(j_ratio - 1) < tol)
    return grid


def stage_spectrum(cfg: RunConfig, st: _Stage) -> RadialGrid:
    grid = _grid(cfg)
    gs = _ground(cfg, grid)
    rng = np.random.default_rng(cfg.seed)
    sd = compute_e0(gs)
    st.field("Y1", grid, sd.Y1)
    st.field("Y2", grid, sd.Y2)
    counts = sector_counts(gs)
    rate = linearized_growth_rate(gs, seed=cfg.seed)
    c_g = coercivity_constant("Gperp", sd)
    c_y = coercivity_constant("GperpY", sd)
    ratios_g = coercivity_samples("Gperp", sd, rng, cfg.samples)
    ratios_y = coercivity_samples("GperpY", sd, rng, cfg.samples)
    anti = antisymmetry_defects(gs, rng, cfg.pairs)
    y_h1 = norms(grid, sd.y_plus)[2] ** 2
    phi_q = phi(gs, gs.Q) / gs.mass
    phi_y = max(abs(phi(gs, sd.y_plus)), abs(phi(gs, sd.y_minus)))
    volt = volterra_growth_check(gs)
    kappa, res = scaling_identity_check(gs, 2.0)
    kappa52, res52 = scaling_identity_check(gs, 2.5)

    summary = {
        **sd.summary(),
        "propagator_rate": rate,
        "sector_counts": counts.as_dict(),
        "coercivity": {"Gperp": c_g, "GperpY": c_y,
                       "sample_min_Gperp": float(ratios_g.min()), "sample_min_GperpY": float(ratios_y.min())},
        "phi_Q_over_mass": phi_q,
        "phi_Y_max": phi_y,
        "antisymmetry_max": float(anti.max()),
        "volterra": {"growth_rate": volt.growth_rate, "sign_changes": volt.sign_changes},
        "scaling": {"kappa": kappa, "residual": res, "kappa_5_2": kappa52, "residual_5_2": res52},
    }
    st.json("spectrum.json", summary)
    st.headline.update(e0=sd.e0, propagator_rate=rate, coercivity_Gperp=c_g, coercivity_GperpY=c_y)

    tol = cfg.residual_tol
    st.check("negative_count_l0", 3, counts.negative_plus_l0, 1, counts.negative_plus_l0 == 1)
    l1 = abs(counts.lowest_plus_l1) / counts.norm_plus_l1
    st.check("kernel_l1", 3, l1, 1e-4, l1 < 1e-4 and counts.cosine_plus_l1 > 0.999
             and counts.sign_changes_plus_l1 == 0)
    st.check("positive_l2", 3, counts.lowest_plus_l2, 0.0, counts.lowest_plus_l2 > 0)
    lm = abs(counts.lowest_minus) / counts.norm_minus
    st.check("kernel_minus", 3, lm, 1e-4, lm < 1e-4 and counts.cosine_minus > 0.999)
    agree = abs(rate / sd.e0 - 1)
    st.check("e0_propagator", 4, agree, 0.02, agree < 0.02)
    st.check("block_residuals", 4, max(sd.residual_plus, sd.residual_minus), tol,
             max(sd.residual_plus, sd.residual_minus) < tol)
    st.check("decay_Y", 4, sd.decay_rate_Y, 0.2, sd.decay_rate_Y > 0.2)
    st.check("phi_Q", 5, abs(phi_q + 4), 1e-5, abs(phi_q + 4) < 1e-5)
    st.check("phi_Y", 5, phi_y / y_h1, 1e-8, phi_y < 1e-8 * y_h1)
    st.check("antisymmetry", 5, float(anti.max()), 1e-9, anti.max() < 1e-9)
    st.check("coercivity_constants", 6, min(c_g, c_y), 0.0, c_g > 0 and c_y > 0)
    st.check("coercivity_samples", 6, [float(ratios_g.min()), float(ratios_y.min())], [c_g, c_y],
             ratios_g.min() >= c_g and ratios_y.min() >= c_y)
    st.check("volterra", 7, volt.growth_rate, 0.8, volt.sign_changes == 0 and volt.growth_rate >= 0.8)
    st.check("scaling_identity", 8, abs(kappa + 2), 1e-3, abs(kappa + 2) < 1e-3 and res52 > res)
    return grid


def _residual_times(e0: float) -> np.ndarray:
    return np.linspace(2.0 / e0, 6.0 / e0, 9)


def stage_profiles(cfg: RunConfig, st: _Stage) -> RadialGrid:
    grid = _grid(cfg)
    gs = _ground(cfg, grid)
    sd = compute_e0(gs)
    ap = build_profiles(cfg.amplitude, cfg.k_max, sd, gs)
    for j, z in enumerate(ap.profiles(), 1):
        st.field(f"Z{j}", grid, z)
    if not math.isnan(cfg.t0):
        st.field("V_t0", grid, ap.evaluate(cfg.t0))
    times = _residual_times(sd.e0)
    slopes, table = {}, [times]
    for k in range(1, cfg.k_max + 1):
        series = residual_series(build_profiles(cfg.amplitude, k, sd, gs), times)
        ratio = series.slope / (-(k + 1) * sd.e0)
        slopes[k] = {"slope": series.slope, "ratio": ratio, "norms": series.norms.tolist()}
        table.append(series.norms)
        if k <= 3:
            st.check(f"residual_slope_k{k}", 9, abs(ratio - 1), cfg.slope_tol, abs(ratio - 1) < cfg.slope_tol)
    st.csv("residuals.csv", ["t"] + [f"eps_k{k}" for k in range(1, cfg.k_max + 1)], zip(*table))
    st.json("profiles.json", {"e0": sd.e0, "amplitude": cfg.amplitude, "times": times.tolist(),
                              "slopes": {str(k): v for k, v in slopes.items()}})
    st.headline.update(e0=sd.e0, residual_slope_ratios={str(k): v["ratio"] for k, v in slopes.items()})
    return grid


TRAJECTORY_COLUMNS = ["t", "mass_drift", "energy_drift", "grad_norm", "grad_sq", "alpha", "theta", "beta",
                      "alpha_plus", "alpha_minus", "orbit_distance", "outside_fraction", "virial_rhs"]


def stage_evolve(cfg: RunConfig, st: _Stage) -> RadialGrid:
    grid = _grid(cfg)
    gs = _ground(cfg, grid)
    sd = compute_e0(gs)
    if cfg.source == "ground":
        u0, t0 = gs.Q.astype(complex), None
    else:
        data = qpm_initial_data(1 if cfg.source == "qpm+" else -1, None if math.isnan(cfg.t0) else cfg.t0,
                                cfg.k, sd, gs)
        u0, t0 = data.u0, data.t0
    dt = cfg.dt if cfg.direction == "forward" else -cfg.dt
    state = init_state(grid, u0, dt)
    grad_q = math.sqrt(gs.grad_sq)
    blown = {"hit": False}

    def stop(rec):
        blown["hit"] = rec["grad_norm"] >= BLOWUP_FACTOR * grad_q
        return blown["hit"]

    try:
        evolve(state, dt * round(cfg.horizon / cfg.dt), cfg.record_every, gs, sd, cfg.virial_radii, stop)
    except EvolutionError:
        blown["hit"] = True
    hist = state.history
    radii = [f"{R:g}" for R in cfg.virial_radii]
    cols = TRAJECTORY_COLUMNS + [f"V_R[{R}]" for R in radii] + [f"V_R_prime[{R}]" for R in radii]
    st.csv("trajectory.csv", cols, ([rec.get(c, math.nan) for c in cols] for rec in hist))
    st.field("u_final", grid, state.u)

    ratios = np.array([rec["grad_norm"] for rec in hist]) / grad_q
    crossed = bool(np.any(np.diff(np.sign(ratios - 1.0)) != 0))
    fractions = np.array([rec["outside_fraction"] for rec in hist])
    n_steps = int(round(abs(state.t) / cfg.dt))
    mass_drift = float(np.max(np.abs([rec["mass_drift"] for rec in hist])))
    energy_drift = float(abs(hist[-1]["energy_drift"]))
    verdict = {
        "source": cfg.source,
        "direction": cfg.direction,
        "t0": t0,
        "t_final": state.t,
        "steps": n_steps,
        "blowup_proxy": blown["hit"],
        "gradient_threshold_crossing": crossed,
        "verdict": ("blow-up proxy" if blown["hit"] else
                    "gradient-threshold crossing" if crossed else "no gradient-threshold crossing"),
        "max_grad_ratio": float(ratios.max()),
        "min_grad_ratio": float(ratios.min()),
        "spreading_monotone": bool(np.all(np.diff(fractions) > 0)),
        "outside_fraction": [float(fractions[0]), float(fractions[-1])],
        "mass_drift_max": mass_drift,
        "energy_drift_final": energy_drift,
        "mass_radius_final": mass_radius(grid, state.u),
    }
    if cfg.direction == "forward" and cfg.source != "ground":
        times = np.array([rec["t"] for rec in hist])
        dist = np.array([rec["orbit_distance"] for rec in hist])
        sel = times <= 1.0 + 1e-12
        slope = float(np.polyfit(times[sel], np.log(dist[sel]), 1)[0])
        verdict.update(forward_slope=slope, forward_slope_ratio=slope / -sd.e0)
        st.check("forward_slope", 11, abs(slope / -sd.e0 - 1), cfg.forward_slope_tol,
                 abs(slope / -sd.e0 - 1) < cfg.forward_slope_tol)
    if cfg.direction == "backward" and cfg.source == "qpm+":
        st.check("blowup_proxy", 11, verdict["max_grad_ratio"], BLOWUP_FACTOR, blown["hit"])
    if cfg.direction == "backward" and cfg.source == "qpm-":
        ok = not crossed and verdict["spreading_monotone"] and ratios[-1] < 1.0
        st.check("spreading_proxy", 11, fractions[-1], "monotone", ok)
    st.json("verdict.json", verdict)
    st.headline.update(verdict=verdict["verdict"], mass_drift=mass_drift, energy_drift=energy_drift)

    mass_tol = cfg.mass_drift_tol * max(1.0, n_steps / 1e4)
    st.check("mass_drift", 10, mass_drift, mass_tol, mass_drift < mass_tol)
    if not blown["hit"]:
        st.check("energy_drift", 10, energy_drift, cfg.energy_drift_tol, energy_drift < cfg.energy_drift_tol)
    return grid


def _read_trajectory(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def stage_virial(cfg: RunConfig, st: _Stage) -> RadialGrid:
    grid = _grid(cfg)
    gs = _ground(cfg, grid)
    path = Path(cfg.trajectory) if cfg.trajectory else cfg.out_dir / "trajectory.csv"
    if not path.exists():
        raise FileNotFoundError(f"trajectory {path} not found; run 'evolve' first")
    hist = _read_trajectory(path)
    radii = sorted(float(k[4:-1]) for k in hist[0] if k.startswith("V_R[") and k.endswith("]"))
    if not radii:
        raise ValueError(f"trajectory {path} has no V_R columns")
    rows, worst, defects = [], 0.0, {}
    floor = 1e-6 * gs.mass
    for R in radii:
        reps = virial_report(hist, VirialConfig(R), gs)
        defects[R] = float(np.mean(np.abs([r.defect_A_R for r in reps])))
        for r in reps:
            rows.append([r.t, R, r.V_R, r.V_R_prime, r.V_R_second_fd, r.defect_A_R, r.threshold_target,
                         r.virial_rhs, r.alpha])
            worst = max(worst, abs(r.V_R_second_fd - r.threshold_target) / max(8 * r.alpha, floor))
    st.csv("virial.csv", ["t", "R", "V_R", "V_R_prime", "V_R_second_fd", "defect_A_R", "threshold_target",
                          "virial_rhs", "alpha"], rows)
    halving = [defects[b] / defects[a] for a, b in zip(radii[:-1], radii[1:]) if math.isclose(b, 2 * a)]
    st.headline.update(virial_threshold_error=worst, defect_mean=defects, defect_ratios=halving)
    st.check("virial_threshold", 12, worst, cfg.virial_tol, worst <= cfg.virial_tol)
    if halving:
        st.check("defect_halving", 12, max(halving), 0.5, max(halving) <= 0.5)
    return grid


def stage_report(cfg: RunConfig, st: _Stage) -> RadialGrid | None:
    paths = [Path(p) for p in cfg.manifests] or sorted(cfg.out_dir.glob("*.manifest.json"))
    paths = [p for p in paths if p.name != "report.manifest.json"]
    if not paths:
        raise FileNotFoundError(f"no manifests found in {cfg.out_dir}")
    manifests = [load_manifest(p) for p in paths]
    table = render_report(manifests)
    text = "\n".join(f"{n:>2}  {status:<8} {CRITERIA[n]}" + (f"  ({detail})" if detail else "")
                     for n, status, detail in table)
    print(text)
    st.files.append(write_json(cfg.out_dir / "report.json",
                               [{"criterion": n, "status": s, "detail": d} for n, s, d in table]))
    for n, status, _ in table:
        st.check(f"criterion_{n}", n, status, "PASS", status != "FAIL")
    return None


def render_report(manifests: list[RunManifest]) -> list[tuple[int, str, str]]:
    """One (criterion, PASS|FAIL|not run, failing checks) row per criterion."""
    by_crit: dict[int, list[tuple[str, dict]]] = {}
    for m in manifests:
        for name, c in m.checks.items():
            if c.get("criterion") in CRITERIA:
                by_crit.setdefault(c["criterion"], []).append((name, c))
    rows = []
    for n in CRITERIA:
        if n == 13:
            total = sum(m.wall_time for m in manifests)
            ok = total < 1800.0
            rows.append((n, "PASS" if ok else "FAIL", f"{total:.1f} s over {len(manifests)} runs"))
            continue
        checks = by_crit.get(n)
        if not checks:
            rows.append((n, "not run", ""))
            continue
        failed = [name for name, c in checks if not c["passed"]]
        rows.append((n, "FAIL" if failed else "PASS", ", ".join(failed)))
    return rows


STAGES = {
    "ground": stage_ground,
    "spectrum": stage_spectrum,
    "profiles": stage_profiles,
    "evolve": stage_evolve,
    "virial": stage_virial,
    "report": stage_report,
}


def run(cfg: RunConfig) -> RunManifest:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    st = _Stage(cfg)
    t = time.perf_counter()
    grid = STAGES[cfg.command](cfg, st)
    wall = time.perf_counter() - t
    root = cfg.out_dir
    manifest = RunManifest(
        config=cfg.as_dict(),
        version=__version__,
        grid_hash=grid.digest() if grid is not None else "",
        wall_time=wall,
        files={str(p.relative_to(root)): sha256_file(p) for p in st.files},
        headline=_plain(st.headline),
        checks=st.checks,
    )
    write_json(root / f"{cfg.command}.manifest.json", manifest.as_dict())
    return manifest


# -- argument parsing -------------------------------------------------------------


_HELP = {
    "n_points": "grid intervals N",
    "r_max": "outer radius",
    "tol": "ground-state residual tolerance",
    "seed": "seed for randomized checks",
    "output": "output directory",
    "source": "initial data: ground, qpm+ or qpm-",
    "direction": "forward or backward in time",
    "amplitude": "amplitude A of the approximate solution",
    "k_max": "highest order k of the approximate solutions",
    "k": "order of the approximate solution used for qpm data",
    "t0": "time at which the approximate solution is sampled",
    "horizon": "length of the run in time units",
    "virial_radii": "comma-separated cutoff radii R",
    "trajectory": "trajectory CSV to replay (default OUTPUT/trajectory.csv)",
    "manifests": "manifest files to summarize (default OUTPUT/*.manifest.json)",
}

_COMMON = ("n_points", "r_max", "tol", "seed", "output")
_PER_COMMAND = {
    "ground": ("pohozaev_tol",),
    "spectrum": ("samples", "pairs", "residual_tol"),
    "profiles": ("amplitude", "k_max", "t0", "slope_tol"),
    "evolve": ("source", "direction", "k", "t0", "dt", "horizon", "record_every", "virial_radii",
               "mass_drift_tol", "energy_drift_tol", "forward_slope_tol"),
    "virial": ("trajectory", "virial_tol"),
    "report": ("manifests",),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hartree5d", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd)
        p.add_argument("--config", type=Path, help="key = value configuration file")
        for name in _COMMON + _PER_COMMAND[cmd]:
            flag = "--" + name.replace("_", "-")
            if name == "manifests":
                p.add_argument(name, nargs="*", default=None, help=_HELP[name])
            else:
                p.add_argument(flag, dest=name, default=None, help=_HELP.get(name, name.replace("_", " ")))
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        values = {}
        if args.config is not None:
            values.update(parse_config_text(args.config.read_text()))
        values.update({k: v for k, v in vars(args).items() if k != "config" and v is not None})
        values["command"] = args.command
        cfg = config_from_mapping(values)
    except (ConfigError, OSError) as exc:
        print(f"hartree5d: configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        manifest = run(cfg)
    except (GroundStateError, SpectralError, ResolventError, EvolutionError, FieldFileError,
            FileNotFoundError, ValueError) as exc:
        print(f"hartree5d {cfg.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for name, c in manifest.checks.items() if cfg.command != "report" else ():
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {name}  value={c['value']}  threshold={c['threshold']}")
    return 0 if manifest.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
