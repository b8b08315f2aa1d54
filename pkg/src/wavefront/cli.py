"""Command-line front end: experiment orchestration and CSV emission.

Every emitted number is tagged with the producing operation and its
tolerance metadata, and each row echoes a canonical configuration string
that re-parses into an equivalent run.  Output is deterministic: re-running
a configuration byte-reproduces the CSV, including under parallel sweeps.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import bec_wave as bw
from . import bms_wave as bms
from . import density_core as dc
from . import gauss_wave as gw
from .ensemble import parse_ensemble
from .errors import ConfigError, RegimeError, WavefrontError
from .profiles import SolverGrid

log = logging.getLogger("wavefront.cli")

CSV_HEADER = (
    "mode,ensemble,channel,param,measure,value,units,operation,"
    "tolerance,iterations,residual,status,error_code,config_echo"
)

VELOCITY_UNITS = "w-positions/iteration"

DEFAULTS = {
    "channel": "bec",
    "L": 256,
    "w": 8,
    "dz": 1.0 / 64.0,
    "zmin": -8.0,
    "zmax": 8.0,
    "grid_A": 30.0,
    "grid_delta": 30.0 / 2048.0,
    "tol": None,
    "format": "csv",
    "snapshots_every": 50,
    "workers": 1,
    "delta_eps": 0.04,
    "step": 0.01,
    "order": 2,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavefront",
        description="Decoding-wave velocities for spatially coupled LDPC ensembles",
    )
    sub = parser.add_subparsers(dest="mode", required=True)

    def common(p):
        p.add_argument("--ensemble", help="regular:ELL,R or lambda:...;rho:... descriptor")
        p.add_argument("--channel", choices=["bec", "biawgn"], default=None)
        p.add_argument("--eps", type=float, default=None, help="erasure probability")
        p.add_argument("--mean", type=float, default=None, help="channel LLR mean 2/sigma_n^2")
        p.add_argument("--L", type=int, default=None, help="chain length")
        p.add_argument("--w", type=int, default=None, help="coupling window")
        p.add_argument("--dz", type=float, default=None, help="continuum grid step")
        p.add_argument("--zmin", type=float, default=None)
        p.add_argument("--zmax", type=float, default=None)
        p.add_argument("--grid-A", dest="grid_A", type=float, default=None,
                       help="density grid LLR half-range")
        p.add_argument("--grid-delta", dest="grid_delta", type=float, default=None,
                       help="density grid spacing")
        p.add_argument("--tol", type=float, default=None, help="threshold bisection tolerance")
        p.add_argument("--out", default=None, help="output CSV path (default stdout)")
        p.add_argument("--format", choices=["csv"], default=None)
        p.add_argument("--snapshots-every", dest="snapshots_every", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--config", default=None, help="key=value config file; flags override")
        p.add_argument("--plot", action="store_true", default=None,
                       help="render figures next to the CSV output")
        p.add_argument("--profile-out", dest="profile_out", default=None,
                       help="write the solved profile / trajectory snapshots as CSV")
        return p

    common(sub.add_parser("thresholds", help="BP and MAP thresholds of an ensemble"))
    common(sub.add_parser("wave", help="continuum wave shape and velocity"))
    common(sub.add_parser("empirical", help="kink velocity of the coupled chain"))
    p = common(sub.add_parser("sweep", help="channel-parameter sweep"))
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--measure", default="v_bec",
                   help="comma list: v_bec,v_e,v_a1,v_a2,v_b,x_bp,gap")
    p = common(sub.add_parser("gamma", help="finite-length scaling parameter estimate"))
    p.add_argument("--delta-eps", dest="delta_eps", type=float, default=None)
    p.add_argument("--eps-ref", dest="eps_ref", type=float, default=None)
    p = common(sub.add_parser("ga", help="Gaussian-approximation pipeline"))
    p.add_argument("--measure", default="v_ga,v_e")
    p.add_argument("--curvature-arg", dest="curvature_arg", type=int, default=None)
    p = common(sub.add_parser("bms", help="full density pipeline"))
    p.add_argument("--measure", default="v_bms")
    p.add_argument("--density-out", dest="density_out", default=None,
                   help="write the fixed-point density (binary record)")
    common(sub.add_parser("density-check", help="density-algebra self checks"))
    p = sub.choices["wave"]
    p.add_argument("--order", type=int, default=None, help="approximation order for v_a")
    return parser


def read_config_file(path) -> dict:
    values = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"config line needs key=value: {raw.strip()!r}")
            key, _, val = line.partition("=")
            values[key.strip().replace("-", "_")] = val.strip()
    return values


_CONFIG_TYPES = {
    "eps": float, "mean": float, "L": int, "w": int, "dz": float,
    "zmin": float, "zmax": float, "grid_A": float, "grid_delta": float,
    "tol": float, "snapshots_every": int, "workers": int, "delta_eps": float,
    "eps_ref": float, "start": float, "stop": float, "step": float,
    "order": int, "curvature_arg": int, "plot": lambda s: s.lower() in ("1", "true", "yes"),
}


def merge_config(args: argparse.Namespace) -> dict:
    cfg = vars(args).copy()
    if cfg.get("config"):
        file_values = read_config_file(cfg["config"])
        for key, raw in file_values.items():
            if key not in cfg:
                raise ConfigError(f"unknown config key {key!r}")
            if cfg[key] is None:  # flags override file values
                caster = _CONFIG_TYPES.get(key, str)
                cfg[key] = caster(raw)
    for key, default in DEFAULTS.items():
        if key in cfg and cfg[key] is None:
            cfg[key] = default
    if not cfg.get("ensemble"):
        raise ConfigError("an --ensemble spec is required")
    if cfg.get("L") is not None and cfg.get("w") is not None and cfg["L"] < 4 * cfg["w"]:
        raise ConfigError("need L >= 4w for a usable chain")
    if cfg.get("channel") == "bec" and cfg.get("eps") is not None:
        if not 0.0 <= cfg["eps"] <= 1.0:
            raise ConfigError("erasure probability must lie in [0, 1]")
    if cfg.get("channel") == "biawgn" and cfg.get("mean") is not None:
        if cfg["mean"] <= 0:
            raise ConfigError("channel mean must be positive")
    return cfg


def config_echo(cfg: dict) -> str:
    # execution details (workers, output paths) are not part of the
    # experiment: the echo stays byte-identical across parallelism choices
    keys = [
        "mode", "ensemble", "channel", "eps", "mean", "L", "w", "dz", "zmin",
        "zmax", "grid_A", "grid_delta", "tol", "snapshots_every",
        "delta_eps", "eps_ref", "start", "stop", "step", "measure", "order",
        "curvature_arg",
    ]
    parts = []
    for key in keys:
        val = cfg.get(key)
        if val is None:
            continue
        parts.append(f"{key}={val}")
    return " ".join(parts)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def make_row(cfg, param, measure, value, units, operation, tolerance,
             iterations=None, residual=None, status="ok", error_code=""):
    # the echo is the last field and may contain commas: read rows with
    # split(",", 13) to recover it verbatim
    return ",".join([
        cfg["mode"], cfg["ensemble"].replace(",", ";"), cfg.get("channel") or "",
        _fmt(param), measure, _fmt(value), units, operation, tolerance,
        _fmt(iterations), _fmt(residual), status, error_code, config_echo(cfg),
    ])


def parse_config_echo(echo: str) -> dict:
    """Inverse of config_echo: rebuild the configuration mapping."""
    out = {}
    for part in echo.split():
        key, _, val = part.partition("=")
        caster = _CONFIG_TYPES.get(key, str)
        try:
            out[key] = caster(val)
        except ValueError:
            out[key] = val
    return out


def solver_grid(cfg) -> SolverGrid:
    return SolverGrid(z_min=cfg["zmin"], z_max=cfg["zmax"], dz=cfg["dz"])


def density_grid(cfg) -> dc.DensityGrid:
    half = int(round(cfg["grid_A"] / cfg["grid_delta"]))
    return dc.DensityGrid(llr_max=cfg["grid_A"], half_points=half)


def channel_param(cfg) -> float:
    if cfg["channel"] == "bec":
        if cfg.get("eps") is None:
            raise ConfigError("--eps is required for the erasure channel")
        return cfg["eps"]
    if cfg.get("mean") is None:
        raise ConfigError("--mean is required for the biawgn channel")
    return cfg["mean"]


# ---------------------------------------------------------------------------
# mode handlers: each returns (rows, artifacts) where artifacts may carry
# profile data for emission / plotting


def run_thresholds(cfg):
    ens = parse_ensemble(cfg["ensemble"])
    tol = cfg.get("tol") or 1e-6
    rows = []
    if cfg["channel"] == "bec":
        bp = bw.bp_threshold(ens, tol=tol)
        mp = bw.map_threshold(ens, tol=tol)
        rows.append(make_row(cfg, None, "eps_bp", bp, "erasure", "bec_wave.bp_threshold",
                             f"bisection<{tol:g}"))
        rows.append(make_row(cfg, None, "eps_map", mp, "erasure", "bec_wave.map_threshold",
                             f"bisection<{tol:g}"))
    else:
        tol = cfg.get("tol") or 5e-3
        grid = density_grid(cfg)
        bp = bms.biawgn_bp_threshold(ens, grid, tol=tol)
        mp = bms.biawgn_map_threshold(ens, grid, tol=tol)
        rows.append(make_row(cfg, None, "mean_bp", bp, "llr-mean", "bms_wave.biawgn_bp_threshold",
                             f"bisection<{tol:g}"))
        rows.append(make_row(cfg, None, "mean_map", mp, "llr-mean", "bms_wave.biawgn_map_threshold",
                             f"bisection<{tol:g}"))
    return rows, {}


def run_wave(cfg):
    ens = parse_ensemble(cfg["ensemble"])
    param = channel_param(cfg)
    rows, artifacts = [], {}
    if cfg["channel"] == "bec":
        sol = bw.solve_wave(bw.BecChannel(param), ens, solver_grid(cfg))
        rows.append(make_row(cfg, param, "v_bec", sol.velocity, VELOCITY_UNITS,
                             "bec_wave.solve_wave", "profile<1e-10;velocity<1e-9",
                             sol.iterations, sol.residual))
        artifacts["profile"] = (sol.profile.z, sol.profile.x, "erasure probability")
    else:
        grid = density_grid(cfg)
        sol = bms.solve_wave_density(dc.biawgn_density(param, grid), ens)
        rows.append(make_row(cfg, param, "v_bms", sol.velocity, VELOCITY_UNITS,
                             "bms_wave.solve_wave_density", "profile<1e-9;velocity<1e-9",
                             sol.iterations, sol.residual))
        trace = sol.profile.entropy_trace()
        artifacts["profile"] = (sol.profile.z, trace, "entropy")
    return rows, artifacts


def run_empirical(cfg):
    ens = parse_ensemble(cfg["ensemble"])
    param = channel_param(cfg)
    rows, artifacts = [], {}
    if cfg["channel"] == "bec":
        ch = bw.BecChannel(param)
        fp = bw.bp_fixed_point(ch, ens)
        level = fp.x_bp / 2 if fp.x_bp > 0 else None
        traj = bw.run_coupled(ch, ens, cfg["L"], cfg["w"],
                              snapshot_every=min(cfg["snapshots_every"], 10),
                              stop_level=level)
        ve = bw.empirical_velocity(traj, ens, ch)
        rows.append(make_row(cfg, param, "v_e", ve, VELOCITY_UNITS,
                             "bec_wave.empirical_velocity", "kink-level=x_bp/2",
                             traj.snapshots[-1][0]))
        artifacts["trajectory"] = traj
    else:
        grid = density_grid(cfg)
        c = dc.biawgn_density(param, grid)
        fp, _ = bms.bp_fixed_point_density(c, ens)
        level = dc.entropy(fp) / 2
        traj, _ = bms.run_coupled_density(c, ens, cfg["L"], cfg["w"],
                                          snapshot_every=min(cfg["snapshots_every"], 10),
                                          stop_level=level)
        ve = bms.empirical_velocity_density(traj, c, ens)
        rows.append(make_row(cfg, param, "v_e", ve, VELOCITY_UNITS,
                             "bms_wave.empirical_velocity_density", "kink-level=H(x_bp)/2",
                             traj.snapshots[-1][0]))
        artifacts["trajectory"] = traj
    return rows, artifacts


_SWEEP_MEASURES = ("v_bec", "v_e", "v_a1", "v_a2", "v_b", "x_bp", "gap")


def sweep_point(cfg, eps, measures):
    """All requested measures at one channel point; errors become rows."""
    ens = parse_ensemble(cfg["ensemble"])
    ch = bw.BecChannel(eps)
    rows = []

    def attempt(measure, units, operation, tolerance, fn):
        try:
            value, iterations, residual = fn()
            rows.append(make_row(cfg, eps, measure, value, units, operation,
                                 tolerance, iterations, residual))
        except WavefrontError as exc:
            rows.append(make_row(cfg, eps, measure, None, units, operation,
                                 tolerance, status="error", error_code=exc.code))

    for measure in measures:
        if measure == "v_bec":
            def f():
                sol = bw.solve_wave(ch, ens, solver_grid(cfg))
                return sol.velocity, sol.iterations, sol.residual
            attempt(measure, VELOCITY_UNITS, "bec_wave.solve_wave",
                    "profile<1e-10;velocity<1e-9", f)
        elif measure == "v_e":
            def f():
                fp = bw.bp_fixed_point(ch, ens)
                level = fp.x_bp / 2 if fp.x_bp > 0 else None
                traj = bw.run_coupled(ch, ens, cfg["L"], cfg["w"],
                                      snapshot_every=10, stop_level=level)
                return bw.empirical_velocity(traj, ens, ch), traj.snapshots[-1][0], None
            attempt(measure, VELOCITY_UNITS, "bec_wave.empirical_velocity",
                    "kink-level=x_bp/2", f)
        elif measure in ("v_a1", "v_a2"):
            order = 1 if measure == "v_a1" else 2
            def f(order=order):
                return bw.velocity_approximation(ch, ens, order=order), None, None
            attempt(measure, VELOCITY_UNITS, "bec_wave.velocity_approximation",
                    "quadrature-grid=65537", f)
        elif measure == "v_b":
            def f():
                return bw.velocity_upper_bound(ch, ens, cfg["w"], cfg["L"]), None, None
            attempt(measure, VELOCITY_UNITS, "bec_wave.velocity_upper_bound",
                    "snapshot=kink-nearest-L/2", f)
        elif measure == "x_bp":
            def f():
                rep = bw.bp_fixed_point(ch, ens)
                return rep.x_bp, rep.iterations, None
            attempt(measure, "erasure", "bec_wave.bp_fixed_point", "delta<1e-13", f)
        elif measure == "gap":
            def f():
                return bw.energy_gap(ch, ens), None, None
            attempt(measure, "entropy", "bec_wave.energy_gap", "exact-at-fp", f)
        else:
            raise ConfigError(f"unknown sweep measure {measure!r}")
    return rows


def _sweep_worker(payload):
    cfg, eps, measures = payload
    return eps, sweep_point(cfg, eps, measures)


def run_sweep(cfg):
    if cfg["channel"] != "bec":
        raise ConfigError("sweeps are defined over the erasure channel")
    measures = [m.strip() for m in cfg["measure"].split(",") if m.strip()]
    for m in measures:
        if m not in _SWEEP_MEASURES:
            raise ConfigError(f"unknown sweep measure {m!r}")
    start, stop, step = cfg["start"], cfg["stop"], cfg["step"]
    if step <= 0 or stop < start:
        raise ConfigError("sweep needs step > 0 and to >= from")
    n = int(round((stop - start) / step))
    points = [round(start + k * step, 12) for k in range(n + 1)]
    payloads = [(cfg, eps, measures) for eps in points]
    results = {}
    if cfg["workers"] > 1:
        with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
            for eps, rows in pool.map(_sweep_worker, payloads):
                results[eps] = rows
    else:
        for payload in payloads:
            eps, rows = _sweep_worker(payload)
            results[eps] = rows
    rows = [row for eps in points for row in results[eps]]
    series = {}
    for m in measures:
        if m.startswith("v_"):
            vals = []
            for eps in points:
                val = None
                for row in results[eps]:
                    parts = row.split(",")
                    if parts[4] == m and parts[11] == "ok":
                        val = float(parts[5])
                vals.append(val)
            series[m] = vals
    return rows, {"sweep": (points, series)}


def run_gamma(cfg):
    ens = parse_ensemble(cfg["ensemble"])
    val = bw.scaling_parameter(ens, cfg["delta_eps"], eps_ref=cfg.get("eps_ref"),
                               grid=solver_grid(cfg))
    rows = [make_row(cfg, cfg["delta_eps"], "gamma_bar", val, "dimensionless",
                     "bec_wave.scaling_parameter", "reference=eps_map-delta_eps")]
    return rows, {}


def run_ga(cfg):
    ens = parse_ensemble(cfg["ensemble"])
    ell, r = ens.regular_degrees()
    if cfg.get("mean") is None:
        raise ConfigError("--mean is required for the Gaussian approximation")
    ch = gw.GaussChannel(cfg["mean"])
    measures = [m.strip() for m in cfg["measure"].split(",") if m.strip()]
    rows, artifacts = [], {}
    for measure in measures:
        if measure == "v_ga":
            sol = gw.solve_wave(ch, ell, r, solver_grid(cfg),
                                curvature_arg=cfg.get("curvature_arg"))
            rows.append(make_row(cfg, cfg["mean"], "v_ga", sol.velocity, VELOCITY_UNITS,
                                 "gauss_wave.solve_wave", "profile<1e-10;velocity<1e-9",
                                 sol.iterations, sol.residual))
            artifacts["profile"] = (sol.profile.z, sol.profile.x, "entropy")
        elif measure == "v_e":
            p_bp = gw.fixed_point(ch, ell, r)[0]
            level = p_bp / 2 if p_bp > 0 else None
            traj = gw.run_coupled(ch, ell, r, cfg["L"], cfg["w"],
                                  snapshot_every=5, stop_level=level)
            ve = gw.empirical_velocity(traj, ch, ell, r)
            rows.append(make_row(cfg, cfg["mean"], "v_e", ve, VELOCITY_UNITS,
                                 "gauss_wave.empirical_velocity", "kink-level=p_bp/2",
                                 traj.snapshots[-1][0]))
            artifacts["trajectory"] = traj
        elif measure == "p_bp":
            p_bp, _, iters = gw.fixed_point(ch, ell, r)
            rows.append(make_row(cfg, cfg["mean"], "p_bp", p_bp, "entropy",
                                 "gauss_wave.fixed_point", "delta<1e-13", iters))
        elif measure == "gap":
            rows.append(make_row(cfg, cfg["mean"], "gap", gw.energy_gap(ch, ell, r),
                                 "entropy", "gauss_wave.energy_gap", "exact-at-fp"))
        else:
            raise ConfigError(f"unknown ga measure {measure!r}")
    return rows, artifacts


def run_bms(cfg):
    ens = parse_ensemble(cfg["ensemble"])
    grid = density_grid(cfg)
    param = channel_param(cfg)
    c = dc.bec_density(param, grid) if cfg["channel"] == "bec" else dc.biawgn_density(param, grid)
    measures = [m.strip() for m in cfg["measure"].split(",") if m.strip()]
    rows, artifacts = [], {}
    for measure in measures:
        if measure == "v_bms":
            sol = bms.solve_wave_density(c, ens)
            rows.append(make_row(cfg, param, "v_bms", sol.velocity, VELOCITY_UNITS,
                                 "bms_wave.solve_wave_density", "profile<1e-9;velocity<1e-9",
                                 sol.iterations, sol.residual))
            artifacts["profile"] = (sol.profile.z, sol.profile.entropy_trace(), "entropy")
        elif measure == "v_e":
            fp, _ = bms.bp_fixed_point_density(c, ens)
            traj, _ = bms.run_coupled_density(c, ens, cfg["L"], cfg["w"],
                                              snapshot_every=10,
                                              stop_level=dc.entropy(fp) / 2)
            ve = bms.empirical_velocity_density(traj, c, ens)
            rows.append(make_row(cfg, param, "v_e", ve, VELOCITY_UNITS,
                                 "bms_wave.empirical_velocity_density",
                                 "kink-level=H(x_bp)/2", traj.snapshots[-1][0]))
            artifacts["trajectory"] = traj
        elif measure in ("h_bp", "x_bp"):
            fp, _ = bms.bp_fixed_point_density(c, ens)
            rows.append(make_row(cfg, param, "h_bp", dc.entropy(fp), "entropy",
                                 "bms_wave.bp_fixed_point_density", "entropy-delta<1e-10"))
            if cfg.get("density_out"):
                with open(cfg["density_out"], "wb") as fh:
                    fh.write(dc.to_bytes(fp))
        elif measure == "gap":
            rows.append(make_row(cfg, param, "gap", bms.energy_gap_density(c, ens),
                                 "entropy", "bms_wave.energy_gap_density", "exact-at-fp"))
        else:
            raise ConfigError(f"unknown bms measure {measure!r}")
    return rows, artifacts


def run_density_check(cfg):
    """Deterministic self-checks of the density algebra (no randomness)."""
    grid = density_grid(cfg)
    means = (0.3, 1.1, 2.33, 4.7, 9.0)
    erasures = (0.05, 0.3, 0.46, 0.8)
    family = [dc.biawgn_density(m, grid) for m in means]
    family += [dc.bec_density(e, grid) for e in erasures]
    family.append(dc.QuantizedDensity(
        grid,
        0.5 * family[0].masses + 0.5 * family[5].masses,
        0.5 * family[0].mass_inf + 0.5 * family[5].mass_inf,
    ))
    worst_dual = worst_mass = worst_sym = 0.0
    for i, a in enumerate(family):
        for b in family[i:]:
            v = dc.var_conv(a, b)
            k = dc.chk_conv(a, b)
            dual = abs(dc.entropy(v) + dc.entropy(k) - dc.entropy(a) - dc.entropy(b))
            worst_dual = max(worst_dual, dual)
            worst_mass = max(worst_mass, abs(v.total() - 1.0), abs(k.total() - 1.0))
            worst_sym = max(worst_sym, dc.symmetry_defect(dc.symmetrize(k)))
    checks = [
        ("duality_rule", worst_dual, 2e-3),
        ("mass_conservation", worst_mass, 1e-9),
        ("symmetry_after_projection", worst_sym, 1e-6),
    ]
    rows = []
    failed = False
    for name, value, tol in checks:
        ok = value <= tol
        failed = failed or not ok
        rows.append(make_row(cfg, None, name, value, "absolute-error",
                             "density_core", f"tol={tol:g}",
                             status="ok" if ok else "error",
                             error_code="" if ok else "no-convergence"))
    return rows, {"failed": failed}


HANDLERS = {
    "thresholds": run_thresholds,
    "wave": run_wave,
    "empirical": run_empirical,
    "sweep": run_sweep,
    "gamma": run_gamma,
    "ga": run_ga,
    "bms": run_bms,
    "density-check": run_density_check,
}


def emit_profile(artifacts, cfg):
    """Write profile or trajectory data as CSV."""
    path = cfg["profile_out"]
    if "profile" in artifacts:
        z, values, _ = artifacts["profile"]
        with open(path, "w") as fh:
            fh.write("z,value\n")
            for zz, vv in zip(z, values):
                fh.write(f"{repr(float(zz))},{repr(float(vv))}\n")
        return
    if "trajectory" in artifacts:
        traj = artifacts["trajectory"]
        if not traj.snapshots:
            raise ConfigError("empty trajectory: nothing to emit")
        every = max(cfg["snapshots_every"], 1)
        z = np.arange(-traj.w + 1, traj.L + 1)
        with open(path, "w") as fh:
            fh.write("iteration,z,value\n")
            for it, vals in traj.snapshots:
                if it % every != 0:
                    continue
                for zz, vv in zip(z, vals):
                    fh.write(f"{it},{int(zz)},{repr(float(vv))}\n")
        return
    raise ConfigError("this mode produced no profile data to emit")


def render_plots(artifacts, cfg):
    from . import plotting

    base = os.path.splitext(cfg["out"])[0] if cfg.get("out") else "wavefront"
    if "profile" in artifacts:
        z, values, ylabel = artifacts["profile"]
        plotting.save_profile_figure(f"{base}_profile.png", z, values, ylabel=ylabel)
        log.info("wrote %s_profile.png", base)
    if "trajectory" in artifacts:
        traj = artifacts["trajectory"]
        every = max(cfg["snapshots_every"], 1)
        picks = [(it, vals) for it, vals in traj.snapshots if it % every == 0]
        z = np.arange(-traj.w + 1, traj.L + 1)
        plotting.save_trajectory_figure(f"{base}_trajectory.png", z, picks or traj.snapshots)
        log.info("wrote %s_trajectory.png", base)
    if "sweep" in artifacts:
        points, series = artifacts["sweep"]
        plotting.save_sweep_figure(f"{base}_sweep.png", points, series)
        log.info("wrote %s_sweep.png", base)


def run(cfg: dict) -> tuple[list[str], int]:
    """Dispatch a validated configuration; returns (rows, exit_code)."""
    handler = HANDLERS.get(cfg["mode"])
    if handler is None:
        raise ConfigError(f"unknown mode {cfg['mode']!r}")
    regime_error = solver_error = False
    try:
        rows, artifacts = handler(cfg)
    except RegimeError as exc:
        rows = [make_row(cfg, cfg.get("eps") or cfg.get("mean"), cfg["mode"], None,
                         "", cfg["mode"], "", status="error", error_code=exc.code)]
        return rows, 4
    except ConfigError:
        raise
    except WavefrontError as exc:
        rows = [make_row(cfg, cfg.get("eps") or cfg.get("mean"), cfg["mode"], None,
                         "", cfg["mode"], "", status="error", error_code=exc.code)]
        return rows, 3
    for row in rows:
        parts = row.split(",")
        if parts[11] == "error":
            if parts[12] in ("below-BP", "above-MAP"):
                regime_error = True
            else:
                solver_error = True
    if artifacts.get("failed"):
        solver_error = True
    if cfg.get("profile_out"):
        emit_profile(artifacts, cfg)
    if cfg.get("plot"):
        render_plots(artifacts, cfg)
    code = 3 if solver_error else (4 if regime_error else 0)
    return rows, code


def main(argv=None) -> int:
    level = os.environ.get("WAVEFRONT_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = merge_config(args)
        rows, code = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except WavefrontError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return exc.exit_code
    text = CSV_HEADER + "\n" + "\n".join(rows) + "\n"
    if cfg.get("out"):
        with open(cfg["out"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
