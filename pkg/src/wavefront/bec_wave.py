"""Scalar pipeline for the binary erasure channel.

Covers single-system density evolution and its potential, BP/MAP thresholds,
the coupled chain in discrete space, the continuum wave-shape/velocity
solver, the degree-distribution approximation hierarchy, the discrete upper
bound, empirical velocity measurement and the finite-length scaling
parameter.  Velocities are normalized: positions are counted in units of the
coupling width w per DE iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, simpson

from .ensemble import Ensemble
from .errors import (
    ApproximationBreakdown,
    ConfigError,
    SolverError,
    WaveBoundaryError,
    above_map,
    below_bp,
)
from .profiles import (
    SolverGrid,
    advection_solve,
    double_window,
    kink_position,
    kink_velocity_from_track,
    profile_derivative,
    recenter,
)

log = logging.getLogger("wavefront.bec")

DEGENERATE_DENOMINATOR = 1e-14


@dataclass(frozen=True)
class BecChannel:
    """Erasure channel; epsilon is both the erasure rate and the entropy."""

    epsilon: float

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError(f"erasure probability must lie in [0, 1]: {self.epsilon}")


@dataclass
class FixedPointReport:
    x_bp: float
    converged: bool
    iterations: int


@dataclass
class ErasureProfile:
    z: np.ndarray
    x: np.ndarray

    @property
    def dz(self) -> float:
        return float(self.z[1] - self.z[0])


@dataclass
class WaveSolution:
    profile: ErasureProfile
    velocity: float
    residual: float
    iterations: int


@dataclass
class CoupledState:
    """Chain values x_z for z = -w+1 .. L; entries with z < 0 stay decoded."""

    w: int
    L: int
    values: np.ndarray

    def __post_init__(self):
        if self.w < 1 or self.L < 1:
            raise ConfigError("need w >= 1 and L >= 1")
        if self.values.shape != (self.L + self.w,):
            raise ConfigError("state length must be L + w")

    def z_coords(self) -> np.ndarray:
        return np.arange(-self.w + 1, self.L + 1)

    def interior(self) -> np.ndarray:
        """Values at channel positions z = 0 .. L."""
        return self.values[self.w - 1 :]


@dataclass
class Trajectory:
    w: int
    L: int
    snapshots: list[tuple[int, np.ndarray]] = field(default_factory=list)

    def append(self, iteration: int, values: np.ndarray):
        self.snapshots.append((iteration, values.copy()))


# ---------------------------------------------------------------------------
# single system


def de_step(x, ch: BecChannel, ens: Ensemble):
    """One density-evolution update x -> eps * lambda(1 - rho(1 - x))."""
    x = np.clip(x, 0.0, 1.0)
    return ch.epsilon * ens.lam(1.0 - ens.rho(1.0 - x))


def bp_fixed_point(
    ch: BecChannel,
    ens: Ensemble,
    *,
    tol: float = 1e-13,
    max_iter: int = 10**6,
    trivial_below: float = 1e-9,
) -> FixedPointReport:
    """Largest stable DE fixed point, iterated from full erasure."""
    eps = ch.epsilon
    lam_c = ens.lam.coeffs
    rho_c = ens.rho.coeffs
    polyval = np.polynomial.polynomial.polyval
    x = 1.0
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        x_next = eps * polyval(1.0 - polyval(1.0 - x, rho_c), lam_c)
        delta = abs(x_next - x)
        x = x_next
        if delta < tol:
            converged = True
            break
        if x < trivial_below * 1e-2:
            converged = True  # collapsing to the trivial fixed point
            break
    if x < trivial_below:
        return FixedPointReport(0.0, converged, it)
    # Newton polish so the residual invariant holds even near the threshold
    for _ in range(60):
        f = eps * polyval(1.0 - polyval(1.0 - x, rho_c), lam_c)
        g = x - f
        if abs(g) < 1e-15:
            break
        fp = eps * ens.lam.derivative(1.0 - ens.rho(1.0 - x)) * ens.rho.derivative(1.0 - x)
        gp = 1.0 - fp
        if gp <= 1e-12:
            break
        step = g / gp
        if not (0.0 < x - step <= 1.0):
            break
        x -= step
    return FixedPointReport(float(x), converged, it)


_THRESHOLD_CACHE: dict = {}


def bp_threshold(ens: Ensemble, *, tol: float = 1e-6) -> float:
    """Largest erasure rate for which DE still decodes, by bisection."""
    key = ("bp", ens.spec_string(), tol)
    if key in _THRESHOLD_CACHE:
        return _THRESHOLD_CACHE[key]
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bp_fixed_point(BecChannel(mid), ens).x_bp > 0.0:
            hi = mid
        else:
            lo = mid
    _THRESHOLD_CACHE[key] = 0.5 * (lo + hi)
    return _THRESHOLD_CACHE[key]


def potential(x, ch: BecChannel, ens: Ensemble):
    """Single-system potential; zero at x = 0 by construction."""
    x = np.asarray(x, dtype=float)
    rx = ens.rho(1.0 - x)
    w = (
        (1.0 - ens.R(1.0 - x)) / ens.rprime1
        - x * rx
        - ch.epsilon * ens.L(1.0 - rx) / ens.lprime1
    )
    return float(w) if w.ndim == 0 else w


def energy_gap(ch: BecChannel, ens: Ensemble, *, x_bp: float | None = None) -> float:
    """Potential at the nontrivial fixed point (the trivial one sits at 0)."""
    if x_bp is None:
        x_bp = bp_fixed_point(ch, ens).x_bp
    if x_bp <= 0.0:
        raise below_bp()
    return potential(x_bp, ch, ens)


def map_threshold(ens: Ensemble, *, tol: float = 1e-6) -> float:
    """Erasure rate where the energy gap vanishes, by bisection.

    For stability-limited ensembles the gap rises from zero continuously at
    the BP threshold, so the lower bracket is scanned upward until the gap
    is measurably positive.
    """
    key = ("map", ens.spec_string(), tol)
    if key in _THRESHOLD_CACHE:
        return _THRESHOLD_CACHE[key]
    eps_bp = bp_threshold(ens)
    hi = 1.0
    gap_hi = potential(bp_fixed_point(BecChannel(hi), ens).x_bp, BecChannel(hi), ens)
    if gap_hi >= 0.0:
        raise SolverError(f"energy gap is nonnegative at full erasure: {gap_hi}")
    lo = None
    for offset in (2e-6, 1e-5, 1e-4, 1e-3, 1e-2):
        cand = eps_bp + offset
        if cand >= hi:
            break
        if bp_fixed_point(BecChannel(cand), ens).x_bp > 0.0 and energy_gap(
            BecChannel(cand), ens
        ) > 0.0:
            lo = cand
            break
    if lo is None:
        raise SolverError(
            "energy gap is not positive anywhere above the BP threshold"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        ch = BecChannel(mid)
        x = bp_fixed_point(ch, ens).x_bp
        if x > 0.0 and potential(x, ch, ens) > 0.0:
            lo = mid
        else:
            hi = mid
    _THRESHOLD_CACHE[key] = 0.5 * (lo + hi)
    return _THRESHOLD_CACHE[key]


# ---------------------------------------------------------------------------
# coupled chain in discrete space


def initial_coupled_state(L: int, w: int) -> CoupledState:
    """Fully erased chain with the decoded seed on the left boundary."""
    values = np.ones(L + w)
    values[: w - 1] = 0.0
    return CoupledState(w=w, L=L, values=values)


def coupled_step(state: CoupledState, ch: BecChannel, ens: Ensemble) -> CoupledState:
    """Synchronous window-averaged DE update of the coupled chain.

    The chain is extended flat on the right (no termination there); channel
    positions outside 0..L carry perfect knowledge, which both seeds the wave
    on the left and zeroes the virtual contributions below the boundary.
    """
    w, L = state.w, state.L
    x = state.values
    kernel = np.full(w, 1.0 / w)
    x_ext = np.concatenate([x, np.full(w - 1, x[-1])])
    y = 1.0 - ens.rho(1.0 - x_ext)
    s = np.correlate(y, kernel, mode="valid") if w > 1 else y  # index k <-> u = k - w + 1
    t = ens.lam(s)
    t[: w - 1] = 0.0  # channel is perfect for u < 0
    t = ch.epsilon * t
    t_pad = np.concatenate([np.zeros(w - 1), t])
    new = np.correlate(t_pad, kernel, mode="valid") if w > 1 else t_pad
    new[: w - 1] = 0.0
    return CoupledState(w=w, L=L, values=np.clip(new, 0.0, 1.0))


def run_coupled(
    ch: BecChannel,
    ens: Ensemble,
    L: int,
    w: int,
    *,
    snapshot_every: int = 10,
    max_iter: int = 200_000,
    stop_level: float | None = None,
    stop_kink_fraction: float = 0.9,
) -> Trajectory:
    """Run coupled DE from the erased start, recording periodic snapshots.

    Stops once the kink (tracked at ``stop_level`` when given) passes
    ``stop_kink_fraction * L`` or the chain fully decodes.
    """
    state = initial_coupled_state(L, w)
    traj = Trajectory(w=w, L=L)
    traj.append(0, state.values)
    z = state.z_coords()
    for it in range(1, max_iter + 1):
        state = coupled_step(state, ch, ens)
        if it % snapshot_every == 0:
            traj.append(it, state.values)
            if state.values.max() < 1e-12:
                break
            if stop_level is not None:
                pos = kink_position(z, state.values, stop_level)
                if pos is None or pos > stop_kink_fraction * L:
                    break
    return traj


def _kink_track(traj: Trajectory, level: float):
    z = np.arange(-traj.w + 1, traj.L + 1)
    return [(it, kink_position(z, vals, level)) for it, vals in traj.snapshots]


def empirical_velocity(
    traj: Trajectory,
    ens: Ensemble,
    ch: BecChannel,
    *,
    window: tuple[float, float] = (0.25, 0.75),
    transient_advance: float | None = None,
) -> float:
    """Average kink displacement per iteration, normalized by w.

    The kink is the interpolated crossing of half the uncoupled fixed point;
    snapshots before the kink has advanced 2w positions from its first
    location, or outside the central portion of the chain, are discarded.
    """
    fp = bp_fixed_point(ch, ens)
    if fp.x_bp <= 0.0:
        raise below_bp("no nontrivial fixed point: the chain decodes without a wave")
    level = 0.5 * fp.x_bp
    track = _kink_track(traj, level)
    return kink_velocity_from_track(
        track, traj.w, traj.L, window=window, transient_advance=transient_advance
    )


# ---------------------------------------------------------------------------
# continuum wave solver


def velocity_from_profile(
    profile: ErasureProfile,
    ch: BecChannel,
    ens: Ensemble,
    *,
    gap: float | None = None,
) -> float:
    """Energy gap over the dissipation integral of the wave shape."""
    if gap is None:
        gap = energy_gap(ch, ens)
    xp = profile_derivative(profile.x, profile.dz)
    integrand = ens.rho.derivative(1.0 - profile.x) * xp**2
    den = float(np.trapezoid(integrand, dx=profile.dz))
    if den < DEGENERATE_DENOMINATOR:
        raise SolverError("degenerate profile: dissipation integral vanishes")
    return gap / den


def solve_wave(
    ch: BecChannel,
    ens: Ensemble,
    grid: SolverGrid | None = None,
    *,
    damping: float = 0.5,
    tol_profile: float = 1e-10,
    tol_velocity: float = 1e-9,
    max_iter: int = 100_000,
) -> WaveSolution:
    """Joint wave-shape / velocity solution of the comoving profile equation.

    Damped alternation: relax the profile with the comoving advection term
    treated implicitly, recompute the velocity from the shape, re-pin the
    profile midpoint at z = 0.
    """
    grid = grid or SolverGrid()
    eps = ch.epsilon
    fp = bp_fixed_point(ch, ens)
    if fp.x_bp <= 0.0:
        raise below_bp()
    x_bp = fp.x_bp
    gap = potential(x_bp, ch, ens)
    if gap <= 0.0:
        raise above_map()

    z = grid.z()
    tw = grid.trapezoid_weights()
    level = 0.5 * x_bp
    check_fn = lambda arr: 1.0 - ens.rho(1.0 - arr)
    var_fn = lambda arr: eps * ens.lam(np.clip(arr, 0.0, 1.0))

    x = x_bp / (1.0 + np.exp(-z / 0.35))
    x[0], x[-1] = 0.0, x_bp
    v = 0.0
    dv = np.inf
    change = np.inf
    for it in range(1, max_iter + 1):
        rhs = double_window(x, tw, 0.0, x_bp, check_fn, var_fn)
        relaxed = advection_solve(rhs, v, grid.dz, 0.0, x_bp)
        x_new = np.clip(x + damping * (relaxed - x), 0.0, 1.0)
        x_new[0], x_new[-1] = 0.0, x_bp
        x_new = recenter(z, x_new, level, 0.0, x_bp)
        change = float(np.max(np.abs(x_new - x)))
        x = x_new
        profile = ErasureProfile(z=z, x=x)
        v_new = velocity_from_profile(profile, ch, ens, gap=gap)
        dv = abs(v_new - v)
        v = v_new
        if change < tol_profile and dv < tol_velocity:
            break
    else:
        raise SolverError(
            f"wave solver did not converge: profile change {change:.3e}, "
            f"velocity change {dv:.3e} after {max_iter} iterations"
        )
    xp = profile_derivative(x, grid.dz)
    rhs = double_window(x, tw, 0.0, x_bp, check_fn, var_fn)
    residual = float(np.max(np.abs(x - v * xp - rhs)))
    return WaveSolution(
        profile=ErasureProfile(z=z, x=x), velocity=v, residual=residual, iterations=it
    )


# ---------------------------------------------------------------------------
# approximation hierarchy, discrete bound, scaling parameter


def _breakdown_check(r, what: str):
    """A profile can only rise out of 0 if the radicand starts nonnegative.

    Negative dips after the radicand has peaked mean the approximate wave
    has reached its plateau early; those are clipped.  Negativity before the
    profile can rise at all (degree-2 variable nodes above their stability
    point) is the genuine breakdown of the scheme.
    """
    r = np.asarray(r, dtype=float)
    positive = r > 1e-12
    if not positive.any():
        raise ApproximationBreakdown(
            f"the approximation scheme breaks down: {what} radicand never positive"
        )
    first_pos = int(np.argmax(positive))
    if np.min(r[: first_pos + 1]) < -1e-10:
        raise ApproximationBreakdown(
            f"the approximation scheme breaks down: negative radicand in {what} "
            f"before the profile can rise (min {np.min(r[:first_pos + 1]):.3e})"
        )


def velocity_approximation(
    ch: BecChannel,
    ens: Ensemble,
    order: int = 2,
    *,
    radicand_scale: float = 2.0,
    n_grid: int = 65537,
) -> float:
    """Profile-free velocity estimate from the degree distributions alone.

    Valid near the MAP threshold.  The slope-squared profile is
    ``radicand_scale * (24 F(x) - 12 x^2)``; the default scale 2 is the
    convention that reproduces the published second-order velocities (the
    halved constants render the radicand negative inside the operating
    range).  At second order the comoving correction enters by shifting the
    level at which the first-order slope is read off.
    """
    if order not in (1, 2):
        raise ConfigError("approximation order must be 1 or 2")
    eps = ch.epsilon
    fp = bp_fixed_point(ch, ens)
    if fp.x_bp <= 0.0:
        raise below_bp()
    x_bp = fp.x_bp
    gap = potential(x_bp, ch, ens)
    if gap <= 0.0:
        raise above_map()

    clamp_report = {"count": 0, "worst": 0.0}

    def shape_integrand(f_vals):
        t = np.asarray(f_vals, dtype=float) / eps
        out_of_range = (t < -1e-15) | (t > 1.0 + 1e-15)
        if out_of_range.any():
            clamp_report["count"] += int(out_of_range.sum())
            clamp_report["worst"] = max(
                clamp_report["worst"],
                float(np.max(np.abs(np.clip(t, None, 0.0)))),
                float(np.max(np.clip(t - 1.0, 0.0, None))),
            )
            t = np.clip(t, 0.0, 1.0)
        return 1.0 - ens.rho.invert(1.0 - ens.lam.invert(np.clip(t, 0.0, 1.0)))

    y = np.linspace(0.0, x_bp, n_grid)
    rho_weight = ens.rho.derivative(1.0 - y)
    F1 = cumulative_trapezoid(shape_integrand(y), y, initial=0.0)
    r1 = radicand_scale * (24.0 * F1 - 12.0 * y**2)
    _breakdown_check(r1, "first-order")
    slope1 = np.sqrt(np.clip(r1, 0.0, None))
    den1 = float(simpson(rho_weight * slope1, x=y))
    if den1 < DEGENERATE_DENOMINATOR:
        raise ApproximationBreakdown("first-order denominator vanishes")
    v1 = gap / den1
    if order == 1:
        _log_clamping(clamp_report)
        return float(v1)

    shifted = np.clip(y - v1 * slope1, 0.0, None)
    r2 = np.interp(shifted, y, r1)
    _breakdown_check(r2, "second-order")
    den2 = float(simpson(rho_weight * np.sqrt(np.clip(r2, 0.0, None)), x=y))
    if den2 < DEGENERATE_DENOMINATOR:
        raise ApproximationBreakdown("second-order denominator vanishes")
    _log_clamping(clamp_report)
    return float(gap / den2)


def _log_clamping(report):
    if report["count"]:
        log.info(
            "inverse-polynomial argument clamped to [0, 1] at %d evaluations "
            "(worst excursion %.3e)",
            report["count"],
            report["worst"],
        )


def velocity_upper_bound(ch: BecChannel, ens: Ensemble, w: int, L: int) -> float:
    """Discrete-profile bound: gap over the discrete dissipation sum.

    Evaluated on the mid-propagation snapshot of the coupled chain (kink
    nearest to L/2), normalized by w like every other velocity here.
    """
    fp = bp_fixed_point(ch, ens)
    if fp.x_bp <= 0.0:
        raise below_bp()
    gap = potential(fp.x_bp, ch, ens)
    if gap <= 0.0:
        raise above_map()
    level = 0.5 * fp.x_bp
    traj = run_coupled(ch, ens, L, w, snapshot_every=10, stop_level=level)
    track = [(vals, pos) for (it, vals), (_, pos) in zip(traj.snapshots, _kink_track(traj, level)) if pos is not None]
    if not track:
        raise WaveBoundaryError("no kink found for the bound evaluation")
    values, _ = min(track, key=lambda item: abs(item[1] - 0.5 * L))
    # the pair across the fixed decoded boundary contributes 0 (both entries 0)
    diffs = np.diff(np.concatenate([[0.0], values]))
    sums = float(np.sum(ens.rho.derivative(1.0 - values) * diffs**2))
    if sums <= 0.0:
        raise SolverError("degenerate discrete profile for the bound")
    return gap / (w * sums)


def scaling_parameter(
    ens: Ensemble,
    delta_eps: float,
    *,
    eps_ref: float | None = None,
    grid: SolverGrid | None = None,
) -> float:
    """Finite-length scaling estimate x_bp * v / delta_eps.

    The wave velocity enters in chain positions per iteration for a coupling
    window equal to the average variable-node degree, which is the window of
    the finite-length construction this estimate feeds; the continuum solver
    returns w-normalized velocity, hence the L'(1) conversion factor.
    """
    if delta_eps <= 0.0:
        raise ConfigError("delta_eps must be positive")
    if eps_ref is None:
        eps_ref = map_threshold(ens)
    eps = eps_ref - delta_eps
    ch = BecChannel(eps)
    fp = bp_fixed_point(ch, ens)
    if fp.x_bp <= 0.0:
        raise below_bp(f"reference point {eps} is below the BP threshold")
    sol = solve_wave(ch, ens, grid)
    return fp.x_bp * ens.lprime1 * sol.velocity / delta_eps
