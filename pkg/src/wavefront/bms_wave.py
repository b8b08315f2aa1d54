"""Density-valued pipeline: general-channel DE, potential, and wave solver.

The state of the coupled system is a batch of quantized LLR densities, one
per spatial position.  All heavy operations run batched through the
density-core polynomial lifts; when an entire batch is (numerically)
two-point erasure-like, the update collapses to the exact scalar arithmetic
of the erasure pipeline, which is what the closure property guarantees.

The velocity formula divides the single-system energy gap by the dissipation
integral of the wave shape.  Under the measure algebra used here the entropy
of the check-composite of the squared profile derivative is negative (its
erasure reduction is minus the scalar dissipation integrand), so the
denominator carries the sign that makes the velocity positive; the erasure
embedding then reproduces the scalar formula exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft
from scipy.special import expit

from . import density_core as dc
from .bec_wave import Trajectory
from .density_core import DensityGrid, QuantizedDensity, SignedDensity
from .ensemble import Ensemble
from .errors import ConfigError, SolverError, above_map, below_bp
from .profiles import (
    SolverGrid,
    advection_solve,
    kink_position,
    kink_velocity_from_track,
)

log = logging.getLogger("wavefront.bms")

TWO_POINT_TOL = 1e-15


@dataclass
class DensityProfile:
    """One quantized density per spatial grid point."""

    grid: DensityGrid
    z: np.ndarray
    masses: np.ndarray  # (len(z), grid.n)
    inf: np.ndarray     # (len(z),)

    @property
    def dz(self) -> float:
        return float(self.z[1] - self.z[0])

    def density_at(self, i: int) -> QuantizedDensity:
        return QuantizedDensity(self.grid, self.masses[i].copy(), float(self.inf[i]))

    def entropy_trace(self) -> np.ndarray:
        kernel = dc._tables(self.grid).entropy_kernel
        return self.masses @ kernel


@dataclass
class BmsWaveSolution:
    profile: DensityProfile
    velocity: float
    gap: float
    denominator: float
    residual: float
    iterations: int


@dataclass
class CoupledDensityState:
    grid: DensityGrid
    w: int
    L: int
    masses: np.ndarray  # (L + w, grid.n)
    inf: np.ndarray     # (L + w,)

    def z_coords(self) -> np.ndarray:
        return np.arange(-self.w + 1, self.L + 1)

    def entropy_trace(self) -> np.ndarray:
        return self.masses @ dc._tables(self.grid).entropy_kernel


# ---------------------------------------------------------------------------
# single-system operations


def _renorm_rows(masses, inf):
    tot = masses.sum(axis=1) + inf
    if np.any(np.abs(tot - 1.0) > 1e-9):
        raise SolverError(f"density mass drifted: worst total {tot[np.argmax(np.abs(tot-1))]}")
    return masses / tot[:, None], inf / tot


def _symmetrize_rows(grid: DensityGrid, masses):
    K = grid.center
    alphas = dc._tables(grid).alphas[K + 1 :]
    w_pos = expit(alphas)
    w_neg = expit(-alphas)
    pos = masses[:, K + 1 :]
    neg = masses[:, :K][:, ::-1]
    s = pos + neg
    out = masses.copy()
    out[:, K + 1 :] = s * w_pos
    out[:, :K] = (s * w_neg)[:, ::-1]
    return out


def de_step_density(x: QuantizedDensity, c: QuantizedDensity, ens: Ensemble) -> QuantizedDensity:
    """One DE update: channel combined with the variable lift of the check lift."""
    y = dc.poly_chk(ens.rho, x)
    v = dc.poly_var(ens.lam, y)
    out = dc.var_conv(c, v)
    out = dc.symmetrize(out)
    t = out.total()
    if abs(t - 1.0) > 1e-9:
        raise SolverError(f"density mass drifted to {t}")
    return QuantizedDensity(out.grid, np.clip(out.masses / t, 0.0, None), out.mass_inf / t)


def bp_fixed_point_density(
    c: QuantizedDensity,
    ens: Ensemble,
    *,
    tol: float = 1e-10,
    max_iter: int = 10**5,
    trivial_below: float = 1e-8,
):
    """Iterate DE from total uncertainty until the entropy settles.

    Returns (density, converged); a final entropy below the trivial floor
    means the channel decodes and the fixed point is perfect knowledge.
    """
    x = dc.delta_zero(c.grid)
    h_prev = dc.entropy(x)
    converged = False
    for _ in range(max_iter):
        x = de_step_density(x, c, ens)
        h = dc.entropy(x)
        if abs(h - h_prev) < tol:
            converged = True
            break
        if h < trivial_below * 1e-2:
            converged = True
            break
        h_prev = h
    if dc.entropy(x) < trivial_below:
        return dc.delta_inf(c.grid), converged
    return x, converged


def potential_single_density(x: QuantizedDensity, c: QuantizedDensity, ens: Ensemble) -> float:
    """Single-system potential functional; exactly zero at perfect knowledge."""
    rho_x = dc.poly_chk(ens.rho, x)
    r_node = dc.chk_poly_apply(dc.node_power_coeffs(ens.rho_node), x)
    l_node = dc.var_poly_apply(dc.node_power_coeffs(ens.lam_node), rho_x)
    return (
        dc.entropy(r_node) / ens.rprime1
        + dc.entropy(rho_x)
        - dc.entropy(dc.chk_conv(x, rho_x))
        - dc.entropy(dc.var_conv(c, l_node)) / ens.lprime1
    )


def energy_gap_density(c: QuantizedDensity, ens: Ensemble, *, x_bp: QuantizedDensity | None = None) -> float:
    if x_bp is None:
        x_bp, _ = bp_fixed_point_density(c, ens)
    if dc.entropy(x_bp) < 1e-8:
        raise below_bp("only the trivial fixed point exists")
    return potential_single_density(x_bp, c, ens)


# ---------------------------------------------------------------------------
# batched machinery


def _dedupe_rows(masses, inf):
    """Unique (row, inf) pairs and the inverse map.

    Away from the kink the chain's rows are bitwise identical (equal inputs
    evolve equally), so batched transforms only need the distinct ones.
    """
    stacked = np.ascontiguousarray(np.concatenate([masses, inf[:, None]], axis=1))
    uniq, inverse = np.unique(stacked, axis=0, return_inverse=True)
    return uniq[:, :-1], uniq[:, -1], inverse.ravel()


def _rows_two_point(masses, inf, grid: DensityGrid) -> bool:
    K = grid.center
    stray = masses.sum(axis=1) - masses[:, K]
    return bool(np.all(np.abs(stray) < TWO_POINT_TOL))


def _two_point_rows(grid: DensityGrid, weights) -> tuple[np.ndarray, np.ndarray]:
    masses = np.zeros((len(weights), grid.n))
    masses[:, grid.center] = weights
    return masses, 1.0 - np.asarray(weights, dtype=float)


def _var_conv_rows(masses, inf, c: QuantizedDensity):
    """Row-wise variable convolution with a fixed density."""
    grid = c.grid
    n, K = grid.n, grid.center
    L = next_fast_len(2 * n - 1)
    Fc = rfft(c.masses, L)
    full = irfft(rfft(masses, L, axis=1, workers=2) * Fc[None, :], L, axis=1, workers=2)[:, : 2 * n - 1]
    out = full[:, K : K + n].copy()
    out[:, 0] += full[:, :K].sum(axis=1)
    out[:, -1] += full[:, K + n :].sum(axis=1)
    tot_rows = masses.sum(axis=1) + inf
    inf_out = c.mass_inf * tot_rows + inf * c.total() - c.mass_inf * inf
    return out, inf_out


def _window_rows(masses, inf, weights):
    """Sliding window combination of rows: out[k] = sum_j w[j] rows[k + j]."""
    m = len(weights)
    B = masses.shape[0] - m + 1
    out_m = np.zeros((B, masses.shape[1]))
    out_i = np.zeros(B)
    for j, wj in enumerate(weights):
        out_m += wj * masses[j : j + B]
        out_i += wj * inf[j : j + B]
    return out_m, out_i


def coupled_de_step_density(
    state: CoupledDensityState, c: QuantizedDensity, ens: Ensemble, w: int | None = None
) -> CoupledDensityState:
    """Synchronous window-averaged DE update of the density-valued chain.

    Positions left of the seed stay perfectly known; the chain is extended
    flat on the right.  A fully two-point state short-circuits to the exact
    scalar erasure arithmetic (the general path gives the same numbers and
    is exercised by the closure tests).
    """
    grid = state.grid
    if w is None:
        w = state.w
    if w != state.w:
        raise ConfigError("window size disagrees with the state")
    L = state.L
    K = grid.center
    kernel = np.full(w, 1.0 / w)
    if _rows_two_point(state.masses, state.inf, grid) and abs(
        c.masses.sum() - c.masses[K]
    ) < TWO_POINT_TOL:
        from . import bec_wave as bw

        eps = float(c.masses[K])
        scalar = bw.coupled_step(
            bw.CoupledState(w=w, L=L, values=state.masses[:, K].copy()),
            bw.BecChannel(eps),
            ens,
        )
        masses, inf = _two_point_rows(grid, scalar.values)
        return CoupledDensityState(grid, w, L, masses, inf)

    rho_c = dc.edge_power_coeffs(ens.rho)
    lam_c = dc.edge_power_coeffs(ens.lam)
    m_ext = np.concatenate([state.masses, np.repeat(state.masses[-1:], w - 1, axis=0)])
    i_ext = np.concatenate([state.inf, np.repeat(state.inf[-1:], w - 1)])
    um, ui, back = _dedupe_rows(m_ext, i_ext)
    ym, yi = dc._chk_poly_batch(rho_c, um, ui, grid)
    sm, si = _window_rows(ym[back], yi[back], kernel)  # index k <-> u = k - w + 1
    um2, ui2, back2 = _dedupe_rows(sm, si)
    vm, vi = dc._var_poly_batch(lam_c, um2, ui2, grid)
    tm, ti = _var_conv_rows(vm, vi, c)
    tm, ti = tm[back2], ti[back2]
    tm[: w - 1] = 0.0                                # channel is perfect for u < 0
    ti[: w - 1] = 1.0
    tm_pad = np.concatenate([np.zeros((w - 1, grid.n)), tm])
    ti_pad = np.concatenate([np.ones(w - 1), ti])
    nm, ni = _window_rows(tm_pad, ti_pad, kernel)
    nm[: w - 1] = 0.0
    ni[: w - 1] = 1.0
    nm = _symmetrize_rows(grid, np.clip(nm, 0.0, None))
    nm, ni = _renorm_rows(nm, ni)
    # flush effectively decoded rows to the exact fixed point
    decoded = nm.sum(axis=1) < 1e-14
    if decoded.any():
        nm[decoded] = 0.0
        ni[decoded] = 1.0
    return CoupledDensityState(grid, w, L, nm, ni)


def initial_coupled_density_state(
    L: int, w: int, grid: DensityGrid = dc.DEFAULT_GRID
) -> CoupledDensityState:
    masses = np.zeros((L + w, grid.n))
    inf = np.zeros(L + w)
    masses[:, grid.center] = 1.0
    masses[: w - 1, grid.center] = 0.0
    inf[: w - 1] = 1.0
    return CoupledDensityState(grid, w, L, masses, inf)


def run_coupled_density(
    c: QuantizedDensity,
    ens: Ensemble,
    L: int,
    w: int,
    *,
    snapshot_every: int = 10,
    max_iter: int = 50_000,
    stop_level: float | None = None,
    stop_kink_fraction: float = 0.9,
    keep_states: bool = False,
) -> tuple[Trajectory, list]:
    """Run the coupled density chain, recording entropy-trace snapshots."""
    state = initial_coupled_density_state(L, w, c.grid)
    traj = Trajectory(w=w, L=L)
    traj.append(0, state.entropy_trace())
    states = [(0, state)] if keep_states else []
    z = state.z_coords()
    for it in range(1, max_iter + 1):
        state = coupled_de_step_density(state, c, ens, w)
        if it % snapshot_every == 0:
            trace = state.entropy_trace()
            traj.append(it, trace)
            if keep_states:
                states.append((it, state))
            if trace.max() < 1e-12:
                break
            if stop_level is not None:
                pos = kink_position(z, trace, stop_level)
                if pos is None or pos > stop_kink_fraction * L:
                    break
    return traj, states


def empirical_velocity_density(
    traj: Trajectory, c: QuantizedDensity, ens: Ensemble, **kwargs
) -> float:
    """Kink rate of the entropy trace, normalized by w."""
    x_bp, _ = bp_fixed_point_density(c, ens)
    h_bp = dc.entropy(x_bp)
    if h_bp < 1e-8:
        raise below_bp()
    level = 0.5 * h_bp
    z = np.arange(-traj.w + 1, traj.L + 1)
    track = [(it, kink_position(z, trace, level)) for it, trace in traj.snapshots]
    return kink_velocity_from_track(track, traj.w, traj.L, **kwargs)


# ---------------------------------------------------------------------------
# velocity formula and wave solver


def _pairwise_chk_rows(am, ai, bm, bi, grid: DensityGrid):
    """Row-by-row check convolution of two batches of signed measures."""
    K = grid.center
    t = dc._tables(grid)
    za = am[:, K].copy()
    zb = bm[:, K].copy()
    gpa = np.asarray(am[:, K + 1 :] @ t.to_g)
    gna = np.asarray(am[:, :K][:, ::-1] @ t.to_g)
    gpb = np.asarray(bm[:, K + 1 :] @ t.to_g)
    gnb = np.asarray(bm[:, :K][:, ::-1] @ t.to_g)
    gpa[:, 0] += ai
    gpb[:, 0] += bi
    ua, va = gpa + gna, gpa - gna
    ub, vb = gpb + gnb, gpb - gnb
    Lg = next_fast_len(2 * grid.g_points - 1)
    fu = irfft(rfft(ua, Lg, axis=1, workers=2) * rfft(ub, Lg, axis=1, workers=2), Lg, axis=1, workers=2)
    fv = irfft(rfft(va, Lg, axis=1, workers=2) * rfft(vb, Lg, axis=1, workers=2), Lg, axis=1, workers=2)
    out_len = 2 * grid.g_points - 1
    p_out = 0.5 * (fu + fv)[:, :out_len]
    n_out = 0.5 * (fu - fv)[:, :out_len]
    tot_a = am.sum(axis=1) + ai
    tot_b = bm.sum(axis=1) + bi
    z_out = za * tot_b + zb * tot_a - za * zb
    back = t.from_g(out_len)
    pos_side = np.asarray(p_out @ back)
    neg_side = np.asarray(n_out @ back)
    out = np.zeros_like(am)
    out[:, K:] += pos_side
    out[:, K::-1] += neg_side
    out[:, K] += z_out
    out[:, 0] += n_out[:, 0]
    return out, p_out[:, 0].copy()


def wave_dissipation_integrand(profile: DensityProfile, ens: Ensemble) -> np.ndarray:
    """Pointwise dissipation of the wave shape; reduces to the scalar
    rho'(1-x) x'^2 on erasure embeddings."""
    grid = profile.grid
    dm = np.empty_like(profile.masses)
    di = np.empty_like(profile.inf)
    dm[1:-1] = (profile.masses[2:] - profile.masses[:-2]) / (2.0 * profile.dz)
    di[1:-1] = (profile.inf[2:] - profile.inf[:-2]) / (2.0 * profile.dz)
    dm[0] = (profile.masses[1] - profile.masses[0]) / profile.dz
    dm[-1] = (profile.masses[-1] - profile.masses[-2]) / profile.dz
    di[0] = (profile.inf[1] - profile.inf[0]) / profile.dz
    di[-1] = (profile.inf[-1] - profile.inf[-2]) / profile.dz
    sq_m, sq_i = _pairwise_chk_rows(dm, di, dm, di, grid)
    rc = dc.derivative_power_coeffs(ens.rho)
    rm, ri = dc._chk_poly_batch(rc, profile.masses, profile.inf, grid)
    cm, _ = _pairwise_chk_rows(rm, ri, sq_m, sq_i, grid)
    kernel = dc._tables(grid).entropy_kernel
    return -(cm @ kernel)


def velocity_from_density_profile(
    profile: DensityProfile, c: QuantizedDensity, ens: Ensemble, *, gap: float | None = None
) -> tuple[float, float]:
    """(velocity, denominator) from the gap and the dissipation integral."""
    if gap is None:
        gap = energy_gap_density(c, ens)
    integrand = wave_dissipation_integrand(profile, ens)
    den = float(np.trapezoid(integrand, dx=profile.dz))
    if den < 1e-14:
        raise SolverError("degenerate density profile: dissipation integral vanishes")
    return gap / den, den


DEFAULT_DENSITY_SOLVER_GRID = SolverGrid(z_min=-6.0, z_max=6.0, dz=1.0 / 16.0)


def _warm_start(c: QuantizedDensity, ens: Ensemble, grid: SolverGrid, x_bp: QuantizedDensity, h_bp: float):
    """Initial rows blended from perfect knowledge to the fixed point.

    The blend fraction follows the scalar erasure solution for two-point
    channels and the Gaussian-approximation solution otherwise, falling back
    to a logistic ramp; the starting velocity rides along.
    """
    z = grid.z()
    ramp = None
    v0 = 0.0
    K = c.grid.center
    try:
        if abs(c.masses.sum() - c.masses[K]) < TWO_POINT_TOL:
            from . import bec_wave as bw

            sol = bw.solve_wave(bw.BecChannel(float(c.masses[K])), ens, grid)
            ramp = np.clip(sol.profile.x / h_bp, 0.0, 1.0)
            v0 = sol.velocity
        elif ens.is_regular:
            from . import gauss_wave as gw

            mean = gw.gaussian_entropy_inv(dc.entropy(c))
            sol = gw.solve_wave(gw.GaussChannel(mean), *ens.regular_degrees(), grid)
            ramp = np.clip(sol.profile.x / max(sol.profile.x[-1], 1e-12), 0.0, 1.0)
            v0 = sol.velocity
    except Exception:  # any regime/convergence trouble: fall back to a ramp
        ramp = None
    if ramp is None:
        ramp = 1.0 / (1.0 + np.exp(-z / 0.35))
        v0 = 0.0
    masses = ramp[:, None] * x_bp.masses[None, :]
    inf = ramp * x_bp.mass_inf + (1.0 - ramp)
    return masses, inf, float(v0)


def solve_wave_density(
    c: QuantizedDensity,
    ens: Ensemble,
    grid: SolverGrid | None = None,
    *,
    damping: float = 0.5,
    tol_profile: float = 1e-9,
    tol_velocity: float = 1e-9,
    max_iter: int = 20_000,
) -> BmsWaveSolution:
    """Joint density-profile / velocity solution of the comoving equation."""
    grid = grid or DEFAULT_DENSITY_SOLVER_GRID
    dgrid = c.grid
    x_bp, converged = bp_fixed_point_density(c, ens)
    h_bp = dc.entropy(x_bp)
    if h_bp < 1e-8:
        raise below_bp()
    gap = potential_single_density(x_bp, c, ens)
    if gap <= 0.0:
        raise above_map()

    z = grid.z()
    tw = grid.trapezoid_weights()
    m = len(tw)
    level = 0.5 * h_bp
    kernel = dc._tables(dgrid).entropy_kernel
    rho_c = dc.edge_power_coeffs(ens.rho)
    lam_c = dc.edge_power_coeffs(ens.lam)

    masses, inf, v0 = _warm_start(c, ens, grid, x_bp, h_bp)
    masses[0], inf[0] = 0.0, 1.0
    masses[-1], inf[-1] = x_bp.masses, x_bp.mass_inf

    left_m = np.zeros((m - 1, dgrid.n))
    left_i = np.ones(m - 1)
    right_m = np.repeat(x_bp.masses[None, :], m - 1, axis=0)
    right_i = np.full(m - 1, x_bp.mass_inf)

    def rhs_rows(cur_m, cur_i):
        pm = np.concatenate([left_m, cur_m, right_m])
        pi = np.concatenate([left_i, cur_i, right_i])
        ym, yi = dc._chk_poly_batch(rho_c, pm, pi, dgrid)
        sm, si = _window_rows(ym, yi, tw)   # inner window: z + s, s in [0, 1]
        vm, vi = dc._var_poly_batch(lam_c, sm, si, dgrid)
        tm, ti = _var_conv_rows(vm, vi, c)
        # outer window over z - u; the trapezoid weights are symmetric, so
        # this is the same sliding combination shifted one window back
        return _window_rows(tm, ti, tw)

    v = v0
    dv = np.inf
    change = np.inf
    for it in range(1, max_iter + 1):
        rm, ri = rhs_rows(masses, inf)
        relaxed_m = advection_solve(rm, v, grid.dz, np.zeros(dgrid.n), x_bp.masses)
        relaxed_i = advection_solve(ri, v, grid.dz, 1.0, float(x_bp.mass_inf))
        relaxed_m[0] = 0.0
        relaxed_m[-1] = x_bp.masses
        new_m = masses + damping * (relaxed_m - masses)
        new_i = inf + damping * (relaxed_i - inf)
        new_m = np.clip(new_m, 0.0, None)
        new_m = _symmetrize_rows(dgrid, new_m)
        tot = new_m.sum(axis=1) + new_i
        new_m /= tot[:, None]
        new_i /= tot
        new_m[0], new_i[0] = 0.0, 1.0
        new_m[-1], new_i[-1] = x_bp.masses, x_bp.mass_inf
        # pin the entropy trace's mid-level crossing at z = 0
        trace = new_m @ kernel
        shift = kink_position(z, trace, level)
        if shift is not None and abs(shift) > 1e-14:
            pos = np.clip((z + shift - z[0]) / grid.dz, 0.0, len(z) - 1.0)
            idx = np.minimum(pos.astype(int), len(z) - 2)
            frac = (pos - idx)[:, None]
            new_m = (1.0 - frac) * new_m[idx] + frac * new_m[idx + 1]
            new_i = ((1.0 - frac[:, 0]) * new_i[idx] + frac[:, 0] * new_i[idx + 1])
            new_m[0], new_i[0] = 0.0, 1.0
            new_m[-1], new_i[-1] = x_bp.masses, x_bp.mass_inf
        change = float(
            np.max(np.abs(new_m - masses).sum(axis=1) + np.abs(new_i - inf))
        )
        masses, inf = new_m, new_i
        profile = DensityProfile(dgrid, z, masses, inf)
        v_new, den = velocity_from_density_profile(profile, c, ens, gap=gap)
        dv = abs(v_new - v)
        v = v_new
        if change < tol_profile and dv < tol_velocity:
            break
    else:
        raise SolverError(
            f"density wave solver did not converge: profile change {change:.3e}, "
            f"velocity change {dv:.3e} after {max_iter} iterations"
        )
    profile = DensityProfile(dgrid, z, masses, inf)
    v, den = velocity_from_density_profile(profile, c, ens, gap=gap)
    # residual of the comoving equation measured on the entropy trace
    trace = profile.entropy_trace()
    rm, ri = rhs_rows(masses, inf)
    rhs_trace = rm @ kernel
    dtrace = np.gradient(trace, grid.dz)
    residual = float(np.max(np.abs(trace - v * dtrace - rhs_trace)))
    return BmsWaveSolution(
        profile=profile,
        velocity=v,
        gap=gap,
        denominator=den,
        residual=residual,
        iterations=it,
    )


# ---------------------------------------------------------------------------
# channel-parameter scans


def biawgn_bp_threshold(ens: Ensemble, grid: DensityGrid = dc.DEFAULT_GRID, *, tol=1e-3) -> float:
    """Smallest channel mean at which the uncoupled density DE decodes."""
    lo, hi = 0.05, 1.0
    while dc.entropy(bp_fixed_point_density(dc.biawgn_density(hi, grid), ens)[0]) > 1e-8:
        lo = hi
        hi *= 2.0
        if hi > 64.0:
            raise SolverError("no decoding mean found below 64")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        x, _ = bp_fixed_point_density(dc.biawgn_density(mid, grid), ens)
        if dc.entropy(x) > 1e-8:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def biawgn_map_threshold(ens: Ensemble, grid: DensityGrid = dc.DEFAULT_GRID, *, tol=1e-3) -> float:
    """Channel mean where the density-domain energy gap vanishes."""
    hi = biawgn_bp_threshold(ens, grid, tol=tol) - 1e-3
    lo = hi / 4.0
    while True:
        x, _ = bp_fixed_point_density(dc.biawgn_density(lo, grid), ens)
        if dc.entropy(x) < 1e-8 or potential_single_density(x, dc.biawgn_density(lo, grid), ens) <= 0:
            break
        lo *= 0.5
        if lo < 1e-2:
            raise SolverError("gap does not change sign at small means")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        cmid = dc.biawgn_density(mid, grid)
        x, _ = bp_fixed_point_density(cmid, ens)
        if dc.entropy(x) > 1e-8 and potential_single_density(x, cmid, ens) > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
