"""Gaussian-approximation pipeline for regular ensembles on the BIAWGN channel.

All message densities are approximated by symmetric Gaussians (variance equal
to twice the mean) so the state collapses to a scalar: the entropy ``p`` of
the variable-node output.  The workhorse is the entropy of a symmetric
Gaussian of mean m,

    gaussian_entropy(m) = (4 pi m)^(-1/2) int dz exp(-(z-m)^2/4m) log2(1+e^-z),

evaluated by Gauss-Hermite quadrature.  Check-node combining happens in the
dual domain: entropies h map to means via the inverse function and dual means
add.  Only (l, r)-regular ensembles are supported, matching the validity of
the approximation as used here.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.special import erfcx

from .ensemble import Ensemble
from .errors import ConfigError, SolverError, above_map, below_bp
from .profiles import (
    SolverGrid,
    advection_solve,
    double_window,
    kink_position,
    kink_velocity_from_track,
    profile_derivative,
    recenter,
)
from .bec_wave import Trajectory, WaveSolution, ErasureProfile

log = logging.getLogger("wavefront.gauss")

LN2 = np.log(2.0)
SATURATION_MEAN = 1e4     # stands in for an infinite mean
SATURATION_ENTROPY = 1e-12
ASYMPTOTIC_MEAN = 700.0   # derivatives switch to the large-mean expansion
_GH_NODES = 61
_SERIES_TERMS = 64

_t, _w = np.polynomial.hermite.hermgauss(_GH_NODES)
_GH_W = _w / np.sqrt(np.pi)

def _euler_weights(n: int) -> np.ndarray:
    """Repeated pairwise averaging of n partial sums as one weight vector."""
    w = np.ones(1)
    for _ in range(n - 1):
        w = np.convolve(w, [0.5, 0.5])
    return w


_EULER_W = _euler_weights(_SERIES_TERMS)


def _require_regular(ell: int, r: int):
    if int(ell) != ell or int(r) != r or ell < 2 or r < 2:
        raise ConfigError("the Gaussian approximation needs integer degrees >= 2")


def require_regular_ensemble(ens: Ensemble) -> tuple[int, int]:
    """Degrees of a regular ensemble; irregular ones are rejected."""
    if not ens.is_regular:
        raise ConfigError(
            "the Gaussian approximation is only implemented for (l, r)-regular ensembles"
        )
    return ens.regular_degrees()


def gaussian_entropy(m):
    """Entropy of a symmetric Gaussian LLR density of mean m (variance 2m).

    Splitting the defining integral at zero log-likelihood turns it into a
    linear-ramp expectation (closed form) plus an alternating series of
    scaled complementary error functions whose terms all share the e^(-m/4)
    prefactor; Euler acceleration of the series gives machine precision
    uniformly in m.  Means at or beyond the saturation point count as
    perfect knowledge.
    """
    m_arr = np.asarray(m, dtype=float)
    if np.any(m_arr < 0):
        raise ConfigError("mean must be nonnegative")
    scalar = m_arr.ndim == 0
    m_arr = np.atleast_1d(m_arr).astype(float)
    out = np.zeros_like(m_arr)
    tiny = m_arr == 0.0
    out[tiny] = 1.0
    sat = m_arr >= SATURATION_MEAN
    mid = ~tiny & ~sat
    if mid.any():
        mm = m_arr[mid]
        c = 0.5 * np.sqrt(mm)
        k = np.arange(1, _SERIES_TERMS + 1)[:, None]
        terms = (erfcx((2 * k - 1) * c[None, :]) + erfcx((2 * k + 1) * c[None, :])) / k
        partial = np.cumsum((-1.0) ** (k + 1) * terms, axis=0)
        series = _EULER_W @ partial
        out[mid] = (
            np.exp(-mm / 4.0)
            / LN2
            * (np.sqrt(mm / np.pi) - 0.5 * mm * erfcx(c) + 0.5 * series)
        )
    return float(out[0]) if scalar else out


def gaussian_entropy_prime(m):
    """d/dm of gaussian_entropy; strictly negative."""
    m_arr = np.atleast_1d(np.asarray(m, dtype=float))
    scalar = np.ndim(m) == 0
    out = np.empty_like(m_arr)
    tiny = m_arr < 1e-8
    out[tiny] = -1.0 / (4.0 * LN2)
    sat = m_arr >= ASYMPTOTIC_MEAN
    if sat.any():
        out[sat] = -0.25 * gaussian_entropy(m_arr[sat])
    mid = ~tiny & ~sat
    if mid.any():
        mm = m_arr[mid][:, None]
        rt = np.sqrt(mm)
        z = mm + 2.0 * rt * _t[None, :]
        sig = _sigmoid(-z)  # 1/(1+e^z)
        vals = -(1.0 + _t[None, :] / rt) * sig / LN2
        out[mid] = vals @ _GH_W
    return float(out[0]) if scalar else out


def gaussian_entropy_second(m):
    """d^2/dm^2 of gaussian_entropy, by differentiating under the integral."""
    m_arr = np.atleast_1d(np.asarray(m, dtype=float))
    scalar = np.ndim(m) == 0
    out = np.empty_like(m_arr)
    tiny = m_arr < 1e-8
    out[tiny] = 1.0 / (8.0 * LN2)
    sat = m_arr >= ASYMPTOTIC_MEAN
    if sat.any():
        out[sat] = gaussian_entropy(m_arr[sat]) / 16.0
    mid = ~tiny & ~sat
    if mid.any():
        mm = m_arr[mid][:, None]
        rt = np.sqrt(mm)
        z = mm + 2.0 * rt * _t[None, :]
        sig = _sigmoid(-z)
        grow = (1.0 + _t[None, :] / rt) ** 2 * sig * (1.0 - sig)
        curl = _t[None, :] / (2.0 * mm * rt) * sig
        out[mid] = ((curl + grow) / LN2) @ _GH_W
    return float(out[0]) if scalar else out


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


_INV_TABLE = None


def _inverse_table():
    global _INV_TABLE
    if _INV_TABLE is None:
        grid = np.concatenate(
            [
                np.geomspace(1e-12, 1e-2, 800),
                np.linspace(1.01e-2, 60.0, 4200),
                np.geomspace(60.5, ASYMPTOTIC_MEAN, 400),
            ]
        )
        h = gaussian_entropy(grid)
        keep = np.concatenate([[True], np.diff(h) < -1e-18])
        grid, h = grid[keep], h[keep]
        _INV_TABLE = PchipInterpolator(h[::-1], grid[::-1])
    return _INV_TABLE


def gaussian_entropy_inv(h):
    """Mean with the given entropy: the inverse of gaussian_entropy.

    Entropies at or below the saturation floor map to SATURATION_MEAN (the
    finite stand-in for a perfectly known bit).  A table lookup supplies the
    starting point; two Newton corrections reach 1e-10.
    """
    h_arr = np.asarray(h, dtype=float)
    scalar = h_arr.ndim == 0
    h_arr = np.atleast_1d(h_arr).copy()
    if np.any(h_arr > 1.0 + 1e-9):
        raise ConfigError(f"entropy above 1: {h_arr.max()}")
    if np.any(h_arr < -1e-9):
        raise ConfigError(f"negative entropy: {h_arr.min()}")
    h_arr = np.clip(h_arr, 0.0, 1.0)
    out = np.empty_like(h_arr)
    sat = h_arr <= SATURATION_ENTROPY
    if sat.any():
        log.debug("entropy below %g saturated to mean %g", SATURATION_ENTROPY, SATURATION_MEAN)
    out[sat] = SATURATION_MEAN
    ones = h_arr >= 1.0
    out[ones] = 0.0
    mid = ~sat & ~ones
    if mid.any():
        m = np.clip(_inverse_table()(h_arr[mid]), 1e-14, SATURATION_MEAN)
        for _ in range(3):
            resid = gaussian_entropy(m) - h_arr[mid]
            m = np.clip(m - resid / gaussian_entropy_prime(m), 1e-16, SATURATION_MEAN)
        bad = np.abs(gaussian_entropy(m) - h_arr[mid]) > 1e-10
        if bad.any():
            idx = np.where(mid)[0][bad]
            for i in np.atleast_1d(idx):
                out[i] = brentq(
                    lambda mm: gaussian_entropy(mm) - h_arr[i], 0.0, SATURATION_MEAN,
                    xtol=1e-13,
                )
            good = np.where(mid)[0][~bad]
            out[good] = m[~bad]
        else:
            out[mid] = m
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class GaussChannel:
    """BIAWGN channel in the Gaussian approximation; mean is the LLR mean 2/sigma_n^2."""

    mean: float

    def __post_init__(self):
        if self.mean <= 0:
            raise ConfigError(f"channel mean must be positive: {self.mean}")

    @property
    def entropy(self) -> float:
        return gaussian_entropy(self.mean)


# ---------------------------------------------------------------------------
# single system in the entropy domain


def _dual_mean(p):
    """Mean of the dual-domain Gaussian whose entropy complements p."""
    return gaussian_entropy_inv(1.0 - np.asarray(p, dtype=float))


def check_half_step(p, r: int):
    """Entropy out of a degree-r check fed with entropy-p messages."""
    return 1.0 - gaussian_entropy((r - 1) * _dual_mean(p))


def de_step_single(p, ch: GaussChannel, ell: int, r: int):
    """One uncoupled DE update of the variable-output entropy."""
    q = check_half_step(p, r)
    return gaussian_entropy(ch.mean + (ell - 1) * gaussian_entropy_inv(np.asarray(q)))


_FP_CACHE: dict = {}


def fixed_point(ch: GaussChannel, ell: int, r: int, *, tol=1e-13, max_iter=10**6,
                trivial_below=1e-9):
    """Largest stable entropy fixed point, iterated from total uncertainty."""
    _require_regular(ell, r)
    key = (ch.mean, ell, r, tol, max_iter, trivial_below)
    if key in _FP_CACHE:
        return _FP_CACHE[key]
    p = 1.0
    it = 0
    converged = False
    prev_delta = None
    ratio_run = 0
    while it < max_iter:
        it += 1
        p_next = float(de_step_single(p, ch, ell, r))
        delta = p_next - p
        p = p_next
        if abs(delta) < tol:
            converged = True
            break
        if p < trivial_below * 1e-2:
            converged = True
            break
        # Aitken jump once the contraction ratio has stabilized (the plain
        # iteration slows critically near the decoding threshold)
        if prev_delta is not None and abs(prev_delta) > 0:
            ratio = delta / prev_delta
            ratio_run = ratio_run + 1 if 0.2 < ratio < 0.99999 else 0
            if ratio_run >= 8:
                jump = p + delta * ratio / (1.0 - ratio)
                if 0.0 <= jump <= 1.0:
                    p = jump
                prev_delta = None
                ratio_run = 0
                continue
        prev_delta = delta
    result = (0.0, converged, it) if p < trivial_below else (p, converged, it)
    _FP_CACHE[key] = result
    return result


_THRESHOLD_CACHE: dict = {}


def bp_threshold_mean(ell: int, r: int, *, tol=1e-6) -> float:
    """Smallest channel mean at which the uncoupled system decodes."""
    _require_regular(ell, r)
    key = ("bp", ell, r, tol)
    if key in _THRESHOLD_CACHE:
        return _THRESHOLD_CACHE[key]
    lo, hi = 1e-3, 1.0
    while fixed_point(GaussChannel(hi), ell, r)[0] > 0.0:
        lo = hi
        hi *= 2.0
        if hi > 100.0:
            raise SolverError("no decoding mean found below 100")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fixed_point(GaussChannel(mid), ell, r)[0] > 0.0:
            lo = mid
        else:
            hi = mid
    _THRESHOLD_CACHE[key] = 0.5 * (lo + hi)
    return _THRESHOLD_CACHE[key]


def potential(p, ch: GaussChannel, ell: int, r: int):
    """Single-system potential in the entropy domain; zero at p = 0."""
    _require_regular(ell, r)
    p_arr = np.asarray(p, dtype=float)
    md = _dual_mean(p_arr)
    inner = 1.0 - gaussian_entropy((r - 1) * md)
    w = (
        (1.0 - 1.0 / r) * gaussian_entropy(r * md)
        - gaussian_entropy((r - 1) * md)
        + 1.0 / r
        - gaussian_entropy(ch.mean + ell * gaussian_entropy_inv(inner)) / ell
    )
    return float(w) if np.ndim(w) == 0 else w


def energy_gap(ch: GaussChannel, ell: int, r: int, *, p_bp: float | None = None) -> float:
    if p_bp is None:
        p_bp = fixed_point(ch, ell, r)[0]
    if p_bp <= 0.0:
        raise below_bp("channel mean above the decoding point: no nontrivial fixed point")
    return float(potential(p_bp, ch, ell, r))


def map_threshold_mean(ell: int, r: int, *, tol=1e-6) -> float:
    """Channel mean where the entropy-domain energy gap vanishes."""
    key = ("map", ell, r, tol)
    if key in _THRESHOLD_CACHE:
        return _THRESHOLD_CACHE[key]
    hi = bp_threshold_mean(ell, r) - 1e-5
    lo = hi / 4.0
    while energy_gap(GaussChannel(lo), ell, r) > 0.0:
        lo *= 0.5
        if lo < 1e-3:
            raise SolverError("gap does not change sign at small means")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        p = fixed_point(GaussChannel(mid), ell, r)[0]
        if p > 0.0 and potential(p, GaussChannel(mid), ell, r) > 0.0:
            hi = mid  # gap still positive: the vanishing point lies below
        else:
            lo = mid
    _THRESHOLD_CACHE[key] = 0.5 * (lo + hi)
    return _THRESHOLD_CACHE[key]


# ---------------------------------------------------------------------------
# coupled chain


def coupled_step(values: np.ndarray, ch: GaussChannel, ell: int, r: int, w: int, L: int):
    """Synchronous window-averaged GA update; entries with z < 0 stay decoded."""
    _require_regular(ell, r)
    p = np.asarray(values, dtype=float)
    if p.shape != (L + w,):
        raise ConfigError("state length must be L + w")
    kernel = np.full(w, 1.0 / w)
    p_ext = np.concatenate([p, np.full(w - 1, p[-1])])
    q = gaussian_entropy((r - 1) * _dual_mean(p_ext))
    s = np.correlate(q, kernel, mode="valid") if w > 1 else q
    t = gaussian_entropy(ch.mean + (ell - 1) * gaussian_entropy_inv(np.clip(1.0 - s, 0.0, 1.0)))
    t[: w - 1] = 0.0  # perfect channel below the seed boundary
    t_pad = np.concatenate([np.zeros(w - 1), t])
    new = np.correlate(t_pad, kernel, mode="valid") if w > 1 else t_pad
    new[: w - 1] = 0.0
    return np.clip(new, 0.0, 1.0)


def run_coupled(
    ch: GaussChannel,
    ell: int,
    r: int,
    L: int,
    w: int,
    *,
    snapshot_every: int = 10,
    max_iter: int = 200_000,
    stop_level: float | None = None,
    stop_kink_fraction: float = 0.9,
) -> Trajectory:
    values = np.ones(L + w)
    values[: w - 1] = 0.0
    traj = Trajectory(w=w, L=L)
    traj.append(0, values)
    z = np.arange(-w + 1, L + 1)
    for it in range(1, max_iter + 1):
        values = coupled_step(values, ch, ell, r, w, L)
        if it % snapshot_every == 0:
            traj.append(it, values)
            if values.max() < 1e-12:
                break
            if stop_level is not None:
                pos = kink_position(z, values, stop_level)
                if pos is None or pos > stop_kink_fraction * L:
                    break
    return traj


def empirical_velocity(traj: Trajectory, ch: GaussChannel, ell: int, r: int, **kwargs) -> float:
    """Kink displacement rate of the entropy profile, normalized by w."""
    p_bp = fixed_point(ch, ell, r)[0]
    if p_bp <= 0.0:
        raise below_bp()
    level = 0.5 * p_bp
    z = np.arange(-traj.w + 1, traj.L + 1)
    track = [(it, kink_position(z, vals, level)) for it, vals in traj.snapshots]
    return kink_velocity_from_track(track, traj.w, traj.L, **kwargs)


# ---------------------------------------------------------------------------
# continuum wave solver


def velocity_from_profile(
    profile: ErasureProfile,
    ch: GaussChannel,
    ell: int,
    r: int,
    *,
    gap: float | None = None,
    curvature_arg: int | None = None,
) -> float:
    """Entropy-domain velocity: gap over the curvature-weighted dissipation.

    ``curvature_arg`` is the multiple of the dual mean inside the second
    derivative; None selects the default for this package (see module docs).
    """
    if gap is None:
        gap = energy_gap(ch, ell, r)
    k = _curvature_arg(r, curvature_arg)
    p = profile.x
    pp = profile_derivative(p, profile.dz)
    md = _dual_mean(p)
    num = gaussian_entropy_second(k * md)
    den = gaussian_entropy_prime(md) ** 2
    # The curvature of the Gaussian entropy function is positive, so the
    # dissipation integral is taken with the sign that renders the velocity
    # positive against a positive gap.
    integrand = (r - 1) * pp**2 * num / den
    d = float(np.trapezoid(integrand, dx=profile.dz))
    if abs(d) < 1e-14:
        raise SolverError("degenerate entropy profile: dissipation integral vanishes")
    if d < 0.0:
        raise SolverError("sign violation in the entropy-domain dissipation integral")
    return gap / d


def _curvature_arg(r: int, curvature_arg: int | None) -> int:
    if curvature_arg is None:
        return r - 2
    if curvature_arg < 1:
        raise ConfigError("curvature argument multiple must be >= 1")
    return curvature_arg


def solve_wave(
    ch: GaussChannel,
    ell: int,
    r: int,
    grid: SolverGrid | None = None,
    *,
    damping: float = 0.5,
    tol_profile: float = 1e-10,
    tol_velocity: float = 1e-9,
    max_iter: int = 100_000,
    curvature_arg: int | None = None,
) -> WaveSolution:
    """Joint entropy-profile / velocity solution in the Gaussian approximation."""
    _require_regular(ell, r)
    grid = grid or SolverGrid()
    p_bp = fixed_point(ch, ell, r)[0]
    if p_bp <= 0.0:
        raise below_bp()
    gap = float(potential(p_bp, ch, ell, r))
    if gap <= 0.0:
        raise above_map()

    z = grid.z()
    tw = grid.trapezoid_weights()
    level = 0.5 * p_bp

    def check_fn(arr):
        return gaussian_entropy((r - 1) * _dual_mean(arr))

    def var_fn(arr):
        inner = gaussian_entropy_inv(np.clip(1.0 - arr, 0.0, 1.0))
        return gaussian_entropy(ch.mean + (ell - 1) * inner)

    p = p_bp / (1.0 + np.exp(-z / 0.35))
    p[0], p[-1] = 0.0, p_bp
    v = 0.0
    dv = np.inf
    change = np.inf
    for it in range(1, max_iter + 1):
        rhs = double_window(p, tw, 0.0, p_bp, check_fn, var_fn)
        relaxed = advection_solve(rhs, v, grid.dz, 0.0, p_bp)
        p_new = np.clip(p + damping * (relaxed - p), 0.0, 1.0)
        p_new[0], p_new[-1] = 0.0, p_bp
        p_new = recenter(z, p_new, level, 0.0, p_bp)
        change = float(np.max(np.abs(p_new - p)))
        p = p_new
        profile = ErasureProfile(z=z, x=p)
        v_new = velocity_from_profile(profile, ch, ell, r, gap=gap, curvature_arg=curvature_arg)
        dv = abs(v_new - v)
        v = v_new
        if change < tol_profile and dv < tol_velocity:
            break
    else:
        raise SolverError(
            f"entropy-domain wave solver did not converge: profile change {change:.3e}, "
            f"velocity change {dv:.3e} after {max_iter} iterations"
        )
    pp = profile_derivative(p, grid.dz)
    rhs = double_window(p, tw, 0.0, p_bp, check_fn, var_fn)
    residual = float(np.max(np.abs(p - v * pp - rhs)))
    return WaveSolution(
        profile=ErasureProfile(z=z, x=p), velocity=v, residual=residual, iterations=it
    )
