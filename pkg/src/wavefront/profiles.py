"""Shared machinery for spatial profiles: windows, kink tracking, advection.

Conventions used by every wave solver in this package:

* continuum profiles live on a uniform grid ``z_min .. z_max`` with spacing
  ``dz`` where z is measured in units of the coupling width w;
* the coupling window integrals over [0, 1] are evaluated with trapezoid
  weights on the same dz step, so a window spans ``m = 1/dz + 1`` samples;
* the comoving term ``-v x'(z)`` is treated implicitly (a tridiagonal solve)
  because the explicit damped update is unstable once v/dz is order one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConfigError


@dataclass(frozen=True)
class SolverGrid:
    """Uniform spatial grid for the continuum wave solvers."""

    z_min: float = -8.0
    z_max: float = 8.0
    dz: float = 1.0 / 64.0

    def __post_init__(self):
        if self.dz <= 0 or self.z_max <= self.z_min:
            raise ConfigError("grid needs dz > 0 and z_max > z_min")
        if abs(round(1.0 / self.dz) - 1.0 / self.dz) > 1e-9:
            raise ConfigError("dz must divide the unit coupling window")
        steps = (self.z_max - self.z_min) / self.dz
        if abs(round(steps) - steps) > 1e-9:
            raise ConfigError("dz must divide the grid span")

    @property
    def n(self) -> int:
        return int(round((self.z_max - self.z_min) / self.dz)) + 1

    @property
    def window_len(self) -> int:
        return int(round(1.0 / self.dz)) + 1

    def z(self) -> np.ndarray:
        return self.z_min + self.dz * np.arange(self.n)

    def trapezoid_weights(self) -> np.ndarray:
        m = self.window_len
        tw = np.full(m, self.dz)
        tw[0] *= 0.5
        tw[-1] *= 0.5
        return tw / tw.sum()


def double_window(x, tw, pad_left, pad_right, check_fn, var_fn):
    """Evaluate var_fn applied to the inner window of check_fn on the grid.

    Computes ``int_0^1 du var_fn( int_0^1 ds check_fn(x)(z - u + s) )`` with
    trapezoid weights ``tw``; ``x`` is extended by constants on both sides.
    """
    m = len(tw)
    xp = np.concatenate([np.full(m - 1, pad_left), x, np.full(m - 1, pad_right)])
    inner = np.correlate(check_fn(xp), tw, mode="valid")  # index k <-> z_min - 1 + k dz
    outer = np.convolve(var_fn(inner), tw, mode="full")
    return outer[m - 1 : m - 1 + len(x)]


def advection_solve(rhs, v, dz, left_value, right_value):
    """Solve x - v x' = rhs with central differences and clamped ends.

    ``rhs`` may be 1-d or (n, k) for k independent right-hand sides; the
    boundary values may then be per-column vectors.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    a = v / (2.0 * dz)
    ab = np.zeros((3, n))
    ab[1, :] = 1.0
    ab[0, 2:] = -a  # superdiagonal entries A[i, i+1] for interior rows
    ab[2, :-2] = a  # subdiagonal entries A[i, i-1] for interior rows
    b = rhs.copy()
    b[0] = left_value
    b[-1] = right_value
    return solve_banded((1, 1), ab, b)


def kink_position(coords, values, level):
    """Interpolated leftmost crossing of ``level`` by a rising profile.

    Returns None when the profile never reaches the level (fully decoded).
    """
    values = np.asarray(values, dtype=float)
    if values[0] >= level:
        return float(coords[0])
    above = values >= level
    if not above.any():
        return None
    i = int(np.argmax(above))  # first index at/above the level
    x0, x1 = values[i - 1], values[i]
    frac = (level - x0) / (x1 - x0)
    return float(coords[i - 1] + frac * (coords[i] - coords[i - 1]))


def recenter(z, x, level, left_value, right_value):
    """Translate the profile so the level crossing sits at z = 0."""
    shift = kink_position(z, x, level)
    if shift is None or shift == 0.0:
        return x
    return np.interp(z + shift, z, x, left=left_value, right=right_value)


def profile_derivative(x, dz):
    """Central differences, one-sided at the (flat) ends."""
    return np.gradient(x, dz)


def kink_velocity_from_track(track, w, L, *, window=(0.25, 0.75), transient_advance=None):
    """Average kink displacement per iteration, normalized by w.

    ``track`` is a list of (iteration, position) pairs with None positions
    where the profile is fully decoded.  Snapshots are discarded until the
    kink has advanced 2w positions from its first location and outside the
    central portion of the chain.
    """
    from .errors import SolverError, WaveBoundaryError

    if transient_advance is None:
        transient_advance = 2.0 * w
    defined = [(it, p) for it, p in track if p is not None]
    if not defined:
        raise WaveBoundaryError("profile decoded before any kink could be located")
    z0 = defined[0][1]
    lo, hi = window[0] * L, window[1] * L
    kept = [
        (it, p) for it, p in defined if p >= z0 + transient_advance and lo <= p <= hi
    ]
    if len(kept) < 2:
        positions = np.array([p for _, p in defined])
        if np.ptp(positions) < 1e-9:
            return 0.0  # stationary wave
        if any(p is None for _, p in track):
            raise WaveBoundaryError(
                "wave reached the chain boundary before the measurement window"
            )
        raise SolverError(
            "trajectory too short: fewer than two snapshots in the measurement window"
        )
    rates = [
        (p2 - p1) / (w * (i2 - i1)) for (i1, p1), (i2, p2) in zip(kept[:-1], kept[1:])
    ]
    return float(np.mean(rates))
