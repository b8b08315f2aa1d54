"""Quantized symmetric LLR-density algebra.

A density lives on a uniform log-likelihood grid over [-A, A] plus a point
mass at +infinity.  Two convolutions act on densities: the variable-node
operation adds LLRs (plain additive convolution on the grid) and the
check-node operation combines reliabilities, implemented in the magnitude
domain g = -ln tanh(|a|/2) where it is additive.  The point at g = 0 is the
infinity bucket, so perfect knowledge rides the transform exactly; the zero
LLR lives at g = infinity and is handled as an absorbing bucket.  Signs are
carried through the check transform by the sum/difference trick.  Everything
is bilinear, so signed measures (profile derivatives) reuse the same paths.

Two-point erasure densities (masses only at 0 and infinity) stay exactly
two-point under every operation here, which is the master cross-check
against the scalar erasure pipeline.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft
from scipy.sparse import csr_matrix
from scipy.special import expit, ndtr

from .ensemble import DegreePolynomial
from .errors import ConfigError

_MAGIC = b"WFD1"


@dataclass(frozen=True)
class DensityGrid:
    """Uniform LLR grid on [-llr_max, llr_max] plus the infinity bucket."""

    llr_max: float = 30.0
    half_points: int = 2048
    g_points: int = 4096

    def __post_init__(self):
        if self.llr_max <= 0 or self.half_points < 8 or self.g_points < 8:
            raise ConfigError("degenerate density grid")

    @property
    def delta(self) -> float:
        return self.llr_max / self.half_points

    @property
    def n(self) -> int:
        return 2 * self.half_points + 1

    @property
    def center(self) -> int:
        return self.half_points

    @property
    def g_max(self) -> float:
        return -np.log(np.tanh(0.5 * self.delta))

    @property
    def g_delta(self) -> float:
        return self.g_max / (self.g_points - 1)

    def alphas(self) -> np.ndarray:
        return _tables(self).alphas


DEFAULT_GRID = DensityGrid()


@dataclass
class SignedDensity:
    """Real-weighted measure on the LLR grid; derivatives of profiles live here."""

    grid: DensityGrid
    masses: np.ndarray
    mass_inf: float

    def total(self) -> float:
        return float(self.masses.sum() + self.mass_inf)

    def copy(self):
        return type(self)(self.grid, self.masses.copy(), self.mass_inf)


@dataclass
class QuantizedDensity(SignedDensity):
    """Nonnegative measure; probability densities carry total mass one."""


def _same_grid(a: SignedDensity, b: SignedDensity) -> DensityGrid:
    if a.grid != b.grid:
        raise ConfigError("grid mismatch between densities")
    return a.grid


def _result_kind(*parts):
    return (
        QuantizedDensity
        if all(isinstance(p, QuantizedDensity) for p in parts)
        else SignedDensity
    )


class _Tables:
    """Precomputed transform tables for one grid configuration."""

    def __init__(self, grid: DensityGrid):
        self.grid = grid
        n, K = grid.n, grid.center
        self.alphas = (np.arange(n) - K) * grid.delta
        self.entropy_kernel = np.logaddexp(0.0, -self.alphas) / np.log(2.0)
        # alpha -> g scatter for strictly positive finite LLR values
        pos_alpha = self.alphas[K + 1 :]
        g = -np.log(np.tanh(0.5 * pos_alpha))
        g = np.clip(g, 0.0, grid.g_max)
        pos = np.clip(g / grid.g_delta, 0.0, grid.g_points - 1)
        j = np.minimum(pos.astype(int), grid.g_points - 2)
        frac = pos - j
        rows = np.arange(K)
        self.to_g = csr_matrix(
            (
                np.concatenate([1.0 - frac, frac]),
                (np.concatenate([rows, rows]), np.concatenate([j, j + 1])),
            ),
            shape=(K, grid.g_points),
        )
        self._from_g = {}

    def from_g(self, length: int) -> csr_matrix:
        """g-domain bins (index >= 1) scattered back onto positive LLR bins.

        Bin zero is the infinity bucket and is handled by the caller.  The
        scatter targets offsets from the grid center: offset 0 is the zero
        LLR, offsets 1..K the positive side.  The split between neighbouring
        LLR bins preserves the entropy of each mass point exactly wherever
        that is well conditioned (the duality rule is the primary accuracy
        contract), falling back to position interpolation in the flat tail.
        """
        if length not in self._from_g:
            grid = self.grid
            jj = np.arange(1, length)
            gv = jj * grid.g_delta
            with np.errstate(over="ignore"):
                alpha = 2.0 * np.arctanh(np.exp(-gv))
            alpha = np.clip(alpha, 0.0, grid.llr_max)
            pos = alpha / grid.delta
            k = np.minimum(pos.astype(int), grid.center - 1)
            frac = pos - k
            h_true = np.logaddexp(0.0, -alpha) / np.log(2.0)
            kernel = self.entropy_kernel[grid.center :]
            h_lo = kernel[k]
            h_hi = kernel[k + 1]
            dh = h_lo - h_hi
            safe = dh > 1e-12
            frac = np.where(safe, (h_lo - h_true) / np.where(safe, dh, 1.0), frac)
            frac = np.clip(frac, 0.0, 1.0)
            self._from_g[length] = csr_matrix(
                (
                    np.concatenate([1.0 - frac, frac]),
                    (np.concatenate([jj, jj]), np.concatenate([k, k + 1])),
                ),
                shape=(length, grid.center + 1),
            )
        return self._from_g[length]


_TABLE_CACHE: dict = {}


def _tables(grid: DensityGrid) -> _Tables:
    if grid not in _TABLE_CACHE:
        _TABLE_CACHE[grid] = _Tables(grid)
    return _TABLE_CACHE[grid]


# ---------------------------------------------------------------------------
# constructors


def delta_zero(grid: DensityGrid = DEFAULT_GRID) -> QuantizedDensity:
    """Unit mass at zero LLR: total uncertainty."""
    m = np.zeros(grid.n)
    m[grid.center] = 1.0
    return QuantizedDensity(grid, m, 0.0)


def delta_inf(grid: DensityGrid = DEFAULT_GRID) -> QuantizedDensity:
    """Unit mass at infinite LLR: perfect knowledge."""
    return QuantizedDensity(grid, np.zeros(grid.n), 1.0)


def bec_density(eps: float, grid: DensityGrid = DEFAULT_GRID) -> QuantizedDensity:
    if not 0.0 <= eps <= 1.0:
        raise ConfigError(f"erasure probability outside [0, 1]: {eps}")
    m = np.zeros(grid.n)
    m[grid.center] = eps
    return QuantizedDensity(grid, m, 1.0 - eps)


def biawgn_density(mean: float, grid: DensityGrid = DEFAULT_GRID) -> QuantizedDensity:
    """Symmetric Gaussian of the given mean (variance twice the mean), binned.

    Mass beyond +A joins the infinity bucket; the (exponentially suppressed)
    mass below -A folds into the lowest bin; symmetry is then re-enforced.
    """
    if mean <= 0:
        raise ConfigError(f"channel mean must be positive: {mean}")
    sigma = np.sqrt(2.0 * mean)
    edges = np.concatenate([_tables(grid).alphas - 0.5 * grid.delta,
                            [grid.llr_max + 0.5 * grid.delta]])
    cdf = ndtr((edges - mean) / sigma)
    masses = np.diff(cdf)
    masses[0] += cdf[0]            # fold the lower tail
    mass_inf = float(1.0 - cdf[-1])  # upper tail is effectively perfect knowledge
    out = symmetrize(QuantizedDensity(grid, masses, mass_inf))
    t = out.total()
    return QuantizedDensity(grid, out.masses / t, out.mass_inf / t)


# ---------------------------------------------------------------------------
# functionals and projections


def entropy(x: SignedDensity) -> float:
    """Linear entropy functional; the infinity bucket contributes nothing."""
    return float(x.masses @ _tables(x.grid).entropy_kernel)


def symmetrize(x: QuantizedDensity) -> QuantizedDensity:
    """Project onto the symmetric cone, preserving each (+a, -a) pair sum.

    Both sides are computed from their own logistic factor: the complement
    1 - expit(a) would lose all relative precision once expit(a) rounds
    to 1, and the symmetry invariant is checked in relative terms.
    """
    grid = x.grid
    K = grid.center
    pos = x.masses[K + 1 :]
    neg = x.masses[:K][::-1]
    s = pos + neg
    alpha = _tables(grid).alphas[K + 1 :]
    out = x.masses.copy()
    out[K + 1 :] = s * expit(alpha)
    out[:K] = (s * expit(-alpha))[::-1]
    return QuantizedDensity(grid, out, x.mass_inf)


def symmetry_defect(x: QuantizedDensity, *, floor: float = 1e-12) -> float:
    """Largest relative violation of mass(a) = e^a mass(-a).

    The two edge bins are excluded: they are the designated fold targets for
    out-of-range mass (the -A bin stands in for everything below the grid,
    including the sign-weighted image of the infinity bucket), so they carry
    no symmetric partner by construction.
    """
    grid = x.grid
    K = grid.center
    pos = x.masses[K + 1 : -1]
    neg = x.masses[1:K][::-1]
    alpha = _tables(grid).alphas[K + 1 : -1]
    expected = neg * np.exp(alpha)
    scale = np.maximum(np.maximum(pos, expected), floor)
    rel = np.abs(pos - expected) / scale
    rel[(pos < floor) & (expected < floor)] = 0.0
    return float(rel.max()) if rel.size else 0.0


def is_probability(x: SignedDensity, *, tol: float = 1e-9) -> bool:
    return bool(np.all(x.masses >= -1e-12) and abs(x.total() - 1.0) <= tol)


# ---------------------------------------------------------------------------
# convolutions


def var_conv(a: SignedDensity, b: SignedDensity) -> SignedDensity:
    """Variable-node combination: LLRs add; infinity absorbs."""
    grid = _same_grid(a, b)
    n, K = grid.n, grid.center
    full = np.convolve(a.masses, b.masses)
    out = full[K : K + n].copy()
    out[0] += full[:K].sum()
    out[-1] += full[K + n :].sum()
    inf = a.mass_inf * b.total() + b.mass_inf * a.total() - a.mass_inf * b.mass_inf
    kind = _result_kind(a, b)
    if kind is QuantizedDensity:
        out = np.clip(out, 0.0, None)
    return kind(grid, out, float(inf))


def _g_split(x: SignedDensity):
    """(g-domain positive-sign vector, negative-sign vector, zero-LLR mass)."""
    grid = x.grid
    K = grid.center
    t = _tables(grid)
    gp = x.masses[K + 1 :] @ t.to_g
    gn = x.masses[:K][::-1] @ t.to_g
    gp = np.asarray(gp).ravel().copy()
    gp[0] += x.mass_inf
    return gp, np.asarray(gn).ravel(), float(x.masses[K])


def _g_assemble(grid: DensityGrid, p_out, n_out, z0: float, kind):
    """Back-transform signed g-domain vectors onto the LLR grid."""
    t = _tables(grid)
    K = grid.center
    length = len(p_out)
    back = t.from_g(length)
    pos_side = np.asarray(p_out @ back).ravel()  # offsets 0..K from center
    neg_side = np.asarray(n_out @ back).ravel()
    masses = np.zeros(grid.n)
    masses[K:] += pos_side
    masses[K::-1] += neg_side
    masses[K] += z0
    # negative-sign mass at g=0 stands for -infinity: fold to the lowest bin
    masses[0] += n_out[0]
    inf = float(p_out[0])
    if kind is QuantizedDensity:
        masses = np.clip(masses, 0.0, None)
    return kind(grid, masses, inf)


def chk_conv(a: SignedDensity, b: SignedDensity) -> SignedDensity:
    """Check-node combination: magnitudes add in the g-domain, signs multiply."""
    grid = _same_grid(a, b)
    gpa, gna, z0a = _g_split(a)
    gpb, gnb, z0b = _g_split(b)
    ua, va = gpa + gna, gpa - gna
    ub, vb = gpb + gnb, gpb - gnb
    L = next_fast_len(2 * grid.g_points - 1)
    fu = irfft(rfft(ua, L) * rfft(ub, L), L)[: 2 * grid.g_points - 1]
    fv = irfft(rfft(va, L) * rfft(vb, L), L)[: 2 * grid.g_points - 1]
    p_out = 0.5 * (fu + fv)
    n_out = 0.5 * (fu - fv)
    # the zero LLR absorbs everything it meets
    z0 = z0a * b.total() + z0b * a.total() - z0a * z0b
    return _g_assemble(grid, p_out, n_out, z0, _result_kind(a, b))


# ---------------------------------------------------------------------------
# polynomial lifts


def _power_coeffs(poly: DegreePolynomial, shift: int, weights=None) -> np.ndarray:
    """Coefficients c_k of sum_d w_d x^(conv (d - shift)) indexed by power k."""
    degs = np.arange(1, poly.coeffs.size + 1)
    w = poly.coeffs if weights is None else weights
    kmax = poly.coeffs.size - shift
    c = np.zeros(max(kmax + 1, 1))
    for d, wd in zip(degs, w):
        k = d - shift
        if wd != 0.0:
            if k < 0:
                raise ConfigError("polynomial power shift out of range")
            c[k] += wd
    return c


def edge_power_coeffs(poly: DegreePolynomial) -> np.ndarray:
    """x^(d-1) weights of an edge-perspective polynomial."""
    return _power_coeffs(poly, 1)


def node_power_coeffs(ens_node: np.ndarray) -> np.ndarray:
    """x^d weights of a node-perspective polynomial (index = degree)."""
    return np.concatenate([[0.0], ens_node])


def derivative_power_coeffs(poly: DegreePolynomial) -> np.ndarray:
    """x^(d-2) weights of the formal derivative of an edge polynomial lift."""
    degs = np.arange(1, poly.coeffs.size + 1)
    weights = (degs - 1) * poly.coeffs
    if poly.coeffs.size < 2:
        return np.zeros(1)
    return _power_coeffs(poly, 2, weights)[: poly.coeffs.size - 1]


def var_poly_apply(coeffs: np.ndarray, x: SignedDensity) -> SignedDensity:
    """sum_k c_k x^(varconv k); the empty product is the zero-LLR mass."""
    m2, inf = _var_poly_batch(coeffs, x.masses[None, :], np.array([x.mass_inf]), x.grid)
    kind = QuantizedDensity if isinstance(x, QuantizedDensity) and np.all(coeffs >= 0) else SignedDensity
    out = m2[0]
    if kind is QuantizedDensity:
        out = np.clip(out, 0.0, None)
    return kind(x.grid, out, float(inf[0]))


def chk_poly_apply(coeffs: np.ndarray, x: SignedDensity) -> SignedDensity:
    """sum_k c_k x^(chkconv k); the empty product is the infinity mass."""
    m2, inf = _chk_poly_batch(coeffs, x.masses[None, :], np.array([x.mass_inf]), x.grid)
    kind = QuantizedDensity if isinstance(x, QuantizedDensity) and np.all(coeffs >= 0) else SignedDensity
    out = m2[0]
    if kind is QuantizedDensity:
        out = np.clip(out, 0.0, None)
    return kind(x.grid, out, float(inf[0]))


def poly_var(poly: DegreePolynomial, x: QuantizedDensity) -> QuantizedDensity:
    """Edge-perspective variable lift: sum_d p_d x^(varconv (d-1))."""
    return var_poly_apply(edge_power_coeffs(poly), x)


def poly_chk(poly: DegreePolynomial, x: QuantizedDensity) -> QuantizedDensity:
    """Edge-perspective check lift: sum_d p_d x^(chkconv (d-1))."""
    return chk_poly_apply(edge_power_coeffs(poly), x)


# ---------------------------------------------------------------------------
# batched cores (shared by the coupled-system and wave solvers)


def _poly_eval(coeffs: np.ndarray, t):
    return np.polynomial.polynomial.polyval(t, coeffs)


_FFT_WORKERS = 2


def _freq_power(F: np.ndarray, k: int) -> np.ndarray:
    """F**k elementwise by binary exponentiation (complex powers are costly)."""
    result = None
    base = F
    while k:
        if k & 1:
            result = base.copy() if result is None else result * base
        k >>= 1
        if k:
            base = base * base
    return np.ones_like(F) if result is None else result


def _freq_poly(F: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """sum_k c_k F**k, exploiting the sparsity of degree distributions."""
    nz = np.nonzero(coeffs)[0]
    if nz.size == 0:
        return np.zeros_like(F)
    acc = None
    base_cache: dict[int, np.ndarray] = {}

    def power(k):
        if k not in base_cache:
            base_cache[k] = _freq_power(F, k)
        return base_cache[k]

    for k in nz:
        term = coeffs[k] * power(int(k)) if k > 0 else np.full_like(F, coeffs[0])
        acc = term if acc is None else acc + term
    return acc


def _var_poly_batch(coeffs, masses, inf, grid: DensityGrid):
    """Apply the variable-side polynomial lift to a batch of densities.

    The k-th power of the grid part has its origin at k*center; every term
    is delayed to a common origin in Fourier space before summing.  Mass
    outside [-A, A] folds into the edge bins.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    kmax = coeffs.size - 1
    n, K = grid.n, grid.center
    B = masses.shape[0]
    m_f = masses.sum(axis=1)
    tot = m_f + inf
    inf_out = _poly_eval(coeffs, tot) - _poly_eval(coeffs, m_f)
    if kmax == 0:
        out = np.zeros_like(masses)
        out[:, K] = coeffs[0]
        return out, inf_out
    L = next_fast_len(kmax * (n - 1) + 1)
    F = rfft(masses, L, axis=1, workers=_FFT_WORKERS)
    freqs = np.arange(F.shape[1])
    delay = np.exp(-2j * np.pi * freqs * K / L)  # one-step origin shift
    # every power-k term is delayed to the common origin kmax * K
    acc = None
    for k in np.nonzero(coeffs)[0]:
        term = coeffs[k] * _freq_power(F, int(k)) * delay ** int(kmax - k)
        acc = term if acc is None else acc + term
    dense = irfft(acc, L, axis=1, workers=_FFT_WORKERS)
    # common origin sits at index kmax*K
    start = kmax * K - K
    out = dense[:, start : start + n].copy()
    out[:, 0] += dense[:, :start].sum(axis=1)
    out[:, -1] += dense[:, start + n :].sum(axis=1)
    return out, inf_out


def _chk_poly_batch(coeffs, masses, inf, grid: DensityGrid):
    """Apply the check-side polynomial lift to a batch of densities."""
    coeffs = np.asarray(coeffs, dtype=float)
    kmax = coeffs.size - 1
    K = grid.center
    t = _tables(grid)
    z0 = masses[:, K].copy()
    gp = masses[:, K + 1 :] @ t.to_g
    gn = masses[:, :K][:, ::-1] @ t.to_g
    gp = np.asarray(gp)
    gn = np.asarray(gn)
    gp[:, 0] += inf
    m_g = gp.sum(axis=1) + gn.sum(axis=1)
    tot = m_g + z0
    z0_out = _poly_eval(coeffs, tot) - _poly_eval(coeffs, m_g)
    if kmax == 0:
        out = np.zeros_like(masses)
        out[:, K] = z0_out
        infs = np.full(masses.shape[0], float(coeffs[0]))
        return out, infs  # c0 * Delta_inf plus the absorbed zero-LLR mass
    u = gp + gn
    v = gp - gn
    Lg = next_fast_len(kmax * (grid.g_points - 1) + 1)
    FU = rfft(u, Lg, axis=1, workers=_FFT_WORKERS)
    FV = rfft(v, Lg, axis=1, workers=_FFT_WORKERS)
    SU = irfft(_freq_poly(FU, coeffs), Lg, axis=1, workers=_FFT_WORKERS)
    SV = irfft(_freq_poly(FV, coeffs), Lg, axis=1, workers=_FFT_WORKERS)
    out_len = kmax * (grid.g_points - 1) + 1
    p_out = 0.5 * (SU + SV)[:, :out_len]
    n_out = 0.5 * (SU - SV)[:, :out_len]
    # note: the k=0 frequency-domain constant adds coeffs[0] * delta(g=0),
    # exactly the infinity-bucket identity of the check convolution
    back = t.from_g(out_len)
    pos_side = np.asarray(p_out @ back)
    neg_side = np.asarray(n_out @ back)
    out = np.zeros_like(masses)
    out[:, K:] += pos_side
    out[:, K::-1] += neg_side
    out[:, K] += z0_out
    out[:, 0] += n_out[:, 0]
    infs = p_out[:, 0].copy()
    return out, infs


def _two_point_weights(x: SignedDensity):
    """Zero-LLR weight when the density is (numerically) two-point, else None."""
    K = x.grid.center
    other = x.masses.sum() - x.masses[K]
    if abs(other) < 1e-15:
        return float(x.masses[K])
    return None


# ---------------------------------------------------------------------------
# derivatives and serialization


def deriv_lift(prev: QuantizedDensity, next_: QuantizedDensity, dz: float) -> SignedDensity:
    """Central-difference derivative of a density-valued profile."""
    grid = _same_grid(prev, next_)
    if dz <= 0:
        raise ConfigError("dz must be positive")
    return SignedDensity(
        grid,
        (next_.masses - prev.masses) / (2.0 * dz),
        (next_.mass_inf - prev.mass_inf) / (2.0 * dz),
    )


def to_bytes(x: SignedDensity) -> bytes:
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<3d", x.grid.llr_max, x.grid.delta, float(x.grid.n)))
    buf.write(np.asarray(x.masses, dtype="<f8").tobytes())
    buf.write(struct.pack("<d", x.mass_inf))
    return buf.getvalue()


def from_bytes(data: bytes) -> QuantizedDensity:
    if data[:4] != _MAGIC:
        raise ConfigError("not a density record")
    llr_max, delta, n_f = struct.unpack("<3d", data[4:28])
    n = int(n_f)
    half = (n - 1) // 2
    grid = DensityGrid(llr_max=llr_max, half_points=half)
    if abs(grid.delta - delta) > 1e-12:
        raise ConfigError("inconsistent density header")
    masses = np.frombuffer(data[28 : 28 + 8 * n], dtype="<f8").copy()
    (mass_inf,) = struct.unpack("<d", data[28 + 8 * n : 36 + 8 * n])
    return QuantizedDensity(grid, masses, mass_inf)


def to_csv(x: SignedDensity, path):
    with open(path, "w") as fh:
        fh.write(f"{x.grid.llr_max!r},{x.grid.delta!r},{x.grid.n}\n")
        for m in x.masses:
            fh.write(f"{float(m)!r}\n")
        fh.write(f"{float(x.mass_inf)!r}\n")


def from_csv(path) -> QuantizedDensity:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        llr_max, delta, n = float(header[0]), float(header[1]), int(header[2])
        values = [float(line) for line in fh if line.strip()]
    if len(values) != n + 1:
        raise ConfigError("density record length mismatch")
    grid = DensityGrid(llr_max=llr_max, half_points=(n - 1) // 2)
    if abs(grid.delta - delta) > 1e-12:
        raise ConfigError("inconsistent density header")
    return QuantizedDensity(grid, np.array(values[:-1]), values[-1])
