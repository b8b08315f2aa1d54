"""Degree-distribution polynomials of LDPC ensembles.

Edge-perspective polynomials are stored densely in the power basis:
``coeffs[k]`` is the coefficient of ``y**k``, i.e. the fraction of edges
attached to nodes of degree ``k + 1``.  All downstream modules consume the
evaluation / derivative / inversion calculus defined here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

MAX_DEGREE = 100
_NORM_TOL = 1e-12
_DOMAIN_TOL = 1e-9


def _as_coeff_array(coeffs) -> np.ndarray:
    arr = np.asarray(coeffs, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ConfigError("polynomial coefficients must be a non-empty 1-d sequence")
    # strip trailing zeros but keep at least the constant slot
    nz = np.nonzero(arr)[0]
    if nz.size == 0:
        raise ConfigError("polynomial has no positive coefficients")
    arr = arr[: nz[-1] + 1].copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DegreePolynomial:
    """Edge-perspective degree distribution p(y) = sum_d c_d y^(d-1)."""

    coeffs: np.ndarray

    def __post_init__(self):
        arr = _as_coeff_array(self.coeffs)
        object.__setattr__(self, "coeffs", arr)
        if arr.size > MAX_DEGREE:
            raise ConfigError(f"degree cap is {MAX_DEGREE}, got degree {arr.size}")
        if np.any(arr < 0):
            raise ConfigError("degree coefficients must be nonnegative")
        if abs(arr.sum() - 1.0) > _NORM_TOL:
            raise ConfigError(f"degree coefficients must sum to 1, got {arr.sum()!r}")
        if arr.size < 2 or not np.any(arr[1:] > 0):
            raise ConfigError("need at least one positive coefficient of degree >= 2")

    @property
    def max_degree(self) -> int:
        return self.coeffs.size

    def _check_domain(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(y < -_DOMAIN_TOL) or np.any(y > 1.0 + _DOMAIN_TOL):
            raise ConfigError(f"argument outside [0, 1]: {y!r}")
        return np.clip(y, 0.0, 1.0)

    def __call__(self, y):
        """Evaluate p(y) for scalar or array y in [0, 1]."""
        y = self._check_domain(y)
        out = np.polynomial.polynomial.polyval(y, self.coeffs)
        return float(out) if np.isscalar(out) or out.ndim == 0 else out

    def derivative(self, y):
        """Evaluate p'(y) = sum_d (d-1) c_d y^(d-2)."""
        y = self._check_domain(y)
        dcoef = self.coeffs[1:] * np.arange(1, self.coeffs.size)
        out = np.polynomial.polynomial.polyval(y, dcoef)
        return float(out) if np.isscalar(out) or out.ndim == 0 else out

    def integral_01(self) -> float:
        """Integral of p over [0, 1]; 1 / p.integral_01() is the node normalizer."""
        return float(np.sum(self.coeffs / np.arange(1, self.coeffs.size + 1)))

    def invert(self, t):
        """Solve p(y) = t on [0, 1] by bisection to 1e-12.

        Admissible polynomials are nondecreasing on [0, 1]; targets below
        p(0) clamp to 0 and targets above p(1) clamp to 1.
        """
        t_arr = self._check_domain(t)
        scalar = np.isscalar(t) or np.ndim(t) == 0
        t_arr = np.atleast_1d(t_arr)
        lo = np.zeros_like(t_arr)
        hi = np.ones_like(t_arr)
        for _ in range(48):  # 2**-48 < 1e-14
            mid = 0.5 * (lo + hi)
            below = np.polynomial.polynomial.polyval(mid, self.coeffs) < t_arr
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out = 0.5 * (lo + hi)
        # exact clamping at the ends; p(1) = 1 and p(0) = coeffs[0]
        out = np.where(t_arr >= 1.0, 1.0, out)
        out = np.where(t_arr <= self.coeffs[0], 0.0, out)
        return float(out[0]) if scalar else out


def _node_perspective(poly: DegreePolynomial) -> np.ndarray:
    """Node-perspective coefficients N_d of N(y) = sum_d N_d y^d with N(1) = 1."""
    degs = np.arange(1, poly.coeffs.size + 1)
    node = poly.coeffs / degs
    return node / node.sum()


@dataclass(frozen=True)
class Ensemble:
    """LDPC(lambda, rho) ensemble with derived node-perspective polynomials."""

    lam: DegreePolynomial
    rho: DegreePolynomial
    lam_node: np.ndarray = field(init=False, repr=False)
    rho_node: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        ln = _node_perspective(self.lam)
        rn = _node_perspective(self.rho)
        ln.flags.writeable = False
        rn.flags.writeable = False
        object.__setattr__(self, "lam_node", ln)
        object.__setattr__(self, "rho_node", rn)

    @property
    def lprime1(self) -> float:
        """L'(1): average variable-node degree."""
        return 1.0 / self.lam.integral_01()

    @property
    def rprime1(self) -> float:
        """R'(1): average check-node degree."""
        return 1.0 / self.rho.integral_01()

    def L(self, y):
        """Node-perspective L(y) = int_0^y lambda / int_0^1 lambda."""
        y = np.asarray(y, dtype=float)
        out = np.polynomial.polynomial.polyval(y, np.concatenate(([0.0], self.lam_node)))
        return float(out) if out.ndim == 0 else out

    def R(self, y):
        """Node-perspective R(y) = int_0^y rho / int_0^1 rho."""
        y = np.asarray(y, dtype=float)
        out = np.polynomial.polynomial.polyval(y, np.concatenate(([0.0], self.rho_node)))
        return float(out) if out.ndim == 0 else out

    @property
    def is_regular(self) -> bool:
        return (
            np.count_nonzero(self.lam.coeffs) == 1
            and np.count_nonzero(self.rho.coeffs) == 1
        )

    def regular_degrees(self) -> tuple[int, int]:
        if not self.is_regular:
            raise ConfigError("ensemble is not (l, r)-regular")
        return self.lam.coeffs.size, self.rho.coeffs.size

    def spec_string(self) -> str:
        """Canonical parseable form of this ensemble."""
        if self.is_regular:
            ell, r = self.regular_degrees()
            return f"regular:{ell},{r}"
        return "lambda:%s;rho:%s" % (_poly_string(self.lam), _poly_string(self.rho))


def regular(ell: int, r: int) -> Ensemble:
    """(ell, r)-regular ensemble: lambda(y) = y^(ell-1), rho(y) = y^(r-1)."""
    if int(ell) != ell or int(r) != r or ell < 2 or r < 2:
        raise ConfigError("regular ensemble needs integer degrees ell >= 2 and r >= 2")
    lam = np.zeros(int(ell))
    lam[-1] = 1.0
    rho = np.zeros(int(r))
    rho[-1] = 1.0
    return Ensemble(DegreePolynomial(lam), DegreePolynomial(rho))


def _poly_string(poly: DegreePolynomial) -> str:
    terms = []
    for k, c in enumerate(poly.coeffs):
        if c > 0:
            terms.append(("x%d" % k) if c == 1.0 else ("%gx%d" % (c, k)))
    return "+".join(terms)


def _parse_poly(text: str) -> DegreePolynomial:
    coeffs: dict[int, float] = {}
    for term in text.split("+"):
        term = term.strip()
        if not term:
            raise ConfigError(f"empty term in polynomial {text!r}")
        if "x" not in term:
            raise ConfigError(f"term {term!r} must contain an exponent marker 'x'")
        c_str, _, e_str = term.partition("x")
        try:
            c = float(c_str) if c_str else 1.0
            e = int(e_str)
        except ValueError as exc:
            raise ConfigError(f"cannot parse polynomial term {term!r}") from exc
        if e < 0:
            raise ConfigError(f"negative exponent in {term!r}")
        coeffs[e] = coeffs.get(e, 0.0) + c
    arr = np.zeros(max(coeffs) + 1)
    for e, c in coeffs.items():
        arr[e] = c
    total = arr.sum()
    if abs(total - 1.0) > 1e-9:
        raise ConfigError(f"polynomial coefficients must sum to 1, got {total}")
    return DegreePolynomial(arr / total)


def parse_ensemble(text: str) -> Ensemble:
    """Parse "regular:3,6" or "lambda:0.5x1+0.5x2;rho:x5" (edge perspective).

    In the explicit form each term is ``<coefficient>x<exponent>`` where the
    exponent is the power of y, so degree = exponent + 1; a missing
    coefficient means 1.
    """
    text = text.strip()
    if text.startswith("regular:"):
        body = text[len("regular:"):]
        parts = body.split(",")
        if len(parts) != 2:
            raise ConfigError(f"regular ensemble spec needs two degrees: {text!r}")
        try:
            ell, r = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ConfigError(f"cannot parse degrees in {text!r}") from exc
        return regular(ell, r)
    if text.startswith("lambda:"):
        pieces = dict(
            piece.split(":", 1) for piece in text.split(";") if ":" in piece
        )
        if "lambda" not in pieces or "rho" not in pieces:
            raise ConfigError(f"ensemble spec needs lambda and rho parts: {text!r}")
        return Ensemble(_parse_poly(pieces["lambda"]), _parse_poly(pieces["rho"]))
    raise ConfigError(f"unrecognized ensemble spec {text!r}")
