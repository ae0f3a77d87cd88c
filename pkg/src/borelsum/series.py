"""Truncated power series with complex or coefficient-function coefficients.

A :class:`TruncSeries` stores coefficients for degrees ``min_degree..order``;
degrees beyond ``order`` are *unknown*, not zero (``order=None`` marks exact
polynomials).  Negative ``min_degree`` is allowed, giving finite Laurent
expansions.  Binary operations propagate the least order that both operands
actually determine, so no fabricated high-order zeros are ever reported.

:class:`ESeries` is the same object with one coefficient function of the
Fourier variable per degree; its convolution product replaces coefficient
multiplication by the line convolution of :mod:`borelsum.coeffspace`.

The level-``k`` operations follow the Borel-plane calculus: the transform
divides the degree-``n`` coefficient by Gamma(n/k), and the convolution of
two transformed series carries the weight Gamma(a/k) Gamma(b/k) / Gamma((a+b)/k)
on each coefficient pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coeffspace import GridMismatchError, convolve_values
from .gammaf import gamma, lgamma, star_coefficient


class DegreeError(ValueError):
    """A constant (or lower) term is present where a positive-degree series is required."""


def _min_order(*pairs):
    """Reachable order of a product-like op from (order, other_min_degree) pairs."""
    vals = [o + md for o, md in pairs if o is not None]
    return min(vals) if vals else None


@dataclass(frozen=True)
class TruncSeries:
    """Series sum c_n T^n for n = min_degree..order, complex coefficients."""

    min_degree: int
    coeffs: np.ndarray
    order: int | None = None  # None: exact polynomial

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1:
            raise ValueError("coeffs must be one-dimensional")
        if self.order is not None and self.order != self.min_degree + len(c) - 1:
            raise ValueError("order inconsistent with coefficient count")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    # -- construction helpers -------------------------------------------------

    @classmethod
    def zero(cls, order=None):
        if order is None:
            return cls(0, np.zeros(1, dtype=complex), None)
        return cls(order, np.zeros(1, dtype=complex), order)

    @classmethod
    def monomial(cls, coeff, degree, order=None):
        return cls.from_dict({degree: coeff}, order)

    @classmethod
    def from_dict(cls, d, order=None):
        d = {deg: val for deg, val in d.items() if order is None or deg <= order}
        if not d:
            return cls.zero(order)
        lo = min(d)
        hi = max(d) if order is None else order
        c = np.zeros(hi - lo + 1, dtype=complex)
        for deg, val in d.items():
            c[deg - lo] = val
        return cls(lo, c, order)

    @classmethod
    def one(cls, order=None):
        return cls(0, np.ones(1, dtype=complex), order)

    # -- basic queries ---------------------------------------------------------

    def __getitem__(self, degree):
        i = degree - self.min_degree
        if 0 <= i < len(self.coeffs):
            return complex(self.coeffs[i])
        if self.order is not None and degree > self.order:
            raise KeyError(f"degree {degree} beyond truncation order {self.order}")
        return 0j

    @property
    def top_degree(self):
        return self.min_degree + len(self.coeffs) - 1

    def degrees(self):
        return range(self.min_degree, self.top_degree + 1)

    def effective_min_degree(self, tol=0.0):
        """Lowest degree whose coefficient exceeds tol in modulus."""
        mags = np.abs(self.coeffs)
        idx = np.nonzero(mags > tol)[0]
        return None if len(idx) == 0 else self.min_degree + int(idx[0])

    def max_abs(self):
        return float(np.max(np.abs(self.coeffs))) if len(self.coeffs) else 0.0

    def is_zero(self, tol=0.0):
        return self.max_abs() <= tol

    def _dense(self, lo, hi):
        out = np.zeros(hi - lo + 1, dtype=complex)
        a = max(lo, self.min_degree)
        b = min(hi, self.top_degree)
        if a <= b:
            out[a - lo : b - lo + 1] = self.coeffs[a - self.min_degree : b - self.min_degree + 1]
        return out

    def trimmed(self, tol=0.0):
        """Drop leading/trailing coefficients that are exactly (or below tol) zero."""
        mags = np.abs(self.coeffs)
        idx = np.nonzero(mags > tol)[0]
        if len(idx) == 0:
            return TruncSeries.zero(self.order)
        lo, hi = int(idx[0]), int(idx[-1])
        if self.order is not None:
            hi = len(self.coeffs) - 1  # keep the full known range
        return TruncSeries(
            self.min_degree + lo,
            self.coeffs[lo : hi + 1],
            self.order,
        )

    def truncate(self, order):
        """Restrict knowledge to degrees <= order."""
        if self.order is not None and self.order <= order:
            return self
        lo = min(self.min_degree, order)
        return TruncSeries(lo, self._dense(lo, order), order)

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, TruncSeries):
            return NotImplemented
        orders = [o for o in (self.order, other.order) if o is not None]
        order = min(orders) if orders else None
        lo = min(self.min_degree, other.min_degree)
        if order is None:
            hi = max(self.top_degree, other.top_degree)
        else:
            lo = min(lo, order)
            hi = order
        c = self._dense(lo, hi) + other._dense(lo, hi)
        return TruncSeries(lo, c, order)

    def __neg__(self):
        return TruncSeries(self.min_degree, -self.coeffs, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        if isinstance(scalar, TruncSeries):
            return cauchy_mul(self, scalar)
        return TruncSeries(self.min_degree, self.coeffs * complex(scalar), self.order)

    __rmul__ = __mul__

    def shift(self, k):
        """Multiply by T^k."""
        return TruncSeries(self.min_degree + k, self.coeffs, None if self.order is None else self.order + k)

    def scale_coeffs(self, factor):
        """Multiply the degree-n coefficient by factor^n (evaluation at factor*T)."""
        degs = np.arange(self.min_degree, self.top_degree + 1)
        f = complex(factor) ** degs if self.min_degree >= 0 else np.array(
            [complex(factor) ** int(d) for d in degs]
        )
        return TruncSeries(self.min_degree, self.coeffs * f, self.order)

    def differentiate(self):
        """d/dT; degree knowledge drops by one."""
        degs = np.arange(self.min_degree, self.top_degree + 1, dtype=float)
        c = self.coeffs * degs
        order = None if self.order is None else self.order - 1
        return TruncSeries(self.min_degree - 1, c, order).trimmed()

    def evaluate(self, t):
        t = complex(t)
        degs = np.arange(self.min_degree, self.top_degree + 1)
        return complex(np.sum(self.coeffs * t**degs))

    def conj_coeffs(self):
        return TruncSeries(self.min_degree, np.conj(self.coeffs), self.order)


def cauchy_mul(f: TruncSeries, g: TruncSeries) -> TruncSeries:
    """Cauchy product with reachable-order bookkeeping."""
    order = _min_order((f.order, g.min_degree), (g.order, f.min_degree))
    lo = f.min_degree + g.min_degree
    c = np.convolve(f.coeffs, g.coeffs)
    out = TruncSeries(lo, c, None)
    if order is not None:
        out = out.truncate(order)
    return out


def add(*series):
    acc = series[0]
    for s in series[1:]:
        acc = acc + s
    return acc


def power(f: TruncSeries, n: int) -> TruncSeries:
    out = TruncSeries.one()
    for _ in range(n):
        out = cauchy_mul(out, f)
    return out


def recip_one_plus(u: TruncSeries, order: int) -> TruncSeries:
    """(1+u)^{-1} mod T^{order+1}; u must have positive minimum degree."""
    if u.effective_min_degree() is not None and u.effective_min_degree() < 1:
        raise DegreeError("recip_one_plus needs min_degree >= 1")
    out = np.zeros(order + 1, dtype=complex)
    out[0] = 1.0
    udense = u._dense(0, order)
    for n in range(1, order + 1):
        # sum_{j=1..n} u_j * out_{n-j}
        out[n] = -np.dot(udense[1 : n + 1], out[n - 1 :: -1])
    return TruncSeries(0, out, order)


def sqrt_one_plus(u: TruncSeries, order: int) -> TruncSeries:
    """(1+u)^{1/2} mod T^{order+1}, branch with constant term +1."""
    if u.effective_min_degree() is not None and u.effective_min_degree() < 1:
        raise DegreeError("sqrt_one_plus needs min_degree >= 1")
    s = np.zeros(order + 1, dtype=complex)
    s[0] = 1.0
    udense = u._dense(0, order)
    for n in range(1, order + 1):
        # square both sides: u_n = 2 s_n + sum_{j=1..n-1} s_j s_{n-j}
        inner = np.dot(s[1:n], s[n - 1 : 0 : -1]) if n >= 2 else 0.0
        s[n] = 0.5 * (udense[n] - inner)
    return TruncSeries(0, s, order)


# -- Borel-plane operations -------------------------------------------------


def borel_mk(f, k):
    """Divide the degree-n coefficient by Gamma(n/k); needs min_degree >= 1."""
    if isinstance(f, ESeries):
        return f.map_degrees(lambda n, row: row / gamma(n / float(k)), need_positive=True)
    eff = f.effective_min_degree()
    if eff is not None and eff < 1:
        raise DegreeError("Borel transform needs a series without constant term")
    f = f.trimmed()
    if f.effective_min_degree() is None:
        return TruncSeries(1, np.zeros(1, dtype=complex), None) if f.order is None else f
    w = np.array([1.0 / gamma(n / float(k)) for n in f.degrees()])
    return TruncSeries(f.min_degree, f.coeffs * w, f.order)


def inverse_borel(f, k):
    """Multiply the degree-n coefficient by Gamma(n/k)."""
    if isinstance(f, ESeries):
        return f.map_degrees(lambda n, row: row * gamma(n / float(k)), need_positive=True)
    eff = f.effective_min_degree()
    if eff is not None and eff < 1:
        raise DegreeError("inverse Borel needs a series without constant term")
    f = f.trimmed()
    if f.effective_min_degree() is None:
        return f
    w = np.array([gamma(n / float(k)) for n in f.degrees()])
    return TruncSeries(f.min_degree, f.coeffs * w, f.order)


def _star_weights(degs_a, degs_b, k):
    la = np.array([lgamma(a / float(k)) for a in degs_a])
    lb = np.array([lgamma(b / float(k)) for b in degs_b])
    lab = np.array(
        [[lgamma((a + b) / float(k)) for b in degs_b] for a in degs_a]
    )
    return np.exp(la[:, None] + lb[None, :] - lab)


def _check_star_args(g, f):
    for s in (g, f):
        if s.min_degree < 1:
            raise DegreeError("level-k convolution needs min_degree >= 1 on both factors")


def star_k(g: TruncSeries, f: TruncSeries, k) -> TruncSeries:
    """Level-k convolution of scalar series: the Borel image of the Cauchy product."""
    g = g.trimmed()
    f = f.trimmed()
    _check_star_args(g, f)
    order = _min_order((g.order, f.min_degree), (f.order, g.min_degree))
    w = _star_weights(list(g.degrees()), list(f.degrees()), k)
    c = np.zeros(g.top_degree + f.top_degree - g.min_degree - f.min_degree + 1, dtype=complex)
    for i, a in enumerate(g.degrees()):
        c[i : i + len(f.coeffs)] += g.coeffs[i] * w[i] * f.coeffs
    out = TruncSeries(g.min_degree + f.min_degree, c, None)
    return out if order is None else out.truncate(order)


def star_integral(g, f, k, tau, n_quad=4000):
    """Direct quadrature of the defining integral of the level-k convolution.

    tau^k * int_0^{tau^k} g((tau^k - s)^{1/k}) f(s^{1/k}) ds / ((tau^k - s) s),
    along the straight segment s = tau^k x.  The endpoint singularities
    x^{1/k-1} and (1-x)^{1/k-1} are removed by the power substitution
    x = w^k on each half, so the midpoint rule converges fast.  Used as an
    independent oracle for the coefficient rule.
    """
    tk = complex(tau) ** k
    t_abs = tk ** (1.0 / k)  # principal root of tau^k, consistent on both factors

    def integrand(x):
        gs = np.array([g.evaluate(t_abs * (1.0 - xi) ** (1.0 / k)) for xi in x])
        fs = np.array([f.evaluate(t_abs * xi ** (1.0 / k)) for xi in x])
        return gs * fs / ((1.0 - x) * x)

    # s = tau^k x turns the tau^k prefactor and the 1/s, 1/(tau^k - s) weights
    # into a parameter-free integral over x in (0,1)
    w = (np.arange(n_quad) + 0.5) / n_quad * 0.5 ** (1.0 / k)
    jac = k * w ** (k - 1) * 0.5 ** (1.0 / k) / n_quad
    half_lo = np.sum(integrand(w**k) * jac)
    half_hi = np.sum(integrand(1.0 - w**k) * jac)
    return half_lo + half_hi


# -- coefficient-function-valued series --------------------------------------


@dataclass(frozen=True)
class ESeries:
    """Series with one coefficient function of m per degree (rows of ``table``)."""

    min_degree: int
    table: np.ndarray  # shape (n_degrees, n_m)
    grid: object
    beta: float
    mu: float
    order: int | None = None

    def __post_init__(self):
        t = np.asarray(self.table, dtype=complex)
        if t.ndim != 2 or t.shape[1] != self.grid.n_points:
            raise ValueError("table must be (n_degrees, n_points)")
        if self.order is not None and self.order != self.min_degree + t.shape[0] - 1:
            raise ValueError("order inconsistent with table")
        t.flags.writeable = False
        object.__setattr__(self, "table", t)

    @classmethod
    def zero(cls, grid, beta, mu, min_degree=1, order=None):
        rows = 1 if order is None else order - min_degree + 1
        return cls(min_degree, np.zeros((rows, grid.n_points), dtype=complex), grid, beta, mu, order)

    @classmethod
    def monomial(cls, coeff_fn, degree, order=None):
        rows = 1 if order is None else order - degree + 1
        t = np.zeros((rows, coeff_fn.grid.n_points), dtype=complex)
        t[0] = coeff_fn.values
        return cls(degree, t, coeff_fn.grid, coeff_fn.beta, coeff_fn.mu, order)

    @property
    def top_degree(self):
        return self.min_degree + self.table.shape[0] - 1

    def degrees(self):
        return range(self.min_degree, self.top_degree + 1)

    def row(self, degree):
        i = degree - self.min_degree
        if 0 <= i < self.table.shape[0]:
            return self.table[i]
        return np.zeros(self.grid.n_points, dtype=complex)

    def max_abs(self):
        return float(np.max(np.abs(self.table))) if self.table.size else 0.0

    def same_space(self, other):
        return self.grid == other.grid and self.beta == other.beta and self.mu == other.mu

    def map_degrees(self, fn, need_positive=False):
        if need_positive and self.min_degree < 1:
            raise DegreeError("operation needs min_degree >= 1")
        rows = np.array([fn(n, self.table[n - self.min_degree]) for n in self.degrees()])
        return ESeries(self.min_degree, rows, self.grid, self.beta, self.mu, self.order)

    def _dense(self, lo, hi):
        out = np.zeros((hi - lo + 1, self.grid.n_points), dtype=complex)
        a, b = max(lo, self.min_degree), min(hi, self.top_degree)
        if a <= b:
            out[a - lo : b - lo + 1] = self.table[a - self.min_degree : b - self.min_degree + 1]
        return out

    def truncate(self, order):
        if self.order is not None and self.order <= order:
            return self
        lo = min(self.min_degree, order)
        return ESeries(lo, self._dense(lo, order), self.grid, self.beta, self.mu, order)

    def __add__(self, other):
        if not self.same_space(other):
            raise GridMismatchError("E-series operands must share space")
        orders = [o for o in (self.order, other.order) if o is not None]
        order = min(orders) if orders else None
        lo = min(self.min_degree, other.min_degree)
        if order is None:
            hi = max(self.top_degree, other.top_degree)
        else:
            lo = min(lo, order)
            hi = order
        t = self._dense(lo, hi) + other._dense(lo, hi)
        return ESeries(lo, t, self.grid, self.beta, self.mu, order)

    def __neg__(self):
        return ESeries(self.min_degree, -self.table, self.grid, self.beta, self.mu, self.order)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, scalar):
        return ESeries(self.min_degree, self.table * complex(scalar), self.grid, self.beta, self.mu, self.order)

    def scale_coeffs(self, factor):
        f = np.array([complex(factor) ** int(d) for d in self.degrees()])
        return ESeries(self.min_degree, self.table * f[:, None], self.grid, self.beta, self.mu, self.order)

    def shift(self, k):
        return ESeries(
            self.min_degree + k,
            self.table,
            self.grid,
            self.beta,
            self.mu,
            None if self.order is None else self.order + k,
        )

    def evaluate(self, tau):
        """Row vector over m of sum_n c_n(m) tau^n."""
        degs = np.arange(self.min_degree, self.top_degree + 1)
        p = complex(tau) ** degs
        return p @ self.table

    def profile_mul(self, values):
        """Multiply every degree row pointwise by a fixed function of m."""
        return ESeries(self.min_degree, self.table * np.asarray(values)[None, :], self.grid, self.beta, self.mu, self.order)


def cauchy_mul_scalar_E(g: TruncSeries, f: ESeries) -> ESeries:
    order = _min_order((g.order, f.min_degree), (f.order, g.min_degree))
    lo = g.min_degree + f.min_degree
    n_rows = len(g.coeffs) + f.table.shape[0] - 1
    t = np.zeros((n_rows, f.grid.n_points), dtype=complex)
    for i in range(len(g.coeffs)):
        t[i : i + f.table.shape[0]] += g.coeffs[i] * f.table
    out = ESeries(lo, t, f.grid, f.beta, f.mu, None)
    return out if order is None else out.truncate(order)


def cauchy_mul_E(f: ESeries, g: ESeries) -> ESeries:
    """Cauchy product in the degree variable, line convolution in m."""
    if not f.same_space(g):
        raise GridMismatchError("E-series operands must share space")
    order = _min_order((f.order, g.min_degree), (g.order, f.min_degree))
    lo = f.min_degree + g.min_degree
    n_rows = f.table.shape[0] + g.table.shape[0] - 1
    t = np.zeros((n_rows, f.grid.n_points), dtype=complex)
    for i in range(f.table.shape[0]):
        for j in range(g.table.shape[0]):
            t[i + j] += convolve_values(f.grid, f.table[i], g.table[j])
    out = ESeries(lo, t, f.grid, f.beta, f.mu, None)
    return out if order is None else out.truncate(order)


def star_k_scalar_E(g: TruncSeries, f: ESeries, k) -> ESeries:
    """Level-k convolution of a scalar series against an E-valued one."""
    g = g.trimmed()
    if g.min_degree < 1 or f.min_degree < 1:
        raise DegreeError("level-k convolution needs min_degree >= 1 on both factors")
    order = _min_order((g.order, f.min_degree), (f.order, g.min_degree))
    w = _star_weights(list(g.degrees()), list(f.degrees()), k)
    n_rows = len(g.coeffs) + f.table.shape[0] - 1
    t = np.zeros((n_rows, f.grid.n_points), dtype=complex)
    for i in range(len(g.coeffs)):
        t[i : i + f.table.shape[0]] += (g.coeffs[i] * w[i])[:, None] * f.table
    out = ESeries(g.min_degree + f.min_degree, t, f.grid, f.beta, f.mu, None)
    return out if order is None else out.truncate(order)


def star_k_E(g: ESeries, f: ESeries, k) -> ESeries:
    """Level-k convolution of two E-valued series (m-convolution on coefficients)."""
    if not g.same_space(f):
        raise GridMismatchError("E-series operands must share space")
    if g.min_degree < 1 or f.min_degree < 1:
        raise DegreeError("level-k convolution needs min_degree >= 1 on both factors")
    order = _min_order((g.order, f.min_degree), (f.order, g.min_degree))
    w = _star_weights(list(g.degrees()), list(f.degrees()), k)
    n_rows = g.table.shape[0] + f.table.shape[0] - 1
    t = np.zeros((n_rows, f.grid.n_points), dtype=complex)
    for i in range(g.table.shape[0]):
        for j in range(f.table.shape[0]):
            t[i + j] += w[i, j] * convolve_values(f.grid, g.table[i], f.table[j])
    out = ESeries(g.min_degree + f.min_degree, t, f.grid, f.beta, f.mu, None)
    return out if order is None else out.truncate(order)


# -- formal identity checks ---------------------------------------------------


def check_formal_identities(f: TruncSeries, k, m_shift=2, g: TruncSeries | None = None, rel_tol=1e-12):
    """Coefficientwise verification of the three Borel-transform identities.

    (i)   B(T^{k+1} f')      == k tau^k B(f)
    (ii)  B(T^m f)           == tau^m/Gamma(m/k) convolved (level k) with B(f)
    (iii) B(Cauchy(f, g))    == B(f) star_k B(g)

    Returns a dict of relative errors; all must be below ``rel_tol``.
    """
    if f.effective_min_degree() is None or f.effective_min_degree() < 1:
        raise DegreeError("identities need min_degree >= 1")
    g = f if g is None else g
    report = {}

    lhs1 = borel_mk(cauchy_mul(TruncSeries.monomial(1.0, k + 1), f.differentiate()), k)
    rhs1 = borel_mk(f, k).shift(k) * float(k)
    report["derivation"] = _rel_diff(lhs1, rhs1)

    lhs2 = borel_mk(f.shift(m_shift), k)
    rhs2 = star_k(
        TruncSeries.monomial(1.0 / gamma(m_shift / float(k)), m_shift),
        borel_mk(f, k),
        k,
    )
    report["monomial_shift"] = _rel_diff(lhs2, rhs2)

    lhs3 = borel_mk(cauchy_mul(f, g), k)
    rhs3 = star_k(borel_mk(f, k), borel_mk(g, k), k)
    report["product"] = _rel_diff(lhs3, rhs3)

    report["max"] = max(report.values())
    report["pass"] = report["max"] < rel_tol
    return report


def _rel_diff(a: TruncSeries, b: TruncSeries):
    lo = min(a.min_degree, b.min_degree)
    hi_known = [s.order for s in (a, b) if s.order is not None]
    hi = min(hi_known) if hi_known else max(a.top_degree, b.top_degree)
    da, db = a._dense(lo, hi), b._dense(lo, hi)
    scale = max(np.max(np.abs(da)), np.max(np.abs(db)), 1e-300)
    return float(np.max(np.abs(da - db)) / scale)
