"""Discretized weighted space of Fourier-coefficient functions.

Functions of the real Fourier variable ``m`` are sampled on a uniform
symmetric grid and weighted by ``(1+|m|)^mu * exp(beta*|m|)``; the weighted
sup is a norm and the space is an algebra under the line convolution
``(f*g)(m) = int f(m-m1) g(m1) dm1``, here approximated by composite
trapezoid quadrature with zero extension outside the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridMismatchError(ValueError):
    """Operands live on different grids or carry different weights."""


class OutOfStripError(ValueError):
    """Fourier-inverse evaluation point outside the strip |Im z| < beta."""


@dataclass(frozen=True)
class MGrid:
    """Uniform symmetric grid for the Fourier variable m."""

    m_max: float
    n_points: int

    def __post_init__(self):
        if self.m_max <= 0:
            raise ValueError("m_max must be positive")
        if self.n_points < 3 or self.n_points % 2 == 0:
            raise ValueError("n_points must be odd and >= 3")

    @property
    def spacing(self):
        return 2.0 * self.m_max / (self.n_points - 1)

    @property
    def nodes(self):
        return np.linspace(-self.m_max, self.m_max, self.n_points)

    @property
    def trapezoid_weights(self):
        w = np.ones(self.n_points)
        w[0] = w[-1] = 0.5
        return w * self.spacing


def default_grid(beta, n_points=513):
    """Grid wide enough that the exp(-beta|m|) tail mass is below e^-16."""
    return MGrid(m_max=16.0 / beta, n_points=n_points)


@dataclass(frozen=True)
class CoeffFn:
    """One coefficient function h(m) with its decay weights (beta, mu)."""

    grid: MGrid
    values: np.ndarray
    beta: float
    mu: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.grid.n_points,):
            raise ValueError("values must match the grid size")
        if not np.all(np.isfinite(vals.view(float))):
            raise ValueError("values must be finite at every node")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.mu <= 1:
            raise ValueError("mu must exceed 1")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def same_space(self, other: "CoeffFn") -> bool:
        return (
            self.grid == other.grid
            and self.beta == other.beta
            and self.mu == other.mu
        )

    @classmethod
    def from_callable(cls, fn, grid, beta, mu):
        return cls(grid, np.asarray([fn(m) for m in grid.nodes], dtype=complex), beta, mu)

    @classmethod
    def zero(cls, grid, beta, mu):
        return cls(grid, np.zeros(grid.n_points, dtype=complex), beta, mu)


@dataclass(frozen=True)
class NormParams:
    """Parameters of the Borel-plane weighted sup norm."""

    nu: float
    chi: object  # Fraction or float
    alpha: object
    kappa: int
    rho: float
    ray_max: float = 0.0  # optional ray samples up to this |tau| (0 = disc only)
    n_disc: int = 24
    n_ray: int = 16

    def __post_init__(self):
        if self.nu <= 0 or self.kappa < 1 or self.rho <= 0:
            raise ValueError("require nu > 0, kappa >= 1, rho > 0")


def _check_pair(f, g):
    if not f.same_space(g):
        raise GridMismatchError("operands must share grid and (beta, mu)")


def weight_profile(grid, beta, mu):
    m = np.abs(grid.nodes)
    return (1.0 + m) ** mu * np.exp(beta * m)


def norm_beta_mu(h):
    """Weighted sup norm: max over nodes of (1+|m|)^mu e^{beta|m|} |h(m)|."""
    return float(np.max(weight_profile(h.grid, h.beta, h.mu) * np.abs(h.values)))


def convolve_values(grid, f_vals, g_vals):
    """Trapezoid quadrature of (f*g)(m) on the grid, zero extension outside."""
    w = np.ones(grid.n_points)
    w[0] = w[-1] = 0.5
    full = np.convolve(f_vals, g_vals * w)
    n = grid.n_points
    # full[k] collects pairs with i+j=k; node m_i + m_j - (-2 m_max) = k*h,
    # so the physical result at m_i sits at k = i + (n-1)//2 ... symmetric slice
    half = (n - 1) // 2
    return full[half : half + n] * grid.spacing


def convolve(f, g):
    """Algebra product of two coefficient functions."""
    _check_pair(f, g)
    return CoeffFn(f.grid, convolve_values(f.grid, f.values, g.values), f.beta, f.mu)


def fourier_inverse(f, z):
    """(2 pi)^{-1/2} * trapezoid of f(m) e^{izm} over the grid.

    Valid on the strip |Im z| < beta where the integrand still decays.
    """
    if abs(complex(z).imag) >= f.beta:
        raise OutOfStripError(f"|Im z| = {abs(complex(z).imag)} >= beta = {f.beta}")
    kernel = np.exp(1j * complex(z) * f.grid.nodes)
    return complex(np.sum(f.values * kernel * f.grid.trapezoid_weights) / np.sqrt(2.0 * np.pi))


def tau_samples(params, direction=0.0, eps=1.0):
    """Finite sample set standing in for the closed disc (plus optional ray).

    The weight peaks where |tau| is a small multiple of |eps|^{chi+alpha},
    so radii are geometric from two decades below that scale up to the disc
    radius (where the weight has long since underflowed anyway).
    """
    scale = abs(complex(eps)) ** float(params.chi + params.alpha)
    # beyond x ~ (80/nu)^{1/kappa} the weight is ~1e-30 of its peak
    x_cap = (80.0 / params.nu) ** (1.0 / params.kappa)
    r_hi = min(params.rho, scale * x_cap) if scale * 0.01 < params.rho else params.rho
    r_lo = min(scale * 0.01, r_hi / 4.0)
    radii = np.geomspace(r_lo, r_hi, params.n_disc)
    angles = np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False)
    disc = (radii[:, None] * np.exp(1j * angles)[None, :]).ravel()
    if params.ray_max > params.rho:
        ray = np.linspace(params.rho, params.ray_max, params.n_ray) * np.exp(1j * direction)
        return np.concatenate([disc, ray])
    return disc


def f_norm_weight(tau_abs, params, eps):
    """Scalar weight (1+x^{2 kappa})/x * exp(-nu x^kappa), x = |tau/eps^{chi+alpha}|."""
    if eps == 0:
        raise ValueError("eps must be nonzero")
    scale = abs(complex(eps)) ** float(params.chi + params.alpha)
    x = np.asarray(tau_abs, dtype=float) / scale
    return (1.0 + x ** (2 * params.kappa)) / x * np.exp(-params.nu * x**params.kappa)


def f_norm(evaluate, grid, beta, mu, params, eps, direction=0.0):
    """Sampled lower estimate of the Borel-plane weighted norm.

    ``evaluate(tau) -> values over the m grid`` supplies |omega(tau, m)|;
    tau = 0 is excluded (the weight is singular there).  The result is the
    max over the finite tau sample set of the fully weighted sup over m.
    """
    taus = tau_samples(params, direction, eps)
    wm = weight_profile(grid, beta, mu)
    wt = f_norm_weight(np.abs(taus), params, eps)
    best = 0.0
    for t, w in zip(taus, wt):
        vals = np.abs(np.asarray(evaluate(t)))
        best = max(best, w * float(np.max(wm * vals)))
    return best


def save_csv(h, path):
    """Write "m,re,im" rows plus a sidecar parameter block at <path>.meta."""
    with open(path, "w") as fh:
        fh.write("m,re,im\n")
        for m, v in zip(h.grid.nodes, h.values):
            fh.write(f"{m:.17g},{v.real:.17g},{v.imag:.17g}\n")
    with open(str(path) + ".meta", "w") as fh:
        fh.write("[coefffn]\n")
        fh.write(f"beta={h.beta!r}\nmu={h.mu!r}\n")
        fh.write(f"m_max={h.grid.m_max!r}\nn_points={h.grid.n_points}\n")


def load_csv(path):
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    meta = {}
    with open(str(path) + ".meta") as fh:
        for line in fh:
            line = line.strip()
            if "=" in line:
                key, val = line.split("=", 1)
                meta[key] = val
    grid = MGrid(m_max=float(meta["m_max"]), n_points=int(meta["n_points"]))
    return CoeffFn(grid, rows[:, 1] + 1j * rows[:, 2], float(meta["beta"]), float(meta["mu"]))
