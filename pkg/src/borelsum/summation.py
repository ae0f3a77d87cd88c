"""Sector geometry, Laplace-Fourier summation, solution assembly, and the
verification suite (formal residuals, cocycle flatness, order estimation).

The Laplace integral is taken along rays cut at a finite radius inside the
trust region of the truncated Borel solution.  Cutting both rays of a
sector pair at one common radius makes their difference exactly the
connecting-arc contribution, which decays like exp(-M |eps|^{-s}) with s
the family's order - the quantity the flatness fit recovers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .coeffspace import CoeffFn, MGrid, fourier_inverse, weight_profile
from .borelsolve import BorelSolution, build_family_operator, solve_recursive
from .gammaf import gamma, lgamma
from .problem import ParameterPlan, ProblemSpec, base_exponent, p_upper_terms, p_zero_series
from .series import ESeries, TruncSeries, cauchy_mul, cauchy_mul_E, cauchy_mul_scalar_E
from .slowcurve import branch as slow_branch, build_abc


class GeometryError(ValueError):
    pass


class TrustRadiusError(ValueError):
    pass


def _wrap(angle):
    return float(np.mod(angle + np.pi, 2.0 * np.pi) - np.pi)


def _angle_in(angle, center, opening):
    return abs(_wrap(angle - center)) < opening / 2.0


@dataclass(frozen=True)
class Sector:
    direction: float
    opening: float
    radius: float | None = None  # None: unbounded

    def __post_init__(self):
        if not (0.0 < self.opening < 2.0 * np.pi):
            raise GeometryError("opening must lie in (0, 2 pi)")

    def contains(self, z):
        z = complex(z)
        if z == 0:
            return False
        if self.radius is not None and abs(z) >= self.radius:
            return False
        return _angle_in(np.angle(z), self.direction, self.opening)

    def contains_angle(self, angle):
        return _angle_in(angle, self.direction, self.opening)


@dataclass(frozen=True)
class GoodCovering:
    sectors: tuple[Sector, ...]
    order: Fraction  # the Gevrey order the covering is sized for

    def __post_init__(self):
        errors = covering_violations(self.sectors, self.order)
        if errors:
            raise GeometryError("; ".join(errors))

    @property
    def count(self):
        return len(self.sectors)

    def overlap_direction(self, p):
        a = self.sectors[p]
        b = self.sectors[(p + 1) % self.count]
        return _wrap(a.direction + _wrap(b.direction - a.direction) / 2.0)


def covering_violations(sectors, order, n_grid=14400):
    """Machine check of the covering axioms; returns a list of complaints."""
    errs = []
    count = len(sectors)
    if count < 2:
        return ["need at least two sectors"]
    for i, s in enumerate(sectors):
        if s.opening <= float(np.pi / float(order)):
            errs.append(f"sector {i} opening {s.opening:.4f} <= pi/order")
    grid = np.linspace(-np.pi, np.pi, n_grid, endpoint=False)
    cover = np.zeros((count, n_grid), dtype=bool)
    for i, s in enumerate(sectors):
        cover[i] = np.abs(_wrap_array(grid - s.direction)) < s.opening / 2.0
    hits = cover.sum(axis=0)
    if np.any(hits == 0):
        errs.append("union leaves gaps on the circle")
    if np.any(hits >= 3):
        errs.append("three sectors share a direction")
    for p in range(count):
        if not np.any(cover[p] & cover[(p + 1) % count]):
            errs.append(f"sectors {p} and {(p + 1) % count} do not overlap")
    return errs


def _wrap_array(a):
    return np.mod(a + np.pi, 2.0 * np.pi) - np.pi


def build_good_covering(order, count, eps0=1.0, slack=0.3, phase=0.0) -> GoodCovering:
    """Uniform covering: directions phase + 2 pi p / count, common opening.

    The opening must exceed both the neighbor spacing (overlap/coverage) and
    pi/order (summability), and stay below twice the spacing (no triples).
    """
    order = Fraction(order)
    if count < 2:
        raise GeometryError("need at least two sectors")
    spacing = 2.0 * np.pi / count
    lo = max(spacing, float(np.pi / float(order)))
    hi = 2.0 * spacing
    if lo >= hi:
        max_count = int(4.0 * float(order)) - 1
        raise GeometryError(
            f"count {count} infeasible for order {order}; feasible counts are 2..{max_count}"
        )
    opening = lo * (1.0 - slack) + hi * slack if lo > spacing else spacing * (1.0 + slack)
    opening = min(opening, 0.999 * hi)
    sectors = tuple(
        Sector(_wrap(phase + spacing * p), opening, eps0) for p in range(count)
    )
    return GoodCovering(sectors, order)


@dataclass(frozen=True)
class AssociatedFamily:
    """Borel directions and the time sector attached to a covering."""

    covering: GoodCovering
    family: int
    t_sector: Sector
    theta: float                    # aperture of the Borel-plane image sectors
    directions: tuple[float, ...]   # one Laplace direction seed per sector
    admissibility: tuple            # one report per direction
    order_exponent: float           # chi + alpha

    def image_sector(self, p):
        return Sector(self.directions[p], self.theta)

    def check_containment(self, p, t, eps):
        """arg(eps^{chi+alpha} t) must fall in the p-th image sector."""
        angle = self.order_exponent * np.angle(complex(eps)) + np.angle(complex(t))
        return self.image_sector(p).contains_angle(angle)


def associate_family(
    spec, plan, family, covering, rho=0.25, t_aperture=0.06, t_radius=0.2,
):
    """Choose Borel directions and image sectors compatible with the covering.

    The direction for sector p is (chi+alpha) times its center plus one
    global offset, scanned so every direction clears the characteristic-root
    arguments as much as possible.  The image aperture must cover both the
    rescaled covering (containment of eps^{chi+alpha} t) and the summability
    floor pi/kappa, staying inside the root-free slack; if those demands
    cannot meet, the covering is too coarse for this family.
    """
    from .borelsolve import roots_q

    ordexp = float(plan.chi(family) + plan.alpha)
    kappa = plan.kappa(family)
    centers = [s.direction for s in covering.sectors]
    opening = max(s.opening for s in covering.sectors)

    # root arguments over a spread of m values
    grid, _, _ = spec.space
    m_probe = grid.nodes[:: max(1, grid.n_points // 17)]
    root_args = np.concatenate(
        [np.angle(roots_q(spec, plan, family, m)) for m in m_probe]
    )

    def clearance(d):
        return float(np.min(np.abs(_wrap_array(d - root_args))))

    # the directions are pinned to (chi+alpha) * center by the containment
    # requirement; only a tiny offset is admissible, so take them as is
    dirs = [_wrap(ordexp * c) for c in centers]
    clear_min = min(clearance(d) for d in dirs)
    if clear_min <= 1e-3:
        raise GeometryError("image directions collide with characteristic roots")

    theta_need = ordexp * opening + t_aperture + 0.05
    theta_max = np.pi / kappa + 1.6 * clear_min
    theta = max(np.pi / kappa + 0.01, theta_need)
    if theta > theta_max:
        raise GeometryError(
            f"image aperture {theta:.3f} exceeds the root-free budget {theta_max:.3f}; "
            "use a covering with more sectors or a thinner time sector"
        )

    from .borelsolve import sector_admissibility

    reports = tuple(
        sector_admissibility(spec, plan, family, d, rho, n_m=9, n_ray=16) for d in dirs
    )
    fam = AssociatedFamily(
        covering=covering,
        family=family,
        t_sector=Sector(0.0, t_aperture, t_radius),
        theta=theta,
        directions=tuple(dirs),
        admissibility=reports,
        order_exponent=ordexp,
    )
    # Def-5-style containment, machine-checked on a sample sweep
    for p, sector in enumerate(covering.sectors):
        for frac in (-0.45, 0.0, 0.45):
            for targ in (-t_aperture / 2 * 0.9, 0.0, t_aperture / 2 * 0.9):
                ang_eps = sector.direction + frac * sector.opening
                if not fam.image_sector(p).contains_angle(ordexp * ang_eps + targ):
                    raise GeometryError(
                        f"containment fails for sector {p}: eps angle {ang_eps:.3f}"
                    )
    return fam


def plan_geometry(
    spec, plan, family, count=None, eps0=1.0, t_aperture=0.06, t_radius=0.2, rho=0.25,
):
    """Search covering count and phase until the family's geometry closes.

    The rescaled image of sector p must fit a root-free aperture above the
    summability floor; rotating the covering moves every image direction
    relative to the characteristic root rays, so the phase is scanned (and
    the sector count grown) until the association succeeds.
    """
    order = plan.gevrey(family)
    counts = [count] if count else list(range(int(2 * float(order)) + 2, int(4 * float(order))))
    last_err = None
    for c in counts:
        for phase_step in range(40):
            phase = np.pi * phase_step / (40.0 * max(1, c // 2))
            try:
                cov = build_good_covering(order, c, eps0=eps0, slack=0.02, phase=phase)
                assoc = associate_family(
                    spec, plan, family, cov, rho=rho, t_aperture=t_aperture, t_radius=t_radius,
                )
                best_p, margin = best_overlap_pair(plan, family, assoc)
                if margin > 0.05:
                    return cov, assoc, best_p
            except GeometryError as exc:
                last_err = exc
    raise GeometryError(f"no feasible covering geometry found: {last_err}")


def pair_kernel_margins(plan, family, assoc, p, t_arg=0.0):
    """cos(kappa (gamma - arg T)) for the two overlap rays at the bisector."""
    cov = assoc.covering
    kappa = plan.kappa(family)
    phi = cov.overlap_direction(p)
    arg_T = assoc.order_exponent * phi + t_arg
    g_a = assoc.directions[p]
    g_b = assoc.directions[(p + 1) % cov.count]
    return (
        math.cos(kappa * _wrap(g_a - arg_T)),
        math.cos(kappa * _wrap(g_b - arg_T)),
    )


def best_overlap_pair(plan, family, assoc):
    """The consecutive pair whose two rays have the best joint kernel margin."""
    best_p, best_m = None, -2.0
    for p in range(assoc.covering.count):
        m = min(pair_kernel_margins(plan, family, assoc, p))
        if m > best_m:
            best_p, best_m = p, m
    if best_m <= 0.0:
        raise GeometryError("no overlap pair has decaying kernels on both rays")
    return best_p, best_m


def choose_gamma(T, borel_sector: Sector, k, min_cos=1e-3):
    """In-sector ray direction maximizing cos(k (gamma - arg T)).

    Candidates: the k-fold copies of arg T folded into the sector, plus the
    sector edges.  Errors when no ray achieves a positive kernel margin.
    """
    arg_t = float(np.angle(complex(T)))
    lo = borel_sector.direction - borel_sector.opening / 2.0
    hi = borel_sector.direction + borel_sector.opening / 2.0
    cands = [lo + 1e-9, hi - 1e-9, borel_sector.direction]
    for j in range(-k - 2, k + 3):
        g = arg_t + 2.0 * np.pi * j / k
        g = borel_sector.direction + _wrap(g - borel_sector.direction)
        if lo <= g <= hi:
            cands.append(g)
    best_g, best_c = None, -2.0
    for g in cands:
        c = math.cos(k * (g - arg_t))
        if c > best_c:
            best_g, best_c = g, c
    if best_c < min_cos:
        raise GeometryError(
            f"no admissible ray: max cos(k(gamma - arg T)) = {best_c:.4f} in sector"
        )
    return best_g, best_c


def laplace_mk(sol: BorelSolution, T, gamma_dir, r_max=None, n_quad=1500, tail_tol=1e-12, trust_tol=1e-10, allow_untrusted=False):
    """Ray Laplace transform of the Borel solution, one value per m node.

    k int_0^R omega(r e^{i gamma}, m) exp(-(r e^{i gamma}/T)^k) dr / r,
    computed in the sigma radial variable so fractional-level solutions stay
    bounded at the origin.  R defaults to the radius where the kernel tail
    drops below tail_tol; exceeding the series trust radius raises unless
    explicitly allowed (a fixed r_max does not).
    """
    k = sol.kappa
    T = complex(T)
    _, delta = _kernel_margin(T, gamma_dir, k)
    r_trust = sol.trust_radius_tau(trust_tol)
    if r_max is None:
        # tail weight with the top polynomial degree factored in:
        # x^{deg/k} exp(-delta x) < tail_tol at x = (R/|T|)^k
        deg_top = sol.omega.top_degree / sol.q_den
        x = math.log(1.0 / tail_tol) / delta
        for _ in range(4):
            x = (math.log(1.0 / tail_tol) + (deg_top / k) * math.log(max(x, 1.0))) / delta
        r_need = abs(T) * x ** (1.0 / k)
        if r_need > r_trust and not allow_untrusted:
            raise TrustRadiusError(
                f"ray needs radius {r_need:.3g} beyond trust radius {r_trust:.3g}"
            )
        r_max = r_need
    q = sol.q_den
    u_max = r_max ** (1.0 / q)
    u_scale = min((abs(T) / delta ** (1.0 / k)) ** (1.0 / q), u_max / 2.0)
    u, w = _gl_panels(u_scale, u_max, n_nodes=max(24, n_quad // 24))
    sigma_pts = u * np.exp(1j * gamma_dir / q)
    degs = np.arange(1, sol.omega.top_degree + 1)
    powers = sigma_pts[:, None] ** degs[None, :]          # (n_pts, n_deg)
    vals = powers @ sol.omega.table                        # (n_pts, n_m)
    tau = sigma_pts**q
    kernel = np.exp(-((tau / T) ** k))
    integrand = q * vals * (kernel / u)[:, None]
    out = k * (w[:, None] * integrand).sum(axis=0)
    return out


def _gl_panels(scale, upper, n_nodes=32):
    """Gauss-Legendre nodes/weights on panels resolving the kernel scale.

    Panels start at the decay scale and grow geometrically to the cut
    radius; the integrand is analytic on each, so a fixed node count per
    panel reaches near machine accuracy.  Nodes avoid the endpoints, so the
    integrable u -> 0 limit needs no special casing.
    """
    edges = [0.0]
    x = max(scale, upper * 1e-8)
    while x < upper:
        edges.append(x)
        x *= 2.2
    edges.append(upper)
    gx, gw = np.polynomial.legendre.leggauss(n_nodes)
    xs, ws = [], []
    for a, b in zip(edges, edges[1:]):
        xs.append(0.5 * (b - a) * gx + 0.5 * (a + b))
        ws.append(np.full(n_nodes, 0.5) * (b - a) * gw)
    return np.concatenate(xs), np.concatenate(ws)


def _kernel_margin(T, gamma_dir, k):
    c = math.cos(k * (gamma_dir - float(np.angle(complex(T)))))
    if c <= 0:
        raise GeometryError("kernel does not decay along the chosen ray")
    return gamma_dir, c


def eps_power(eps, frac):
    frac = Fraction(frac)
    return complex(eps) ** (frac.numerator / frac.denominator)


@dataclass(frozen=True)
class AssembledValue:
    value: complex
    slow_part: complex
    correction: complex     # (eps^alpha t)^gamma v; may blow up for gamma < 0
    v_value: complex        # the Laplace-Fourier factor itself; v(0, z) = 0
    gamma_dir: float
    kernel_margin: float


def assemble_solution(
    spec, plan, family, br, sol: BorelSolution, t, z, eps, direction_sector=None,
    r_max=None, n_quad=1500, allow_untrusted=False,
):
    """u = eps^beta (U0(eps^alpha t) + (eps^alpha t)^gamma * v) at one point.

    v is the Fourier inverse in z of the ray Laplace transform evaluated at
    the rescaled time eps^{chi+alpha} t.
    """
    eps = complex(eps)
    t = complex(t)
    TT = eps_power(eps, plan.chi(family) + plan.alpha) * t
    kappa = plan.kappa(family)
    if direction_sector is None:
        direction_sector = Sector(float(np.angle(TT)), np.pi / kappa + 0.2)
    g, margin = choose_gamma(TT, direction_sector, kappa)
    lvals = laplace_mk(sol, TT, g, r_max=r_max, n_quad=n_quad, allow_untrusted=allow_untrusted)
    grid, bdec, mu = spec.space
    v = fourier_inverse(CoeffFn(grid, lvals, bdec, mu), z)
    t_slow = eps_power(eps, plan.alpha) * t
    slow = br.evaluate(t_slow)
    g_frac = Fraction(plan.gamma(family))
    corr = eps_power(t_slow, g_frac) if g_frac != 0 else 1.0 + 0j
    value = eps_power(eps, plan.beta) * (slow + corr * v)
    return AssembledValue(value, slow, corr * v, v, g, margin)


# -- formal residual -----------------------------------------------------------


def _scalar_sigma_series(terms, chi, q_den, eps):
    """sum a eps^{w - chi k} sigma^{k q} from [(a, w, k)] term lists (exact)."""
    d = {}
    for a, w, k in terms:
        d[k * q_den] = d.get(k * q_den, 0j) + complex(a) * eps_power(eps, Fraction(w) - chi * k)
    return TruncSeries.from_dict(d) if d else TruncSeries.zero()


def _slow_curve_sigma(fam_op, eps, order):
    """U0(eps^{-chi} T) as a numeric Laurent sigma series."""
    q = fam_op.q_den
    chi = fam_op.chi
    d = {fam_op.e_lead * q: fam_op.c_lead * eps_power(eps, -chi * fam_op.e_lead)}
    for j in fam_op.tail.degrees():
        c = fam_op.tail[j]
        if c != 0:
            deg = (fam_op.e_lead + j) * q
            d[deg] = d.get(deg, 0j) + fam_op.c_lead * c * eps_power(
                eps, -chi * (fam_op.e_lead + j)
            )
    return TruncSeries.from_dict(d).truncate((fam_op.e_lead + fam_op.order_t + 2) * q)


def differentiate_T(es: ESeries, q_den: int) -> ESeries:
    """d/dT on a sigma-indexed E-series (T = sigma^{q_den})."""
    rows = []
    degs = list(es.degrees())
    for n in degs:
        rows.append(es.row(n) * (n / q_den))
    table = np.array(rows)
    return ESeries(
        es.min_degree - q_den,
        table,
        es.grid,
        es.beta,
        es.mu,
        None if es.order is None else es.order - q_den,
    )


@dataclass(frozen=True)
class ResidualReport:
    max_residual: float
    scale: float
    reachable_order: int
    per_degree: dict

    @property
    def relative(self):
        return self.max_residual / max(self.scale, 1e-300)


def formal_residual(spec, plan, family, sol: BorelSolution, eps, fam_op=None) -> ResidualReport:
    """Substitute the truncated series solution into the time-rescaled
    equation and measure the coefficient residual.

    This is the independent route: inverse Borel back to the time series,
    plain Cauchy/convolution products, honest T-derivatives - no level
    convolutions, operator constants or characteristic-symbol division.
    """
    fam_op = fam_op or build_family_operator(spec, plan, family, sol.omega.top_degree // max(sol.q_den, 1))
    q = sol.q_den
    keff = sol.keff
    chi = plan.chi(family)
    gamma_x = plan.gamma(family)
    grid, bdec, mu = spec.space
    nsig = sol.omega.top_degree

    # V(T) = sum omega_n Gamma(n/keff) sigma^n, then W = T^gamma V; the
    # remaining eps^{-chi gamma} of the original T^gamma V is carried
    # explicitly per W power
    vrows = np.array(
        [sol.omega.row(n) * gamma(n / keff) for n in range(1, nsig + 1)]
    )
    V = ESeries(1, vrows, grid, bdec, mu, nsig)
    gq = Fraction(gamma_x) * q
    if gq.denominator != 1:
        raise ValueError("gamma is off the sigma lattice")
    W = V.shift(int(gq))
    e_g = eps_power(eps, -chi * Fraction(gamma_x))

    U0 = _slow_curve_sigma(fam_op, eps, nsig + int(gq) + 8 * q)

    def pl(lam):
        zero = [(t.a, Fraction(0), t.k) for t in spec.p(lam)[: plan.s[lam - 1] + 1]]
        upper = [(a, w, k) for a, w, k in p_upper_terms(spec, plan, lam)]
        return _scalar_sigma_series(zero + upper, chi, q, eps)

    P1, P2, P3 = pl(1), pl(2), pl(3)

    W2 = cauchy_mul_E(W, W)
    W3 = cauchy_mul_E(W2, W)
    lin_coeff = P1 + 2.0 * cauchy_mul(P2, U0) + 3.0 * cauchy_mul(P3, cauchy_mul(U0, U0))
    quad_coeff = P2 + 3.0 * cauchy_mul(P3, U0)
    qv = spec.q_at_im(grid)
    lhs_terms = [
        cauchy_mul_scalar_E(lin_coeff, W).scale(e_g).profile_mul(qv),
        cauchy_mul_scalar_E(quad_coeff, W2).scale(e_g**2).profile_mul(qv),
        cauchy_mul_scalar_E(P3, W3).scale(e_g**3).profile_mul(qv),
    ]
    lhs = lhs_terms[0] + lhs_terms[1] + lhs_terms[2]

    # forcing rows
    frows = {}
    for f in spec.forcing:
        w = Fraction(f.n) - plan.alpha * f.b - chi * f.b
        deg = f.b * q
        frows[deg] = frows.get(deg, 0) + f.profile.values * eps_power(eps, w)
    rhs = ESeries.zero(grid, bdec, mu, 1, lhs.order if lhs.order is not None else nsig)
    for deg, vals in frows.items():
        rhs = rhs + ESeries.monomial(CoeffFn(grid, vals, bdec, mu), deg)

    for ell, op in enumerate(spec.ops, start=1):
        dv = W
        for _ in range(op.delta):
            dv = differentiate_T(dv, q)
        w = (
            Fraction(op.Delta)
            + plan.alpha * (op.delta - op.d)
            + plan.beta
            - chi * (Fraction(op.d) - op.delta + gamma_x)
        )
        term = dv.shift(op.d * q).scale(eps_power(eps, w))
        term = term.profile_mul(spec.r_at_im(ell, grid))
        rhs = rhs + term

    resid = lhs - rhs

    # degrees every term determines completely
    lin_min = lin_coeff.trimmed(1e-300).min_degree
    quad_min = quad_coeff.trimmed(1e-300).min_degree
    w_min = W.min_degree
    top_w = nsig + int(gq)
    reach = [
        top_w + lin_min,
        top_w + quad_min + w_min,
        top_w + P3.trimmed(1e-300).min_degree + 2 * w_min,
    ]
    for ell, op in enumerate(spec.ops, start=1):
        reach.append(top_w - op.delta * q + op.d * q)
    reachable = min(reach)

    lo = min(lhs.min_degree, rhs.min_degree)
    scale_terms = lhs_terms + [rhs]
    scale = 0.0
    per_degree = {}
    max_resid = 0.0
    for n in range(lo, reachable + 1):
        row = resid.row(n)
        r = float(np.max(np.abs(row)))
        per_degree[n] = r
        max_resid = max(max_resid, r)
        for t in scale_terms:
            scale = max(scale, float(np.max(np.abs(t.row(n)))))
    return ResidualReport(max_resid, scale, reachable, per_degree)


# -- fits ----------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    model: str
    params: dict
    r2: float
    samples: tuple

    def __post_init__(self):
        if not (np.isnan(self.r2) or 0.0 <= self.r2 <= 1.0 + 1e-12):
            raise ValueError("r2 out of range")


def _linfit(x, y):
    """Least squares y = a + b x; returns a, b, r^2."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2


def fit_exponential_flatness(eps_abs, deltas, order_exponent):
    """log Delta = log K - M |eps|^{-s} at fixed s = order_exponent."""
    eps_abs = np.asarray(eps_abs, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    keep = deltas > 0
    if np.count_nonzero(keep) < 3:
        return FitResult("exp-flat", {"K": np.nan, "M": np.nan, "underflow": True},
                         np.nan, tuple(zip(eps_abs, deltas)))
    x = eps_abs[keep] ** (-float(order_exponent))
    a, b, r2 = _linfit(x, np.log(deltas[keep]))
    return FitResult(
        "exp-flat",
        {"K": math.exp(a), "M": -b, "underflow": False, "exponent": float(order_exponent)},
        r2,
        tuple(zip(eps_abs, deltas)),
    )


def fit_flatness_free_exponent(eps_abs, deltas, s_grid=None):
    """Two-parameter fit with the decay exponent s free (grid search on s)."""
    eps_abs = np.asarray(eps_abs, dtype=float)
    deltas = np.asarray(deltas, dtype=float)
    keep = deltas > 0
    if np.count_nonzero(keep) < 4:
        return FitResult("exp-flat-free", {"s": np.nan, "underflow": True}, np.nan, ())
    if s_grid is None:
        s_grid = np.geomspace(0.5, 20.0, 160)
    best = None
    for s in s_grid:
        x = eps_abs[keep] ** (-s)
        a, b, r2 = _linfit(x, np.log(deltas[keep]))
        if b < 0 and (best is None or r2 > best[3]):
            best = (s, a, b, r2)
    if best is None:
        return FitResult("exp-flat-free", {"s": np.nan, "underflow": False}, np.nan, ())
    s, a, b, r2 = best
    return FitResult(
        "exp-flat-free",
        {"s": float(s), "K": math.exp(a), "M": -b, "underflow": False},
        r2,
        tuple(zip(eps_abs, deltas)),
    )


def cocycle_flatness(
    spec, plan, family, assoc: AssociatedFamily, p, sols_by_eps, t_samples, z_samples,
    r_cut, n_quad=1200,
):
    """Sup over (t, z) of |v^{p+1} - v^p| on an eps ladder, and its decay fit.

    ``sols_by_eps`` maps eps (complex, inside the overlap of sectors p and
    p+1) to the Borel solution at that eps.  Both ray integrals use the
    common cut radius ``r_cut``.
    """
    grid, bdec, mu = spec.space
    kappa = plan.kappa(family)
    g_a = assoc.directions[p]
    g_b = assoc.directions[(p + 1) % assoc.covering.count]
    eps_abs, deltas = [], []
    for eps, sol in sorted(sols_by_eps.items(), key=lambda kv: -abs(kv[0])):
        worst = 0.0
        for t in t_samples:
            TT = eps_power(eps, plan.chi(family) + plan.alpha) * complex(t)
            _kernel_margin(TT, g_a, kappa)
            _kernel_margin(TT, g_b, kappa)
            la = laplace_mk(sol, TT, g_a, r_max=r_cut, n_quad=n_quad, allow_untrusted=True)
            lb = laplace_mk(sol, TT, g_b, r_max=r_cut, n_quad=n_quad, allow_untrusted=True)
            diff = CoeffFn(grid, lb - la, bdec, mu)
            for z in z_samples:
                worst = max(worst, abs(fourier_inverse(diff, z)))
        eps_abs.append(abs(complex(eps)))
        deltas.append(worst)
    fit = fit_exponential_flatness(eps_abs, deltas, float(plan.gevrey(family)))
    return fit, fit_flatness_free_exponent(eps_abs, deltas)


def auto_flatness_ladder(order_exponent, m_scale, lo=9.0, hi=25.0, rungs=12):
    """|eps| ladder making M x span [lo, hi] for x = |eps|^{-s}, M = m_scale."""
    s = float(order_exponent)
    x_lo, x_hi = lo / m_scale, hi / m_scale
    eps_hi = x_lo ** (-1.0 / s)
    eps_lo = x_hi ** (-1.0 / s)
    return np.geomspace(eps_hi, eps_lo, rungs)


@dataclass(frozen=True)
class FlatnessResult:
    family: int
    pair: int
    fixed: FitResult
    free: FitResult
    r_cut: float
    t_abs: float
    kept: int

    @property
    def passed(self):
        return (
            not self.fixed.params.get("underflow", False)
            and self.fixed.params.get("M", 0.0) > 0.0
            and self.fixed.r2 > 0.95
        )


def measure_flatness(
    spec, plan, family, order_t=10, rungs=12, eps_window=(0.45, 0.75),
    z_samples=(0.0, 0.3, -0.2 + 0.1j), geometry=None,
):
    """End-to-end flatness measurement on the best covering overlap.

    Pass 1 scans a generous window to locate the decay constant; pass 2
    re-ladders so the exponent M |eps|^{-s} sweeps [2.5, 24] (measurable but
    above the quadrature floor), then fits with the exponent both fixed and
    free.  Both ray integrals share one cut radius taken from the trust
    region at the deepest rung.
    """
    cov, assoc, p = geometry or plan_geometry(spec, plan, family)
    phi = cov.overlap_direction(p)
    fam = build_family_operator(spec, plan, family, order_t)
    s = float(plan.gevrey(family))
    kappa = plan.kappa(family)
    margin = min(pair_kernel_margins(plan, family, assoc, p))

    def solve_at(e_abs):
        eps = e_abs * np.exp(1j * phi)
        return eps, solve_recursive(spec, plan, family, eps, order_t, fam=fam)

    lo, hi = eps_window
    _, sol_lo = solve_at(lo)
    r_cut = sol_lo.trust_radius_tau()
    m_seed = 20.0 * lo**s
    t_abs = r_cut * (margin / m_seed) ** (1.0 / kappa)
    t_samples = [t_abs, t_abs * np.exp(0.02j), 0.9 * t_abs]

    def run(ladder):
        sols = dict(solve_at(e) for e in ladder)
        return cocycle_flatness(
            spec, plan, family, assoc, p, sols, t_samples, z_samples, r_cut
        )

    fit1, _ = run(np.geomspace(hi, lo, rungs))
    m1 = fit1.params.get("M", m_seed)
    if not np.isfinite(m1) or m1 <= 0:
        m1 = m_seed
    eps_hi2 = min((4.0 / m1) ** (-1.0 / s), 0.95 * (cov.sectors[0].radius or 1.0))
    eps_lo2 = max((24.0 / m1) ** (-1.0 / s), 0.2 * eps_hi2)
    _, sol_deep = solve_at(eps_lo2)
    r_cut = min(r_cut, sol_deep.trust_radius_tau())
    fit2, free2 = run(np.geomspace(eps_hi2, eps_lo2, rungs))

    # windowed refit, iterated so the asymptotic range tracks the fitted M
    eps_abs = np.array([e for e, _ in fit2.samples])
    deltas = np.array([d for _, d in fit2.samples])
    fixed, free, kept = fit2, free2, len(eps_abs)
    m_est = fit2.params.get("M", m1)
    for _ in range(3):
        x = eps_abs ** (-s)
        keep = (m_est * x >= 3.0) & (m_est * x <= 26.0) & (deltas > 1e-13 * deltas.max())
        if np.count_nonzero(keep) < 4:
            break
        fixed = fit_exponential_flatness(eps_abs[keep], deltas[keep], s)
        free = fit_flatness_free_exponent(eps_abs[keep], deltas[keep])
        kept = int(np.count_nonzero(keep))
        if not np.isfinite(fixed.params.get("M", np.nan)) or fixed.params["M"] <= 0:
            break
        m_est = fixed.params["M"]
    return FlatnessResult(family, p, fixed, free, r_cut, t_abs, kept)


# -- parametric order estimation ------------------------------------------------


def taylor_fit(eps_values, v_values, m_max, buffer_degree=12):
    """Least-squares expansion coefficients of v along an eps ray.

    Fitted in the Chebyshev basis on [0, max |eps|] (the monomial normal
    equations are hopeless beyond degree ~4) with buffer degrees absorbing
    the tail, then converted; only coefficients up to m_max are returned.
    The fit degree drops if the sample count or conditioning demands it.
    """
    from numpy.polynomial import chebyshev as _cheb

    eps_values = np.asarray(eps_values, dtype=complex)
    v_values = np.asarray(v_values, dtype=complex)
    radii = np.abs(eps_values)
    b = float(np.max(radii))
    deg = min(buffer_degree, len(eps_values) - 2)
    x = 2.0 * radii / b - 1.0
    while deg > 1:
        design = _cheb.chebvander(x, deg)
        cond = float(np.linalg.cond(design))
        if cond < 1e10:
            break
        deg -= 1
    cc = _cheb.chebfit(x, v_values, deg)
    poly_x = np.polynomial.Polynomial(_cheb.cheb2poly(cc))
    comp = poly_x(np.polynomial.Polynomial([-1.0, 2.0 / b]))
    coef = comp.coef[: m_max + 1]
    return coef, cond, deg


def gevrey_fit(eps_values, v_values, m_max=6, s_grid=None, lattice=1):
    """Estimated order s from truncation-error growth E_n ~ C M^n Gamma(1+n/s) |eps|^n.

    The coefficient magnitudes are read off as outer-window medians of
    E_n / |eps|^n; the model ln C + n ln M + ln Gamma(1+n/s) is fitted by
    least squares with s on a grid, scored by the residual sum (the Gamma
    term's curvature in n identifies s).  ``lattice`` fits in eta =
    eps^{1/lattice} when the expansion lives on a fractional power lattice;
    empty lattice positions (ratio decaying with eps instead of stabilizing)
    are dropped before the regression.  Polynomial-exact inputs degenerate
    and are reported as entire.
    """
    eps_values = np.asarray(eps_values, dtype=complex)
    v_values = np.asarray(v_values, dtype=complex)
    radii = np.abs(eps_values) ** (1.0 / lattice)
    m_fit = m_max * lattice if lattice > 1 else m_max
    coef, cond, deg = taylor_fit(radii, v_values, m_fit, buffer_degree=max(12, m_fit + 3))
    m_top = min(len(coef) - 1, deg - 2, m_fit)
    scale_v = float(np.max(np.abs(v_values)))
    outer = radii >= 0.45 * radii.max()
    inner = ~outer
    med_out = float(np.median(radii[outer]))
    med_in = float(np.median(radii[inner])) if np.any(inner) else med_out
    samples, raw_errors, stable = [], [], []
    for n in range(1, m_top + 1):
        partial = np.polyval(coef[:n][::-1], radii.astype(complex))
        err = np.abs(v_values - partial)
        ratio_out = float(np.median(err[outer] / radii[outer] ** n))
        ratio_in = float(np.median(err[inner] / radii[inner] ** n)) if np.any(inner) else ratio_out
        samples.append((n, ratio_out))
        raw_errors.append(float(np.median(err[outer])))
        # a genuine coefficient at n makes the ratio scale-independent; an
        # empty lattice slot leaves it shrinking like a power of |eps|
        if ratio_in <= 0 or ratio_out <= 0 or med_in >= med_out:
            stable.append(False)
        else:
            slope = math.log(ratio_out / ratio_in) / math.log(med_out / med_in)
            stable.append(slope < 0.5)
    # a truncation-error sequence that collapses to the extraction floor
    # (conditioning times rounding) marks a polynomial (entire) input
    extraction_floor = max(1e-12, 1e-13 * cond) * scale_v
    if raw_errors and min(raw_errors) <= extraction_floor:
        return FitResult(
            "gevrey",
            {"order": math.inf, "entire": True, "cond": cond, "lattice": lattice},
            1.0,
            tuple(samples),
        )
    usable = [
        (n, e)
        for (n, e), raw, ok in zip(samples, raw_errors, stable)
        if raw > 1e-12 * scale_v and ok
    ]
    if len(usable) < 3:
        return FitResult(
            "gevrey",
            {"order": math.nan, "entire": False, "cond": cond, "lattice": lattice,
             "note": "fewer than three usable lattice points"},
            math.nan,
            tuple(samples),
        )
    ns = np.array([n for n, _ in usable], dtype=float)
    ys = np.log([e for _, e in usable])
    if s_grid is None:
        s_grid = np.geomspace(0.3, 40.0, 400) * lattice
    best = None
    ss_tot = float(np.sum((ys - np.mean(ys)) ** 2))
    for s in s_grid:
        gam = np.array([lgamma(1.0 + n / s) for n in ns])
        a, b, _ = _linfit(ns, ys - gam)
        pred = a + b * ns + gam
        ss_res = float(np.sum((ys - pred) ** 2))
        if best is None or ss_res < best[1]:
            best = (s, ss_res, a, b)
    s, ss_res, a, b = best
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return FitResult(
        "gevrey",
        {
            "order": float(s) / lattice,
            "C": math.exp(a),
            "M": math.exp(b),
            "entire": False,
            "cond": cond,
            "lattice": lattice,
            "points": tuple(int(n) for n in ns),
        },
        max(r2, 0.0),
        tuple(samples),
    )


def family_eps_lattice(fam_op, plan) -> int:
    """Common denominator of every eps power the solution family can carry."""
    dens = [Fraction(plan.chi(fam_op.family) + plan.alpha).denominator]
    for blocks in (fam_op.lin, fam_op.quad, fam_op.cubic, fam_op.oper):
        dens += [Fraction(b.eps_pow).denominator for b in blocks]
    dens += [Fraction(b.eps_pow).denominator for b in fam_op.forcing]
    out = 1
    for d in dens:
        out = int(np.lcm(out, d))
    return out


def measure_orders(
    spec, plan, family, order_t=10, n_ladder=28, eps_max=0.7, t_pt=0.05, z_pt=0.3,
    m_max=10, geometry=None,
):
    """Sample the correction term along one sector's bisector and fit its order.

    The eps ladder is Chebyshev-spread (the coefficient extraction needs
    that); the lattice candidates 1 and the family's own power denominator
    are both tried, preferring the smaller one when its fit is credible.
    """
    cov, assoc, p = geometry or plan_geometry(spec, plan, family)
    fam = build_family_operator(spec, plan, family, order_t)
    center = cov.sectors[p].direction
    kappa = plan.kappa(family)
    grid, bdec, mu = spec.space
    j = np.arange(1, n_ladder + 1)
    ladder = eps_max * 0.5 * (1.0 - np.cos(np.pi * j / n_ladder))
    ladder = ladder[ladder > 0.01 * eps_max]
    epss, vvals = [], []
    for e_abs in ladder:
        eps = e_abs * np.exp(1j * center)
        sol = solve_recursive(spec, plan, family, eps, order_t, fam=fam)
        TT = eps_power(eps, plan.chi(family) + plan.alpha) * t_pt
        g, _ = choose_gamma(TT, assoc.image_sector(p), kappa)
        lv = laplace_mk(sol, TT, g, allow_untrusted=True)
        epss.append(eps)
        vvals.append(fourier_inverse(CoeffFn(grid, lv, bdec, mu), z_pt))
    epss, vvals = np.array(epss), np.array(vvals)
    lat = family_eps_lattice(fam, plan)
    fits = {}
    for lattice in sorted({1, lat}):
        fits[lattice] = gevrey_fit(epss, vvals, m_max=m_max, lattice=lattice)
    finite = {
        k: f
        for k, f in fits.items()
        if np.isfinite(f.params.get("order", np.nan)) and not np.isnan(f.r2)
    }
    for lattice in sorted(finite):
        if finite[lattice].r2 > 0.9:
            return finite[lattice]
    if finite:
        return max(finite.values(), key=lambda f: f.r2)
    return fits[min(fits)]


def synthetic_gevrey_series(s0, eps_values, n_terms=24, m_const=1.0, rng=None):
    """sum Gamma(1 + m/s0) (m_const eps)^m truncated; test signal for the fit."""
    vals = np.zeros(len(eps_values), dtype=complex)
    for m in range(n_terms + 1):
        vals += gamma(1.0 + m / s0) * (m_const * np.asarray(eps_values, dtype=complex)) ** m
    return vals


# -- forcing correction ----------------------------------------------------------


@dataclass(frozen=True)
class ForcingCorrection:
    series: TruncSeries         # T-units Laurent series at the given eps
    at_zero: TruncSeries        # the eps -> 0 limit (identically zero)
    min_degree: int | None
    analytic: bool
    sufficient_flags: dict      # the two sufficient-condition margins


def forcing_correction(spec, plan, family, eps, order_t=16) -> ForcingCorrection:
    """The closed-form forcing correction generated by the slow-curve split.

    F(T, eps) = Q(0) [P1^up U0 + P2^up U0^2 + P3^up U0^3](T)
                - sum_l eps^{Delta_l + alpha(delta_l - d_l) + beta}
                        T^{d_l} R_l(0) (d/dT)^{delta_l} U0(T).

    The lower (zero-weight) parts cancel exactly by the slow-curve equation,
    so every block vanishes as eps -> 0.
    """
    abc = build_abc(
        p_zero_series(spec, plan, 1),
        p_zero_series(spec, plan, 2),
        p_zero_series(spec, plan, 3),
    )
    br = slow_branch(abc, family, order_t)
    u0 = br.as_series()
    u0_pows = {1: u0, 2: cauchy_mul(u0, u0)}
    u0_pows[3] = cauchy_mul(u0_pows[2], u0)

    total = TruncSeries.zero(u0.order)
    q0 = spec.q_at_zero()
    for lam in (1, 2, 3):
        for a, w, k in p_upper_terms(spec, plan, lam):
            block = (u0_pows[lam] * (complex(a) * eps_power(eps, w))).shift(k)
            total = total + block
    total = total * q0

    for ell, op in enumerate(spec.ops, start=1):
        r0 = spec.r_at_zero(ell)
        if r0 == 0:
            continue
        dv = u0
        for _ in range(op.delta):
            dv = dv.differentiate()
        w = Fraction(op.Delta) + plan.alpha * (op.delta - op.d) + plan.beta
        total = total - (dv * (r0 * eps_power(eps, w))).shift(op.d)

    total = total.trimmed(1e-14 * max(1.0, total.max_abs()))
    eff = total.effective_min_degree(1e-14 * max(1.0, total.max_abs()))
    k01, k02, k03 = spec.k0(1), spec.k0(2), spec.k0(3)
    if family == 1:
        flags = {
            "base": 2 * k01 - k02,
            "ops": min(op.d + k01 - k02 - op.delta for op in spec.ops),
        }
    else:
        flags = {
            "base": 3 * k02 - 2 * k03,
            "ops": min(op.d + k02 - k03 - op.delta for op in spec.ops),
        }
    return ForcingCorrection(
        series=total,
        at_zero=TruncSeries.zero(total.order),
        min_degree=eff,
        analytic=(eff is None) or (eff >= 0),
        sufficient_flags=flags,
    )
