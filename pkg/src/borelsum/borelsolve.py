"""Borel-plane convolution equations: exact coefficient recursion and the
contraction map they rearrange into.

Both perturbed problems have the same shape after the slow-curve split
U = U0 + T^gamma V and the Borel transform at the family's level kappa:

    c_diag Q(im) w  +  Q(im)[A+ * w + B(w *E w) + C(w *E w *E w)]
        = forcing + operator terms(w) + R_D(im) (kappa tau^kappa)^delta_D w

where A+, B, C are the scalar bracket series produced by the slow curve and
every omega-carrying term on the right strictly raises the tau degree.  The
recursion solves degree by degree dividing by c_diag Q(im); the operator
form divides by the full symbol c_diag Q(im) - R_D(im) (kappa tau^kappa)^delta_D
instead, realizing the fixed-point map whose Lipschitz constant the
contraction probe measures.

Rational tau exponents (from a fractional gamma) are handled by working in
sigma = tau^{1/q} with q the common denominator; the Gamma-ratio weights
then use the effective level q*kappa.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .coeffspace import CoeffFn, convolve_values, f_norm_weight, weight_profile
from .gammaf import gamma, lgamma
from .problem import ParameterPlan, ProblemSpec, base_exponent, p_upper_terms, p_zero_series
from .series import ESeries, TruncSeries, borel_mk, star_k
from .slowcurve import branch, build_abc


class SingularRecursionError(ArithmeticError):
    pass


class ExponentError(ValueError):
    pass


# -- operator constants -------------------------------------------------------


def _solve_fraction_system(rows, rhs):
    """Gaussian elimination over Fractions; rows is a list of lists."""
    n = len(rhs)
    a = [list(map(Fraction, r)) + [Fraction(v)] for r, v in zip(rows, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            raise SingularRecursionError("singular linear system for operator constants")
        a[col], a[piv] = a[piv], a[col]
        inv = a[col][col]
        a[col] = [v / inv for v in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [v - f * w for v, w in zip(a[r], a[col])]
    return [a[r][n] for r in range(n)]


def _falling(n, p):
    out = Fraction(1)
    for i in range(p):
        out *= n - i
    return out


def _rising_kappa(n, p, kappa):
    out = Fraction(1)
    for i in range(p):
        out *= n + i * kappa
    return out


def compute_operator_constants(delta, kappa):
    """Constants A_{delta,p} with
    T^{kappa delta + delta} d^delta = (T^{kappa+1} d)^delta
        + sum_p A_{delta,p} T^{kappa (delta - p)} (T^{kappa+1} d)^p.

    Determined by matching the action on monomials T^n at delta-1 distinct
    n, then verified exactly on n = 1..2 delta.
    """
    if delta < 1 or kappa < 1:
        raise ValueError("need delta >= 1 and kappa >= 1")
    if delta == 1:
        return {}
    ns = list(range(1, delta))
    rows = [[_rising_kappa(n, p, kappa) for p in range(1, delta)] for n in ns]
    rhs = [_falling(n, delta) - _rising_kappa(n, delta, kappa) for n in ns]
    sol = _solve_fraction_system(rows, rhs)
    consts = {p: sol[p - 1] for p in range(1, delta)}
    for n in range(1, 2 * delta + 1):
        lhs = _falling(n, delta)
        rhs_v = _rising_kappa(n, delta, kappa) + sum(
            consts[p] * _rising_kappa(n, p, kappa) for p in range(1, delta)
        )
        if lhs != rhs_v:
            raise SingularRecursionError(
                f"operator-constant identity fails at n={n} (delta={delta}, kappa={kappa})"
            )
    return consts


# -- symbolic family operator -------------------------------------------------


@dataclass(frozen=True)
class NonlinBlock:
    """const * eps^{eps_pow} * [tau^{tau_pow} weighted star] with j_pow tail factors."""

    const: complex
    eps_pow: Fraction
    tau_pow: Fraction
    j_pow: int


@dataclass(frozen=True)
class OperBlock:
    """One operator-derived convolution block carrying the R_l(im) profile."""

    ell: int
    const: complex
    eps_pow: Fraction
    tau_pow: Fraction
    shift_p: int      # applies (kappa tau^kappa)^shift_p
    diagonal: bool    # the absorbed main term of the top operator


@dataclass(frozen=True)
class ForcingBlock:
    j: int
    eps_pow: Fraction
    tau_pow: Fraction


@dataclass(frozen=True)
class FamilyOperator:
    family: int
    kappa: int
    chi: Fraction
    gamma: Fraction
    q_den: int
    keff: int
    c_diag: complex
    c_lead: complex     # slow-curve leading coefficient
    e_lead: int         # ... and exponent
    rho: Fraction       # division power of the equation
    tail: TruncSeries   # slow-curve tail J (T units)
    lin: tuple[NonlinBlock, ...]
    quad: tuple[NonlinBlock, ...]
    cubic: tuple[NonlinBlock, ...]
    oper: tuple[OperBlock, ...]
    forcing: tuple[ForcingBlock, ...]
    order_t: int        # working order in T units

    @property
    def order_sigma(self):
        return self.order_t * self.q_den

    def sigma_pow(self, tau_pow: Fraction) -> int:
        v = Fraction(tau_pow) * self.q_den
        if v.denominator != 1:
            raise ExponentError(f"tau power {tau_pow} not on the 1/{self.q_den} lattice")
        return int(v)


def _nonlin_brackets(spec, plan, family):
    """Blocks of the three V-power brackets, before the T-rescale."""
    gamma = plan.gamma(family)
    e_u = spec.k0(1) - spec.k0(2) if family == 1 else spec.k0(2) - spec.k0(3)
    if family == 1:
        c_u = -spec.p1[0].a / spec.p2[0].a
    else:
        c_u = -spec.p2[0].a / spec.p3[0].a
    rho = Fraction(base_exponent(spec, family)) + gamma

    def terms(lam):
        zero = [(t.a, Fraction(0), t.k) for t in spec.p(lam)[: plan.s[lam - 1] + 1]]
        upper = p_upper_terms(spec, plan, lam)
        return zero + [(a, Fraction(w), k) for a, w, k in upper]

    lin, quad, cubic = [], [], []
    # d/dU of the cubic at U0: P1 + 2 P2 U0 + 3 P3 U0^2, all over T^{rho-gamma}
    for a, w, k in terms(1):
        lin.append((a, w, Fraction(k) - (rho - gamma), 0))
    for a, w, k in terms(2):
        base = 2 * a * c_u
        p = Fraction(k + e_u) - (rho - gamma)
        lin.append((base, w, p, 0))
        lin.append((base, w, p, 1))
    for a, w, k in terms(3):
        base = 3 * a * c_u * c_u
        p = Fraction(k + 2 * e_u) - (rho - gamma)
        lin.append((base, w, p, 0))
        lin.append((2 * base, w, p, 1))
        lin.append((base, w, p, 2))
    # second derivative bracket: P2 + 3 P3 U0, over T^{rho - 2 gamma}
    for a, w, k in terms(2):
        quad.append((a, w, Fraction(k) + 2 * gamma - rho, 0))
    for a, w, k in terms(3):
        base = 3 * a * c_u
        p = Fraction(k + e_u) + 2 * gamma - rho
        quad.append((base, w, p, 0))
        quad.append((base, w, p, 1))
    # cubic bracket: P3 over T^{rho - 3 gamma}
    for a, w, k in terms(3):
        cubic.append((a, w, Fraction(k) + 3 * gamma - rho, 0))
    return c_u, e_u, rho, lin, quad, cubic


def build_family_operator(spec: ProblemSpec, plan: ParameterPlan, family: int, order_t: int) -> FamilyOperator:
    """Assemble every term of the Borel-plane equation for one family."""
    if family not in (1, 2):
        raise ValueError("family must be 1 or 2")
    chi = plan.chi(family)
    gamma = plan.gamma(family)
    kappa = plan.kappa(family)
    shift_table = plan.shift1 if family == 1 else plan.shift2
    c_u, e_u, rho, lin_raw, quad_raw, cubic_raw = _nonlin_brackets(spec, plan, family)

    q_den = 1
    for value in [gamma, rho] + [p for _, _, p, _ in lin_raw + quad_raw + cubic_raw]:
        q_den = np.lcm(q_den, Fraction(value).denominator)
    q_den = int(q_den)

    c_diag = 0j
    lin, quad, cubic = [], [], []
    for raw, out in ((lin_raw, lin), (quad_raw, quad), (cubic_raw, cubic)):
        for a, w, p, j in raw:
            if p < 0:
                raise ExponentError(f"negative tau power {p} in a nonlinearity bracket")
            eps_pow = w - chi * p
            if raw is lin_raw and p == 0 and j == 0:
                c_diag += complex(a)
                continue
            out.append(NonlinBlock(complex(a), eps_pow, p, j))

    expected = -spec.p1[0].a if family == 1 else spec.p2[0].a ** 2 / spec.p3[0].a
    if abs(c_diag - expected) > 1e-12 * abs(expected):
        raise ExponentError(f"diagonal coefficient {c_diag} != slow-curve value {expected}")

    oper = []
    top = spec.ops[-1]
    for ell, op in enumerate(spec.ops, start=1):
        base_c = Fraction(math.factorial(op.delta))
        for q2 in range(op.delta + 1):
            q1 = op.delta - q2
            comb = Fraction(math.factorial(op.delta), math.factorial(q1) * math.factorial(q2))
            fall = Fraction(1)
            for dd in range(q1):
                fall *= gamma - dd
            cconst = comb * fall
            if cconst == 0:
                continue
            eps_pow = (
                op.Delta
                + plan.alpha * (op.delta - op.d)
                + plan.beta
                - chi * (Fraction(op.d) - q1 - rho + gamma - q2)
            )
            if ell == len(spec.ops) and eps_pow != 0 and q2 == op.delta and q1 == 0:
                raise ExponentError("top operator main term should be eps-free")
            dshift = shift_table[(ell, q1, q2)]
            if q2 == 0:
                # no derivative: plain monomial convolution against omega
                oper.append(
                    OperBlock(ell, complex(cconst), eps_pow, Fraction(dshift), 0, False)
                )
                continue
            consts = compute_operator_constants(q2, kappa)
            main_diag = ell == len(spec.ops) and q1 == 0 and q2 == top.delta
            oper.append(
                OperBlock(ell, complex(cconst), eps_pow, Fraction(dshift), q2, main_diag)
            )
            for p, a_const in consts.items():
                oper.append(
                    OperBlock(
                        ell,
                        complex(cconst * a_const),
                        eps_pow,
                        Fraction(dshift + kappa * (q2 - p)),
                        p,
                        False,
                    )
                )

    forcing = []
    for j, f in enumerate(spec.forcing):
        p = Fraction(f.b) - rho
        if p <= 0:
            raise ExponentError(f"forcing tau power {p} must be positive")
        eps_pow = f.n - plan.alpha * f.b - chi * p
        forcing.append(ForcingBlock(j, eps_pow, p))

    # slow-curve tail to the working order
    abc = build_abc(
        p_zero_series(spec, plan, 1),
        p_zero_series(spec, plan, 2),
        p_zero_series(spec, plan, 3),
    )
    br = branch(abc, family, order_t + 2)

    fam = FamilyOperator(
        family=family,
        kappa=kappa,
        chi=chi,
        gamma=gamma,
        q_den=q_den,
        keff=q_den * kappa,
        c_diag=complex(c_diag),
        c_lead=br.leading_coeff,
        e_lead=br.leading_exponent,
        rho=rho,
        tail=br.tail,
        lin=tuple(lin),
        quad=tuple(quad),
        cubic=tuple(cubic),
        oper=tuple(oper),
        forcing=tuple(forcing),
        order_t=order_t,
    )
    # every sigma power must land on the integer lattice
    for blocks in (fam.lin, fam.quad, fam.cubic, fam.oper):
        for b in blocks:
            fam.sigma_pow(b.tau_pow)
    for b in fam.forcing:
        fam.sigma_pow(b.tau_pow)
    return fam


# -- numeric instantiation at fixed eps ---------------------------------------


def _eps_power(eps, frac: Fraction):
    return complex(eps) ** (frac.numerator / frac.denominator) if frac != 0 else 1.0 + 0j


def _scalar_block_series(keff, items, bj, bj2, nsig):
    """Combine scalar nonlinearity blocks into one dense sigma series.

    ``items`` holds (numeric constant, sigma power, j_pow) triples; returns
    (constant part, dense coefficients indexed 0..nsig).
    """
    dense = np.zeros(nsig + 1, dtype=complex)
    const = 0j

    def accum(series: TruncSeries, scale):
        for d in series.degrees():
            if 0 < d <= nsig:
                dense[d] += scale * series[d]

    for scale, p, j_pow in items:
        if p == 0 and j_pow == 0:
            const += scale
            continue
        if j_pow == 0:
            if p <= nsig:
                dense[p] += scale / gamma(p / keff)
            continue
        j_series = bj if j_pow == 1 else bj2
        if j_series.effective_min_degree() is None:
            continue
        if p == 0:
            accum(j_series, scale)
        else:
            mono = TruncSeries.monomial(1.0 / gamma(p / keff), p)
            accum(star_k(mono, j_series, keff), scale)
    return const, dense


@dataclass
class NumericFamilyOperator:
    """The family operator with every eps power and profile evaluated."""

    fam: FamilyOperator
    eps: complex
    grid: object
    beta: float
    mu: float
    q_values: np.ndarray
    r_values: list
    nsig: int
    gr: np.ndarray              # Gamma-ratio table at the effective level
    lgam: np.ndarray            # lgamma(n/keff) for n = 1..2 nsig
    lin_const: complex = 0j
    lin_dense: np.ndarray = None
    quad_const: complex = 0j
    quad_dense: np.ndarray = None
    cubic_const: complex = 0j
    cubic_dense: np.ndarray = None
    forcing_rows: np.ndarray = None
    op_entries: list = None

    def star_weight(self, a, b):
        """Gamma(a/keff) Gamma(b/keff) / Gamma((a+b)/keff) for 1 <= a, b."""
        return math.exp(self.lgam[a] + self.lgam[b] - self.lgam[a + b])


def instantiate(spec, plan, fam: FamilyOperator, eps, squared_tail="star") -> NumericFamilyOperator:
    if eps == 0:
        raise ValueError("eps must be nonzero")
    grid, beta, mu = spec.space
    nsig = fam.order_sigma

    def numeric_const(b):
        return b.const * _eps_power(eps, b.eps_pow)

    # J(eps^{-chi} T) in sigma units, Borel transformed at the family level
    sigma_scale = _eps_power(eps, -fam.chi / fam.q_den)
    tail_sigma = TruncSeries.from_dict(
        {d * fam.q_den: fam.tail[d] for d in fam.tail.degrees()},
        fam.tail.order * fam.q_den if fam.tail.order is not None else None,
    )
    tail_eps = tail_sigma.scale_coeffs(sigma_scale).truncate(nsig)
    bj = borel_mk(tail_eps.trimmed(), fam.keff) if tail_eps.max_abs() > 0 else TruncSeries.zero(nsig)
    if bj.effective_min_degree() is None:
        bj2 = TruncSeries.zero(nsig)
    elif squared_tail == "star":
        bj2 = star_k(bj, bj, fam.keff).truncate(nsig)
    elif squared_tail == "borel":
        # transform of the squared tail instead of the convolution square;
        # the two agree coefficientwise, which the operator tests pin down
        from .series import cauchy_mul

        sq = cauchy_mul(fam.tail, fam.tail)
        sq_sigma = TruncSeries.from_dict(
            {d * fam.q_den: sq[d] for d in sq.degrees() if abs(sq[d]) > 0},
            sq.order * fam.q_den if sq.order is not None else None,
        )
        sq_eps = sq_sigma.scale_coeffs(sigma_scale).truncate(nsig)
        bj2 = borel_mk(sq_eps.trimmed(), fam.keff) if sq_eps.max_abs() > 0 else TruncSeries.zero(nsig)
    else:
        raise ValueError("squared_tail must be 'star' or 'borel'")

    num = NumericFamilyOperator(
        fam=fam,
        eps=complex(eps),
        grid=grid,
        beta=beta,
        mu=mu,
        q_values=spec.q_at_im(grid),
        r_values=[spec.r_at_im(ell, grid) for ell in range(1, spec.D + 1)],
        nsig=nsig,
        gr=None,
        lgam=np.array([0.0] + [lgamma(n / fam.keff) for n in range(1, 2 * nsig + 2)]),
    )

    def combine(blocks):
        items = [(numeric_const(b), fam.sigma_pow(b.tau_pow), b.j_pow) for b in blocks]
        return _scalar_block_series(fam.keff, items, bj, bj2, nsig)

    num.lin_const, num.lin_dense = combine(fam.lin)
    num.quad_const, num.quad_dense = combine(fam.quad)
    num.cubic_const, num.cubic_dense = combine(fam.cubic)
    if num.lin_const != 0:
        raise ExponentError("linear bracket has a residual constant besides the diagonal")

    rows = np.zeros((nsig + 1, grid.n_points), dtype=complex)
    for b in fam.forcing:
        p = fam.sigma_pow(b.tau_pow)
        if p <= nsig:
            profile = spec.forcing[b.j].profile.values
            rows[p] += profile * (_eps_power(eps, b.eps_pow) / gamma(p / fam.keff))
    num.forcing_rows = rows

    num.op_entries = [
        (
            b.ell,
            num.r_values[b.ell - 1],
            b.const * _eps_power(eps, b.eps_pow),
            fam.sigma_pow(b.tau_pow),
            b.shift_p,
            b.diagonal,
        )
        for b in fam.oper
    ]
    return num


# -- solver and operator application ------------------------------------------


@dataclass(frozen=True)
class BorelSolution:
    family: int
    eps: complex
    omega: ESeries            # sigma-degree rows
    q_den: int
    kappa: int
    keff: int
    residual: float = float("nan")

    def eval_tau(self, tau):
        """Values over the m grid of omega at a tau point (principal root)."""
        sigma = complex(tau) ** (1.0 / self.q_den) if self.q_den > 1 else complex(tau)
        return self.omega.evaluate(sigma)

    def trust_radius_sigma(self, tol=1e-10):
        """Largest sigma radius where the last retained term stays below tol
        of the running scale."""
        top = self.omega.top_degree
        c_top = float(np.max(np.abs(self.omega.row(top))))
        scale = float(np.max(np.abs(self.omega.table)))
        if c_top == 0.0:
            return np.inf
        return (tol * max(scale, 1e-300) / c_top) ** (1.0 / top)

    def trust_radius_tau(self, tol=1e-10):
        return self.trust_radius_sigma(tol) ** self.q_den


def _bilinear_rows(num, omega_rows, upto, cache):
    """Incrementally maintained rows of omega *E omega (and the cubic)."""
    w2, w3 = cache
    grid = num.grid
    for n in range(len(w2), upto + 1):
        acc = np.zeros(grid.n_points, dtype=complex)
        for a in range(1, n):
            b = n - a
            if a >= len(omega_rows) or b >= len(omega_rows):
                continue
            acc += num.star_weight(a, b) * convolve_values(grid, omega_rows[a], omega_rows[b])
        w2.append(acc)
    for n in range(len(w3), upto + 1):
        acc = np.zeros(grid.n_points, dtype=complex)
        for a in range(1, n - 1):
            b = n - a
            if b < 2:
                continue
            acc += num.star_weight(a, b) * convolve_values(grid, omega_rows[a], w2[b])
        w3.append(acc)


def _series_star_rows(num, dense, rows, n):
    """Degree-n coefficient of (scalar sigma series) star (row series)."""
    acc = np.zeros(num.grid.n_points, dtype=complex)
    for a in range(1, n):
        c = dense[a] if a < len(dense) else 0j
        if c == 0:
            continue
        b = n - a
        if b < 1 or b >= len(rows):
            continue
        acc += c * num.star_weight(a, b) * rows[b]
    return acc


def _rhs_accumulate(num, omega_rows, w2, w3, n, blocks=None):
    """Everything at degree n except the two diagonal pieces.

    blocks: optional subset of {"H1", "H2", "H3", "H4"} for block-resolved
    evaluation; None means all.
    """
    fam = num.fam
    want = blocks is None
    top_ell = len(num.r_values)
    acc = np.zeros(num.grid.n_points, dtype=complex)

    if want or "H1" in blocks:
        if n < num.forcing_rows.shape[0]:
            acc = acc + num.forcing_rows[n]
        acc -= num.q_values * _series_star_rows(num, num.lin_dense, omega_rows, n)

    if want or "H2" in blocks or "H3" in blocks:
        for ell, r_vals, cconst, p_sig, shift_p, diagonal in num.op_entries:
            if diagonal:
                continue
            tag = "H3" if ell == top_ell else "H2"
            if not (want or tag in blocks):
                continue
            b = n - p_sig - fam.keff * shift_p
            if b < 1 or b >= len(omega_rows):
                continue
            # [sigma^p / Gamma(p/keff)] star (kappa^s sigma^{keff s} omega):
            # the monomial's Gamma cancels, leaving the source-degree ratio
            w = math.exp(num.lgam[b + fam.keff * shift_p] - num.lgam[n])
            acc = acc + r_vals * (cconst * (fam.kappa**shift_p) * w) * omega_rows[b]

    if want or "H2" in blocks:
        acc -= num.q_values * (
            (num.quad_const * w2[n] if n < len(w2) else 0.0)
            + _series_star_rows(num, num.quad_dense, w2, n)
        )
    if want or "H4" in blocks:
        acc -= num.q_values * (
            (num.cubic_const * w3[n] if n < len(w3) else 0.0)
            + _series_star_rows(num, num.cubic_dense, w3, n)
        )
    return acc


def solve_recursive(spec, plan, family, eps, order_t, fam=None) -> BorelSolution:
    """Exact degree-by-degree solution of the family's Borel equation."""
    fam = fam or build_family_operator(spec, plan, family, order_t)
    num = instantiate(spec, plan, fam, eps)
    nsig = num.nsig
    grid = num.grid

    diag = fam.c_diag * num.q_values
    if np.min(np.abs(diag)) < 1e-14:
        raise SingularRecursionError("diagonal symbol vanishes at an m node")
    r_top = num.r_values[-1]
    top = spec.ops[-1]
    shift_deg = fam.keff * top.delta
    shift_const = float(fam.kappa) ** top.delta

    omega_rows = [np.zeros(grid.n_points, dtype=complex)]
    w2, w3 = [np.zeros(grid.n_points, dtype=complex)] * 2, [np.zeros(grid.n_points, dtype=complex)] * 3
    cache = (w2, w3)
    for n in range(1, nsig + 1):
        _bilinear_rows(num, omega_rows, n, cache)
        acc = _rhs_accumulate(num, omega_rows, w2, w3, n)
        b = n - shift_deg
        if b >= 1:
            acc = acc + r_top * (shift_const * omega_rows[b])
        omega_rows.append(acc / diag)

    table = np.array(omega_rows[1:])
    sol = BorelSolution(
        family=family,
        eps=complex(eps),
        omega=ESeries(1, table, grid, num.beta, num.mu, nsig),
        q_den=fam.q_den,
        kappa=fam.kappa,
        keff=fam.keff,
    )
    return sol


def apply_operator(spec, plan, fam: FamilyOperator, eps, omega: ESeries, blocks=None, squared_tail="star") -> ESeries:
    """The contraction map: symbol-divided evaluation of the selected blocks.

    With all blocks selected, a fixed point of this map solves the family's
    Borel equation; the division by the full characteristic symbol follows
    the analytic construction (geometric in the top shift).
    """
    num = instantiate(spec, plan, fam, eps, squared_tail)
    nsig = num.nsig
    grid = num.grid
    omega_rows = [np.zeros(grid.n_points, dtype=complex)] + [
        omega.row(n) for n in range(1, nsig + 1)
    ]
    w2 = [np.zeros(grid.n_points, dtype=complex)] * 2
    w3 = [np.zeros(grid.n_points, dtype=complex)] * 3
    cache = (w2, w3)
    _bilinear_rows(num, omega_rows, nsig, cache)

    diag = fam.c_diag * num.q_values
    r_top = num.r_values[-1]
    top = spec.ops[-1]
    shift_deg = fam.keff * top.delta
    shift_const = float(fam.kappa) ** top.delta

    out_rows = [np.zeros(grid.n_points, dtype=complex)]
    for n in range(1, nsig + 1):
        acc = _rhs_accumulate(num, omega_rows, w2, w3, n, blocks)
        b = n - shift_deg
        if b >= 1:
            acc = acc + r_top * (shift_const * out_rows[b])
        out_rows.append(acc / diag)
    return ESeries(1, np.array(out_rows[1:]), grid, num.beta, num.mu, nsig)


def fixed_point_residual(spec, plan, fam, eps, sol: BorelSolution, params=None):
    """|| omega - H(omega) || relative to || omega || in the sampled norm."""
    h = apply_operator(spec, plan, fam, eps, sol.omega)
    diff = sol.omega - h
    norm_o = f_norm_of_series(sol, params) if params else sol.omega.max_abs()
    if params:
        dsol = BorelSolution(sol.family, sol.eps, diff, sol.q_den, sol.kappa, sol.keff)
        norm_d = f_norm_of_series(dsol, params)
    else:
        norm_d = diff.max_abs()
    return norm_d / max(norm_o, 1e-300)


# -- norms, roots, admissibility ----------------------------------------------


def f_norm_of_series(sol: BorelSolution, params, direction=0.0):
    """Sampled weighted norm of a Borel solution (tau samples per params)."""
    from .coeffspace import tau_samples

    taus = tau_samples(params, direction, sol.eps)
    wt = f_norm_weight(np.abs(taus), params, sol.eps)
    wm = weight_profile(sol.omega.grid, sol.omega.beta, sol.omega.mu)
    best = 0.0
    for t, w in zip(taus, wt):
        vals = np.abs(sol.eval_tau(t))
        best = max(best, w * float(np.max(wm * vals)))
    return best


def characteristic_values(spec, plan, fam: FamilyOperator, tau, grid=None):
    """The dividing symbol c_diag Q(im) - R_D(im) (kappa tau^kappa)^delta_D."""
    grid = grid if grid is not None else spec.space[0]
    qv = spec.q_at_im(grid)
    rv = spec.r_at_im(spec.D, grid)
    top = spec.ops[-1]
    return fam.c_diag * qv - rv * (fam.kappa ** top.delta) * complex(tau) ** (top.delta * fam.kappa)


def roots_q(spec, plan, family, m, fam=None):
    """Roots of the dividing symbol at one m, by the radial/argument formula."""
    fam = fam or build_family_operator(spec, plan, family, 4)
    top = spec.ops[-1]
    n_roots = top.delta * fam.kappa
    q_m = complex(_poly_at(spec.q_poly, 1j * m))
    r_m = complex(_poly_at(spec.r_polys[-1], 1j * m))
    if r_m == 0:
        raise ZeroDivisionError("R_D(im) vanishes; no root formula")
    ratio = fam.c_diag * q_m / (r_m * fam.kappa**top.delta)
    radius = abs(ratio) ** (1.0 / n_roots)
    base_arg = np.angle(ratio) / n_roots
    roots = np.array(
        [radius * np.exp(1j * (base_arg + 2 * np.pi * ell / n_roots)) for ell in range(n_roots)]
    )
    # each root must annihilate the symbol
    for r in roots:
        val = fam.c_diag * q_m - r_m * fam.kappa**top.delta * r ** (top.delta * fam.kappa)
        scale = abs(fam.c_diag * q_m) + abs(r_m * fam.kappa**top.delta * radius ** (top.delta * fam.kappa))
        if abs(val) > 1e-9 * scale:
            raise ArithmeticError(f"root formula failed at m={m}: |P(root)|={abs(val)}")
    return roots


def _poly_at(coeffs, x):
    acc = 0j
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


@dataclass(frozen=True)
class AdmissibilityReport:
    direction: float
    rho: float
    m1: float
    m2: float
    c_estimate: float

    @property
    def admissible(self):
        return self.m1 > 1e-6 and self.m2 > 1e-6 and self.c_estimate > 1e-9


def sector_admissibility(
    spec, plan, family, direction, rho, fam=None, ray_max=None, n_ray=48, n_disc=16, n_m=None
) -> AdmissibilityReport:
    """Distance-to-roots and symbol lower-bound constants on a disc + ray.

    m1: min over samples of |tau - root| / (1 + |tau|)
    m2: best over root index of the min of |tau - root| / |root|
    c : min of |symbol| / (|R_D(im)| (1 + |tau|^kappa)^{delta_D - 1/kappa})
    """
    fam = fam or build_family_operator(spec, plan, family, 4)
    grid_full, _, _ = spec.space
    step = max(1, grid_full.n_points // (n_m or 65))
    m_nodes = grid_full.nodes[::step]
    top = spec.ops[-1]
    ray_max = ray_max if ray_max is not None else 8.0 * rho

    disc = (np.linspace(rho / n_disc, rho, n_disc)[:, None] * np.exp(1j * np.linspace(0, 2 * np.pi, 12, endpoint=False))[None, :]).ravel()
    ray = np.linspace(rho, ray_max, n_ray) * np.exp(1j * direction)

    roots = np.array([roots_q(spec, plan, family, m, fam) for m in m_nodes])  # (n_m, n_roots)

    # per-root nearest points of the region, so a root sitting on the ray or
    # the disc boundary is actually seen by the minimum
    e_dir = np.exp(1j * direction)
    along = np.clip((roots * np.conj(e_dir)).real, rho, ray_max)
    nearest_ray = (along * e_dir).ravel()
    nearest_disc = (np.minimum(np.abs(roots), rho) * np.exp(1j * np.angle(roots))).ravel()
    taus = np.concatenate([disc, ray, nearest_ray, nearest_disc])
    dist = np.abs(taus[:, None, None] - roots[None, :, :])  # (n_tau, n_m, n_roots)
    m1 = float(np.min(dist / (1.0 + np.abs(taus))[:, None, None]))
    per_root = np.min(dist / np.abs(roots)[None, :, :], axis=(0, 1))
    m2 = float(np.max(per_root))

    qv = np.array([_poly_at(spec.q_poly, 1j * m) for m in m_nodes])
    rv = np.array([_poly_at(spec.r_polys[-1], 1j * m) for m in m_nodes])
    sym = (
        fam.c_diag * qv[None, :]
        - rv[None, :] * (fam.kappa**top.delta) * (taus ** (top.delta * fam.kappa))[:, None]
    )
    denom = np.abs(rv)[None, :] * (1.0 + np.abs(taus)[:, None] ** fam.kappa) ** (
        top.delta - 1.0 / fam.kappa
    )
    c_est = float(np.min(np.abs(sym) / denom))
    return AdmissibilityReport(direction, rho, m1, m2, c_est)


# -- contraction probe ---------------------------------------------------------


def random_ball_element(sol_template, params, target_norm, rng):
    """Random element of the sampled-norm ball, built from smooth profiles."""
    grid = sol_template.omega.grid
    nsig = sol_template.omega.top_degree
    env = (1.0 + np.abs(grid.nodes)) ** (-sol_template.omega.mu) * np.exp(
        -sol_template.omega.beta * np.abs(grid.nodes)
    )
    rows = []
    scale = abs(sol_template.eps) ** -float(params.chi + params.alpha)
    for n in range(1, nsig + 1):
        amp = (rng.normal() + 1j * rng.normal()) * scale**n / gamma(n / sol_template.keff + 1.0)
        width = rng.uniform(0.5, 1.5)
        rows.append(amp * env * np.exp(-(grid.nodes**2) * (width / grid.m_max**2)))
    om = ESeries(1, np.array(rows), grid, sol_template.omega.beta, sol_template.omega.mu, nsig)
    cand = BorelSolution(
        sol_template.family, sol_template.eps, om, sol_template.q_den,
        sol_template.kappa, sol_template.keff,
    )
    nrm = f_norm_of_series(cand, params)
    if nrm == 0:
        raise ArithmeticError("degenerate random element")
    return om.scale(target_norm / nrm)


@dataclass(frozen=True)
class ContractionStats:
    eps: complex
    ball_radius: float
    max_ratio: float
    mean_ratio: float
    self_map_margin: float
    n_pairs: int


def contraction_probe(spec, plan, family, eps, trials=20, seed=0, params=None, fam=None, order_t=8):
    """Measured Lipschitz data of the contraction map on a norm ball.

    The ball radius follows the analytic recipe: four times the norm of the
    image of zero.  Returns max/mean difference ratios over random pairs and
    the self-map margin max ||H(omega)|| / radius.
    """
    from .coeffspace import NormParams

    fam = fam or build_family_operator(spec, plan, family, order_t)
    if params is None:
        params = NormParams(nu=1.0, chi=fam.chi, alpha=plan.alpha, kappa=fam.kappa, rho=0.25)
    zero = ESeries.zero(spec.space[0], spec.space[1], spec.space[2], 1, fam.order_sigma)
    h0 = apply_operator(spec, plan, fam, eps, zero)
    sol0 = BorelSolution(family, complex(eps), h0, fam.q_den, fam.kappa, fam.keff)
    radius = 4.0 * f_norm_of_series(sol0, params)
    if radius == 0:
        raise ArithmeticError("zero forcing: the ball degenerates")

    rng = np.random.default_rng(seed)
    ratios = []
    self_margins = []
    for _ in range(trials):
        oa = random_ball_element(sol0, params, radius * rng.uniform(0.2, 1.0), rng)
        ob = random_ball_element(sol0, params, radius * rng.uniform(0.2, 1.0), rng)
        ha = apply_operator(spec, plan, fam, eps, oa)
        hb = apply_operator(spec, plan, fam, eps, ob)
        num_n = f_norm_of_series(BorelSolution(family, complex(eps), ha - hb, fam.q_den, fam.kappa, fam.keff), params)
        den_n = f_norm_of_series(BorelSolution(family, complex(eps), oa - ob, fam.q_den, fam.kappa, fam.keff), params)
        ratios.append(num_n / max(den_n, 1e-300))
        self_margins.append(
            f_norm_of_series(BorelSolution(family, complex(eps), ha, fam.q_den, fam.kappa, fam.keff), params) / radius
        )
    return ContractionStats(
        eps=complex(eps),
        ball_radius=radius,
        max_ratio=float(np.max(ratios)),
        mean_ratio=float(np.mean(ratios)),
        self_map_margin=float(np.max(self_margins)),
        n_pairs=trials,
    )


def contraction_threshold(spec, plan, family, eps_hi=0.5, target=0.5, trials=12, seed=0, max_halvings=12, order_t=8):
    """Largest probed |eps| (on a halving ladder) with max ratio <= target."""
    fam = build_family_operator(spec, plan, family, order_t)
    eps = eps_hi
    history = []
    for _ in range(max_halvings):
        stats = contraction_probe(spec, plan, family, eps, trials=trials, seed=seed, fam=fam, order_t=order_t)
        history.append(stats)
        if stats.max_ratio <= target:
            return eps, history
        eps *= 0.5
    return None, history
