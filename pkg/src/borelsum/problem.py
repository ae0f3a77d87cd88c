"""Problem data, derived parameters, and the hypothesis validator.

All exponent algebra is exact (``fractions.Fraction``); floats enter only
for the polynomial-sector fit and root numerics.  The validator emits one
report entry per hypothesis with a numeric margin; sufficient-only
analyticity conditions are reported without gating the overall verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from .coeffspace import CoeffFn, MGrid, default_grid
from .series import TruncSeries


class PlanInfeasibleError(ValueError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PTerm:
    """One term a * eps^m * t^k of a nonlinearity polynomial."""

    a: complex
    m: int
    k: int


@dataclass(frozen=True)
class OpTerm:
    """One irregular operator eps^Delta t^d (d/dt)^delta R_l(dz)."""

    Delta: int
    d: int
    delta: int


@dataclass(frozen=True)
class ForcingTerm:
    """One forcing monomial eps^n t^b with Fourier profile B(m)."""

    n: int
    b: int
    profile: CoeffFn


@dataclass(frozen=True)
class ProblemSpec:
    p1: tuple[PTerm, ...]
    p2: tuple[PTerm, ...]
    p3: tuple[PTerm, ...]
    ops: tuple[OpTerm, ...]          # l = 1..D in order
    q_poly: tuple[complex, ...]      # ascending coefficients of the reduced z-symbol
    r_polys: tuple[tuple[complex, ...], ...]  # one per operator
    forcing: tuple[ForcingTerm, ...]
    upsilon: int = 1
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        for lam, terms in ((1, self.p1), (2, self.p2), (3, self.p3)):
            if not terms:
                raise ConfigError(f"p{lam} must have at least one term")
            if terms[0].a == 0:
                raise ConfigError(f"leading coefficient of p{lam} vanishes")
            ks = [t.k for t in terms]
            if any(k2 <= k1 for k1, k2 in zip(ks, ks[1:])):
                raise ConfigError(f"t-exponents of p{lam} must increase strictly")
        if len(self.ops) < 1:
            raise ConfigError("at least one irregular operator is required")
        deltas = [o.delta for o in self.ops]
        if deltas[0] < 1 or any(b <= a for a, b in zip(deltas, deltas[1:])):
            raise ConfigError("operator orders delta must be >= 1 and strictly increasing")
        if len(self.r_polys) != len(self.ops):
            raise ConfigError("need one z-symbol per operator")
        degq = _poly_degree(self.q_poly)
        degd = _poly_degree(self.r_polys[-1])
        if degq != degd or any(_poly_degree(r) > degq for r in self.r_polys):
            raise ConfigError("need deg Q = deg R_D >= deg R_l")
        if self.upsilon < 1:
            raise ConfigError("the common z-derivative factor must be >= 1")

    @property
    def D(self):
        return len(self.ops)

    def p(self, lam):
        return (self.p1, self.p2, self.p3)[lam - 1]

    def k0(self, lam):
        return self.p(lam)[0].k

    @property
    def space(self):
        """(grid, beta, mu) shared by the forcing profiles."""
        if not self.forcing:
            raise ConfigError("no forcing profiles to define the coefficient space")
        f0 = self.forcing[0].profile
        return f0.grid, f0.beta, f0.mu

    def q_at_im(self, grid=None):
        grid = grid if grid is not None else self.space[0]
        return _poly_eval(self.q_poly, 1j * grid.nodes)

    def r_at_im(self, ell, grid=None):
        grid = grid if grid is not None else self.space[0]
        return _poly_eval(self.r_polys[ell - 1], 1j * grid.nodes)

    def q_at_zero(self):
        return complex(self.q_poly[0])

    def r_at_zero(self, ell):
        return complex(self.r_polys[ell - 1][0])


def _poly_degree(coeffs):
    deg = -1
    for i, c in enumerate(coeffs):
        if c != 0:
            deg = i
    return deg


def _poly_eval(coeffs, x):
    acc = np.zeros_like(np.asarray(x, dtype=complex))
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


@dataclass(frozen=True)
class ParameterPlan:
    alpha: Fraction
    beta: Fraction
    gamma1: Fraction
    gamma2: Fraction
    s: tuple[int, int, int]          # last zero-weight index per nonlinearity
    kappa1: int
    kappa2: int
    chi1: Fraction
    chi2: Fraction
    d_zero: tuple[int, ...]          # d_{l,0}, family 1
    d_zero_tilde: tuple[int, ...]    # family 2
    shift1: dict                     # (l, q1, q2) -> d_{l,q1,q2}
    shift2: dict
    gevrey1: Fraction
    gevrey2: Fraction

    def gamma(self, family):
        return self.gamma1 if family == 1 else self.gamma2

    def chi(self, family):
        return self.chi1 if family == 1 else self.chi2

    def kappa(self, family):
        return self.kappa1 if family == 1 else self.kappa2

    def gevrey(self, family):
        return self.gevrey1 if family == 1 else self.gevrey2


def weight(term: PTerm, lam, alpha, beta):
    """Perturbation exponent m + lam*beta - alpha*k after rescaling."""
    return term.m + lam * beta - alpha * term.k


def base_exponent(spec, family):
    """k_{0,1} for family 1, 2k_{0,2} - k_{0,3} for family 2."""
    if family == 1:
        return spec.k0(1)
    return 2 * spec.k0(2) - spec.k0(3)


def derive_plan(spec: ProblemSpec, alpha, beta, gamma1, gamma2) -> ParameterPlan:
    """Compute levels, rescaling exponents, shift tables and Gevrey orders.

    Raises :class:`PlanInfeasibleError` when either level fails to come out a
    positive integer or a nonlinearity has no admissible zero-weight prefix.
    """
    alpha, beta = Fraction(alpha), Fraction(beta)
    gamma1, gamma2 = Fraction(gamma1), Fraction(gamma2)
    top = spec.ops[-1]
    d_D, delta_D, Delta_D = top.d, top.delta, top.Delta

    s = []
    for lam in (1, 2, 3):
        terms = spec.p(lam)
        ws = [weight(t, lam, alpha, beta) for t in terms]
        if ws[0] != 0:
            near = f" (weight of the leading term is {ws[0]})"
            raise PlanInfeasibleError(f"p{lam}: leading weight must vanish{near}")
        s_lam = 0
        for w in ws[1:]:
            if w == 0:
                s_lam += 1
            else:
                break
        for w in ws[s_lam + 1 :]:
            if w <= 0:
                raise PlanInfeasibleError(
                    f"p{lam}: weights must be zero then strictly positive, got {ws}"
                )
        s.append(s_lam)

    kappas = []
    for family in (1, 2):
        b = base_exponent(spec, family)
        num = d_D - delta_D - b
        if num <= 0 or num % delta_D != 0:
            raise PlanInfeasibleError(
                f"family {family}: level (d_D - delta_D - base)/delta_D = {num}/{delta_D} "
                "is not a positive integer"
            )
        kappas.append(num // delta_D)
    kappa1, kappa2 = kappas
    if kappa2 <= kappa1:
        raise PlanInfeasibleError(f"levels must satisfy kappa2 > kappa1, got {kappa1}, {kappa2}")

    d_zero, d_zero_tilde = [], []
    for op in spec.ops[:-1]:
        d_zero.append(op.d - op.delta - op.delta * kappa1 - spec.k0(1))
        d_zero_tilde.append(op.d - op.delta - op.delta * kappa2 - base_exponent(spec, 2))
    d_zero.append(0)
    d_zero_tilde.append(0)

    chis = []
    for family, kappa in ((1, kappa1), (2, kappa2)):
        den = d_D - base_exponent(spec, family) - delta_D
        chis.append(Fraction(Delta_D + alpha * (delta_D - d_D) + beta, 1) / den)
    chi1, chi2 = chis

    shift1, shift2 = {}, {}
    for ell, op in enumerate(spec.ops, start=1):
        for q2 in range(op.delta + 1):
            q1 = op.delta - q2
            shift1[(ell, q1, q2)] = op.d - spec.k0(1) - q1 - (kappa1 + 1) * q2
            shift2[(ell, q1, q2)] = op.d - base_exponent(spec, 2) - q1 - (kappa2 + 1) * q2

    gevrey1 = (chi1 + alpha) * kappa1
    gevrey2 = (chi2 + alpha) * kappa2
    # cross-checks: the alternative level-order formulas and the exact
    # relation between the two base exponents must agree
    alt1 = Fraction(Delta_D + beta - alpha * spec.k0(1), delta_D)
    alt2 = Fraction(Delta_D + beta - alpha * base_exponent(spec, 2), delta_D)
    if gevrey1 != alt1 or gevrey2 != alt2:
        raise PlanInfeasibleError("order cross-check failed (inconsistent top operator data)")
    if spec.k0(1) - base_exponent(spec, 2) != delta_D * (kappa2 - kappa1):
        raise PlanInfeasibleError("base-exponent identity failed")
    for (ell, q1, q2), v in shift1.items():
        if spec.ops[ell - 1].d - spec.k0(1) - q1 != (kappa1 + 1) * q2 + v:
            raise PlanInfeasibleError("shift-table identity failed (family 1)")
        w = shift2[(ell, q1, q2)]
        if spec.k0(1) - base_exponent(spec, 2) != q2 * (kappa2 - kappa1) + w - v:
            raise PlanInfeasibleError("shift-table identity failed (family 2)")

    return ParameterPlan(
        alpha=alpha,
        beta=beta,
        gamma1=gamma1,
        gamma2=gamma2,
        s=tuple(s),
        kappa1=kappa1,
        kappa2=kappa2,
        chi1=chi1,
        chi2=chi2,
        d_zero=tuple(d_zero),
        d_zero_tilde=tuple(d_zero_tilde),
        shift1=shift1,
        shift2=shift2,
        gevrey1=gevrey1,
        gevrey2=gevrey2,
    )


@dataclass(frozen=True)
class ConstraintEntry:
    cid: str
    equation: str
    passed: bool
    margin: float
    note: str = ""
    gating: bool = True


@dataclass(frozen=True)
class ConstraintReport:
    entries: tuple[ConstraintEntry, ...]

    @property
    def overall(self):
        return all(e.passed for e in self.entries if e.gating)

    def entry(self, cid):
        for e in self.entries:
            if e.cid == cid:
                return e
        raise KeyError(cid)

    def failing(self):
        return [e for e in self.entries if e.gating and not e.passed]

    def to_text(self):
        lines = [f"overall: {'PASS' if self.overall else 'FAIL'}"]
        for e in self.entries:
            flag = "PASS" if e.passed else "FAIL"
            gate = "" if e.gating else " [info]"
            note = f"  ({e.note})" if e.note else ""
            lines.append(f"{flag}{gate}  {e.cid:<24} {e.equation:<10} margin={e.margin:+.6g}{note}")
        return "\n".join(lines)

    def to_csv(self):
        lines = ["constraint-id,equation,pass,margin"]
        for e in self.entries:
            lines.append(f"{e.cid},{e.equation},{int(e.passed)},{e.margin:.17g}")
        return "\n".join(lines)


def _ge(cid, tag, lhs_minus_rhs, note="", gating=True):
    m = Fraction(lhs_minus_rhs)
    return ConstraintEntry(cid, tag, m >= 0, float(m), note, gating)


def _gt(cid, tag, lhs_minus_rhs, note="", gating=True):
    m = Fraction(lhs_minus_rhs)
    return ConstraintEntry(cid, tag, m > 0, float(m), note, gating)


def _eq(cid, tag, diff, note="", gating=True):
    m = Fraction(diff)
    return ConstraintEntry(cid, tag, m == 0, float(m), note, gating)


def fit_value_sector(values, slack=0.1):
    """Smallest sector (direction, opening) containing the sampled values.

    Direction is the circular mean of the arguments; the opening doubles the
    maximal deviation plus slack.  Returns (direction, opening, min_modulus).
    """
    vals = np.asarray(values, dtype=complex)
    r = float(np.min(np.abs(vals)))
    mean = complex(np.sum(vals / np.maximum(np.abs(vals), 1e-300)))
    direction = float(np.angle(mean)) if mean != 0 else 0.0
    dev = np.angle(vals * np.exp(-1j * direction))
    opening = 2.0 * float(np.max(np.abs(dev))) + slack
    return direction, opening, r


def structural_entries(spec: ProblemSpec, alpha, beta, gamma1, gamma2, sector_slack=0.1):
    """Hypotheses checkable from the raw data, before any level derivation."""
    alpha, beta = Fraction(alpha), Fraction(beta)
    g1, g2 = Fraction(gamma1), Fraction(gamma2)
    k01, k02, k03 = spec.k0(1), spec.k0(2), spec.k0(3)
    base2 = 2 * k02 - k03
    entries = []

    # exponent gap chain
    entries.append(_gt("gap-middle", "e92", k03 + k01 - 2 * k02))
    for i, t in enumerate(spec.p2[1:], start=1):
        entries.append(_gt(f"gap-upper-l{i}", "e92", t.k + k02 - (k03 + k01)))

    for ell, op in enumerate(spec.ops, start=1):
        entries.append(_ge(f"order-room-l{ell}", "e93", op.d - op.delta - k01))

    # positivity of the perturbation exponents
    for ell, op in enumerate(spec.ops, start=1):
        entries.append(
            _gt(f"eps-positive-l{ell}", "e134", op.Delta + alpha * (op.delta - op.d) + beta)
        )
    for j, f in enumerate(spec.forcing):
        entries.append(_gt(f"eps-positive-forcing-j{j}", "e134", f.n - alpha * f.b))

    # zero-weight prefixes, computed without a plan
    for lam in (1, 2, 3):
        terms = spec.p(lam)
        ws = [weight(t, lam, alpha, beta) for t in terms]
        s_lam = 0
        while s_lam < len(ws) and ws[s_lam] == 0:
            s_lam += 1
        ok = s_lam >= 1 and all(w > 0 for w in ws[s_lam:])
        near = [i for i, w in enumerate(ws) if w != 0 and abs(float(w)) < 1e-9]
        note = f"s_{lam}={s_lam - 1}" if ok else f"weights={[str(w) for w in ws]}"
        if s_lam == len(ws) and ok:
            note += "; no upper terms"
        if near:
            note += f"; near-miss weights at indices {near}"
        entries.append(ConstraintEntry(f"weights-p{lam}", "e138", ok, 0.0, note))

    # tail-exponent windows
    entries.append(_ge("gamma1-low", "e218", g1 - (k01 - k02)))
    for j, f in enumerate(spec.forcing):
        entries.append(_ge(f"gamma1-high-j{j}", "e222", (f.b - k01) - g1))
    entries.append(_ge("gamma2-low", "e218b", g2 - (k02 - k03)))
    for j, f in enumerate(spec.forcing):
        entries.append(_ge(f"gamma2-high-j{j}", "e222b", (f.b - base2) - g2))
    # derived consequences
    entries.append(_ge("gamma1-derived-a", "e686", g1 - (k02 - k03), gating=False))
    entries.append(_ge("gamma1-derived-b", "e686", 2 * g1 - (k01 - k03), gating=False))

    # z-symbol conditions: nonvanishing on the line and a sector for Q/R_D
    grid, _, _ = spec.space
    qv = spec.q_at_im(grid)
    rv = spec.r_at_im(spec.D, grid)
    entries.append(
        ConstraintEntry(
            "q-nonvanishing",
            "e540",
            _no_real_root(spec.q_poly),
            float(np.min(np.abs(qv))),
            "min |Q(im)| over grid",
        )
    )
    entries.append(
        ConstraintEntry(
            "rD-nonvanishing",
            "e540",
            _no_real_root(spec.r_polys[-1]),
            float(np.min(np.abs(rv))),
            "min |R_D(im)| over grid",
        )
    )
    direction, opening, r = fit_value_sector(qv / rv, sector_slack)
    entries.append(
        ConstraintEntry(
            "symbol-sector",
            "e366",
            (r > 0) and (opening < math.pi),
            float(math.pi - opening),
            f"direction={direction:.4f}, opening={opening:.4f}, r={r:.4g}",
        )
    )

    # sufficient-only analyticity conditions for the forcing corrections
    entries.append(_ge("forcing-analytic-1", "e2712", 2 * k01 - k02, gating=False))
    for ell, op in enumerate(spec.ops, start=1):
        entries.append(
            _ge(f"forcing-analytic-1-l{ell}", "e2712", op.d + k01 - k02 - op.delta, gating=False)
        )
    entries.append(_ge("forcing-analytic-2", "e2712b", 3 * k02 - 2 * k03, gating=False))
    for ell, op in enumerate(spec.ops, start=1):
        entries.append(
            _ge(f"forcing-analytic-2-l{ell}", "e2712b", op.d + k02 - k03 - op.delta, gating=False)
        )

    for note in spec.notes:
        entries.append(ConstraintEntry("note", "-", True, 0.0, note, gating=False))
    return entries


def check_all(spec: ProblemSpec, plan: ParameterPlan, sector_slack=0.1) -> ConstraintReport:
    """Every checkable hypothesis, one report entry each.

    Margins are LHS - RHS in the inequality's natural (rational) units;
    equalities report the signed difference and pass only at exactly zero.
    """
    alpha, beta = plan.alpha, plan.beta
    g1, g2 = plan.gamma1, plan.gamma2
    k01, k02, k03 = spec.k0(1), spec.k0(2), spec.k0(3)
    base2 = 2 * k02 - k03
    top = spec.ops[-1]
    D = spec.D
    entries = structural_entries(spec, alpha, beta, g1, g2, sector_slack)

    # level decompositions
    for ell, op in enumerate(spec.ops, start=1):
        d0 = plan.d_zero[ell - 1]
        entries.append(
            _eq(f"level1-decomp-l{ell}", "e94", (op.d - op.delta - op.delta * plan.kappa1 - d0) - k01)
        )
        if ell < D:
            entries.append(_ge(f"level1-margin-l{ell}", "e94", d0 - 1))
        dt0 = plan.d_zero_tilde[ell - 1]
        entries.append(
            _eq(
                f"level2-decomp-l{ell}",
                "e94b",
                (op.d - op.delta - op.delta * plan.kappa2 - dt0) - base2,
            )
        )
        if ell < D:
            entries.append(_ge(f"level2-margin-l{ell}", "e94b", dt0 - 1))
    entries.append(_gt("levels-ordered", "e94b", plan.kappa2 - plan.kappa1))

    # family-1 norm-contraction hypotheses
    chi1, kap1 = plan.chi1, plan.kappa1
    entries.append(_ge("lowdeg-1", "e887", Fraction(top.delta) - Fraction(2, kap1)))
    for j, f in enumerate(spec.forcing):
        entries.append(_ge(f"forcing-deg-1-j{j}", "e887", (f.b - k01 - g1) - 1))
    for i, t in enumerate(spec.p2):
        e = t.k + g1 - k01
        entries.append(
            _ge(f"quad-weight-1-l{i}", "e887", (chi1 + alpha) * (e - kap1 * top.delta + 1) - chi1 * e)
        )
    for i, t in enumerate(spec.p3):
        e = t.k + g1 - k02
        entries.append(
            _ge(f"quadcubic-weight-1-l{i}", "e887", (chi1 + alpha) * (e - kap1 * top.delta + 1) - chi1 * e)
        )
    for ell, op in enumerate(spec.ops, start=1):
        if ell < D:
            entries.append(
                _ge(f"op-room-1-l{ell}", "e896", Fraction(top.delta) - Fraction(1, kap1) - op.delta)
            )
        for q2 in range(1, op.delta + 1):
            q1 = op.delta - q2
            if ell == D and q1 == 0:
                continue
            dshift = plan.shift1[(ell, q1, q2)]
            margin = (
                op.Delta
                + alpha * (op.delta - op.d)
                + beta
                + (chi1 + alpha) * kap1 * (Fraction(dshift, kap1) + q2 - top.delta + Fraction(1, kap1))
                - chi1 * (op.d - k01 - op.delta)
            )
            tag = "e903" if ell == D else "e896"
            entries.append(_ge(f"op-weight-1-l{ell}-q{q1}{q2}", tag, margin))

    # family-2 analogues (equation-derived exponents)
    chi2, kap2 = plan.chi2, plan.kappa2
    entries.append(_ge("lowdeg-2", "e887b", Fraction(top.delta) - Fraction(2, kap2)))
    for j, f in enumerate(spec.forcing):
        entries.append(_ge(f"forcing-deg-2-j{j}", "e887b", (f.b - base2 - g2) - 1))
    for i, t in enumerate(spec.p2):
        e = t.k + g2 - base2
        entries.append(
            _ge(f"quad-weight-2-l{i}", "e887b", (chi2 + alpha) * (e - kap2 * top.delta + 1) - chi2 * e)
        )
    for i, t in enumerate(spec.p3):
        e = t.k + g2 - k02
        entries.append(
            _ge(f"quadcubic-weight-2-l{i}", "e887b", (chi2 + alpha) * (e - kap2 * top.delta + 1) - chi2 * e)
        )
    for ell, op in enumerate(spec.ops, start=1):
        if ell < D:
            entries.append(
                _ge(f"op-room-2-l{ell}", "e896b", Fraction(top.delta) - Fraction(1, kap2) - op.delta)
            )
        for q2 in range(1, op.delta + 1):
            q1 = op.delta - q2
            if ell == D and q1 == 0:
                continue
            dshift = plan.shift2[(ell, q1, q2)]
            margin = (
                op.Delta
                + alpha * (op.delta - op.d)
                + beta
                + (chi2 + alpha) * kap2 * (Fraction(dshift, kap2) + q2 - top.delta + Fraction(1, kap2))
                - chi2 * (op.d - base2 - op.delta)
            )
            tag = "e903b" if ell == D else "e896b"
            entries.append(_ge(f"op-weight-2-l{ell}-q{q1}{q2}", tag, margin))

    # cubic-dominates-quadratic transfer (exact consequence, reported)
    for i, t in enumerate(spec.p3):
        lhs = (chi1 + alpha) * (t.k + g1 - k02 - kap1 * top.delta + 1) - chi1 * (t.k + g1 - k02)
        rhs = (chi1 + alpha) * (t.k + 2 * g1 - k01 - kap1 * top.delta + 1) - chi1 * (t.k + 2 * g1 - k01)
        entries.append(_ge(f"transfer-l{i}", "lema887", rhs - lhs, gating=False))
    # family-1 bounds imply family-2 operator bounds (reported consequence)
    for ell, op in enumerate(spec.ops[:-1], start=1):
        for q2 in range(1, op.delta + 1):
            q1 = op.delta - q2
            m1 = (
                (chi1 + alpha) * kap1 * (Fraction(plan.shift1[(ell, q1, q2)], kap1) + q2 - top.delta + Fraction(1, kap1))
                - chi1 * (op.d - k01 - op.delta)
            )
            m2 = (
                (chi2 + alpha) * kap2 * (Fraction(plan.shift2[(ell, q1, q2)], kap2) + q2 - top.delta + Fraction(1, kap2))
                - chi2 * (op.d - base2 - op.delta)
            )
            entries.append(_ge(f"transfer-op-l{ell}-q{q1}{q2}", "e1749", m1 - m2, gating=False))

    # exact identities of the plan
    entries.append(_eq("identity-base", "e1226", (k01 - base2) - top.delta * (plan.kappa2 - plan.kappa1)))
    for (ell, q1, q2), v in plan.shift1.items():
        w = plan.shift2[(ell, q1, q2)]
        entries.append(
            _eq(f"identity-shift-l{ell}-q{q1}{q2}", "star1222", (k01 - base2) - (q2 * (kap2 - kap1) + w - v))
        )
    entries.append(_eq("shift1-top-zero", "e287", plan.shift1[(D, 0, top.delta)]))
    entries.append(_eq("shift2-top-zero", "e287b", plan.shift2[(D, 0, top.delta)]))

    return ConstraintReport(tuple(entries))


def validate_problem(spec: ProblemSpec, alpha, beta, gamma1, gamma2, sector_slack=0.1):
    """Full validation even when the level derivation itself fails.

    Returns (report, plan-or-None).  An infeasible derivation adds a failing
    ``plan-feasible`` entry carrying the reason, on top of the structural
    checks that do not need the plan.
    """
    try:
        plan = derive_plan(spec, alpha, beta, gamma1, gamma2)
    except PlanInfeasibleError as exc:
        entries = structural_entries(spec, alpha, beta, gamma1, gamma2, sector_slack)
        entries.append(ConstraintEntry("plan-feasible", "e94", False, float("-inf"), str(exc)))
        return ConstraintReport(tuple(entries)), None
    return check_all(spec, plan, sector_slack), plan


def _no_real_root(coeffs, tol=1e-9):
    """True when the polynomial x -> P(ix) has no real zero."""
    c = np.array([complex(v) * (1j**i) for i, v in enumerate(coeffs)], dtype=complex)
    deg = _poly_degree(c)
    if deg <= 0:
        return c[0] != 0
    roots = np.roots(c[: deg + 1][::-1])
    return bool(np.all(np.abs(roots.imag) > tol))


def gevrey_order_inequality(plan: ParameterPlan):
    """(chi1+alpha) kappa1 <= (chi2+alpha) kappa2, with both values."""
    return plan.gevrey1 <= plan.gevrey2, plan.gevrey1, plan.gevrey2


# -- the polynomial data as series -------------------------------------------


def p_zero_series(spec, plan, lam) -> TruncSeries:
    """The zero-weight prefix of p_lam as an exact polynomial in T."""
    s_lam = plan.s[lam - 1]
    return TruncSeries.from_dict({t.k: t.a for t in spec.p(lam)[: s_lam + 1]})


def p_upper_terms(spec, plan, lam):
    """[(a, weight, k)] for the strictly positive-weight terms of p_lam."""
    s_lam = plan.s[lam - 1]
    return [
        (t.a, weight(t, lam, plan.alpha, plan.beta), t.k)
        for t in spec.p(lam)[s_lam + 1 :]
    ]
