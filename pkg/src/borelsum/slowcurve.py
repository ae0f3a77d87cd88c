"""Algebraic slow-curve branches of A U^2 + B U + C = 0 and their tail series.

A, B, C are the zero-perturbation parts of the three nonlinearity
polynomials.  Under the exponent condition that the discriminant's cross
term enters strictly above the square of the middle term, the two roots
have leading monomials -C_lead/B_lead and -B_lead/A_lead and analytic
tails J with J(0) = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import TruncSeries, cauchy_mul, recip_one_plus, sqrt_one_plus


class SlowCurveError(ValueError):
    pass


def _leading(poly: TruncSeries):
    eff = poly.effective_min_degree()
    if eff is None:
        raise SlowCurveError("zero polynomial where a nonzero leading term is required")
    return eff, poly[eff]


@dataclass(frozen=True)
class ABCTriple:
    """The three coefficient polynomials, lowest exponents k3 <= ... as given."""

    A: TruncSeries
    B: TruncSeries
    C: TruncSeries

    def __post_init__(self):
        for name, poly in (("A", self.A), ("B", self.B), ("C", self.C)):
            eff = poly.effective_min_degree()
            if eff is None:
                raise SlowCurveError(f"{name} must have a nonzero leading coefficient")

    @property
    def exponents(self):
        """(k_{0,3}, k_{0,2}, k_{0,1}) leading exponents of A, B, C."""
        return (_leading(self.A)[0], _leading(self.B)[0], _leading(self.C)[0])

    def exponent_condition_margins(self):
        """Margins of k_{l,2}+k_{0,2} > k_{0,3}+k_{0,1} > 2 k_{0,2} (positive = pass)."""
        k3, k2, k1 = self.exponents
        margins = [k3 + k1 - 2 * k2]
        for e in self.B.degrees():
            if e > k2 and abs(self.B[e]) > 0:
                margins.append(e + k2 - (k3 + k1))
        return margins

    def check_gap_condition(self):
        # the branch construction itself only needs the middle gap; the
        # stronger two-sided exponent condition is validated with the rest of
        # the problem hypotheses
        k3, k2, k1 = self.exponents
        if k3 + k1 - 2 * k2 <= 0:
            raise SlowCurveError(
                f"exponent gap condition violated: k3+k1-2k2 = {k3 + k1 - 2 * k2}"
            )


@dataclass(frozen=True)
class SlowCurveBranch:
    """U0(T) = leading_coeff * T^leading_exponent * (1 + tail(T)), tail(0) = 0."""

    leading_exponent: int
    leading_coeff: complex
    tail: TruncSeries
    which: int

    def __post_init__(self):
        eff = self.tail.effective_min_degree()
        if eff is not None and eff < 1:
            raise SlowCurveError("tail must vanish at the origin")

    def as_series(self) -> TruncSeries:
        """The branch as a (finite Laurent) series, to the tail's order."""
        one_plus = TruncSeries.from_dict({0: 1.0}) + self.tail
        return (one_plus * self.leading_coeff).shift(self.leading_exponent)

    def evaluate(self, t, tail_tol=1e-10):
        """Value at t; errors if the tail's last term is not negligible there."""
        t = complex(t)
        tail_top = self.tail.top_degree
        last = abs(self.tail[tail_top]) * abs(t) ** tail_top if tail_top >= 1 else 0.0
        if last > tail_tol * max(1.0, abs(1.0 + self.tail.evaluate(t))):
            raise SlowCurveError(f"|t| = {abs(t)} outside the tail trust radius")
        return self.leading_coeff * t**self.leading_exponent * (1.0 + self.tail.evaluate(t))

    def trust_radius(self, tail_tol=1e-10):
        top = self.tail.top_degree
        c = abs(self.tail[top]) if top >= 1 else 0.0
        if c == 0.0:
            return np.inf
        return float((tail_tol / c) ** (1.0 / top))


def _strip_unit_constant(s: TruncSeries) -> TruncSeries:
    """s = 1 + (positive-degree part); return that part, dropping float dust."""
    if s.effective_min_degree() is None or s.effective_min_degree() < 0:
        raise SlowCurveError("expected a series with unit constant term")
    if abs(s[0] - 1.0) > 1e-12:
        raise SlowCurveError(f"expected unit constant term, got {s[0]}")
    rest = {d: s[d] for d in s.degrees() if d >= 1}
    return TruncSeries.from_dict(rest, s.order)


def build_abc(p1_zero: TruncSeries, p2_zero: TruncSeries, p3_zero: TruncSeries) -> ABCTriple:
    """Assemble the triple from the zero-perturbation parts of the nonlinearity.

    The arguments are the polynomials multiplying U, U^2, U^3 in that order;
    A is the cubic's coefficient, C the linear one.
    """
    return ABCTriple(A=p3_zero, B=p2_zero, C=p1_zero)


def branch(triple: ABCTriple, which: int, order: int) -> SlowCurveBranch:
    """Expand branch 1 (-B + sqrt(D))/(2A) or branch 2 (-B - sqrt(D))/(2A).

    The discriminant is factored as B_lead^2 T^{2 k2} (1 + u) with u of
    positive degree (guaranteed by the exponent gap condition), and the
    square root branch is the one with constant term +1.
    """
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    triple.check_gap_condition()
    k3, a03 = _leading(triple.A)
    k2, a02 = _leading(triple.B)
    k1, a01 = _leading(triple.C)

    # work to enough internal order that the tail is good through `order`
    guard = order + (k3 + k1 - 2 * k2) + max(k3 - k2, 0) + 2
    disc = cauchy_mul(triple.B, triple.B) - 4.0 * cauchy_mul(triple.A, triple.C)
    u = _strip_unit_constant((disc * (1.0 / (a02 * a02))).shift(-2 * k2))
    root = sqrt_one_plus(u, guard)

    sign = 1.0 if which == 1 else -1.0
    numer = (root * sign * a02).shift(k2) - triple.B
    a_tilde = _strip_unit_constant((triple.A * (1.0 / a03)).shift(-k3))
    inv_a = recip_one_plus(a_tilde, guard)
    u_series = cauchy_mul(numer, inv_a) * (1.0 / (2.0 * a03))
    u_series = u_series.shift(-k3)

    if which == 1:
        lead_exp, lead_coeff = k1 - k2, -a01 / a02
    else:
        lead_exp, lead_coeff = k2 - k3, -a02 / a03

    got = u_series[lead_exp]
    if abs(got - lead_coeff) > 1e-9 * abs(lead_coeff):
        raise SlowCurveError(
            f"branch {which}: leading coefficient {got} != expected {lead_coeff}"
        )
    head = [abs(u_series[d]) for d in range(u_series.min_degree, lead_exp)]
    if head and max(head) > 1e-9 * abs(lead_coeff):
        raise SlowCurveError(
            f"branch {which}: nonzero coefficients below the leading exponent {lead_exp}"
        )

    normalized = (u_series * (1.0 / lead_coeff)).shift(-lead_exp).truncate(order)
    # degrees <= 0 were verified to be head dust above; drop them structurally
    tail = TruncSeries.from_dict(
        {d: normalized[d] for d in normalized.degrees() if d >= 1}, order
    )
    return SlowCurveBranch(lead_exp, lead_coeff, tail, which)


def verify_branch(triple: ABCTriple, br: SlowCurveBranch):
    """Residual series A U^2 + B U + C and its relative size.

    Returns (residual, rel_max) where rel_max is the largest residual
    coefficient relative to the largest coefficient among the three
    summands (the natural scale of the cancellation).
    """
    u = br.as_series()
    u2 = cauchy_mul(u, u)
    terms = [cauchy_mul(triple.A, u2), cauchy_mul(triple.B, u), triple.C]
    resid = terms[0] + terms[1] + terms[2]
    scale = max(t.max_abs() for t in terms)
    return resid, resid.max_abs() / max(scale, 1e-300)


def vieta_leading_checks(triple: ABCTriple, b1: SlowCurveBranch, b2: SlowCurveBranch):
    """Leading-order product/sum versus C/A and -B/A; returns dict of rel errors."""
    k3, a03 = _leading(triple.A)
    k2, a02 = _leading(triple.B)
    k1, a01 = _leading(triple.C)
    prod_coeff = b1.leading_coeff * b2.leading_coeff
    out = {
        "product_exponent": (b1.leading_exponent + b2.leading_exponent) - (k1 - k3),
        "product_coeff": abs(prod_coeff - a01 / a03) / abs(a01 / a03),
    }
    # the sum's leading term is the branch with the smaller exponent
    lead = b1 if b1.leading_exponent < b2.leading_exponent else b2
    out["sum_exponent"] = lead.leading_exponent - (k2 - k3)
    out["sum_coeff"] = abs(lead.leading_coeff - (-a02 / a03)) / abs(a02 / a03)
    return out
