import numpy as np
import pytest

from borelsum.series import TruncSeries, cauchy_mul
from borelsum.slowcurve import (
    ABCTriple,
    SlowCurveError,
    branch,
    build_abc,
    verify_branch,
    vieta_leading_checks,
)


def poly(d):
    return TruncSeries.from_dict(d)


def monomial_triple():
    # A = T, B = T, C = T^2  (k3=1, k2=1, k1=2: gap 2+1 > 2*1)
    return build_abc(poly({2: 1.0}), poly({1: 1.0}), poly({1: 1.0}))


def example_triple():
    # the worked-example data at zero perturbation:
    # C = T^2 + T^3, B = T^6, A = T^14
    return build_abc(poly({2: 1.0, 3: 1.0}), poly({6: 1.0}), poly({14: 1.0}))


class TestBuild:
    def test_monomial_read(self):
        t = monomial_triple()
        assert t.exponents == (1, 1, 2)

    def test_example_read(self):
        t = example_triple()
        assert t.exponents == (14, 6, 2)
        assert t.C[2] == 1.0 and t.C[3] == 1.0

    def test_zero_leading_rejected(self):
        with pytest.raises(SlowCurveError):
            build_abc(TruncSeries.zero(), poly({1: 1.0}), poly({1: 1.0}))


class TestBranch:
    def test_hand_expansion_branch1(self):
        # U01 = (-T + T sqrt(1-4T)) / (2T) = -T - T^2 - 2T^3 + O(T^4)
        b = branch(monomial_triple(), 1, 6)
        assert b.leading_exponent == 1
        assert b.leading_coeff == pytest.approx(-1.0)
        u = b.as_series()
        assert u[1] == pytest.approx(-1.0, abs=1e-12)
        assert u[2] == pytest.approx(-1.0, abs=1e-12)
        assert u[3] == pytest.approx(-2.0, abs=1e-12)
        # J1 = T + 2T^2 + O(T^3)
        assert b.tail[1] == pytest.approx(1.0, abs=1e-12)
        assert b.tail[2] == pytest.approx(2.0, abs=1e-12)

    def test_branch2_leading(self):
        b = branch(monomial_triple(), 2, 6)
        assert b.leading_exponent == 0
        assert b.leading_coeff == pytest.approx(-1.0)
        resid, rel = verify_branch(monomial_triple(), b)
        assert rel < 1e-12

    def test_degenerate_geometric(self):
        # the 4AC cross term sits far beyond the working order, so the square
        # root degenerates to B itself and U01 = -C/B = -C/B_lead * geometric
        t = build_abc(poly({40: 1.0}), poly({1: 1.0, 2: 1.0}), poly({3: 1.0}))
        b = branch(t, 1, 6)
        assert b.leading_exponent == 39
        for n in range(1, 5):
            assert b.tail[n] == pytest.approx((-1.0) ** n, rel=1e-10)

    def test_gap_violation_rejected(self):
        # k3 + k1 = 2 k2 violates the strict gap
        t = build_abc(poly({2: 1.0}), poly({2: 1.0}), poly({2: 1.0}))
        with pytest.raises(SlowCurveError):
            branch(t, 1, 4)

    def test_trust_radius(self):
        b = branch(monomial_triple(), 1, 10)
        r = b.trust_radius()
        assert 0 < r < 1
        b.evaluate(r * 0.5)
        with pytest.raises(SlowCurveError):
            b.evaluate(4.0)


class TestVerify:
    def test_example_both_branches(self):
        t = example_triple()
        for which in (1, 2):
            b = branch(t, which, 24)
            resid, rel = verify_branch(t, b)
            assert rel < 1e-9

    def test_corrupted_branch_detected(self):
        t = monomial_triple()
        b = branch(t, 1, 8)
        bad_tail = b.tail + TruncSeries.from_dict({3: 1e-3}, b.tail.order)
        from borelsum.slowcurve import SlowCurveBranch

        bad = SlowCurveBranch(b.leading_exponent, b.leading_coeff, bad_tail, 1)
        _, rel_clean = verify_branch(t, b)
        resid, rel = verify_branch(t, bad)
        assert rel > 1e-8 and rel > 1e4 * rel_clean
        # the first degree where the residual wakes up is B * (perturbed term)
        spike_floor = 1e-6
        first = next(d for d in resid.degrees() if abs(resid[d]) > spike_floor)
        k2 = t.exponents[1]
        assert first == k2 + b.leading_exponent + 3

    def test_vieta(self):
        t = example_triple()
        b1, b2 = branch(t, 1, 12), branch(t, 2, 12)
        checks = vieta_leading_checks(t, b1, b2)
        assert checks["product_exponent"] == 0
        assert checks["product_coeff"] < 1e-12
        assert checks["sum_exponent"] == 0
        assert checks["sum_coeff"] < 1e-12


def random_feasible_triple(rng, max_order=24):
    """Random polynomials satisfying the exponent gap condition."""
    k2 = int(rng.integers(1, 4))
    gap = int(rng.integers(1, 4))
    k1_plus_k3 = 2 * k2 + gap
    k3 = int(rng.integers(0, k1_plus_k3 + 1))
    k1 = k1_plus_k3 - k3

    def rand_poly(lead_k, n_extra, min_extra_deg):
        d = {lead_k: complex(rng.normal(), rng.normal()) or 1.0}
        while abs(d[lead_k]) < 0.3:
            d[lead_k] = complex(rng.normal(), rng.normal())
        for _ in range(n_extra):
            d[lead_k + int(rng.integers(min_extra_deg, min_extra_deg + 5))] = complex(
                rng.normal(), rng.normal()
            )
        return TruncSeries.from_dict(d)

    # B's later exponents must clear the gap strictly
    a = rand_poly(k3, int(rng.integers(0, 3)), 1)
    b = rand_poly(k2, int(rng.integers(0, 3)), gap + 1)
    c = rand_poly(k1, int(rng.integers(0, 3)), 1)
    return build_abc(c, b, a)


class TestRandomTriples:
    def test_residuals_smoke(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            t = random_feasible_triple(rng)
            for which in (1, 2):
                b = branch(t, which, 24)
                _, rel = verify_branch(t, b)
                assert rel < 1e-9
