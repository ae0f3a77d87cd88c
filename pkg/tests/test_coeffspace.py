import numpy as np
import pytest

from borelsum.coeffspace import (
    CoeffFn,
    GridMismatchError,
    MGrid,
    NormParams,
    OutOfStripError,
    convolve,
    default_grid,
    f_norm,
    f_norm_weight,
    fourier_inverse,
    norm_beta_mu,
    load_csv,
    save_csv,
)

BETA, MU = 1.0, 2.0


def grid(m_max=10.0, n=801):
    return MGrid(m_max=m_max, n_points=n)


def fn(callable_, g=None, beta=BETA, mu=MU):
    g = grid() if g is None else g
    return CoeffFn.from_callable(callable_, g, beta, mu)


class TestGrid:
    def test_spacing_and_symmetry(self):
        g = grid(8.0, 17)
        assert g.spacing == pytest.approx(1.0)
        assert np.allclose(g.nodes, -g.nodes[::-1])

    def test_invalid(self):
        with pytest.raises(ValueError):
            MGrid(m_max=-1.0, n_points=11)
        with pytest.raises(ValueError):
            MGrid(m_max=1.0, n_points=10)  # even
        with pytest.raises(ValueError):
            MGrid(m_max=1.0, n_points=1)

    def test_default_grid_tail(self):
        g = default_grid(beta=2.0)
        assert g.m_max == pytest.approx(8.0)
        assert g.n_points == 513


class TestNorm:
    def test_zero(self):
        assert norm_beta_mu(fn(lambda m: 0.0)) == 0.0

    def test_weight_cancellation(self):
        h = fn(lambda m: (1 + abs(m)) ** -MU * np.exp(-BETA * abs(m)))
        assert norm_beta_mu(h) == pytest.approx(1.0, rel=1e-12)

    def test_grid_max_vs_continuous_max(self):
        # h = exp(-2 beta |m|):  weighted value (1+|m|)^mu exp(-beta |m|).
        h = fn(lambda m: np.exp(-2 * BETA * abs(m)))
        expected_nodes = (1 + np.abs(h.grid.nodes)) ** MU * np.exp(-BETA * np.abs(h.grid.nodes))
        assert norm_beta_mu(h) == pytest.approx(float(np.max(expected_nodes)), rel=1e-12)
        # continuous maximizer of (1+m)^2 e^{-m} sits at m = mu - 1 = 1
        xs = np.linspace(0.0, 10.0, 2_000_001)
        cont = float(np.max((1 + xs) ** MU * np.exp(-BETA * xs)))
        assert norm_beta_mu(h) == pytest.approx(cont, rel=1e-4)

    def test_norm_axioms_on_random_functions(self):
        rng = np.random.default_rng(0)
        g = grid(6.0, 101)
        for _ in range(25):
            a = CoeffFn(g, rng.normal(size=101) + 1j * rng.normal(size=101), BETA, MU)
            b = CoeffFn(g, rng.normal(size=101) + 1j * rng.normal(size=101), BETA, MU)
            lam = complex(rng.normal(), rng.normal())
            tri = norm_beta_mu(CoeffFn(g, a.values + b.values, BETA, MU))
            assert tri <= norm_beta_mu(a) + norm_beta_mu(b) + 1e-12
            hom = norm_beta_mu(CoeffFn(g, lam * a.values, BETA, MU))
            assert hom == pytest.approx(abs(lam) * norm_beta_mu(a), rel=1e-12)

    def test_nonfinite_rejected(self):
        g = grid(1.0, 3)
        with pytest.raises(ValueError):
            CoeffFn(g, np.array([1.0, np.nan, 0.0]), BETA, MU)
        with pytest.raises(ValueError):
            CoeffFn(g, np.array([1.0, np.inf, 0.0]), BETA, MU)

    def test_weight_hypotheses(self):
        g = grid(1.0, 3)
        with pytest.raises(ValueError):
            CoeffFn(g, np.zeros(3), -1.0, MU)
        with pytest.raises(ValueError):
            CoeffFn(g, np.zeros(3), BETA, 1.0)


class TestConvolve:
    def test_zero(self):
        z = fn(lambda m: 0.0)
        b = fn(lambda m: np.exp(-abs(m)))
        assert np.all(convolve(z, b).values == 0)

    def test_indicator_triangle(self):
        # conv of indicator of [-1,1] with itself: triangle peak 2 at 0, 0 at |m|>=2
        # (midpoint value at the jump keeps the trapezoid rule second order)
        g = grid(10.0, 4001)
        ind = fn(lambda m: 1.0 if abs(m) < 1 else (0.5 if abs(m) == 1 else 0.0), g)
        c = convolve(ind, ind)
        i0 = g.n_points // 2
        # only first-order accurate at the coincident jump nodes
        assert c.values[i0].real == pytest.approx(2.0, rel=5e-3)
        m_idx = int(round((2.0 + g.m_max) / g.spacing))
        assert abs(c.values[m_idx]) < 2e-2
        # exact triangle in between
        m_half = int(round((1.0 + g.m_max) / g.spacing))
        assert c.values[m_half].real == pytest.approx(1.0, rel=1e-2)

    def test_gaussian_closed_form(self):
        # e^{-m^2/2} * e^{-m^2/2} = sqrt(pi) e^{-m^2/4}
        g = grid(12.0, 1201)
        ga = fn(lambda m: np.exp(-(m**2) / 2), g)
        c = convolve(ga, ga)
        expected = np.sqrt(np.pi) * np.exp(-(g.nodes**2) / 4)
        assert np.max(np.abs(c.values - expected)) / np.sqrt(np.pi) < 1e-6

    def test_grid_mismatch(self):
        a = fn(lambda m: 1.0, grid(5.0, 101))
        b = fn(lambda m: 1.0, grid(5.0, 201))
        with pytest.raises(GridMismatchError):
            convolve(a, b)

    def test_banach_algebra_bound_measured(self):
        # ||f*g|| <= C1 ||f|| ||g||: the constant fitted over >= 100 random
        # smooth pairs is finite and stable when the grid is refined.  The
        # random functions are drawn as parameterized callables so both grids
        # sample the same underlying pair.
        rng = np.random.default_rng(7)
        pairs = []
        for _ in range(100):
            def make():
                amp = rng.normal(size=4) + 1j * rng.normal(size=4)
                freq = rng.uniform(0.2, 2.5, size=4)
                width = rng.uniform(0.5, 2.0)

                def f(m, amp=amp, freq=freq, width=width):
                    osc = sum(a * np.cos(w * m) for a, w in zip(amp, freq))
                    return osc * np.exp(-BETA * abs(m)) * (1 + abs(m)) ** (-MU) * np.exp(-(m / (8 * width)) ** 2)

                return f

            pairs.append((make(), make()))

        def fitted_c1(n_points):
            g = MGrid(m_max=10.0, n_points=n_points)
            worst = 0.0
            for fa_fn, fb_fn in pairs:
                fa = CoeffFn.from_callable(fa_fn, g, BETA, MU)
                fb = CoeffFn.from_callable(fb_fn, g, BETA, MU)
                worst = max(worst, norm_beta_mu(convolve(fa, fb)) / (norm_beta_mu(fa) * norm_beta_mu(fb)))
            return worst

        c_coarse = fitted_c1(201)
        c_fine = fitted_c1(401)
        assert np.isfinite(c_coarse) and np.isfinite(c_fine)
        assert abs(c_fine - c_coarse) / c_coarse < 0.2


class TestFourierInverse:
    def test_zero(self):
        z = fn(lambda m: 0.0)
        assert fourier_inverse(z, 0.3 + 0.1j) == 0

    def test_gaussian_at_zero(self):
        g = grid(10.0, 1601)
        f = fn(lambda m: np.exp(-(m**2) / 2), g)
        assert fourier_inverse(f, 0.0) == pytest.approx(1.0, abs=1e-8)

    def test_exp_decay_at_zero(self):
        g = grid(60.0, 48001)
        f = CoeffFn(g, np.exp(-np.abs(g.nodes)), 0.9, MU)
        assert fourier_inverse(f, 0.0).real == pytest.approx(2.0 / np.sqrt(2 * np.pi), rel=1e-6)

    def test_out_of_strip(self):
        f = fn(lambda m: np.exp(-(m**2)))
        with pytest.raises(OutOfStripError):
            fourier_inverse(f, 0.0 + 1.5j)

    def test_derivative_identity(self):
        # d/dz F^{-1}(f) == F^{-1}(i m f)  via central difference, rel 1e-5
        g = grid(12.0, 3201)
        f = fn(lambda m: np.exp(-(m**2) / 2) * (1 + 0.3j * m), g)
        phi = CoeffFn(g, 1j * g.nodes * f.values, BETA, MU)
        for z in (0.0, 0.4, 0.2 - 0.3j, -1.1 + 0.5j):
            h = 1e-5
            lhs = (fourier_inverse(f, z + h) - fourier_inverse(f, z - h)) / (2 * h)
            rhs = fourier_inverse(phi, z)
            assert abs(lhs - rhs) / max(abs(rhs), 1e-12) < 1e-5

    def test_product_identity(self):
        # F^{-1}(f) F^{-1}(g) == F^{-1}((2pi)^{-1/2} f*g), rel 1e-5
        g = grid(14.0, 3201)
        fa = fn(lambda m: np.exp(-(m**2) / 2), g)
        fb = fn(lambda m: np.exp(-(m**2) / 3) * (1 + 0.2 * m**2) ** -1, g)
        conv = convolve(fa, fb)
        psi = CoeffFn(g, conv.values / np.sqrt(2 * np.pi), BETA, MU)
        for z in (0.0, 0.5, -0.7 + 0.4j, 0.3 - 0.2j):
            lhs = fourier_inverse(fa, z) * fourier_inverse(fb, z)
            rhs = fourier_inverse(psi, z)
            assert abs(lhs - rhs) / max(abs(rhs), 1e-14) < 1e-5


class TestFNorm:
    def params(self, kappa=1, nu=0.7, rho=2.0, **kw):
        return NormParams(nu=nu, chi=1.5, alpha=2.0, kappa=kappa, rho=rho, **kw)

    def test_zero(self):
        g = grid(6.0, 101)
        p = self.params()
        val = f_norm(lambda tau: np.zeros(101), g, BETA, MU, p, eps=0.5)
        assert val == 0.0

    def test_weight_collapse_1d(self):
        # omega(tau, m) = tau * (1+|m|)^-mu e^{-beta|m|}: the m weight cancels
        # and the norm is a pure tau max over the sample radii
        g = grid(6.0, 201)
        p = self.params(kappa=2, nu=0.4)
        shape = (1 + np.abs(g.nodes)) ** -MU * np.exp(-BETA * np.abs(g.nodes))
        val = f_norm(lambda tau: tau * shape, g, BETA, MU, p, eps=1.0)
        xs = np.abs(np.linspace(p.rho / p.n_disc, p.rho, p.n_disc))
        ref = float(np.max((1 + xs ** (2 * p.kappa)) * np.exp(-p.nu * xs**p.kappa)))
        assert val == pytest.approx(ref, rel=1e-9)

    def test_eps_scaling(self):
        # omega = tau: substituting y = |tau|/|eps|^{chi+alpha} shows the norm is
        # |eps|^{chi+alpha} times an eps-dependent 1-D maximum; check against
        # that independent evaluation
        g = grid(4.0, 51)
        p = self.params(kappa=1, nu=1.0)
        ones = np.ones(51)

        def norm_at(eps):
            return f_norm(lambda tau: tau * ones, g, BETA, MU, p, eps=eps)

        order = float(p.chi + p.alpha)
        xs = np.abs(np.linspace(p.rho / p.n_disc, p.rho, p.n_disc))
        w_m = float(np.max((1 + np.abs(g.nodes)) ** MU * np.exp(BETA * np.abs(g.nodes))))

        def ref(eps):
            scale = abs(eps) ** order
            y = xs / scale
            return scale * w_m * float(np.max((1 + y ** (2 * p.kappa)) * np.exp(-p.nu * y**p.kappa)))

        for eps in (0.9, 0.7, 0.5):
            assert norm_at(eps) == pytest.approx(ref(eps), rel=1e-9)

    def test_eps_zero_rejected(self):
        with pytest.raises(ValueError):
            f_norm_weight(np.array([1.0]), self.params(), eps=0.0)


def test_csv_roundtrip(tmp_path):
    g = grid(5.0, 41)
    h = fn(lambda m: np.exp(-abs(m)) * (1 + 2j * m), g)
    path = tmp_path / "h.csv"
    save_csv(h, path)
    back = load_csv(path)
    assert back.grid == h.grid
    assert back.beta == h.beta and back.mu == h.mu
    assert np.allclose(back.values, h.values)
