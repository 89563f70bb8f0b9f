import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from trimoment import densities as dn
from trimoment import ensembles as en
from trimoment import moments as mo


class TestUllman:
    def test_semicircle_at_zero(self):
        assert dn.ullman_pdf(0.0, 0.5) == pytest.approx(1 / math.pi)

    def test_quarter_at_zero(self):
        assert dn.ullman_pdf(0.0, 0.25) == pytest.approx(2 / (3 * math.pi))

    def test_alpha_one_diverges_at_zero(self):
        assert dn.ullman_pdf(0.0, 1.0) == math.inf
        assert dn.ullman_pdf_integral(0.0, 2.0) == math.inf

    @pytest.mark.parametrize("alpha", [0.25, 0.5, 0.7, 1.0, 2.0])
    def test_outside_support(self, alpha):
        assert np.all(dn.ullman_pdf(np.array([-3.0, -2.0, 2.0, 2.5]), alpha) == 0.0)

    def test_rejects_bad_alpha(self):
        with pytest.raises(ValueError):
            dn.ullman_pdf(0.3, 0.0)
        with pytest.raises(ValueError):
            dn.ullman_pdf(0.3, -1.0)

    @pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0])
    def test_closed_forms_match_integral(self, alpha):
        x = np.linspace(-2.0, 2.0, 1002)[1:-1]
        x = x[x != 0.0]
        assert np.max(np.abs(dn.ullman_pdf(x, alpha) - dn.ullman_pdf_integral(x, alpha))) < 1e-9

    def test_zero_value_formula(self):
        # h(0) = 1 / (2 pi (1 - alpha)) for alpha < 1
        for a in (0.2, 0.4, 0.8):
            assert dn.ullman_pdf_integral(0.0, a) == pytest.approx(1 / (2 * math.pi * (1 - a)))
        # approach to h(0) is like |x|**(1/alpha - 1)
        for a in (0.2, 0.4):
            assert dn.ullman_pdf_integral(1e-9, a) == pytest.approx(1 / (2 * math.pi * (1 - a)), rel=1e-6)

    @pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0, 2.0])
    def test_mass(self, alpha):
        assert dn.measure_moment(dn.ullman_measure(alpha), 0) == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("alpha", [0.25, 0.5, 0.8, 1.0, 2.0])
    def test_moments(self, alpha):
        mu = dn.ullman_measure(alpha)
        for k in range(2, 9, 2):
            assert dn.measure_moment(mu, k) == pytest.approx(math.comb(k, k // 2) / (alpha * k + 1), abs=1e-5)

    def test_semicircle_fourth(self):
        assert dn.measure_moment(dn.ullman_measure(0.5), 4) == pytest.approx(2.0, abs=1e-6)

    def test_mixture_representation(self):
        # h_alpha(x) = int_0^1 t**-alpha arcsine(x / t**alpha) dt, by independent quadrature
        alpha, x = 0.6, 0.7
        f = lambda t: t ** -alpha * dn.arcsine_pdf(x / t ** alpha)
        t0 = (x / 2) ** (1 / alpha)
        want, _ = integrate.quad(f, t0, 1.0, limit=200)
        assert dn.ullman_pdf(x, alpha) == pytest.approx(want, rel=1e-7)

    def test_arcsine(self):
        assert dn.arcsine_pdf(0.0) == pytest.approx(1 / (2 * math.pi))
        val, _ = integrate.quad(dn.arcsine_pdf, -2, 2)
        assert val == pytest.approx(1.0, abs=1e-7)


class TestSampler:
    def test_second_moment(self):
        x = dn.ullman_sample(0.5, np.random.default_rng(1), 10 ** 6)
        assert np.mean(x ** 2) == pytest.approx(1.0, abs=0.01)

    def test_tiny_alpha(self):
        x = dn.ullman_sample(1e-9, np.random.default_rng(2), 200_000)
        for k in (2, 4):
            se = np.std(x ** k) / math.sqrt(x.size)
            assert abs(np.mean(x ** k) - math.comb(k, k // 2)) < 4 * se

    @settings(max_examples=10, deadline=None)
    @given(st.floats(0.1, 3.0), st.integers(0, 2 ** 32 - 1))
    def test_odd_moments_vanish(self, alpha, seed):
        x = dn.ullman_sample(alpha, np.random.default_rng(seed), 20_000)
        for k in (1, 3):
            se = np.std(x ** k) / math.sqrt(x.size)
            assert abs(np.mean(x ** k)) < 4.5 * se

    def test_reproducible(self):
        a = dn.ullman_sample(0.5, np.random.default_rng(7), 5)
        b = dn.ullman_sample(0.5, np.random.default_rng(7), 5)
        assert np.array_equal(a, b)


class TestChebyshev:
    def test_small(self):
        assert dn.chebyshev_block_eigenvalues(0).tolist() == [0.0]
        assert dn.chebyshev_block_eigenvalues(1) == pytest.approx([1.0, -1.0])

    @pytest.mark.parametrize("N", range(0, 21))
    def test_against_eigensolver(self, N):
        T = en.TridiagonalMatrix(np.zeros(N + 1), np.ones(N))
        got = np.sort(dn.chebyshev_block_eigenvalues(N))
        assert np.max(np.abs(got - en.eigenvalues(T))) < 1e-12
        assert np.max(np.abs(got - np.linalg.eigvalsh(T.to_dense()))) < 1e-12

    @pytest.mark.parametrize("N", range(0, 21))
    def test_power_sums(self, N):
        eta = dn.chebyshev_block_eigenvalues(N)
        A = np.diag(np.ones(N), 1) + np.diag(np.ones(N), -1)
        P = np.eye(N + 1, dtype=np.int64)
        Ai = A.astype(np.int64)
        for k in range(0, 11):
            assert abs(np.sum(eta ** k) - np.trace(P)) < 1e-10
            P = P @ Ai

    def test_descending(self):
        v = dn.chebyshev_block_eigenvalues(9)
        assert np.all(np.diff(v) < 0)


class TestBernoulli:
    def test_theta_zero(self):
        mu = dn.bernoulli_measure(0.0, 0.5)
        assert mu.atoms == ((0.0, 1.0),)
        assert dn.measure_moment(mu, 0) == 1.0
        assert dn.measure_moment(mu, 2) == 0.0

    def test_theta_one_is_ullman(self):
        mu = dn.bernoulli_measure(1.0, 0.7)
        x = np.linspace(-1.9, 1.9, 7)
        assert np.array_equal(mu.pdf(x), dn.ullman_pdf(x, 0.7))

    def test_atom(self):
        assert dn.bernoulli_measure(0.5, 0.5).atoms[0][1] == pytest.approx(1 / 3)

    def test_rejects_theta(self):
        with pytest.raises(ValueError):
            dn.bernoulli_measure(1.2, 0.5)
        with pytest.raises(ValueError):
            dn.bernoulli_measure(-0.1, 0.5)

    @pytest.mark.parametrize("theta,alpha", [(0.3, 0.5), (0.5, 0.5), (0.5, 1.0), (0.8, 0.25)])
    def test_even_moments(self, theta, alpha):
        N = math.ceil(math.log(1e-8) / math.log(theta)) + 1
        mu = dn.bernoulli_measure(theta, alpha, N_max=N)
        ms = mo.MomentSequence.bernoulli(theta, 8, alpha)
        assert dn.measure_moment(mu, 2) == pytest.approx(2 * theta / (2 * alpha + 1), abs=1e-4)
        for k in (0, 4, 6):
            assert dn.measure_moment(mu, k) == pytest.approx(mo.limit_moment(k, ms), abs=1e-4)

    @pytest.mark.parametrize("k", [1, 3, 5])
    def test_odd_moments(self, k):
        assert abs(dn.measure_moment(dn.bernoulli_measure(0.6, 0.5), k)) < 1e-8

    def test_truncation_reported(self):
        theta = 0.5
        mu = dn.bernoulli_measure(theta, 0.5, N_max=10)
        mass = dn.measure_moment(mu, 0)
        assert mass + mu.truncation_error == pytest.approx(1.0, abs=1e-10)

    def test_default_n_max(self):
        for theta in (0.1, 0.5, 0.9, 0.99):
            N = dn.default_n_max(theta)
            assert theta ** N < 1e-10 <= theta ** (N - 1)
        assert dn.default_n_max(1 - 1e-12) == 10_000

    def test_nonnegative(self):
        x = np.linspace(-2.5, 2.5, 2001)
        assert np.all(dn.bernoulli_measure(0.7, 0.5).pdf(x) >= 0)

    def test_continuity_with_closure(self):
        theta, alpha = 1 - 1e-12, 0.5
        x = np.linspace(-2.0, 2.0, 8001)
        h = dn.ullman_pdf(x, alpha)
        diff = np.abs(dn.bernoulli_measure(theta, alpha, tail_closure=True).pdf(x) - h)
        assert np.trapezoid(diff, x) < 1e-3

    def test_truncated_series_alone_is_far(self):
        # at theta = 1 - 1e-12 no feasible N_max resolves the series
        theta, alpha = 1 - 1e-12, 0.5
        x = np.linspace(-2.0, 2.0, 4001)
        diff = np.abs(dn.bernoulli_measure(theta, alpha).pdf(x) - dn.ullman_pdf(x, alpha))
        assert np.trapezoid(diff, x) > 0.5

    def test_closure_converges_in_theta(self):
        alpha = 0.5
        x = np.linspace(-2.0, 2.0, 8001)
        h = dn.ullman_pdf(x, alpha)
        errs = [np.trapezoid(np.abs(dn.bernoulli_measure(t, alpha, tail_closure=True).pdf(x) - h), x)
                for t in (0.9, 0.99, 0.999)]
        assert errs[0] > errs[1] > errs[2]
