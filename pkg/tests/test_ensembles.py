import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trimoment import ensembles as en
from trimoment import fluctuations as fl
from trimoment import moments as mo


def _random_T(rng, n):
    return en.TridiagonalMatrix(rng.normal(size=n), rng.normal(size=n - 1))


class TestMatrices:
    def test_dense_layout(self):
        T = en.TridiagonalMatrix([1.0, 2.0, 3.0], [4.0, 5.0])
        A = T.to_dense()
        # d_n top-left, b_1 next to d_1 at the bottom-right
        assert A[0, 0] == 3.0 and A[2, 2] == 1.0
        assert A[2, 1] == 4.0 and A[0, 1] == 5.0

    def test_immutable(self):
        T = en.TridiagonalMatrix([1.0, 2.0], [3.0])
        with pytest.raises(ValueError):
            T.diag[0] = 5.0

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            en.TridiagonalMatrix([1.0, 2.0], [3.0, 4.0])
        with pytest.raises(ValueError):
            en.TridiagonalMatrix([1.0, np.nan], [3.0])

    def test_json_round_trip(self):
        T = _random_T(np.random.default_rng(0), 6)
        U = en.TridiagonalMatrix.from_json(T.to_json())
        assert np.array_equal(T.diag, U.diag) and np.array_equal(T.offdiag, U.offdiag)

    def test_band_dense(self):
        B = en.BandMatrix((np.array([1.0, 2.0, 3.0]), np.array([4.0, 5.0]), np.array([6.0])))
        A = B.to_dense()
        assert A[0, 2] == 6.0 and A[2, 0] == 6.0 and A[1, 2] == 5.0


class TestSampling:
    def test_beta_hermite_two(self):
        spec = en.EnsembleSpec.beta_hermite(2.0)
        rng = np.random.default_rng(5)
        b = np.array([en.sample(spec, 2, rng).offdiag[0] for _ in range(20_000)])
        assert np.mean(b ** 2) == pytest.approx(1.0, abs=4 * np.std(b ** 2) / math.sqrt(b.size))

    def test_beta_hermite_entry_laws(self):
        # E b_k^2 = k, Var d = 2 / beta
        spec = en.EnsembleSpec.beta_hermite(4.0)
        rng = np.random.default_rng(6)
        S = [en.sample(spec, 50, rng) for _ in range(2000)]
        b2 = np.mean([T.offdiag ** 2 for T in S], axis=0)
        d2 = np.mean([T.diag ** 2 for T in S])
        assert np.allclose(b2 / np.arange(1, 50), 1.0, atol=0.1)
        assert d2 == pytest.approx(0.5, rel=0.05)

    def test_bernoulli_zero(self):
        T = en.sample(en.EnsembleSpec.bernoulli_scaled(0.5, 0.0), 30, np.random.default_rng(0))
        assert np.all(T.offdiag == 0.0)

    def test_power_perturbed_deterministic(self):
        spec = en.EnsembleSpec.power_perturbed(0.7, 0.3, z_dist="zero")
        T = en.sample(spec, 20, np.random.default_rng(0))
        assert np.allclose(T.offdiag, np.arange(1, 20) ** 0.7)

    def test_invalid_specs(self):
        with pytest.raises(ValueError):
            en.EnsembleSpec.beta_hermite(0.0)
        with pytest.raises(ValueError):
            en.EnsembleSpec.power_perturbed(0.5, 0.7)
        with pytest.raises(ValueError):
            en.EnsembleSpec.bernoulli_scaled(0.5, 1.5)
        with pytest.raises(ValueError):
            en.sample(en.EnsembleSpec.beta_hermite(2.0), 0, np.random.default_rng(0))

    def test_band_w1_reduces(self):
        per = [en.BandDiagonalSpec(0.5, "normal"), en.BandDiagonalSpec(0.5, "chi")]
        B = en.sample_band(per, 10, 1, np.random.default_rng(1))
        assert B.w == 1 and B.bands[1].size == 9

    def test_band_zero(self):
        per = [en.BandDiagonalSpec(0.5, "zero")] * 3
        B = en.sample_band(per, 8, 2, np.random.default_rng(1))
        assert np.all(en.band_eigenvalues(B) == 0.0)

    def test_band_width_check(self):
        with pytest.raises(ValueError):
            en.sample_band([en.BandDiagonalSpec()] * 4, 3, 3, np.random.default_rng(0))

    def test_seed_stream_identical(self):
        spec = en.EnsembleSpec.beta_hermite(1.5)
        a = en.sample(spec, 40, np.random.default_rng(11))
        b = en.sample(spec, 40, np.random.default_rng(11))
        assert a.to_json() == b.to_json()


class TestEigenvalues:
    def test_two_by_two(self):
        assert en.eigenvalues(en.TridiagonalMatrix([0.0, 0.0], [1.0])) == pytest.approx([-1.0, 1.0], abs=1e-12)

    def test_diagonal(self):
        d = np.array([3.0, -1.0, 2.0, 0.5])
        assert np.allclose(en.eigenvalues(en.TridiagonalMatrix(d, np.zeros(3))), np.sort(d), atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(1, 60))
    def test_against_lapack(self, seed, n):
        T = _random_T(np.random.default_rng(seed), n)
        got = en.eigenvalues(T)
        want = np.linalg.eigvalsh(T.to_dense())
        assert np.max(np.abs(got - want)) <= 1e-10 * max(1.0, T.gershgorin_radius())

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(2, 80))
    def test_backward_stability(self, seed, n):
        T = _random_T(np.random.default_rng(seed), n)
        lam = en.eigenvalues(T)
        tr = T.diag.sum()
        fro = np.sum(T.diag ** 2) + 2 * np.sum(T.offdiag ** 2)
        assert abs(lam.sum() - tr) <= 1e-9 * max(1.0, np.abs(T.diag).sum())
        assert np.sum(lam ** 2) == pytest.approx(fro, rel=1e-9)

    def test_ascending(self):
        lam = en.eigenvalues(_random_T(np.random.default_rng(2), 30))
        assert np.all(np.diff(lam) >= 0)

    def test_band_against_dense(self):
        per = [en.BandDiagonalSpec(0.5, "normal")] * 4
        B = en.sample_band(per, 25, 3, np.random.default_rng(9))
        assert np.allclose(en.band_eigenvalues(B), np.linalg.eigvalsh(B.to_dense()), atol=1e-10)


class TestTracePower:
    def test_k0_and_k2(self):
        T = _random_T(np.random.default_rng(3), 7)
        for method in ("eigen", "path_sum", "banded"):
            assert en.trace_power(T, 0, method) == pytest.approx(7.0)
            want = np.sum(T.diag ** 2) + 2 * np.sum(T.offdiag ** 2)
            assert en.trace_power(T, 2, method) == pytest.approx(want, rel=1e-12)

    def test_five_by_five(self):
        T = _random_T(np.random.default_rng(4), 5)
        assert abs(en.trace_power(T, 4, "eigen") - en.trace_power(T, 4, "path_sum")) < 1e-9

    @pytest.mark.parametrize("seed", range(100))
    def test_methods_agree(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 201))
        T = _random_T(rng, n)
        norm = max(1.0, T.gershgorin_radius())
        for k in range(0, 9):
            e = en.trace_power(T, k, "eigen")
            p = en.trace_power(T, k, "path_sum")
            assert abs(e - p) <= 1e-8 * n * norm ** k
        traces = en.trace_powers(T, 8)
        dense = [np.trace(np.linalg.matrix_power(T.to_dense(), k)) for k in range(9)]
        assert np.allclose(traces, dense, rtol=1e-10, atol=1e-8)

    def test_path_sum_budget(self):
        T = _random_T(np.random.default_rng(0), 300)
        with pytest.raises(ValueError, match="budget"):
            en.trace_power(T, 8, "path_sum", en.Budget(path_sum_kn=1000))

    def test_band_traces(self):
        per = [en.BandDiagonalSpec(0.5, "normal")] * 3
        B = en.sample_band(per, 30, 2, np.random.default_rng(8))
        dense = [np.trace(np.linalg.matrix_power(B.to_dense(), k)) for k in range(7)]
        assert np.allclose(en.trace_powers(B, 6), dense, rtol=1e-10)


class TestExactExpectation:
    @pytest.mark.parametrize("beta", [1.0, 2.0, 4.0])
    def test_second_moment(self, beta):
        # E Tr A^2 = n (2 / beta) + 2 sum_k k
        n = 12
        spec = en.EnsembleSpec.beta_hermite(beta)
        assert en.expected_trace_power(spec, n, 2) == pytest.approx(n * 2 / beta + n * (n - 1))

    def test_against_mc(self):
        spec = en.EnsembleSpec.beta_hermite(2.0)
        res = en.mc_moments(spec, 20, 4, 4000, seed=3)
        want = en.expected_trace_power(spec, 20, 4) / 20 ** 3
        assert abs(res.mean[3] - want) < 4 * res.stderr[3]


class TestMonteCarlo:
    def test_semicircle(self):
        res = en.mc_moments(en.EnsembleSpec.beta_hermite(2.0), 1000, 8, 200, seed=42)
        ms = mo.MomentSequence.ones(8)
        for k, m, s in zip(res.ks, res.mean, res.stderr):
            assert abs(m - mo.limit_moment(k, ms)) < 4 * s

    def test_bernoulli_second_moment(self):
        theta = 0.4
        res = en.mc_moments(en.EnsembleSpec.bernoulli_scaled(0.5, theta), 1000, 3, 200, seed=1)
        assert abs(res.mean[1] - theta) < 4 * res.stderr[1]
        assert abs(res.mean[0]) < 4 * res.stderr[0]

    def test_reproducible_and_thread_independent(self):
        spec = en.EnsembleSpec.beta_hermite(2.0)
        a = en.mc_moments(spec, 100, 4, 20, seed=9, threads=1)
        b = en.mc_moments(spec, 100, 4, 20, seed=9, threads=1)
        c = en.mc_moments(spec, 100, 4, 20, seed=9, threads=4)
        assert np.array_equal(a.samples, b.samples)
        assert np.array_equal(a.samples, c.samples)
        assert np.array_equal(a.mean, c.mean)

    def test_stderr_scaling(self):
        spec = en.EnsembleSpec.beta_hermite(2.0)
        s1 = en.mc_moments(spec, 200, 4, 400, seed=1).stderr
        s2 = en.mc_moments(spec, 200, 4, 1600, seed=2).stderr
        ratio = s1[[1, 3]] / s2[[1, 3]]
        assert np.all(np.abs(ratio - 2.0) < 0.3)

    def test_reps_guard(self):
        with pytest.raises(ValueError):
            en.mc_moments(en.EnsembleSpec.beta_hermite(2.0), 10, 2, 1, seed=0)
        with pytest.raises(ValueError):
            en.mc_fluctuations(en.EnsembleSpec.beta_hermite(2.0), 10, [2], 50, seed=0)

    def test_budget(self):
        spec = en.EnsembleSpec.beta_hermite(2.0)
        with pytest.raises(ValueError, match="budget"):
            en.mc_moments(spec, 5000, 4, 10, seed=0)
        with pytest.raises(ValueError, match="budget"):
            en.mc_moments(spec, 10, 14, 10, seed=0)
        res = en.mc_moments(spec, 10, 14, 10, seed=0, budget=en.Budget(max_k=16))
        assert len(res.ks) == 14

    def test_fluctuations_small(self):
        spec = en.EnsembleSpec.beta_hermite(2.0)
        ks = [1, 2, 3, 4]
        res = en.mc_fluctuations(spec, 500, ks, 600, seed=5)
        D = fl.cov_matrix(ks, en.fluctuation_model_of(spec))
        for i in range(4):
            for j in range(4):
                se = math.sqrt((D[i, i] * D[j, j] + D[i, j] ** 2) / 600)
                assert abs(res.cov[i, j] - D[i, j]) < 5 * se + 0.05 * abs(D[i, j])
        assert np.all(np.abs(res.excess_kurtosis) < 0.6)

    def test_odd_fluctuation_at_eps_alpha(self):
        # Var of the scaled trace of X is sigma_d^2 at eps = alpha, any alpha
        spec = en.EnsembleSpec.power_perturbed(0.8, 0.8, sigma_z=1.0, diag_scale=1.5)
        res = en.mc_fluctuations(spec, 400, [1], 800, seed=2)
        D = fl.cov_trace(1, 1, en.fluctuation_model_of(spec))
        assert D == pytest.approx(2.25)
        assert abs(res.cov[0, 0] - D) < 5 * D * math.sqrt(2 / 800)

    def test_band_w1_matches_tridiagonal_limit(self):
        per = [en.BandDiagonalSpec(0.5, "normal"), en.BandDiagonalSpec(0.5, "chi")]
        res = en.mc_band_moments(per, 800, 1, 4, 100, seed=3)
        mlist = [(s.alpha, s.limit_moments(4)) for s in per]
        for k, m, s in zip(res.ks, res.mean, res.stderr):
            pred = mo.band_limit_moment(k, 1, mlist)
            assert abs(m - pred) < 4 * s + 2.0 / 800 * max(1.0, abs(pred))


def test_max_threads_env(monkeypatch):
    monkeypatch.setenv("TRIMOMENT_THREADS", "1")
    assert en.max_threads() == 1
    monkeypatch.setenv("TRIMOMENT_THREADS", "x")
    with pytest.raises(ValueError):
        en.max_threads()
