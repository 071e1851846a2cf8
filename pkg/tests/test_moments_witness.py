import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tmbench.click_counting import (
    ClickHistogram,
    JointClickHistogram,
    SourceModel,
    exact_click_distribution,
    joint_moments_from_histogram,
    mixture_click_distribution,
    moments_from_distribution,
    moments_from_histogram,
)
from tmbench.moments_witness import (
    EigenSolverError,
    WitnessResult,
    build_full_matrix_oracle,
    build_joint_reduced_matrix,
    build_reduced_matrix,
    eigenvalue_gradient,
    full_spectrum_minimum,
    joint_reduced_witness,
    min_eigenpair,
    multiplicities,
    significance_of,
)

SINGLE_PHOTON_LAMBDA = (1 - math.sqrt(2)) / 2


def random_moments(rng, order):
    """G^(0) = 1 followed by a nonincreasing sequence in [0, 1]."""
    return np.concatenate([[1.0], np.sort(rng.uniform(0, 1, order))[::-1]])


class TestMultiplicities:
    @pytest.mark.parametrize("K, D, expected", [
        (2, 2, (1, 2, 1)),
        (1, 4, (1, 1, 1)),
        (2, 4, (1, 2, 3, 2, 1)),
        (0, 2, (1,)),
    ])
    def test_examples(self, K, D, expected):
        assert multiplicities(K, D).d == expected

    def test_k64_binomial(self):
        d = multiplicities(64, 2).d
        assert d == tuple(math.comb(64, m) for m in range(65))
        assert sum(d) == 2**64

    @given(st.integers(1, 20), st.sampled_from([2, 4, 6, 8]))
    def test_identities(self, K, D):
        m = multiplicities(K, D)
        assert sum(m.d) == (D // 2 + 1) ** K
        assert m.d == m.d[::-1]
        assert m.d[0] == m.d[-1] == 1
        assert m.kappa == K * D // 2

    @pytest.mark.parametrize("K, D", [(-1, 2), (1, 3), (1, 0)])
    def test_invalid(self, K, D):
        with pytest.raises(ValueError):
            multiplicities(K, D)


class TestReducedMatrix:
    def test_single_photon(self):
        m = build_reduced_matrix([1.0, 0.5, 0.0], 1, 2)
        np.testing.assert_array_equal(m.entries, [[1, 0.5], [0.5, 0]])
        lam, vec = min_eigenpair(m)
        assert lam == pytest.approx(SINGLE_PHOTON_LAMBDA, abs=1e-15)
        assert np.linalg.norm(vec) == pytest.approx(1.0)
        assert vec[0] > 0

    def test_coherent_rank_one(self):
        p = 0.3
        g = p ** np.arange(5)
        m = build_reduced_matrix(g, 2, 2)
        s = np.sqrt([1, 2, 1])
        u = s * p ** np.arange(3)
        np.testing.assert_allclose(m.entries, np.outer(u, u), atol=1e-15)
        assert min_eigenpair(m)[0] == pytest.approx(0.0, abs=1e-10)

    def test_corner_is_one(self, rng):
        for K, D in [(1, 2), (3, 4), (5, 2)]:
            m = build_reduced_matrix(random_moments(rng, K * D), K, D)
            assert m.entries[0, 0] == 1.0
            np.testing.assert_array_equal(m.entries, m.entries.T)

    def test_paper_size(self):
        g = moments_from_distribution(exact_click_distribution(SourceModel.coherent(5.0), 128), 128)
        assert build_reduced_matrix(g, 64, 2).entries.shape == (65, 65)

    def test_refuses_short_moments(self):
        with pytest.raises(ValueError, match="order"):
            build_reduced_matrix([1.0, 0.5], 1, 2)


class TestEigenpair:
    def test_identity(self):
        lam, vec = min_eigenpair(np.eye(4))
        assert lam == 1.0
        # degenerate: lexicographically smallest canonical basis vector
        np.testing.assert_array_equal(vec, [0, 0, 0, 1])

    def test_deterministic_sign(self):
        a = np.array([[2.0, 1.0], [1.0, 2.0]])
        _, v1 = min_eigenpair(a)
        _, v2 = min_eigenpair(-(-a))
        np.testing.assert_array_equal(v1, v2)
        assert v1[0] > 0

    def test_non_finite(self):
        with pytest.raises(EigenSolverError):
            min_eigenpair(np.array([[1.0, np.nan], [np.nan, 1.0]]))

    def test_not_square(self):
        with pytest.raises(ValueError):
            min_eigenpair(np.ones((2, 3)))

    def test_large_path_residual(self, rng):
        b = rng.normal(size=(300, 300))
        a = b + b.T
        lam, vec = min_eigenpair(a)
        assert lam == pytest.approx(np.linalg.eigvalsh(a)[0], abs=1e-9)
        assert np.linalg.norm(a @ vec - lam * vec) <= 1e-8 * np.linalg.norm(a, 2)


class TestFullOracle:
    def test_k1_identical(self, rng):
        g = random_moments(rng, 4)
        np.testing.assert_array_equal(build_full_matrix_oracle(g, 1, 4), build_reduced_matrix(g, 1, 4).entries)

    def test_k2_d2(self, rng):
        g = random_moments(rng, 4)
        full = build_full_matrix_oracle(g, 2, 2)
        assert full.shape == (4, 4)
        red = build_reduced_matrix(g, 2, 2)
        assert np.linalg.eigvalsh(full)[0] == pytest.approx(full_spectrum_minimum(red), abs=1e-10)

    @pytest.mark.parametrize("K, D", [(1, 2), (2, 2), (3, 2), (1, 4), (2, 4), (3, 4)])
    def test_reduction_exact(self, K, D, rng):
        for _ in range(50):
            g = random_moments(rng, K * D)
            red = build_reduced_matrix(g, K, D)
            full = np.linalg.eigvalsh(build_full_matrix_oracle(g, K, D))[0]
            assert abs(full - full_spectrum_minimum(red)) <= 1e-9
            # the reduced spectrum is part of the full one
            assert min_eigenpair(red)[0] >= full - 1e-9

    def test_guard(self):
        with pytest.raises(ValueError, match="oracle limit"):
            build_full_matrix_oracle(np.ones(27), 13, 2)


class TestClassical:
    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(st.floats(0.05, 15.0), st.floats(0.05, 1.0)), min_size=1, max_size=5))
    def test_coherent_mixture_psd(self, comps):
        means, weights = zip(*comps)
        dist = mixture_click_distribution([SourceModel.coherent(m) for m in means], weights, 128)
        g = moments_from_distribution(dist, 128)
        for K in (1, 2, 4, 8, 16, 32, 64):
            assert min_eigenpair(build_reduced_matrix(g, K, 2))[0] >= -1e-10

    @pytest.mark.parametrize("N", range(1, 5))
    def test_fock_negativity_grows_with_k(self, N):
        g = moments_from_distribution(exact_click_distribution(SourceModel.fock(N), 16), 16)
        lams = [min_eigenpair(build_reduced_matrix(g, K, 2))[0] for K in range(1, 9)]
        assert lams[0] < 0
        assert all(b <= a + 1e-12 for a, b in zip(lams, lams[1:]))


class TestGradient:
    def test_matches_finite_difference(self, rng):
        g = random_moments(rng, 6)
        red = build_reduced_matrix(g, 3, 2)
        lam, vec = min_eigenpair(red)
        grad = eigenvalue_gradient(red, vec)
        h = 1e-7
        for m in range(1, 7):
            gp = g.copy()
            gp[m] += h
            num = (min_eigenpair(build_reduced_matrix(gp, 3, 2))[0] - lam) / h
            assert grad[m] == pytest.approx(num, abs=1e-5)

    def test_two_by_two_closed_form(self):
        red = build_reduced_matrix([1.0, 0.5, 0.0], 1, 2)
        _, v = min_eigenpair(red)
        grad = eigenvalue_gradient(red, v)
        np.testing.assert_allclose(grad, [v[0] ** 2, 2 * v[0] * v[1], v[1] ** 2], atol=1e-15)


class TestWitnessResult:
    def test_combination(self):
        r = WitnessResult.from_errors(-0.2, np.array([1.0]), 0.006, 0.008)
        assert r.combined_error == pytest.approx(0.01, abs=1e-15)
        assert r.significance == pytest.approx(20.0)
        assert r.certified

    @pytest.mark.parametrize("lam, err, expected", [(0.3, 0.1, 0.0), (-1e-12, 1e-3, 1e-9), (-0.2, 0.01, 20.0)])
    def test_significance(self, lam, err, expected):
        assert significance_of(lam, err) == pytest.approx(expected, rel=1e-12)

    def test_unbounded(self):
        assert significance_of(-0.1, 0.0) == math.inf
        assert significance_of(0.1, 0.0) == 0.0


class TestJoint:
    def test_product_is_classical(self):
        ga = moments_from_distribution(exact_click_distribution(SourceModel.coherent(1.5), 4), 4)
        gb = moments_from_distribution(exact_click_distribution(SourceModel.thermal(0.8), 4), 4)
        res = joint_reduced_witness(np.outer(ga, gb), 2, 2, 2, 2)
        assert res.min_eigenvalue >= -1e-10

    def test_ideal_pair_nonclassical(self):
        counts = np.zeros((3, 3), dtype=int)
        counts[1, 1] = 1000
        table = joint_moments_from_histogram(JointClickHistogram(2, 2, counts), 2, 2)
        res = joint_reduced_witness(table, 1, 1, 2, 2)
        assert res.min_eigenvalue < 0
        assert res.random_error == 0.0

    def test_kb_zero_marginalizes(self, rng):
        counts = rng.integers(0, 50, size=(5, 3))
        joint = JointClickHistogram(4, 2, counts)
        table = joint_moments_from_histogram(joint, 4, 2)
        res = joint_reduced_witness(table, 2, 0, 2, 2)
        single = moments_from_histogram(joint.marginal("A"), 4)
        lam = min_eigenpair(build_reduced_matrix(single, 2, 2))[0]
        assert res.min_eigenvalue == pytest.approx(lam, abs=1e-12)

    def test_dimension(self):
        table = np.ones((129, 129))
        assert build_joint_reduced_matrix(table, 2, 3, 2, 2).shape == (3 * 4, 3 * 4)

    def test_insufficient_orders(self):
        with pytest.raises(ValueError):
            build_joint_reduced_matrix(np.ones((3, 3)), 2, 1, 2, 2)

    def test_random_error_delta_method(self, rng):
        # compare the propagated error with resampling on a small joint histogram
        p = np.array([[0.2, 0.1, 0.02], [0.1, 0.3, 0.05], [0.02, 0.05, 0.16]])
        trials = 20_000
        counts = rng.multinomial(trials, p.ravel()).reshape(3, 3)
        res = joint_reduced_witness(joint_moments_from_histogram(JointClickHistogram(2, 2, counts), 2, 2), 1, 1, 2, 2)
        lams = []
        for _ in range(400):
            c = rng.multinomial(trials, (counts / trials).ravel()).reshape(3, 3)
            t = joint_moments_from_histogram(JointClickHistogram(2, 2, c), 2, 2)
            lams.append(joint_reduced_witness(t, 1, 1, 2, 2).min_eigenvalue)
        assert res.random_error == pytest.approx(np.std(lams), rel=0.2)
