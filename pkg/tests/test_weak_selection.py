import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ultimatum_empathy.weak_selection import (TheoryParams, alpha1, f_kernel, gammas, kernel_values,
                                              mean_offer_global_closed, mean_offer_weak,
                                              payoff_stats_empathetic, phis, psi,
                                              stationary_freq_weak, stationary_freqs_weak,
                                              weighted_mean_offer)


def oracle_gammas(N, M, u, v, pattern, dps=40):
    """High-precision transcription of the three structure sums.

    Uses the closed-form kernel values for global migration (1 at x = M and
    -1/(M-1) elsewhere) instead of summing cosines.
    """
    with mp.workdps(dps):
        N, M, u, v = mp.mpf(N), int(M), mp.mpf(u), mp.mpf(v)
        if pattern == "global":
            fs = [mp.mpf(-1) / (M - 1)] * (M - 1) + [mp.mpf(1)]
        else:
            fs = [mp.cos(2 * mp.pi * x / M) for x in range(1, M + 1)]
        a1 = (1 - u) / (1 + (N - 1) * u)
        s1 = s2 = s3 = mp.mpf(0)
        for f in fs:
            P1 = (1 - v * (1 - f)) / (1 + (N - 1) * v * (1 - f))
            P2 = (1 - u) * (1 - v * (1 - f)) / (1 + (N - 1) * u + (N - 1) * (1 - u) * v * (1 - f))
            F1 = (1 - u) * (2 - v * (1 - f)) / (2 + (N - 2) * u + 2 * (N - 2) * (1 - u) * v / 3 * (1 - f))
            F2 = (2 - u - v * (1 - f)) / (2 + 2 * (N - 2) * u / 3 + (N - 2) * (2 - u) * v / 3 * (1 - f))
            F3 = (1 - u) * (2 - v * (1 - f)) / (2 + 2 * (N - 2) * u / 3 + (N - 2) * (2 - u) * v / 3 * (1 - f))
            F4 = (1 - u) * (1 - v * (1 - f)) / (1 + (N - 2) * u / 2 + (N - 2) * (1 - u) * v / 3 * (1 - f))
            F5 = (2 - u) * (1 - v * (1 - f)) / (2 + 2 * (N - 2) * u / 3 + (N - 2) * (2 - u) * v / 3 * (1 - f))
            s1 += -2 * F1 * P2 - F4 * a1 + 3 * P2
            s2 += 3 * P1 - 3 * P2 + (N - 2) * (-2 * F1 * P2 - F4 * a1 + F2 * P2 + F3 * P1 + F5 * a1)
            s3 += 3 * P1 - 3 * P2 + 2 * (2 * F1 * P2 + F4 * a1 - F2 * P2 - F3 * P1 - F5 * a1)
        return ((N - 1) * (N - 2) / (3 * M) * s1,
                (N - 1) / (3 * M) * s2,
                (N - 1) * (N - 2) / (3 * M) * s3)


def test_pole_at_zero_mutation_rejected():
    with pytest.raises(ValueError, match="pole"):
        TheoryParams(u=0.0)


class TestKernel:
    @pytest.mark.parametrize("M", [2, 3, 9, 20])
    def test_global_values(self, M):
        assert f_kernel(M, M, "global") == pytest.approx(1.0, abs=1e-14)
        for x in range(1, M):
            assert f_kernel(x, M, "global") == pytest.approx(-1 / (M - 1), abs=1e-14)

    def test_local_values(self):
        assert f_kernel(1, 4, "local") == pytest.approx(0.0, abs=1e-15)
        assert f_kernel(9, 9, "local") == pytest.approx(1.0, abs=1e-15)

    def test_single_group(self):
        assert f_kernel(1, 1, "global") == 1.0
        assert f_kernel(1, 1, "local") == 1.0

    def test_mode_out_of_range(self):
        with pytest.raises(ValueError):
            f_kernel(0, 5, "local")


class TestStructureCoefficients:
    def test_psi_without_migration(self):
        p = TheoryParams(N=30, u=0.2, v=0.0)
        assert psi(0.3, p) == pytest.approx((1.0, 0.8 / (1 + 29 * 0.2)))
        assert psi(1.0, TheoryParams(N=30, u=0.2, v=0.7)) == pytest.approx((1.0, 0.8 / (1 + 29 * 0.2)))

    def test_psi_direct_substitution(self):
        s1, s2 = psi(0.0, TheoryParams(N=2, M=1, u=0.5, v=0.5))
        assert s1 == pytest.approx(1 / 3, rel=1e-15)
        assert s2 == pytest.approx(1 / 7, rel=1e-15)

    def test_phis_full_mutation(self):
        p = TheoryParams(N=20, u=1.0, v=0.3)
        f1, _, f3, f4, _ = phis(-0.2, p)
        assert (f1, f3, f4) == (0.0, 0.0, 0.0)
        assert alpha1(p) == 0.0

    def test_phis_without_migration(self):
        N, u = 25, 0.15
        _, f2, _, _, f5 = phis(0.4, TheoryParams(N=N, u=u, v=0.0))
        expected = (2 - u) / (2 + 2 * (N - 2) * u / 3)
        assert f2 == pytest.approx(expected, rel=1e-15)
        assert f5 == pytest.approx(expected, rel=1e-15)

    def test_phi1_two_players(self):
        u, v, f = 0.3, 0.4, -0.5
        assert phis(f, TheoryParams(N=2, M=2, u=u, v=v))[0] == pytest.approx((1 - u) * (2 - v * (1 - f)) / 2)

    @settings(max_examples=300)
    @given(st.integers(2, 400), st.floats(1e-3, 1.0), st.floats(0.0, 0.5), st.floats(-1.0, 1.0))
    def test_coefficients_in_unit_interval(self, N, u, v, f):
        # v <= 1/2 keeps v * (1 - f) <= 1, the regime where every numerator is nonnegative
        p = TheoryParams(N=N, M=2, u=u, v=v)
        s1, s2 = psi(f, p)
        for c in (s1, s2, *phis(f, p)):
            assert -1e-15 <= c <= 1.0 + 1e-15
        assert s1 >= s2 - 1e-15

    def test_gammas_two_players(self):
        g1, _, g3 = gammas(TheoryParams(N=2, M=1, u=0.3, v=0.1))
        assert g1 == 0.0 and g3 == 0.0

    def test_gamma1_full_mutation(self):
        assert gammas(TheoryParams(N=40, M=5, u=1.0, v=0.2))[0] == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("pattern", ["global", "local"])
    @pytest.mark.parametrize("N, M, u, v", [(50, 9, 0.1, 0.1), (100, 9, 0.05, 0.05), (18, 4, 0.3, 0.2)])
    def test_gammas_match_high_precision_oracle(self, N, M, u, v, pattern):
        got = gammas(TheoryParams(N=N, M=M, u=u, v=v, pattern=pattern))
        want = oracle_gammas(N, M, u, v, pattern)
        for g, w in zip(got, want):
            assert g == pytest.approx(float(w), rel=1e-12, abs=1e-12)


class TestPayoffStats:
    def test_diagonal_mean_is_one(self):
        for S in (2, 7, 50):
            st_ = payoff_stats_empathetic(S)
            assert st_.diag_mean == 1.0
            assert np.all(st_.a_diag == 1.0)

    @pytest.mark.parametrize("S", [2, 5, 64])
    def test_double_counting_identity(self, S):
        st_ = payoff_stats_empathetic(S)
        assert st_.row_mean.mean() == pytest.approx(st_.grand_mean, abs=1e-14)
        assert st_.col_mean.mean() == pytest.approx(st_.grand_mean, abs=1e-14)

    def test_weighted_sums_approach_integrals(self):
        limits = {"uniform": 0.5, "a_diag": 0.5, "diag_mean": 0.5,
                  "col_mean": 7 / 24, "row_mean": 5 / 24, "grand_mean": 0.25}
        for S in (100, 400):
            sums = payoff_stats_empathetic(S).weighted_sums()
            for key, lim in limits.items():
                assert abs(sums[key] - lim) <= 2.0 / S, key

    def test_integrals_by_quadrature(self):
        from scipy.integrate import dblquad

        def a(x, y):
            return y if x < y else (1 - x if x > y else 1.0)

        col = dblquad(lambda x, y: y * a(x, y), 0, 1, 0, 1, epsabs=1e-10)[0]
        row = dblquad(lambda y, x: x * a(x, y), 0, 1, 0, 1, epsabs=1e-10)[0]
        grand = dblquad(lambda x, y: a(x, y) / 2, 0, 1, 0, 1, epsabs=1e-10)[0]
        assert (col, row, grand) == pytest.approx((7 / 24, 5 / 24, 1 / 4), abs=1e-7)


class TestStationaryFrequencies:
    def test_neutral(self):
        f = stationary_freqs_weak(40, TheoryParams(omega=0.0))
        np.testing.assert_array_equal(f, np.full(40, 1 / 40))

    @pytest.mark.parametrize("S", [2, 10, 150])
    def test_normalised(self, S):
        f = stationary_freqs_weak(S, TheoryParams(N=60, M=6, u=0.07, v=0.2, omega=0.01, pattern="local"))
        assert abs(math.fsum(f) - 1.0) <= 1e-12

    def test_single_entry(self):
        p = TheoryParams()
        assert stationary_freq_weak(3, 20, p) == stationary_freqs_weak(20, p)[2]
        with pytest.raises(ValueError):
            stationary_freq_weak(0, 20, p)

    def test_weighted_mean_matches_continuum(self):
        p = TheoryParams(N=50, M=9, u=0.1, v=0.1, omega=0.001)
        m = weighted_mean_offer(stationary_freqs_weak(100, p))
        assert abs(m - mean_offer_weak(p)) < 1e-3

    def test_weighted_mean_converges_like_one_over_s(self):
        p = TheoryParams(N=80, M=5, u=0.05, v=0.1, omega=0.002, pattern="local")
        target = mean_offer_weak(p)
        errs = [abs(weighted_mean_offer(stationary_freqs_weak(S, p)) - target) for S in (50, 100, 200, 400)]
        assert all(b < a for a, b in zip(errs, errs[1:]))
        assert errs[-1] * 400 < errs[0] * 50 * 1.5


class TestMeanOffer:
    def test_neutral_and_full_mutation(self):
        assert mean_offer_weak(TheoryParams(omega=0.0)) == 0.5
        assert mean_offer_weak(TheoryParams(u=1.0, omega=0.01)) == 0.5

    def test_reference_point_correction(self):
        p = TheoryParams(N=50, M=9, u=0.1, v=0.1, omega=0.001)
        assert 0.5 - mean_offer_weak(p) == pytest.approx(2.8e-3, abs=1e-4)

    @pytest.mark.parametrize("N, M, u, v", [(100, 9, 0.1, 0.1), (18, 9, 0.5, 0.3), (500, 2, 0.01, 0.9)])
    def test_closed_form_identity(self, N, M, u, v):
        p = TheoryParams(N=N, M=M, u=u, v=v, omega=0.001)
        assert mean_offer_global_closed(p) == pytest.approx(mean_offer_weak(p), rel=1e-12)

    def test_closed_form_critical_migration(self):
        N, M, u, om = 50, 9, 0.2, 0.001
        p = TheoryParams(N=N, M=M, u=u, v=(M - 1) / M, omega=om)
        want = 0.5 - om * (1 - u) * (N - 1) * N / (24 * M * (1 + (N - 1) * u))
        assert mean_offer_global_closed(p) == pytest.approx(want, rel=1e-13)

    def test_closed_form_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            mean_offer_global_closed(TheoryParams(M=1))
        with pytest.raises(ValueError):
            mean_offer_global_closed(TheoryParams(pattern="local"))

    @settings(max_examples=200)
    @given(st.integers(2, 300), st.integers(1, 15), st.floats(1e-3, 1.0), st.floats(0.0, 0.5),
           st.sampled_from(["local", "global"]))
    def test_never_above_one_half(self, N, M, u, v, pattern):
        p = TheoryParams(N=N, M=M, u=u, v=v, omega=0.01, pattern=pattern)
        assert mean_offer_weak(p) <= 0.5 + 1e-15
        for f in kernel_values(M, pattern):
            s1, s2 = psi(f, p)
            assert s1 >= s2 - 1e-15

    def test_pattern_proximity_calibrated_bound(self):
        # worst case over the mutation, migration and size sweeps, frozen from one evaluation
        worst = 0.0
        pts = ([(100, u, 0.1) for u in np.linspace(0.01, 0.9, 90)]
               + [(100, 0.1, v) for v in np.linspace(0.01, 0.9, 90)]
               + [(N, 0.1, 0.1) for N in range(18, 501)])
        for N, u, v in pts:
            g = mean_offer_weak(TheoryParams(N=N, M=9, u=u, v=v, omega=0.001))
            l_ = mean_offer_weak(TheoryParams(N=N, M=9, u=u, v=v, omega=0.001, pattern="local"))
            worst = max(worst, abs(l_ - g) / abs(0.5 - g))
        assert worst <= 0.36
