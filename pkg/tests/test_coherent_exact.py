import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gammaincc

from qranging.coherent_exact import (
    ExactErrorQuery,
    generating_g,
    p_err_multicopy_coherent,
    p_err_single_shot,
    regularized_gamma_q,
)
from qranging.exceptions import DomainError
from qranging.info_measures import xi_coherent_closed
from qranging.photon_stats import ChannelParams
from qranging.ranging_sim import CoherentProbe, DecisionRule, Scenario, enumerate_error_probability

EXP_MINUS_ONE = 0.36787944117144233
# brute-force slot enumeration at kappa=0.1, mu=5, mu_B=1 (two independent routes, agree to 1e-15)
P_ERR_M2 = 0.38213062955
P_ERR_M3 = 0.53363361748


class TestRegularizedGamma:
    @given(st.floats(0.0, 100.0))
    def test_zero_order(self, mu):
        assert regularized_gamma_q(0, mu) == 0.0

    def test_unit(self):
        assert regularized_gamma_q(1, 1.0) == pytest.approx(EXP_MINUS_ONE, abs=1e-10)

    @pytest.mark.parametrize("n", [1, 2, 50])
    def test_zero_mean(self, n):
        assert regularized_gamma_q(n, 0.0) == 1.0

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 400), st.floats(0.01, 300.0))
    def test_matches_scipy(self, n, mu):
        ref = gammaincc(n, mu)
        got = regularized_gamma_q(n, mu)
        if ref > 1e-280:
            assert got == pytest.approx(ref, rel=1e-11)
        else:
            assert got < 1e-270

    @pytest.mark.parametrize("n,mu", [(-1, 1.0), (1.5, 1.0), (2, -0.5), (2, math.inf)])
    def test_domain(self, n, mu):
        with pytest.raises(DomainError):
            regularized_gamma_q(n, mu)


class TestGeneratingFunction:
    @pytest.mark.parametrize("m", [1, 2, 7, 100])
    @pytest.mark.parametrize("mu_B", [0.3, 2.0, 40.0])
    def test_unit_argument_telescopes(self, m, mu_B):
        assert generating_g(m, 1.0, mu_B) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("x", [1.0, 1.5, 3.0])
    @pytest.mark.parametrize("mu_B", [0.5, 1.0, 2.0])
    def test_single_slot_is_poisson_pgf(self, x, mu_B):
        assert generating_g(1, x, mu_B) == pytest.approx(math.exp(mu_B * (x - 1)), rel=1e-10)

    @pytest.mark.parametrize("signal,mu_B", [(0.1, 0.5), (1.0, 2.0), (0.5, 1.0)])
    def test_two_slots_match_enumeration(self, signal, mu_B):
        g = generating_g(2, 1 + signal / mu_B, mu_B)
        s = Scenario(2, 1, CoherentProbe(signal), ChannelParams(1.0, mu_B))
        p_enum = enumerate_error_probability(s, DecisionRule.MAX_TOTAL_COUNT)
        assert 1 - math.exp(-signal) * g / 2 == pytest.approx(p_enum, abs=1e-9)

    def test_domain(self):
        with pytest.raises(DomainError):
            generating_g(2, 1.5, 0.0)
        with pytest.raises(DomainError):
            generating_g(2, 0.5, 1.0)


class TestSingleShot:
    @pytest.mark.parametrize("m,expected", [(2, 0.5), (10, 0.9), (100, 0.99)])
    def test_random_guess(self, m, expected):
        assert p_err_single_shot(m, 0.1, 0.0, 1.0) == 1 - 1 / m
        assert p_err_single_shot(m, 0.1, 0.0, 1.0) == pytest.approx(expected, abs=1e-15)

    @given(st.floats(0.0, 1.0), st.floats(0.0, 50.0), st.floats(0.0, 10.0))
    def test_single_slot(self, kappa, mu, mu_B):
        assert p_err_single_shot(1, kappa, mu, mu_B) == 0.0

    def test_no_background_branch(self):
        assert p_err_single_shot(2, 1.0, math.log(2), 0.0) == pytest.approx(0.25, abs=1e-15)

    @pytest.mark.parametrize("m,expected", [(2, P_ERR_M2), (3, P_ERR_M3)])
    def test_frozen_values(self, m, expected):
        assert p_err_single_shot(m, 0.1, 5.0, 1.0) == pytest.approx(expected, abs=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 60), st.floats(0.0, 1.0), st.floats(0.0, 200.0), st.floats(0.0, 20.0))
    def test_range(self, m, kappa, mu, mu_B):
        p = p_err_single_shot(m, kappa, mu, mu_B)
        assert 0.0 <= p <= 1 - 1 / m

    @pytest.mark.parametrize("m", [2, 10, 100])
    def test_decreasing_in_mu(self, m):
        ps = [p_err_single_shot(m, 0.1, mu, 1.0) for mu in (0.01, 0.1, 1, 3, 10, 30, 100)]
        assert all(b < a for a, b in zip(ps, ps[1:]))

    @pytest.mark.parametrize("m", [2, 5])
    def test_decreasing_in_kappa(self, m):
        ps = [p_err_single_shot(m, k, 4.0, 0.5) for k in (0.01, 0.1, 0.3, 0.6, 1.0)]
        assert all(b < a for a, b in zip(ps, ps[1:]))

    def test_tiny_errors_keep_precision(self):
        # well past the 1e-4 switch; the error series and scipy-free brute force agree
        s = Scenario(2, 1, CoherentProbe(60.0), ChannelParams(1.0, 0.5))
        exact = p_err_single_shot(2, 1.0, 60.0, 0.5)
        assert 1e-300 < exact < 1e-15
        enum = enumerate_error_probability(s, "max_total", eps=1e-40)
        assert exact == pytest.approx(enum, rel=1e-9, abs=0)

    @pytest.mark.parametrize("m", [2, 3])
    @pytest.mark.parametrize("signal", [0.1, 1.0])
    @pytest.mark.parametrize("mu_B", [0.5, 1.0, 2.0])
    def test_matches_enumeration(self, m, signal, mu_B):
        s = Scenario(m, 1, CoherentProbe(signal / 0.5), ChannelParams(0.5, mu_B))
        p_enum = enumerate_error_probability(s, DecisionRule.MAX_TOTAL_COUNT)
        assert p_err_single_shot(m, 0.5, signal / 0.5, mu_B) == pytest.approx(p_enum, abs=1e-9)

    def test_query_validation(self):
        with pytest.raises(DomainError):
            ExactErrorQuery(0, 0.1, 1.0, 1.0)
        with pytest.raises(DomainError):
            ExactErrorQuery(2, 0.1, 1.0, 1.0, L=0)
        assert ExactErrorQuery(2, 0.1, 5.0, 1.0).p_err() == pytest.approx(P_ERR_M2, abs=1e-10)


class TestMultiCopy:
    def test_one_copy(self):
        assert p_err_multicopy_coherent(3, 0.2, 1.7, 0.4, 1) == p_err_single_shot(3, 0.2, 1.7, 0.4)

    def test_copies_scale_signal_and_background(self):
        # L copies summed per slot = one shot with L times both means
        multi = p_err_multicopy_coherent(2, 0.1, 0.1, 1.0, 10)
        assert multi == p_err_single_shot(2, 0.1, 1.0, 10.0)

    def test_matches_two_copy_enumeration(self):
        s = Scenario(2, 2, CoherentProbe(3.0), ChannelParams(0.2, 0.6))
        p_enum = enumerate_error_probability(s, DecisionRule.MAX_TOTAL_COUNT)
        assert p_err_multicopy_coherent(2, 0.2, 3.0, 0.6, 2) == pytest.approx(p_enum, abs=1e-9)

    @pytest.mark.parametrize("m", [2, 10])
    def test_monotone_in_copies(self, m):
        ps = [p_err_multicopy_coherent(m, 0.1, 0.5, 1.0, L) for L in (1, 2, 5, 10, 50, 200, 1000)]
        assert all(b <= a for a, b in zip(ps, ps[1:]))

    @pytest.mark.parametrize(
        "kappa,mu,mu_B,m", [(0.1, 1.0, 1.0, 2), (0.1, 1.0, 1.0, 100), (0.5, 2.0, 2.0, 2), (0.1, 5.0, 1.0, 3)]
    )
    def test_log_error_slope_tends_to_exponent(self, kappa, mu, mu_B, m):
        xi = xi_coherent_closed(ChannelParams(kappa, mu_B), mu)

        def gap_at(threshold):
            lo, hi = 1, 2
            while p_err_multicopy_coherent(m, kappa, mu, mu_B, hi) >= threshold:
                lo, hi = hi, 2 * hi
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if p_err_multicopy_coherent(m, kappa, mu, mu_B, mid) >= threshold:
                    lo = mid
                else:
                    hi = mid
            p = p_err_multicopy_coherent(m, kappa, mu, mu_B, lo)
            return abs(-math.log(p) / lo / xi - 1)

        gaps = [gap_at(t) for t in (1e-12, 1e-30, 1e-100)]
        assert gaps[1] <= 0.10
        assert gaps[0] > gaps[1] > gaps[2]

    @pytest.mark.parametrize("mu,mu_B,L", [(2.0, 2.0, 997), (0.1, 1.0, 191584)])
    def test_prefactor_dominates_at_moderate_error(self, mu, mu_B, L):
        # at p ~ 1e-3 the normalized log error still overshoots xi by ~45%
        xi = xi_coherent_closed(ChannelParams(0.1, mu_B), mu)
        p = p_err_multicopy_coherent(2, 0.1, mu, mu_B, L)
        assert 1e-3 < p < 1.1e-3
        assert -math.log(p) / L / xi == pytest.approx(1.448, abs=0.005)
        deep = p_err_multicopy_coherent(2, 0.1, mu, mu_B, round(L * 4.2))
        assert deep < 1e-9 and -math.log(deep) / round(L * 4.2) / xi < 1.16
