import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qranging.exceptions import DomainError
from qranging.photon_stats import (
    ChannelParams,
    CountPmf,
    TmsvProbe,
    binomial_thin,
    coherent_slot_pmf,
    convolve,
    neg_binomial_pmf,
    poisson_pmf,
    quantum_slot_joint_pmf,
)

# e^-1 to 17 digits (mpmath, 30 digits)
EXP_MINUS_ONE = 0.36787944117144233

means = st.floats(min_value=0.0, max_value=50.0)
kappas = st.floats(min_value=0.0, max_value=1.0)


def tv(a, b):
    n = max(a.size, b.size)
    return 0.5 * np.abs(np.pad(a, (0, n - a.size)) - np.pad(b, (0, n - b.size))).sum()


class TestPoisson:
    def test_zero_mean_is_point_mass(self):
        p = poisson_pmf(0.0)
        assert p.probs.tolist() == [1.0]
        assert p.tail_mass == 0.0

    def test_unit_mean_at_zero(self):
        assert poisson_pmf(1.0).probs[0] == pytest.approx(EXP_MINUS_ONE, abs=1e-9)

    def test_normalization(self):
        p = poisson_pmf(2.0, 1e-12)
        assert math.fsum(p.probs) >= 1 - 1e-12

    @pytest.mark.parametrize("mu", [0.01, 1.0, 37.5, 1e3, 1e4])
    @pytest.mark.parametrize("eps", [1e-3, 1e-12])
    def test_truncation_is_minimal(self, mu, eps):
        p = poisson_pmf(mu, eps)
        assert p.tail_mass <= eps
        if p.n_max > 0:
            assert p.tail_mass + p.probs[-1] > eps

    @pytest.mark.parametrize("mu", [0.3, 25.0, 1e4])
    def test_against_high_precision(self, mu):
        p = poisson_pmf(mu)
        mp.mp.dps = 40
        for n in {0, int(mu), p.n_max // 2, p.n_max}:
            exact = mp.exp(-mp.mpf(mu)) * mp.mpf(mu) ** n / mp.factorial(n)
            if exact > 1e-300:
                assert p.probs[n] == pytest.approx(float(exact), rel=1e-11)

    @pytest.mark.parametrize("mu", [-1.0, math.inf, math.nan])
    def test_rejects_bad_mean(self, mu):
        with pytest.raises(DomainError):
            poisson_pmf(mu)

    @pytest.mark.parametrize("eps", [0.0, 1.0, -0.1])
    def test_rejects_bad_eps(self, eps):
        with pytest.raises(DomainError):
            poisson_pmf(1.0, eps)

    @given(means)
    def test_mean_matches(self, mu):
        assert poisson_pmf(mu).mean() == pytest.approx(mu, abs=1e-9 * max(1.0, mu))


class TestNegBinomial:
    def test_thermal_unit_mean(self):
        p = neg_binomial_pmf(1, 1.0)
        n = np.arange(p.probs.size)
        np.testing.assert_allclose(p.probs, 2.0 ** -(n + 1), rtol=1e-13)

    def test_vacuum(self):
        assert neg_binomial_pmf(2, 0.0).probs.tolist() == [1.0]

    def test_close_to_poisson_for_many_modes(self):
        d = tv(neg_binomial_pmf(100, 0.01).probs, poisson_pmf(1.0).probs)
        assert d <= 0.01

    @pytest.mark.parametrize("R,mu0", [(1, 0.2), (7, 3.0), (1000, 0.001), (10**9, 1e-8)])
    def test_against_high_precision(self, R, mu0):
        p = neg_binomial_pmf(R, mu0)
        mp.mp.dps = 40
        q = mp.mpf(mu0) / (1 + mp.mpf(mu0))
        for n in {0, 1, p.n_max // 2, p.n_max}:
            exact = mp.binomial(n + R - 1, n) * (1 - q) ** R * q**n
            assert p.probs[n] == pytest.approx(float(exact), rel=1e-10)

    def test_rejects_bad_modes(self):
        with pytest.raises(DomainError):
            neg_binomial_pmf(0, 0.1)
        with pytest.raises(DomainError):
            neg_binomial_pmf(1.5, 0.1)

    def test_poisson_limit_monotone(self):
        distances = [tv(neg_binomial_pmf(R, 1.0 / R).probs, poisson_pmf(1.0).probs) for R in (1, 10, 100, 1000)]
        assert all(a > b for a, b in zip(distances, distances[1:]))


class TestThinning:
    def test_identity(self):
        p = poisson_pmf(3.0)
        assert binomial_thin(p, 1.0) is p

    def test_total_loss(self):
        assert binomial_thin(poisson_pmf(3.0), 0.0).probs.tolist() == [1.0]

    @pytest.mark.parametrize("mu,kappa", [(1.0, 0.1), (5.0, 0.5), (40.0, 0.93)])
    def test_poisson_thinning(self, mu, kappa):
        thinned = binomial_thin(poisson_pmf(mu), kappa)
        target = poisson_pmf(kappa * mu)
        n = min(thinned.probs.size, target.probs.size)
        np.testing.assert_allclose(thinned.probs[:n], target.probs[:n], rtol=0, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.0, 20.0), kappas, kappas)
    def test_composition(self, mu, a, b):
        p = neg_binomial_pmf(3, mu / 3) if mu > 0 else poisson_pmf(0.0)
        twice = binomial_thin(binomial_thin(p, a), b)
        once = binomial_thin(p, a * b)
        n = max(twice.probs.size, once.probs.size)
        np.testing.assert_allclose(twice.padded(n), once.padded(n), atol=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.0, 30.0), kappas)
    def test_mean_scales(self, mu, kappa):
        p = poisson_pmf(mu)
        assert binomial_thin(p, kappa).mean() == pytest.approx(kappa * p.mean(), abs=1e-9)

    def test_rejects_bad_kappa(self):
        with pytest.raises(DomainError):
            binomial_thin(poisson_pmf(1.0), 1.5)


class TestConvolve:
    def test_identity_element(self):
        p = poisson_pmf(2.5)
        out = convolve(CountPmf(np.array([1.0])), p)
        np.testing.assert_array_equal(out.probs, p.probs)

    @pytest.mark.parametrize("a,b", [(0.5, 1.0), (2.0, 7.0), (0.01, 30.0)])
    def test_poisson_additivity(self, a, b):
        out = convolve(poisson_pmf(a), poisson_pmf(b))
        ref = poisson_pmf(a + b)
        n = min(out.probs.size, ref.probs.size)
        np.testing.assert_allclose(out.probs[:n], ref.probs[:n], atol=1e-12)

    @given(means, means)
    def test_means_add(self, a, b):
        pa, pb = poisson_pmf(a), poisson_pmf(b)
        out = convolve(pa, pb)
        assert out.mean() == pytest.approx(pa.mean() + pb.mean(), abs=1e-10 * max(1.0, a + b))
        assert out.tail_mass <= pa.tail_mass + pb.tail_mass


class TestCoherentSlot:
    def test_present(self):
        p = coherent_slot_pmf(1.0, ChannelParams(0.1, 1.0), True)
        np.testing.assert_array_equal(p.probs, poisson_pmf(1.1).probs)

    def test_absent(self):
        p = coherent_slot_pmf(1.0, ChannelParams(0.1, 1.0), False)
        np.testing.assert_array_equal(p.probs, poisson_pmf(1.0).probs)

    def test_no_reflection(self):
        ch = ChannelParams(0.0, 1.3)
        np.testing.assert_array_equal(
            coherent_slot_pmf(4.0, ch, True).probs, coherent_slot_pmf(4.0, ch, False).probs
        )

    @pytest.mark.parametrize("kappa,mu_B", [(-0.1, 1.0), (1.1, 1.0), (0.5, -1.0)])
    def test_channel_validation(self, kappa, mu_B):
        with pytest.raises(DomainError):
            ChannelParams(kappa, mu_B)


class TestQuantumJoint:
    def test_no_reflection_erases_correlation(self):
        probe, ch = TmsvProbe(0.5, 10), ChannelParams(0.0, 0.7)
        a = quantum_slot_joint_pmf(probe, ch, True)
        b = quantum_slot_joint_pmf(probe, ch, False)
        np.testing.assert_array_equal(a.probs, b.probs)

    def test_lossless_noiseless_is_diagonal(self):
        probe = TmsvProbe(1.0, 4)
        j = quantum_slot_joint_pmf(probe, ChannelParams(1.0, 0.0), True)
        nb = neg_binomial_pmf(4, 0.25, 1e-12 / 2).probs
        diag = np.diag(j.probs)
        np.testing.assert_allclose(diag, nb[: diag.size], atol=1e-15)
        ns, ni = np.indices(j.probs.shape)
        assert np.abs(j.probs[ns != ni]).max() < 1e-15

    @pytest.mark.parametrize("present", [True, False])
    @pytest.mark.parametrize(
        "mu,R,kappa,mu_B", [(0.1, 10, 0.1, 2.0), (2.0, 200, 0.5, 0.2), (5.0, 1, 0.9, 0.0)]
    )
    def test_normalization_and_marginals(self, present, mu, R, kappa, mu_B):
        eps = 1e-12
        probe, ch = TmsvProbe(mu, R), ChannelParams(kappa, mu_B)
        j = quantum_slot_joint_pmf(probe, ch, present, eps)
        assert j.tail_mass <= eps
        assert abs(math.fsum(j.probs.ravel()) + j.tail_mass - 1) <= 1e-12
        nb = neg_binomial_pmf(R, mu / R, eps / 2).probs
        idler = j.idler_marginal()
        np.testing.assert_allclose(idler, nb[: idler.size], atol=1e-12)
        if not present:
            sig = j.signal_marginal()
            bg = poisson_pmf(mu_B).probs
            n = min(sig.size, bg.size)
            np.testing.assert_allclose(sig[:n], bg[:n], atol=1e-12)

    def test_present_signal_marginal(self):
        # Binomial thinning of NB plus Poisson background, built independently
        probe, ch = TmsvProbe(1.5, 3), ChannelParams(0.3, 0.8)
        j = quantum_slot_joint_pmf(probe, ch, True)
        ref = convolve(binomial_thin(neg_binomial_pmf(3, 0.5), 0.3), poisson_pmf(0.8)).probs
        sig = j.signal_marginal()
        np.testing.assert_allclose(sig, ref[: sig.size], atol=1e-12)

    def test_probe_invariants(self):
        p = TmsvProbe(0.3, 7)
        assert abs(p.R * p.mu0 - p.mu) <= 1e-12
        with pytest.raises(DomainError):
            TmsvProbe(0.0, 3)
        with pytest.raises(DomainError):
            TmsvProbe(1.0, 0)
