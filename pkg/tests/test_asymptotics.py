import math

import numpy as np
import pytest

from fpgame.asymptotics import (
    J_MARGIN,
    ChannelProfile,
    angle_transform,
    asymptotic_capacity,
    asymptotic_report,
    bernstein_expansion_check,
    expected_J,
    fisher_integral,
    lift_profile,
    local_payoff_J,
    normalized_payoff,
    normalized_payoff_table,
    optimal_local_payoff,
    optimal_profile,
    profile_table,
)
from fpgame.core import ContinuousPrior, interleaving_channel
from fpgame.errors import DivergentIntegralError, DomainError, SingularityError

LN2 = math.log(2.0)
# B(t, t) B(1 - t, 1 - t) at t = 1/3, frozen from mpmath-free closed forms
F_THIRD = 10.882796185405303
GRID = np.linspace(0.0, 1.0, 1001)


def perturbed(c, m, phase):
    def g(w):
        w = np.asarray(w, dtype=float)
        return w + c * w * (1.0 - w) * np.sin(2.0 * math.pi * m * w + phase)

    return ChannelProfile.from_function(g, f"perturbed:{c}:{m}")


class TestProfile:
    def test_endpoint_invariant(self):
        with pytest.raises(DomainError):
            ChannelProfile.from_function(lambda w: 0.5 * np.asarray(w) + 0.1)

    def test_power_needs_positive_exponent(self):
        with pytest.raises(DomainError):
            ChannelProfile.power(0)

    def test_symmetry(self):
        assert ChannelProfile.identity().is_symmetric()
        assert ChannelProfile.sin_squared().is_symmetric()
        assert not ChannelProfile.power(2).is_symmetric()

    def test_numeric_derivatives(self):
        p = ChannelProfile.from_function(lambda w: np.sin(0.5 * math.pi * np.asarray(w)) ** 2)
        ref = ChannelProfile.sin_squared()
        w = np.linspace(0.05, 0.95, 19)
        np.testing.assert_allclose(p.g_prime(w), ref.g_prime(w), atol=1e-9)
        np.testing.assert_allclose(p.g_double_prime(w), ref.g_double_prime(w), atol=1e-6)
        assert not p.analytic

    def test_numeric_derivatives_at_ends(self):
        p = ChannelProfile.from_function(lambda w: np.sin(0.5 * math.pi * np.asarray(w)) ** 2)
        ref = ChannelProfile.sin_squared()
        w = np.array([0.0, 1e-9, 1e-5, 3e-4, 1 - 3e-4, 1 - 1e-5, 1.0])
        np.testing.assert_allclose(p.g_prime(w), ref.g_prime(w), atol=1e-9)
        np.testing.assert_allclose(p.g_double_prime(w), ref.g_double_prime(w), atol=1e-5)
        assert p.g_prime(0.0) == pytest.approx(0.0, abs=1e-9)


class TestLift:
    @pytest.mark.parametrize("k", [2, 7, 64])
    def test_identity_is_interleaving(self, k):
        np.testing.assert_array_equal(lift_profile(ChannelProfile.identity(), k).p, interleaving_channel(k).p)

    def test_square(self):
        np.testing.assert_allclose(lift_profile(ChannelProfile.power(2), 4).p, [0, 1 / 16, 1 / 4, 9 / 16, 1], atol=0)

    @pytest.mark.parametrize("k", [2, 20, 99])
    def test_arcsine_optimum(self, k):
        c = lift_profile(optimal_profile(ContinuousPrior.arcsine()), k)
        np.testing.assert_allclose(c.p, interleaving_channel(k).p, atol=1e-12)

    def test_leaving_unit_interval(self):
        g = ChannelProfile.from_function(lambda w: np.asarray(w) + 0.5 * np.sin(math.pi * np.asarray(w)))
        with pytest.raises(DomainError):
            lift_profile(g, 4)


class TestAngleAndJ:
    def test_angle(self):
        ident = ChannelProfile.identity()
        assert angle_transform(ident, 0.5) == pytest.approx(math.pi / 2, abs=1e-15)
        for prof in (ident, ChannelProfile.power(3), ChannelProfile.sin_squared()):
            assert angle_transform(prof, 0.0) == 0.0
            assert angle_transform(prof, 1.0) == pytest.approx(math.pi, abs=1e-15)
        w = np.linspace(0, 1, 11)
        np.testing.assert_allclose(angle_transform(ident, w), np.arccos(1 - 2 * w), atol=1e-15)

    def test_identity_J(self):
        w = np.linspace(0.01, 0.99, 50)
        np.testing.assert_array_equal(local_payoff_J(ChannelProfile.identity(), w), 1.0)

    def test_square_J(self):
        assert local_payoff_J(ChannelProfile.power(2), 0.5) == pytest.approx(4 / 3, rel=1e-14)

    def test_sin_squared_J(self):
        w = np.linspace(0.01, 0.99, 50)
        np.testing.assert_allclose(
            local_payoff_J(ChannelProfile.sin_squared(), w), math.pi**2 * w * (1 - w), rtol=1e-12
        )

    def test_open_interval(self):
        with pytest.raises(DomainError):
            local_payoff_J(ChannelProfile.identity(), 0.0)

    def test_singular_profile(self):
        flat = ChannelProfile.from_function(lambda w: np.clip(2 * np.asarray(w) - 0.5, 0, 1))
        with pytest.raises(SingularityError):
            local_payoff_J(flat, 0.1)


class TestFisher:
    def test_arcsine(self):
        assert fisher_integral(ContinuousPrior.arcsine()) == pytest.approx(math.pi**2, abs=1e-10)

    @pytest.mark.parametrize("theta", [1 / 3, 2 / 3])
    def test_beta(self, theta):
        F = fisher_integral(ContinuousPrior.beta(theta))
        assert F == pytest.approx(F_THIRD, rel=1e-12)
        assert F > math.pi**2

    def test_closed_form(self):
        from scipy.special import beta as B

        for theta in (0.1, 0.25, 0.45, 0.8, 0.95):
            F = fisher_integral(ContinuousPrior.beta(theta))
            assert F == pytest.approx(B(theta, theta) * B(1 - theta, 1 - theta), rel=1e-10)

    @pytest.mark.parametrize("theta", [1.0, 1.5, 3.0])
    def test_divergent(self, theta):
        prior = ContinuousPrior.beta(theta)
        for op in (fisher_integral, optimal_profile):
            with pytest.raises(DivergentIntegralError):
                op(prior)

    def test_custom_prior(self):
        pdf = lambda w: 1.0 / (math.pi * np.sqrt(np.asarray(w) * (1 - np.asarray(w))))
        prior = ContinuousPrior.custom(pdf, hint=(-0.5, -0.5), symmetric=True)
        assert fisher_integral(prior) == pytest.approx(math.pi**2, rel=1e-9)


class TestOptimalProfile:
    def test_arcsine_identity(self):
        g = optimal_profile(ContinuousPrior.arcsine())
        assert np.max(np.abs(g(GRID) - GRID)) <= 1e-10

    @pytest.mark.parametrize("theta", [0.2, 1 / 3, 2 / 3, 0.9])
    def test_monotone(self, theta):
        g = optimal_profile(ContinuousPrior.beta(theta))(GRID)
        assert g[0] == 0.0 and g[-1] == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(g) > 0.0)
        assert np.all((0.0 <= g) & (g <= 1.0))

    def test_beta_symmetric(self):
        assert optimal_profile(ContinuousPrior.beta(0.3)).is_symmetric(tol=1e-12)

    def test_J_opt_closed_form(self):
        prior = ContinuousPrior.beta(1 / 3)
        J = optimal_local_payoff(prior)
        w = np.linspace(0.05, 0.95, 19)
        expected = math.pi**2 / (F_THIRD**2 * prior.pdf(w) ** 2 * w * (1 - w))
        np.testing.assert_allclose(J(w), expected, rtol=1e-10)

    @pytest.mark.parametrize("theta", [1 / 3, 0.5, 2 / 3])
    def test_expected_J_opt(self, theta):
        prior = ContinuousPrior.beta(theta)
        F = fisher_integral(prior)
        assert expected_J(optimal_profile(prior), prior) == pytest.approx(math.pi**2 / F, abs=1e-8)

    def test_custom_prior_profile(self):
        # a custom copy of Beta(1/3) should reproduce the analytic optimum
        ref = ContinuousPrior.beta(1 / 3)
        prior = ContinuousPrior.custom(ref.pdf, hint=(-2 / 3, -2 / 3), symmetric=True)
        g = optimal_profile(prior)
        np.testing.assert_allclose(g(GRID), optimal_profile(ref)(GRID), atol=1e-9)

    @pytest.mark.parametrize("theta", [1 / 3, 0.5, 2 / 3])
    @pytest.mark.parametrize("idx", range(10))
    def test_lower_bound_on_perturbations(self, theta, idx):
        rng = np.random.default_rng(1000 + idx)
        prof = perturbed(float(rng.uniform(-0.9, 0.9)), int(rng.integers(1, 4)), float(rng.uniform(0, 2 * math.pi)))
        prior = ContinuousPrior.beta(theta)
        bound = math.pi**2 / fisher_integral(prior)
        assert expected_J(prof, prior) >= bound - 1e-8

    def test_lower_bound_named_profiles(self):
        prior = ContinuousPrior.beta(1 / 3)
        bound = math.pi**2 / F_THIRD
        for prof in (ChannelProfile.identity(), ChannelProfile.sin_squared()):
            assert expected_J(prof, prior) >= bound - 1e-8


class TestCapacity:
    def test_arcsine_k10(self):
        assert asymptotic_capacity(ContinuousPrior.arcsine(), 10) == pytest.approx(0.0072135, abs=1e-7)

    @pytest.mark.parametrize("theta", [0.1, 1 / 3, 0.5, 0.75])
    @pytest.mark.parametrize("k", [2, 10, 100])
    def test_upper_bound(self, theta, k):
        assert asymptotic_capacity(ContinuousPrior.beta(theta), k) <= 1.0 / (k * k * 2 * LN2) + 1e-12

    def test_beta_half_is_arcsine(self):
        assert asymptotic_capacity(ContinuousPrior.beta(0.5), 7) == asymptotic_capacity(
            ContinuousPrior.arcsine(), 7
        )

    def test_report(self):
        rep = asymptotic_report(ContinuousPrior.beta(1 / 3), 10)
        assert rep.fisher_integral >= math.pi**2
        assert rep.asymptotic_capacity == pytest.approx(math.pi**2 / (100 * 2 * LN2) / rep.fisher_integral)
        d = rep.to_dict()
        assert set(d) == {"fisher_integral", "asymptotic_capacity", "g_opt"}


class TestNormalizedPayoff:
    def test_interleaving_k100(self):
        assert abs(normalized_payoff(0.5, interleaving_channel(100), 100) - 1.0) <= 0.05

    def test_endpoint(self):
        c = interleaving_channel(10)
        assert normalized_payoff(0.0, c) == 0.0
        assert normalized_payoff(1e-12, c) < 1e-6

    def test_k_mismatch(self):
        with pytest.raises(DomainError):
            normalized_payoff(0.5, interleaving_channel(10), 11)

    @pytest.mark.parametrize(
        "profile", [ChannelProfile.identity(), ChannelProfile.sin_squared(), ChannelProfile.power(2)], ids=str
    )
    @pytest.mark.parametrize("w", [0.2, 0.5, 0.8])
    def test_convergence_to_J(self, profile, w):
        J = local_payoff_J(profile, w)
        errs = [abs(normalized_payoff(w, lift_profile(profile, k)) - J) for k in (25, 50, 100)]
        assert errs[1] <= errs[0] + 1e-3 and errs[2] <= errs[1] + 1e-3
        assert errs[2] < 0.05

    def test_tracks_J_opt(self):
        prior = ContinuousPrior.beta(1 / 3)
        c = lift_profile(optimal_profile(prior), 50)
        _, rows = normalized_payoff_table(prior, c, points=41, margin=0.1)
        dev = max(abs(v - r) for _, v, r in rows)
        assert dev < 0.1


class TestBernstein:
    def test_linear(self):
        for k in (2, 5, 50):
            assert bernstein_expansion_check(ChannelProfile.identity(), k, 0.37) == pytest.approx(0.0, abs=1e-13)

    @pytest.mark.parametrize("w", [0.5, 0.2, 0.9])
    def test_quadratic(self, w):
        for k in (3, 10, 40):
            assert bernstein_expansion_check(ChannelProfile.power(2), k, w) == pytest.approx(0.0, abs=1e-12)

    def test_sin_squared_decreasing(self):
        r = [bernstein_expansion_check(ChannelProfile.sin_squared(), k, 0.3) for k in (20, 40, 80)]
        assert r[0] > r[1] > r[2]


class TestTables:
    def test_profile_table(self):
        header, rows = profile_table(ContinuousPrior.beta(2 / 3), points=11)
        assert header == ["w", "value"] and len(rows) == 11
        assert rows[0] == (0.0, 0.0)

    def test_profile_table_with_channel(self):
        prior = ContinuousPrior.arcsine()
        header, rows = profile_table(prior, interleaving_channel(5))
        assert header == ["w", "value", "reference"] and len(rows) == 6
        for w, v, r in rows:
            assert v == pytest.approx(r, abs=1e-12)

    def test_payoff_table_margin(self):
        _, rows = normalized_payoff_table(ContinuousPrior.arcsine(), interleaving_channel(10))
        assert rows[0][0] == J_MARGIN and rows[-1][0] == 1 - J_MARGIN
        assert all(r == pytest.approx(1.0, abs=1e-12) for _, _, r in rows)
