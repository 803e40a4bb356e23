import math

import numpy as np
import pytest

from fpgame.core import (
    CollusionChannel,
    ContinuousPrior,
    FiniteSpectrumPrior,
    bernstein,
    binary_entropy,
    interleaving_channel,
    kernels,
    kl_bernoulli,
)
from fpgame.errors import CrossCheckError, QuadratureError
from fpgame.payoff import (
    ExpectedPayoff,
    NodePayoff,
    expected_payoff,
    joint_payoff,
    payoff,
    payoff_values,
    payoff_w_derivatives,
    response_curve,
    response_slope,
    simple_payoff,
)
from fpgame.quadrature import build_quadrature

# 1 - h(3/4)
SIMPLE_K2 = 0.18872187554086717


def random_channel(rng, k, symmetric=False, margin=0.02):
    if symmetric:
        return CollusionChannel.from_free(k, rng.uniform(margin, 1 - margin, (k - 1) // 2))
    return CollusionChannel(k, np.concatenate(([0.0], rng.uniform(margin, 1 - margin, k - 1), [1.0])))


class TestResponse:
    def test_interleaving_is_identity(self):
        c = interleaving_channel(9)
        for w in np.linspace(0, 1, 21):
            assert response_curve(c, w) == pytest.approx(w, abs=1e-12)

    def test_hand_value(self):
        assert response_curve(interleaving_channel(2), 0.3) == pytest.approx(0.30, abs=1e-15)

    def test_endpoints_exact(self):
        c = CollusionChannel(4, np.array([0.0, 0.9, 0.1, 0.7, 1.0]))
        assert response_curve(c, 0.0) == 0.0
        assert response_curve(c, 1.0) == 1.0

    def test_slope(self):
        c = CollusionChannel(3, np.array([0.0, 0.6, 0.2, 1.0]))
        # g = 3w(1-w)^2 0.6 + 3w^2(1-w) 0.2 + w^3
        w = 0.4
        dg = 0.6 * 3 * ((1 - w) ** 2 - 2 * w * (1 - w)) + 0.2 * 3 * (2 * w * (1 - w) - w * w) + 3 * w * w
        assert response_slope(c, w) == pytest.approx(dg, rel=1e-13)


class TestJoint:
    def test_zero_at_endpoints(self):
        c = random_channel(np.random.default_rng(0), 5)
        assert joint_payoff(0.0, c).value == 0.0
        assert joint_payoff(1.0, c).value == 0.0

    def test_k2_half(self):
        ev = joint_payoff(0.5, interleaving_channel(2), cross_check=True)
        assert ev.value == pytest.approx(0.25, abs=1e-15)

    def test_interleaving_closed_form(self):
        k = 6
        for w in (0.1, 0.35, 0.8):
            t = kernels(k, w)
            ref = (binary_entropy(w) - sum(t.alpha[z] * binary_entropy(z / k) for z in range(k + 1))) / k
            assert joint_payoff(w, interleaving_channel(k)).value == pytest.approx(ref, abs=1e-15)

    def test_forms_agree(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            k = int(rng.integers(2, 15))
            c = random_channel(rng, k, margin=0.0)
            w = float(rng.uniform())
            ent = joint_payoff(w, c, gradient=False).value
            t = kernels(k, w)
            g = float(t.alpha @ c.p)
            kl = sum(t.alpha[z] * kl_bernoulli(c.p[z], g) for z in range(k + 1)) / k
            assert abs(ent - kl) <= 1e-10

    def test_cross_check_raises(self, monkeypatch):
        import fpgame.payoff as mod

        monkeypatch.setattr(mod.NodePayoff, "values", lambda self, p, d: np.array([1.0]))
        with pytest.raises(CrossCheckError):
            joint_payoff(0.3, interleaving_channel(3), cross_check=True)

    def test_boundary_gradient_flag(self):
        c = CollusionChannel(3, np.array([0.0, 0.0, 1.0, 1.0]))
        ev = joint_payoff(0.4, c)
        assert ev.value >= 0.0
        assert ev.unbounded == (1, 2)

    def test_gradient_ends_zero(self):
        ev = joint_payoff(0.3, random_channel(np.random.default_rng(2), 6))
        assert ev.gradient_p[0] == 0.0 and ev.gradient_p[-1] == 0.0


class TestSimple:
    def test_zero_at_endpoints(self):
        c = random_channel(np.random.default_rng(3), 4)
        assert simple_payoff(0.0, c).value == 0.0
        assert simple_payoff(1.0, c).value == 0.0

    def test_k2_half(self):
        assert simple_payoff(0.5, interleaving_channel(2)).value == pytest.approx(SIMPLE_K2, abs=1e-15)

    def test_interleaving_closed_form(self):
        k = 5
        for w in (0.1, 0.5, 0.77):
            ref = w * kl_bernoulli(w + (1 - w) / k, w) + (1 - w) * kl_bernoulli(w - w / k, w)
            assert simple_payoff(w, interleaving_channel(k)).value == pytest.approx(ref, rel=1e-13)

    def test_kernel_form(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            k = int(rng.integers(2, 12))
            c = random_channel(rng, k)
            w = float(rng.uniform(0.01, 0.99))
            t = kernels(k, w)
            g = float(t.alpha @ c.p)
            ref = w * kl_bernoulli(float(t.alpha1 @ c.p), g) + (1 - w) * kl_bernoulli(float(t.alpha0 @ c.p), g)
            assert simple_payoff(w, c).value == pytest.approx(ref, rel=1e-11, abs=1e-15)

    def test_pinsker_chain(self):
        rng = np.random.default_rng(5)
        for _ in range(40):
            k = int(rng.integers(2, 12))
            c = random_channel(rng, k)
            for w in np.linspace(0.02, 0.98, 13):
                d1 = bernstein(c.p, w, 1)[0]
                bound = 2.0 / (k * k * math.log(2)) * d1**2 * w * (1 - w)
                assert simple_payoff(w, c, gradient=False).value >= bound - 1e-15

    def test_simple_below_joint_pointwise(self):
        # I(X_1; Y) <= I(Z; Y) / k fails pointwise in general, but not at w = 1/2 for interleaving
        for k in range(2, 12):
            c = interleaving_channel(k)
            assert simple_payoff(0.5, c).value <= joint_payoff(0.5, c).value + 1e-15


class TestVectorised:
    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(6)
        k = 7
        chans = [random_channel(rng, k) for _ in range(5)]
        w = np.linspace(0.0, 1.0, 9)
        node = NodePayoff(k, w)
        for decoder in ("joint", "simple"):
            from fpgame.core import DecoderKind

            batch = node.values(np.stack([c.p for c in chans], axis=1), DecoderKind(decoder))
            for j, c in enumerate(chans):
                np.testing.assert_allclose(batch[:, j], payoff_values(c, w, decoder), atol=1e-16)

    def test_w_derivatives(self):
        c = random_channel(np.random.default_rng(7), 6)
        w = np.array([0.2, 0.45, 0.8])
        h = 1e-5
        for decoder in ("joint", "simple"):
            v, d1, d2 = payoff_w_derivatives(c, w, decoder)
            fp = payoff_values(c, w + h, decoder)
            fm = payoff_values(c, w - h, decoder)
            np.testing.assert_allclose(d1, (fp - fm) / (2 * h), rtol=1e-7)
            np.testing.assert_allclose(d2, (fp - 2 * v + fm) / h**2, rtol=1e-4)

    def test_hessian_against_gradient_differences(self):
        rng = np.random.default_rng(8)
        k = 5
        c = random_channel(rng, k)
        w = rng.uniform(0.05, 0.95, 6)
        wt = rng.uniform(size=6)
        node = NodePayoff(k, w)
        from fpgame.core import DecoderKind

        for decoder in DecoderKind:
            H = node.hessian(c.p, wt, decoder)
            h = 1e-6
            for z in range(1, k):
                e = np.zeros(k + 1)
                e[z] = h
                col = (node.gradient(c.p + e, wt, decoder) - node.gradient(c.p - e, wt, decoder)) / (2 * h)
                np.testing.assert_allclose(H[1:k, z], col[1:k], rtol=1e-5, atol=1e-7)


class TestExpected:
    def test_point_mass(self):
        val = expected_payoff(FiniteSpectrumPrior.point(0.5), interleaving_channel(2), "simple")
        assert val == pytest.approx(SIMPLE_K2, abs=1e-15)

    def test_symmetric_pair(self):
        c = CollusionChannel.from_free(5, [0.1, 0.35])
        prior = FiniteSpectrumPrior.symmetric([0.3], [1.0])
        for d in ("joint", "simple"):
            assert expected_payoff(prior, c, d) == pytest.approx(payoff(0.3, c, d).value, abs=1e-15)

    def test_arcsine_two_schemes(self):
        a = ContinuousPrior.arcsine()
        c = interleaving_channel(2)
        gj = expected_payoff(a, c, "joint")
        ts = build_quadrature(a, 96, "tanh-sinh")
        ref = float(ts.weights @ payoff_values(c, ts.nodes, "joint"))
        assert abs(gj - ref) <= 1e-8

    def test_fixed_rule(self):
        a = ContinuousPrior.beta(1 / 3)
        c = interleaving_channel(4)
        coarse = expected_payoff(a, c, "simple", n=192)
        fine = expected_payoff(a, c, "simple")
        assert coarse == pytest.approx(fine, rel=1e-5)

    def test_nonnegative(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            k = int(rng.integers(2, 8))
            assert expected_payoff(ContinuousPrior.arcsine(), random_channel(rng, k), "joint") >= 0.0

    def test_doubling_failure(self, monkeypatch):
        import fpgame.payoff as mod

        calls = iter(range(100))
        monkeypatch.setattr(mod, "_quadrature_value", lambda rule, c, d: float(next(calls)))
        with pytest.raises(QuadratureError):
            expected_payoff(ContinuousPrior.arcsine(), interleaving_channel(3), "joint")

    def test_expected_payoff_object(self):
        prior = FiniteSpectrumPrior.symmetric([0.2, 0.5], [0.5, 0.5])
        c = CollusionChannel.from_free(4, [0.2])
        ev = ExpectedPayoff.from_prior(prior, 4, "joint")
        assert ev.value(c.p) == pytest.approx(expected_payoff(prior, c, "joint"), abs=1e-16)
