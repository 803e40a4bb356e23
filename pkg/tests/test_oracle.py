import json
import math

import numpy as np
import pytest

from fpgame.core import CollusionChannel, ContinuousPrior, binary_entropy, interleaving_channel
from fpgame.errors import CrossCheckError, DomainError
from fpgame.games import minimize_over_channel, solve_saddle
from fpgame.oracle import (
    DUAL_TOLERANCE,
    GridSpec,
    OracleReport,
    dual_quadrature,
    fd_gradient,
    gradient_check,
    grid_minimax,
    saddle_check,
)
from fpgame.payoff import payoff

LN2 = math.log(2.0)
# grid values at the default 401 x 401 resolution
GRID_JOINT_K3 = 0.09754416909
GRID_SIMPLE_K3 = 0.065923619


class TestGridSpec:
    def test_minimum_counts(self):
        with pytest.raises(DomainError):
            GridSpec(w_points=2)

    def test_cap(self):
        assert GridSpec().cap(5) == 3
        assert GridSpec(prior_support_cap=1).cap(3) == 1
        with pytest.raises(DomainError):
            GridSpec(prior_support_cap=3).cap(3)


class TestGridMinimax:
    def test_k2_joint(self):
        res = grid_minimax(2, "joint")
        assert res.value == pytest.approx(0.25, abs=2e-3)
        value, prior, channel = res
        np.testing.assert_array_equal(channel.p, [0, 0.5, 1])

    def test_k2_simple(self):
        assert grid_minimax(2, "simple").value == pytest.approx(1 - binary_entropy(0.75), abs=2e-3)

    def test_k3_frozen(self):
        assert grid_minimax(3, "joint").value == pytest.approx(GRID_JOINT_K3, abs=1e-10)
        assert grid_minimax(3, "simple").value == pytest.approx(GRID_SIMPLE_K3, abs=1e-8)

    @pytest.mark.parametrize("k", [2, 3])
    def test_sandwich(self, k):
        v = grid_minimax(k, "joint").value
        assert 2 / (k * k * math.pi**2 * LN2) - 3e-3 <= v <= 1 / (k * k * LN2) + 3e-3

    @pytest.mark.parametrize("decoder", ["joint", "simple"])
    def test_refinement_consistent(self, decoder):
        coarse = grid_minimax(3, decoder, GridSpec(201, 201))
        fine = grid_minimax(3, decoder, GridSpec(401, 401))
        assert abs(fine.value - coarse.value) <= coarse.slack + fine.slack

    def test_supported_k(self):
        with pytest.raises(DomainError):
            grid_minimax(6, "joint")

    def test_k4_runs(self):
        res = grid_minimax(4, "joint", GridSpec(101, 41))
        assert res.prior.size <= 2 and res.channel.is_symmetric()


class TestSaddleCheck:
    @pytest.mark.parametrize("k", [2, 3])
    @pytest.mark.parametrize("decoder", ["joint", "simple"])
    def test_pass(self, k, decoder):
        rep = saddle_check(k, decoder)
        assert rep.passed and rep.delta <= 1e-3
        d = rep.to_dict()
        assert set(d) == {"operation", "inputs", "value", "comparator", "delta", "pass"}
        assert json.loads(rep.to_json())["pass"] is True


class TestFdGradient:
    def test_ends_are_zero(self):
        c = CollusionChannel.from_free(6, [0.1, 0.3])
        g = fd_gradient(0.3, c, "joint")
        assert g.shape == (7,) and g[0] == 0.0 and g[-1] == 0.0

    @pytest.mark.parametrize("decoder", ["joint", "simple"])
    def test_matches_analytic(self, decoder):
        c = CollusionChannel(5, [0, 0.15, 0.4, 0.55, 0.8, 1])
        rep = gradient_check(0.37, c, decoder)
        assert rep.passed and rep.value <= 1e-6

    def test_symmetric_pairing(self):
        c = interleaving_channel(6)
        full = fd_gradient(0.3, c, "joint")
        mirror = fd_gradient(0.7, c, "joint")
        # dI/dp_z at w equals -dI/dp_{k-z} at 1 - w for a symmetric attack
        np.testing.assert_allclose(full, -mirror[::-1], atol=1e-9)
        red = fd_gradient(0.3, c, "joint", symmetric=True)
        np.testing.assert_allclose(red, full[1:3] - full[5:3:-1], atol=1e-9)

    def test_vanishes_at_minimizer(self):
        sol = solve_saddle(4, "joint")
        prior = sol.prior
        inner = minimize_over_channel(prior, "joint", 4, start=sol.channel)
        g = sum(m * fd_gradient(w, inner.channel, "joint", symmetric=True) for w, m in zip(prior.support, prior.masses))
        x = inner.channel.p[1 : g.size + 1]
        g = np.where((x <= 0) & (g > 0), 0.0, g)
        g = np.where((x >= 1) & (g < 0), 0.0, g)
        assert np.max(np.abs(g)) <= 1e-5


class TestDualQuadrature:
    def test_constant(self):
        res = dual_quadrature(lambda w: np.ones_like(w), ContinuousPrior.arcsine())
        a, b, d = res
        assert a == pytest.approx(1.0, abs=1e-12) and b == pytest.approx(1.0, abs=1e-12) and d <= 1e-12

    @pytest.mark.parametrize("theta", [1 / 3, 0.5, 2 / 3])
    def test_fisher_integrand(self, theta):
        prior = ContinuousPrior.beta(theta)
        from scipy.special import beta as B

        F = B(theta, theta) * B(1 - theta, 1 - theta)

        def integrand(w, wc):
            return 1.0 / (prior.pdf_pair(w, wc) ** 2 * w * wc)

        res = dual_quadrature(integrand, prior, singularity=(1 - 2 * theta,) * 2, pair=True)
        assert res.agree
        assert res.value_a == pytest.approx(F, rel=1e-9)
        assert res.value_b == pytest.approx(F, rel=1e-9)

    def test_arcsine_fisher_is_pi_squared(self):
        prior = ContinuousPrior.arcsine()
        res = dual_quadrature(lambda w, wc: 1.0 / (prior.pdf_pair(w, wc) ** 2 * w * wc), prior, pair=True)
        assert res.value_a == pytest.approx(math.pi**2, abs=1e-10)

    def test_strict_raises(self):
        # an undeclared endpoint singularity defeats the Gauss-Jacobi side
        with pytest.raises(CrossCheckError):
            dual_quadrature(lambda w: w**-0.45, ContinuousPrior.arcsine(), strict=True)
        res = dual_quadrature(lambda w: w**-0.45, ContinuousPrior.arcsine(), singularity=(-0.45, 0.0))
        assert res.agree

    def test_rejects_nonintegrable(self):
        with pytest.raises(DomainError):
            dual_quadrature(lambda w: w, ContinuousPrior.arcsine(), singularity=(-0.6, 0.0))

    def test_tolerance_constant(self):
        assert DUAL_TOLERANCE == 1e-7


def test_report_compare():
    rep = OracleReport.compare("x", {"k": 2}, 1.0, 1.0 + 1e-4, 1e-3)
    assert rep.passed and rep.delta == pytest.approx(1e-4)
    assert not OracleReport.compare("x", {}, 0.0, 1.0, 0.5).passed
