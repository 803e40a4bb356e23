"""Joint and simple mutual-information payoffs for the binary game.

For a bias ``w`` and attack ``p`` the joint payoff is ``I(Z; Y | W = w) / k``
and the simple payoff is ``I(X_1; Y | W = w)``, both in bits.  Scalar entry
points return :class:`PayoffEvaluation` objects; :class:`NodePayoff` holds the
binomial kernels for a fixed set of biases and evaluates values and
gradients for many channels at once, which is what the solvers use.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import (
    CollusionChannel,
    ContinuousPrior,
    DecoderKind,
    FiniteSpectrumPrior,
    binomial_matrix,
    entropy_bits,
    entropy_curvature,
    entropy_slope,
    kl_bits,
    _CLAMP,
)
from .errors import CrossCheckError, DomainError, QuadratureError
from .quadrature import DEFAULT_NODES, QuadratureRule, build_quadrature

Prior = Union[FiniteSpectrumPrior, ContinuousPrior]

#: successive quadrature levels must agree this closely
QUADRATURE_AGREEMENT = 1e-8
_MAX_DOUBLINGS = 5
FORM_AGREEMENT = 1e-10


class NodePayoff:
    """Payoff machinery for ``k`` colluders at a fixed vector of biases.

    Channel arguments ``p`` may be a single attack of shape ``(k + 1,)`` or a
    batch of shape ``(k + 1, m)``; values then come back with shape ``(n,)``
    or ``(n, m)``.
    """

    def __init__(self, k: int, nodes, complements=None):
        self.k = int(k)
        self.w = np.atleast_1d(np.asarray(nodes, dtype=float))
        self.wc = 1.0 - self.w if complements is None else np.atleast_1d(complements)
        self.A = binomial_matrix(self.k, self.w, self.wc)
        self.B = binomial_matrix(self.k - 1, self.w, self.wc)
        # rows where Z is degenerate; every payoff vanishes there
        self.dead = (self.w == 0.0) | (self.wc == 0.0)

    def response(self, p):
        return self.A @ p

    def joint_values(self, p):
        p = np.asarray(p, dtype=float)
        g = self.A @ p
        gc = self.A @ (1.0 - p)
        if p.ndim == 1:
            terms = kl_bits(p[None, :], g[:, None], sc=gc[:, None])
            with np.errstate(invalid="ignore"):
                vals = np.where(self.A > 0.0, self.A * terms, 0.0).sum(axis=1) / self.k
            return np.where(self._dead(g, gc), 0.0, vals)
        terms = kl_bits(p[None, :, :], g[:, None, :], sc=gc[:, None, :])
        with np.errstate(invalid="ignore"):
            prod = np.where(self.A[:, :, None] > 0.0, self.A[:, :, None] * terms, 0.0)
        vals = prod.sum(axis=1) / self.k
        return np.where(self._dead(g, gc), 0.0, vals)

    def _dead(self, g, gc):
        """Rows with a degenerate ``Z`` or a response that underflowed.

        Inside ``(0, 1)`` a feasible attack has ``0 < g < 1``, so ``g == 0``
        there means every term ``alpha_z p_z`` underflowed and the payoff is
        below the smallest double.
        """
        dead = self.dead if g.ndim == 1 else self.dead[:, None]
        return dead | (g <= 0.0) | (gc <= 0.0)

    def simple_values(self, p):
        p = np.asarray(p, dtype=float)
        g = self.A @ p
        gc = self.A @ (1.0 - p)
        a1 = self.B @ p[1:]
        a0 = self.B @ p[:-1]
        slope = self.B @ np.diff(p, axis=0)
        w = self.w if p.ndim == 1 else self.w[:, None]
        wc = self.wc if p.ndim == 1 else self.wc[:, None]
        with np.errstate(invalid="ignore"):
            up = np.where(w > 0.0, w * kl_bits(a1, g, wc * slope, gc), 0.0)
            down = np.where(wc > 0.0, wc * kl_bits(a0, g, -w * slope, gc), 0.0)
        return np.where(self._dead(g, gc), 0.0, up + down)

    def values(self, p, decoder: DecoderKind):
        if decoder is DecoderKind.JOINT:
            return self.joint_values(p)
        return self.simple_values(p)

    def joint_jacobian(self, p):
        """Rows ``dI_joint(w_i, p) / dp`` for every node, end columns zeroed."""
        g = self.A @ p
        jac = self.A * (entropy_slope(g)[:, None] - entropy_slope(p)[None, :]) / self.k
        jac[:, 0] = jac[:, -1] = 0.0
        return jac

    def simple_jacobian(self, p):
        g = self.A @ p
        a1 = self.B @ p[1:]
        a0 = self.B @ p[:-1]
        jac = self.A * entropy_slope(g)[:, None]
        jac[:, 1:] -= self.B * (self.w * entropy_slope(a1))[:, None]
        jac[:, :-1] -= self.B * (self.wc * entropy_slope(a0))[:, None]
        jac[:, 0] = jac[:, -1] = 0.0
        return jac

    def jacobian(self, p, decoder: DecoderKind):
        p = np.asarray(p, dtype=float)
        if decoder is DecoderKind.JOINT:
            return self.joint_jacobian(p)
        return self.simple_jacobian(p)

    def gradient(self, p, weights, decoder: DecoderKind):
        """``sum_i weights[i] * dI(w_i, p) / dp``."""
        return np.asarray(weights, dtype=float) @ self.jacobian(p, decoder)

    def hessian(self, p, weights, decoder: DecoderKind):
        """``sum_i weights[i] * d2I(w_i, p) / dp2`` as a ``(k + 1, k + 1)`` matrix."""
        p = np.asarray(p, dtype=float)
        wt = np.asarray(weights, dtype=float)
        g = self.A @ p
        H = (self.A.T * (wt * entropy_curvature(g))) @ self.A
        if decoder is DecoderKind.JOINT:
            H -= np.diag((self.A.T @ wt) * entropy_curvature(p))
            return H / self.k
        n = self.B.shape[0]
        for shift, coef, seg in ((1, self.w, p[1:]), (0, self.wc, p[:-1])):
            emb = np.zeros((n, self.k + 1))
            emb[:, shift : shift + self.k] = self.B
            d = wt * coef * entropy_curvature(self.B @ seg)
            H -= (emb.T * d) @ emb
        return H

    def unbounded(self, p, decoder: DecoderKind):
        """Interior coordinates whose partial derivative is infinite at ``p``."""
        k = self.k
        live = ~self.dead
        idx = set()
        if decoder is DecoderKind.JOINT:
            edge = (p <= 0.0) | (p >= 1.0)
            hit = (self.A[live] > 0.0).any(axis=0) & edge
            idx.update(int(z) for z in np.flatnonzero(hit))
        else:
            for vec, shift, wt in (
                (self.B @ p[1:], 1, self.w),
                (self.B @ p[:-1], 0, self.wc),
            ):
                bad = live & (wt > 0.0) & ((vec <= _CLAMP) | (vec >= 1.0 - _CLAMP))
                if np.any(bad):
                    cols = (self.B[bad] > 0.0).any(axis=0)
                    idx.update(int(j + shift) for j in np.flatnonzero(cols))
        return tuple(sorted(z for z in idx if 0 < z < k))


# ---------------------------------------------------------------------------
# scalar evaluations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PayoffEvaluation:
    value: float
    gradient_p: Optional[np.ndarray]
    w: float
    channel: CollusionChannel
    decoder: DecoderKind
    unbounded: tuple = ()


def _check_w(w):
    w = float(w)
    if not 0.0 <= w <= 1.0:
        raise DomainError(f"w={w!r} is not a probability")
    return w


def response_curve(c: CollusionChannel, w: float) -> float:
    """``g_k(w) = Pr(Y = 1 | W = w)``, the Bernstein polynomial of ``p``."""
    w = _check_w(w)
    return float(np.clip(binomial_matrix(c.k, w)[0] @ c.p, 0.0, 1.0))


def response_slope(c: CollusionChannel, w: float, order: int = 1) -> float:
    """Derivative of ``g_k`` of the given order, by exact Bernstein differentiation."""
    from .core import bernstein

    return float(bernstein(c.p, _check_w(w), order)[0])


def _evaluate(w, c, decoder, gradient):
    w = _check_w(w)
    node = NodePayoff(c.k, [w])
    value = float(node.values(c.p, decoder)[0])
    grad = None
    flagged = ()
    if gradient:
        grad = node.gradient(c.p, np.ones(1), decoder)
        grad.setflags(write=False)
        flagged = node.unbounded(c.p, decoder)
    return node, value, grad, flagged


def joint_payoff(
    w: float, c: CollusionChannel, gradient: bool = True, cross_check: bool = False
) -> PayoffEvaluation:
    """Joint payoff ``(1/k) [h(alpha'p) - alpha' h(p)]`` at bias ``w``.

    The reported value uses the entropy form.  With ``cross_check`` the
    divergence form ``(1/k) sum_z alpha_z d(p_z || alpha'p)`` is evaluated as
    well and a :class:`CrossCheckError` is raised if the two differ by more
    than ``1e-10``.
    """
    node, kl_value, grad, flagged = _evaluate(w, c, DecoderKind.JOINT, gradient)
    alpha = node.A[0]
    g = float(np.clip(alpha @ c.p, 0.0, 1.0))
    value = max((float(entropy_bits(g)) - float(alpha @ entropy_bits(c.p))) / c.k, 0.0)
    if cross_check and abs(value - kl_value) > FORM_AGREEMENT:
        raise CrossCheckError(f"entropy form {value!r} vs divergence form {kl_value!r}")
    return PayoffEvaluation(value, grad, float(w), c, DecoderKind.JOINT, flagged)


def simple_payoff(w: float, c: CollusionChannel, gradient: bool = True) -> PayoffEvaluation:
    """Simple payoff ``w d(alpha1'p || alpha'p) + (1-w) d(alpha0'p || alpha'p)``."""
    _, value, grad, flagged = _evaluate(w, c, DecoderKind.SIMPLE, gradient)
    return PayoffEvaluation(value, grad, float(w), c, DecoderKind.SIMPLE, flagged)


def payoff(w: float, c: CollusionChannel, decoder, gradient: bool = True) -> PayoffEvaluation:
    decoder = DecoderKind.parse(decoder)
    if decoder is DecoderKind.JOINT:
        return joint_payoff(w, c, gradient)
    return simple_payoff(w, c, gradient)


def payoff_values(c: CollusionChannel, w, decoder) -> np.ndarray:
    """Payoff at every bias in ``w`` (divergence form, vectorised)."""
    decoder = DecoderKind.parse(decoder)
    return NodePayoff(c.k, w).values(c.p, decoder)


def payoff_w_derivatives(c: CollusionChannel, w, decoder):
    """Payoff and its first two derivatives in ``w`` at every bias in ``w``.

    Derivatives of the Bernstein polynomials involved are exact; only the
    entropy derivatives are clamped near the boundary.
    """
    from .core import bernstein

    decoder = DecoderKind.parse(decoder)
    w = np.atleast_1d(np.asarray(w, dtype=float))
    p = c.p
    k = c.k
    value = payoff_values(c, w, decoder)
    h1 = entropy_slope
    h2 = entropy_curvature
    if decoder is DecoderKind.JOINT:
        hp = entropy_bits(p)
        g, g1, g2 = (bernstein(p, w, r) for r in range(3))
        H1, H2 = bernstein(hp, w, 1), bernstein(hp, w, 2)
        d1 = (h1(g) * g1 - H1) / k
        d2 = (h2(g) * g1**2 + h1(g) * g2 - H2) / k
        return value, d1, d2
    a1, a11, a12 = (bernstein(p[1:], w, r) for r in range(3))
    a0, a01, a02 = (bernstein(p[:-1], w, r) for r in range(3))
    g, g1, g2 = (bernstein(p, w, r) for r in range(3))
    d1 = h1(g) * g1 - entropy_bits(a1) - w * h1(a1) * a11 + entropy_bits(a0) - (1 - w) * h1(a0) * a01
    d2 = (
        h2(g) * g1**2
        + h1(g) * g2
        - 2.0 * h1(a1) * a11
        - w * (h2(a1) * a11**2 + h1(a1) * a12)
        + 2.0 * h1(a0) * a01
        - (1 - w) * (h2(a0) * a01**2 + h1(a0) * a02)
    )
    return value, d1, d2


# ---------------------------------------------------------------------------
# expectations under a prior
# ---------------------------------------------------------------------------


class ExpectedPayoff:
    """``E_prior[I(W, p)]`` and its gradient in ``p`` for a fixed node set."""

    def __init__(self, k: int, decoder, nodes, weights, complements=None):
        self.k = int(k)
        self.decoder = DecoderKind.parse(decoder)
        self.node = NodePayoff(k, nodes, complements)
        self.weights = np.asarray(weights, dtype=float)

    @classmethod
    def from_prior(cls, prior: Prior, k: int, decoder, n: Optional[int] = None):
        """Discrete priors use their atoms; continuous ones a quadrature rule.

        Without ``n`` the node count is chosen by :func:`converged_rule`.
        """
        if isinstance(prior, FiniteSpectrumPrior):
            return cls(k, decoder, prior.support, prior.masses)
        rule = build_quadrature(prior, n) if n else converged_rule(prior, k, decoder)
        return cls(k, decoder, rule.nodes, rule.weights, rule.complements)

    def pointwise(self, p):
        return self.node.values(p, self.decoder)

    def value(self, p):
        """Expected payoff; a batch of channels gives one value per column."""
        return self.weights @ self.pointwise(p)

    def gradient(self, p):
        return self.node.gradient(np.asarray(p, dtype=float), self.weights, self.decoder)

    def hessian(self, p):
        return self.node.hessian(p, self.weights, self.decoder)


def _quadrature_value(rule: QuadratureRule, c: CollusionChannel, decoder):
    node = NodePayoff(c.k, rule.nodes, rule.complements)
    return float(rule.weights @ node.values(c.p, decoder))


def _levels(prior, start):
    n = start
    for _ in range(_MAX_DOUBLINGS + 1):
        yield n
        n *= 2


@functools.lru_cache(maxsize=256)
def _converged_size(prior: ContinuousPrior, k: int, decoder: DecoderKind, start: int) -> int:
    ref = CollusionChannel(k, np.arange(k + 1) / k)
    prev = None
    for n in _levels(prior, start):
        val = _quadrature_value(build_quadrature(prior, n), ref, decoder)
        if prev is not None and abs(val - prev) <= QUADRATURE_AGREEMENT:
            return n
        prev = val
    raise QuadratureError(f"quadrature did not settle within {n} nodes")


def converged_rule(
    prior: ContinuousPrior, k: int, decoder, start: int = DEFAULT_NODES
) -> QuadratureRule:
    """Smallest doubling of ``start`` nodes that agrees with the previous level.

    Agreement is measured on the interleaving attack, the solvers' warm
    start, and must hold within ``1e-8`` bits.
    """
    n = _converged_size(prior, int(k), DecoderKind.parse(decoder), int(start))
    return build_quadrature(prior, n)


def expected_payoff(
    prior: Prior, c: CollusionChannel, decoder, n: Optional[int] = None
) -> float:
    """``E_prior[I(W, p)]`` in bits.

    Discrete priors are summed exactly.  Continuous priors use the prior's
    quadrature rule, doubling from 96 nodes until two successive levels
    agree within ``1e-8``; passing ``n`` fixes the node count instead.

    Raises
    ------
    QuadratureError
        If the refinement levels never agree.
    """
    decoder = DecoderKind.parse(decoder)
    if isinstance(prior, FiniteSpectrumPrior):
        node = NodePayoff(c.k, prior.support)
        return float(prior.masses @ node.values(c.p, decoder))
    if n is not None:
        return _quadrature_value(build_quadrature(prior, n), c, decoder)
    prev = None
    for size in _levels(prior, DEFAULT_NODES):
        val = _quadrature_value(build_quadrature(prior, size), c, decoder)
        if prev is not None and abs(val - prev) <= QUADRATURE_AGREEMENT:
            return val
        prev = val
    raise QuadratureError(f"expected payoff did not settle within {size} nodes")


__all__ = [
    "NodePayoff",
    "PayoffEvaluation",
    "response_curve",
    "response_slope",
    "joint_payoff",
    "simple_payoff",
    "payoff",
    "payoff_values",
    "payoff_w_derivatives",
    "ExpectedPayoff",
    "converged_rule",
    "expected_payoff",
]
