"""Quadrature rules for expectations under a continuous prior.

A rule's weights already contain the density, so ``rule.integrate(phi)``
approximates ``E[phi(W)]`` and ``rule.weights.sum()`` approximates 1.  Every
rule also carries ``complements = 1 - nodes`` computed without cancellation,
which matters for tanh-sinh nodes that crowd against ``w = 1``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .core import ContinuousPrior
from .errors import QuadratureError

DEFAULT_NODES = 96
NORMALIZATION_TOL = 1e-10

# tanh-sinh nodes stop where exp(-pi sinh t) would underflow
_TS_TMAX = math.asinh(700.0 / math.pi)


class Scheme(str, enum.Enum):
    GAUSS_JACOBI = "gauss-jacobi"
    TANH_SINH = "tanh-sinh"
    SIMPSON = "simpson"


@dataclass(frozen=True)
class QuadratureRule:
    scheme: Scheme
    nodes: np.ndarray
    complements: np.ndarray
    weights: np.ndarray
    exponents: tuple = (0.0, 0.0)

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    def integrate(self, func: Callable) -> float:
        """``sum_i weights[i] * func(nodes[i])``."""
        return float(self.weights @ np.asarray(func(self.nodes), dtype=float))

    def integrate_pair(self, func: Callable) -> float:
        """Like :meth:`integrate` with ``func(w, 1 - w)`` given both arguments."""
        vals = np.asarray(func(self.nodes, self.complements), dtype=float)
        return float(self.weights @ vals)


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


def gauss_jacobi_unit(n: int, a: float, b: float):
    """Nodes, complements and weights for ``int_0^1 f(w) w^a (1-w)^b dw``."""
    x, wts = roots_jacobi(n, b, a)
    nodes = 0.5 * (1.0 + x)
    comp = 0.5 * (1.0 - x)
    return nodes, comp, wts * 2.0 ** (-(a + b + 1.0))


def tanh_sinh_unit(n: int):
    """Nodes, complements and weights of the tanh-sinh rule on ``(0, 1)``."""
    t = np.linspace(-_TS_TMAX, _TS_TMAX, n)
    h = t[1] - t[0]
    u = math.pi * np.sinh(t)
    # w = 1 / (1 + exp(-u)) and 1 - w = 1 / (1 + exp(u)), each without cancellation
    nodes = 0.5 * (1.0 + np.tanh(u / 2.0))
    comp = 0.5 * (1.0 - np.tanh(u / 2.0))
    neg = u < 0
    nodes[neg] = np.exp(u[neg]) / (1.0 + np.exp(u[neg]))
    comp[~neg] = np.exp(-u[~neg]) / (1.0 + np.exp(-u[~neg]))
    weights = h * math.pi * np.cosh(t) * nodes * comp
    keep = (nodes > 0.0) & (comp > 0.0) & (weights > 0.0)
    return nodes[keep], comp[keep], weights[keep]


def simpson_unit(n: int, a: float, b: float):
    """Composite Simpson rule for ``int_0^1 f(w) w^a (1-w)^b dw``.

    Each half of the interval is mapped by ``w = u^(1/(a+1)) / 2`` (and the
    mirror image near 1) so that the endpoint power is absorbed into the
    Jacobian; the transformed integrand is then regular in ``u``.  ``n`` is the
    number of Simpson panels per half and must be even.
    """
    if n % 2:
        n += 1
    u = np.linspace(0.0, 1.0, n + 1)
    sw = np.ones(n + 1)
    sw[1:-1:2] = 4.0
    sw[2:-1:2] = 2.0
    sw *= (u[1] - u[0]) / 3.0

    def half(e, other):
        beta = 1.0 / (e + 1.0)
        near = 0.5 * u**beta  # distance to the endpoint
        far = 1.0 - near
        # w^e dw = beta / 2^(e+1) du after the substitution
        jac = sw * beta / 2.0 ** (e + 1.0) * far**other
        return near, far, jac

    n0, f0, j0 = half(a, b)
    n1, f1, j1 = half(b, a)
    nodes = np.concatenate((n0, f1[::-1][1:]))
    comp = np.concatenate((f0, n1[::-1][1:]))
    # the shared midpoint w = 1/2 appears in both halves
    weights = np.concatenate((j0[:-1], [j0[-1] + j1[-1]], j1[::-1][1:]))
    return nodes, comp, weights


def build_quadrature(
    prior: ContinuousPrior, n: int = DEFAULT_NODES, scheme: Optional[Scheme] = None
) -> QuadratureRule:
    """Quadrature rule for ``E_prior[.]`` with ``n`` nodes.

    Beta-family priors default to Gauss-Jacobi with exponents
    ``(theta - 1, theta - 1)``; custom densities default to tanh-sinh.  The
    rule must reproduce the total mass 1 within ``1e-10``.

    Raises
    ------
    QuadratureError
        If ``n < 8`` or the density does not integrate to 1 with the given
        endpoint hints.
    """
    if n < 8:
        raise QuadratureError(f"need at least 8 nodes, got {n}")
    if scheme is None:
        scheme = Scheme.GAUSS_JACOBI if prior.is_beta_family else Scheme.TANH_SINH
    scheme = Scheme(scheme)
    a, b = prior.hint
    if scheme is Scheme.GAUSS_JACOBI:
        nodes, comp, base = gauss_jacobi_unit(n, a, b)
        weights = base * prior.regular_part(nodes)
    elif scheme is Scheme.SIMPSON:
        nodes, comp, base = simpson_unit(n // 2, a, b)
        weights = base * prior.regular_part(nodes)
    else:
        nodes, comp, base = tanh_sinh_unit(n)
        with np.errstate(over="ignore"):
            weights = base * nodes**a * comp**b * prior.regular_part(nodes)
    if not np.all(np.isfinite(weights)) or np.any(weights < 0.0):
        raise QuadratureError("density is not integrable with the given endpoint hints")
    total = float(weights.sum())
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise QuadratureError(
            f"{scheme.value} rule with {n} nodes integrates the density to {total!r}"
        )
    _freeze(nodes, comp, weights)
    return QuadratureRule(scheme, nodes, comp, weights, (a, b))


def segment_rule(lo: float, hi: float, n: int, exponent_lo: float = 0.0, exponent_hi: float = 0.0):
    """Gauss rule on ``[lo, hi]`` absorbing ``(w - lo)^e0 (hi - w)^e1``.

    Returns nodes and weights such that ``sum(weights * f(nodes))`` approximates
    ``int_lo^hi f(w) (w - lo)^e0 (hi - w)^e1 dw``.
    """
    span = hi - lo
    if exponent_lo == 0.0 and exponent_hi == 0.0:
        x, wts = roots_legendre(n)
        return lo + span * 0.5 * (1.0 + x), wts * span * 0.5
    t, _, wts = gauss_jacobi_unit(n, exponent_lo, exponent_hi)
    return lo + span * t, wts * span ** (1.0 + exponent_lo + exponent_hi)


__all__ = [
    "DEFAULT_NODES",
    "Scheme",
    "QuadratureRule",
    "build_quadrature",
    "gauss_jacobi_unit",
    "tanh_sinh_unit",
    "simpson_unit",
    "segment_rule",
]
