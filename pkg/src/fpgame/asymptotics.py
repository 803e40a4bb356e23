"""Large-coalition behaviour of the joint game.

A smooth *profile* ``g`` on ``[0, 1]`` defines the attack ``p_z = g(z / k)``
for every ``k``.  Its angle transform is ``G = arccos(1 - 2 g)`` and its local
payoff ``J = w (1 - w) G'^2``; for large ``k`` the normalised payoff
``k^2 2 ln 2 I_joint(w, p)`` approaches ``J(w)``.  Against a prior density
``f`` the colluders' best profile equalises ``f J`` up to the weight
``1 / (f w (1 - w))`` and the capacity behaves like
``pi^2 / (k^2 2 ln 2 F)`` with ``F = int dw / (f w (1 - w))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import betainc, betaln

from .core import LN2, CollusionChannel, ContinuousPrior, PriorKind, bernstein
from .errors import DivergentIntegralError, DomainError, QuadratureError, SingularityError
from .payoff import payoff_values
from .quadrature import build_quadrature, gauss_jacobi_unit, segment_rule

#: endpoint margin used for tabulating local payoffs
J_MARGIN = 1e-4
# steps balancing O(h^4) truncation against rounding for each order
_FD_STEP = {1: 1e-4, 2: 1e-3}
_ENDPOINT_TOL = 1e-12
# balances clamping error against rounding of 1 - g near w = 1
_CLAMP = 1e-8


def _richardson(f, w, order, h=None):
    """Central difference of ``f`` at ``w`` with one Richardson extrapolation.

    Within ``2h`` of an endpoint a one-sided five-point stencil is used
    instead, so that ``f`` is only evaluated on ``[0, 1]``.
    """
    h = _FD_STEP[order] if h is None else h
    w = np.asarray(w, dtype=float)
    inner = np.clip(w, 2 * h, 1.0 - 2 * h)

    def diff(step):
        if order == 1:
            return (f(inner + step) - f(inner - step)) / (2 * step)
        return (f(inner + step) - 2 * f(inner) + f(inner - step)) / step**2

    out = np.asarray((4.0 * diff(h) - diff(2 * h)) / 3.0, dtype=float)
    edge = inner != w
    if np.any(edge):
        x = w[edge] if w.ndim else w
        s = np.where(x < 0.5, h, -h)
        vals = [f(np.clip(x + j * s, 0.0, 1.0)) for j in range(5)]
        coef = _ONE_SIDED[order]
        d = sum(cj * vj for cj, vj in zip(coef, vals)) / (12.0 * s**order)
        if w.ndim:
            out = np.array(out, copy=True)
            out[edge] = d
        else:
            out = np.asarray(d, dtype=float)
    return out


# five-point forward stencils, O(h^4) for g' and O(h^3) for g''
_ONE_SIDED = {1: (-25.0, 48.0, -36.0, 16.0, -3.0), 2: (35.0, -104.0, 114.0, -56.0, 11.0)}


def _sin_squared_local(w, wc=None):
    w = np.asarray(w, dtype=float)
    wc = 1.0 - w if wc is None else np.asarray(wc, dtype=float)
    return math.pi**2 * w * wc


@dataclass(frozen=True)
class ChannelProfile:
    """A channel profile ``g`` with its first two derivatives.

    Known profiles carry analytic derivatives; :meth:`from_function` falls
    back to Richardson-extrapolated central differences.  ``local`` may hold
    a closed form ``J(w, wc=None)`` that stays accurate where ``g (1 - g)``
    underflows; ``wc`` is an optional accurate ``1 - w``.
    """

    g: Callable
    g_prime: Callable
    g_double_prime: Callable
    name: str = "custom"
    local: Optional[Callable] = field(default=None, repr=False)
    analytic: bool = True

    def __post_init__(self):
        ends = np.asarray(self.g(np.array([0.0, 1.0])), dtype=float)
        if abs(ends[0]) > _ENDPOINT_TOL or abs(ends[1] - 1.0) > _ENDPOINT_TOL:
            raise DomainError(f"profile {self.name!r} must satisfy g(0) = 0 and g(1) = 1")

    def __call__(self, w):
        return np.asarray(self.g(np.asarray(w, dtype=float)), dtype=float)

    @classmethod
    def identity(cls) -> "ChannelProfile":
        return cls(
            lambda w: np.asarray(w, dtype=float),
            lambda w: np.ones(np.shape(w)),
            lambda w: np.zeros(np.shape(w)),
            "identity",
            lambda w, wc=None: np.ones(np.shape(w)),
        )

    @classmethod
    def power(cls, n: float) -> "ChannelProfile":
        """``g(w) = w^n`` (not symmetric unless ``n = 1``)."""
        n = float(n)
        if n <= 0.0:
            raise DomainError("power profile needs a positive exponent")
        return cls(
            lambda w: np.asarray(w, dtype=float) ** n,
            lambda w: n * np.asarray(w, dtype=float) ** (n - 1.0),
            lambda w: n * (n - 1.0) * np.asarray(w, dtype=float) ** (n - 2.0),
            f"power:{n:g}",
        )

    @classmethod
    def sin_squared(cls) -> "ChannelProfile":
        """``g(w) = sin^2(pi w / 2)``, for which ``J = pi^2 w (1 - w)``."""
        return cls(
            lambda w: np.sin(0.5 * math.pi * np.asarray(w, dtype=float)) ** 2,
            lambda w: 0.5 * math.pi * np.sin(math.pi * np.asarray(w, dtype=float)),
            lambda w: 0.5 * math.pi**2 * np.cos(math.pi * np.asarray(w, dtype=float)),
            "sin2",
            _sin_squared_local,
        )

    @classmethod
    def from_function(cls, g: Callable, name: str = "custom") -> "ChannelProfile":
        """Profile from a vectorised ``g`` alone; derivatives are numerical."""
        return cls(
            g,
            lambda w: _richardson(g, w, 1),
            lambda w: _richardson(g, w, 2),
            name,
            None,
            False,
        )

    def is_symmetric(self, points: int = 101, tol: float = 1e-12) -> bool:
        w = np.linspace(0.0, 1.0, points)
        return bool(np.max(np.abs(self(w) + self(1.0 - w) - 1.0)) <= tol)


def lift_profile(profile: ChannelProfile, k: int) -> CollusionChannel:
    """The attack ``p_z = g(z / k)`` with the marking constraint imposed exactly."""
    p = profile(np.arange(k + 1) / k)
    if np.any(p < -_ENDPOINT_TOL) or np.any(p > 1.0 + _ENDPOINT_TOL):
        raise DomainError(f"profile {profile.name!r} leaves [0, 1]")
    p = np.clip(p, 0.0, 1.0)
    p[0], p[k] = 0.0, 1.0
    return CollusionChannel(k, p)


def angle_transform(profile: ChannelProfile, w):
    """``G(w) = arccos(1 - 2 g(w))`` in radians."""
    g = profile(w)
    if np.any(g < -_ENDPOINT_TOL) or np.any(g > 1.0 + _ENDPOINT_TOL):
        raise DomainError("profile value outside [0, 1]")
    out = np.arccos(np.clip(1.0 - 2.0 * g, -1.0, 1.0))
    return float(out) if np.ndim(out) == 0 else out


def local_payoff_J(profile: ChannelProfile, w):
    """``J(w) = w (1 - w) g'(w)^2 / (g(w) (1 - g(w)))`` on ``(0, 1)``.

    Raises
    ------
    SingularityError
        If ``g`` reaches 0 or 1 at an interior ``w`` (and no closed form of
        ``J`` is attached to the profile).
    """
    w_arr = np.asarray(w, dtype=float)
    if np.any(w_arr <= 0.0) or np.any(w_arr >= 1.0):
        raise DomainError("J is only defined on the open interval (0, 1)")
    if profile.local is not None:
        out = np.asarray(profile.local(w_arr), dtype=float)
    else:
        g = profile(w_arr)
        denom = g * (1.0 - g)
        if np.any(denom <= 0.0):
            raise SingularityError("g reaches 0 or 1 inside (0, 1); J is singular there")
        out = w_arr * (1.0 - w_arr) * profile.g_prime(w_arr) ** 2 / denom
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Fisher-type integral and the optimal profile
# ---------------------------------------------------------------------------


def _fisher_exponents(prior: ContinuousPrior):
    a, b = prior.hint
    if a >= 0.0 or b >= 0.0:
        raise DivergentIntegralError(
            f"int dw / (f(w) w (1 - w)) diverges for a density with endpoint exponents {prior.hint}"
        )
    return -1.0 - a, -1.0 - b


def fisher_integral(prior: ContinuousPrior, tol: float = 1e-12) -> float:
    """``F = int_0^1 dw / (f(w) w (1 - w))``; at least ``pi^2`` for every density.

    Closed form ``B(theta, theta) B(1 - theta, 1 - theta)`` for the Beta family;
    Gauss-Jacobi with doubling otherwise.

    Raises
    ------
    DivergentIntegralError
        When the integral is infinite (Beta with ``theta >= 1``, or any density
        that does not blow up at both endpoints).
    """
    if prior.is_beta_family:
        th = prior.theta
        if th >= 1.0:
            raise DivergentIntegralError(f"F is infinite for Beta({th:g}, {th:g})")
        return math.exp(betaln(th, th) + betaln(1.0 - th, 1.0 - th))
    ea, eb = _fisher_exponents(prior)
    prev = None
    for n in (64, 128, 256, 512, 1024, 2048):
        x, _, wts = gauss_jacobi_unit(n, ea, eb)
        val = float(wts @ (1.0 / prior.regular_part(x)))
        if prev is not None and abs(val - prev) <= tol * abs(val):
            return val
        prev = val
    raise QuadratureError("the Fisher-type integral did not settle")


class _CumulativeWeight:
    """Normalised ``Phi(w) / Phi(1)`` for a custom density.

    ``Phi`` is tabulated on a uniform grid by Gauss rules on each cell (the
    end cells absorb the endpoint power); values between grid points add the
    integral over the partial cell, so no interpolation error enters.
    """

    def __init__(self, prior: ContinuousPrior, cells: int = 1024, nodes: int = 24):
        self.prior = prior
        self.ea, self.eb = _fisher_exponents(prior)
        self.nodes = nodes
        self.grid = np.linspace(0.0, 1.0, cells + 1)
        parts = np.array([self._piece(a, b) for a, b in zip(self.grid[:-1], self.grid[1:])])
        self.table = np.concatenate(([0.0], np.cumsum(parts)))
        self.total = float(self.table[-1])

    def density_weight(self, w):
        """``1 / (f(w) w (1 - w))``."""
        w = np.asarray(w, dtype=float)
        return 1.0 / (self.prior.pdf(w) * w * (1.0 - w))

    def _piece(self, lo, hi):
        if lo == 0.0:
            # w^ea is absorbed; the rest is regular on the first cell
            x, wts = segment_rule(lo, hi, self.nodes, self.ea, 0.0)
            return float(wts @ (self.density_weight(x) / x**self.ea))
        if hi == 1.0:
            x, wts = segment_rule(lo, hi, self.nodes, 0.0, self.eb)
            return float(wts @ (self.density_weight(x) / (1.0 - x) ** self.eb))
        x, wts = segment_rule(lo, hi, self.nodes)
        return float(wts @ self.density_weight(x))

    def __call__(self, w):
        w = np.atleast_1d(np.asarray(w, dtype=float))
        idx = np.clip(np.searchsorted(self.grid, w, side="right") - 1, 0, self.grid.size - 2)
        out = self.table[idx].copy()
        for j, (i, v) in enumerate(zip(idx, w)):
            if v > self.grid[i]:
                out[j] += self._piece(self.grid[i], v) if i > 0 else self._piece(0.0, v)
        return np.clip(out / self.total, 0.0, 1.0)


def optimal_profile(prior: ContinuousPrior) -> ChannelProfile:
    """Best asymptotic profile ``g_opt(w) = (1 - cos(pi Phi(w) / Phi(1))) / 2``.

    ``Phi(w) = int_0^w dv / (f(v) v (1 - v))``.  For the Beta family the
    normalised ``Phi`` is the regularised incomplete beta function
    ``I_w(1 - theta, 1 - theta)`` and all derivatives are analytic; the
    arcsine prior gives exactly the identity.

    Raises
    ------
    DivergentIntegralError
        When ``Phi(1)`` is infinite.
    """
    if prior.kind is PriorKind.ARCSINE:
        base = ChannelProfile.identity()
        return ChannelProfile(base.g, base.g_prime, base.g_double_prime, "g_opt:arcsine", base.local)
    F = fisher_integral(prior)
    if prior.is_beta_family:
        th = prior.theta
        c = 1.0 - th
        norm = math.exp(-betaln(c, c))

        def frac(w):
            return betainc(c, c, np.asarray(w, dtype=float))

        def frac1(w):
            w = np.asarray(w, dtype=float)
            with np.errstate(divide="ignore"):
                return norm * np.exp(-th * (np.log(w) + np.log1p(-w)))

        def frac2(w):
            w = np.asarray(w, dtype=float)
            return frac1(w) * (-th) * (1.0 - 2.0 * w) / (w * (1.0 - w))

        name = f"g_opt:beta:{th:g}"
    else:
        cum = _CumulativeWeight(prior)
        frac = cum

        def frac1(w):
            return cum.density_weight(w) / cum.total

        def frac2(w):
            return _richardson(frac1, w, 1)

        name = "g_opt:custom"

    def g(w):
        # sin^2 keeps full relative accuracy where the angle is small
        return np.sin(0.5 * math.pi * frac(w)) ** 2

    def g1(w):
        return 0.5 * math.pi * np.sin(math.pi * frac(w)) * frac1(w)

    def g2(w):
        u = math.pi * frac(w)
        return 0.5 * math.pi * (math.pi * np.cos(u) * frac1(w) ** 2 + np.sin(u) * frac2(w))

    def local(w, wc=None):
        w = np.asarray(w, dtype=float)
        wc = 1.0 - w if wc is None else np.asarray(wc, dtype=float)
        with np.errstate(over="ignore"):
            return math.pi**2 / (F**2 * prior.pdf_pair(w, wc) ** 2 * w * wc)

    return ChannelProfile(g, g1, g2, name, local)


def optimal_local_payoff(prior: ContinuousPrior) -> Callable:
    """``J_opt(w) = pi^2 / (F^2 f(w)^2 w (1 - w))``, the local payoff of ``g_opt``."""
    return optimal_profile(prior).local


def asymptotic_capacity(prior: ContinuousPrior, k: int) -> float:
    """``pi^2 / (k^2 2 ln 2 F)``: large-``k`` joint capacity against ``prior``."""
    if k < 1:
        raise DomainError("k must be positive")
    return math.pi**2 / (k * k * 2.0 * LN2 * fisher_integral(prior))


@dataclass(frozen=True)
class AsymptoticReport:
    fisher_integral: float
    asymptotic_capacity: float
    g_opt: ChannelProfile
    J_opt: Callable = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "fisher_integral": self.fisher_integral,
            "asymptotic_capacity": self.asymptotic_capacity,
            "g_opt": self.g_opt.name,
        }


def asymptotic_report(prior: ContinuousPrior, k: int) -> AsymptoticReport:
    profile = optimal_profile(prior)
    return AsymptoticReport(
        fisher_integral(prior), asymptotic_capacity(prior, k), profile, profile.local
    )


# ---------------------------------------------------------------------------
# finite-k checks
# ---------------------------------------------------------------------------


def normalized_payoff(w, channel: CollusionChannel, k: Optional[int] = None):
    """``k^2 2 ln 2 I_joint(w, p)``; ``w`` may be a scalar or an array."""
    if k is not None and k != channel.k:
        raise DomainError(f"channel has k={channel.k}, not {k}")
    kk = channel.k
    vals = kk * kk * 2.0 * LN2 * payoff_values(channel, np.atleast_1d(w), "joint")
    return float(vals[0]) if np.ndim(w) == 0 else vals


def bernstein_expansion_check(profile: ChannelProfile, k: int, w: float) -> float:
    """``k |g_k(w) - g(w) - w (1 - w) g''(w) / (2k)|`` for the lifted profile."""
    p = lift_profile(profile, k).p
    gk = float(bernstein(p, float(w))[0])
    w = float(w)
    approx = float(profile(w)) + w * (1.0 - w) * float(profile.g_double_prime(w)) / (2.0 * k)
    return k * abs(gk - approx)


def expected_J(profile: ChannelProfile, prior: ContinuousPrior, n: int = 256, tol: float = 1e-10):
    """``E_f[J(W)]`` by tanh-sinh quadrature, doubling until ``tol``.

    Nodes where ``g (1 - g)`` underflows are skipped; their weight is below
    double precision for profiles with a non-vanishing slope at the ends.
    """
    symmetric = profile.local is None and profile.is_symmetric()
    prev = None
    while n <= 8192:
        rule = build_quadrature(prior, n, "tanh-sinh")
        nodes = rule.nodes
        if profile.local is not None:
            vals = np.asarray(profile.local(nodes, rule.complements), dtype=float)
            # integrable endpoint blow-up meets a vanishing weight
            vals = np.where(np.isfinite(vals), vals, 0.0)
        else:
            if symmetric:
                # 1 - g without cancellation near w = 1
                at_w, wc = nodes, rule.complements
                g, gc = profile(at_w), profile(wc)
            else:
                # J is smooth, so nodes too close to 1 for 1 - g to be
                # accurate take its value at a safe distance
                at_w = np.clip(nodes, _CLAMP, 1.0 - _CLAMP)
                wc = 1.0 - at_w
                g = profile(at_w)
                gc = 1.0 - g
            ok = (g > 0.0) & (gc > 0.0)
            vals = np.zeros(nodes.size)
            # and g'(w) = g'(1 - w), evaluated on the side nearer its endpoint
            at = np.where(symmetric & (nodes > 0.5), rule.complements, at_w)
            with np.errstate(all="ignore"):
                vals[ok] = at_w[ok] * wc[ok] * profile.g_prime(at[ok]) ** 2 / (
                    g[ok] * gc[ok]
                )
            vals = np.where(np.isfinite(vals), vals, 0.0)
        val = float(rule.weights @ vals)
        if prev is not None and abs(val - prev) <= tol * max(abs(val), 1.0):
            return val
        prev = val
        n *= 2
    raise QuadratureError("E[J] did not settle")


# ---------------------------------------------------------------------------
# tables
# ---------------------------------------------------------------------------


def profile_table(prior: ContinuousPrior, channel: Optional[CollusionChannel] = None, points: int = 101):
    """Rows ``(w, value[, reference])`` comparing an attack with ``g_opt``.

    Without a channel, ``value = g_opt(w)`` on ``points`` equispaced biases.
    With one, the rows are at ``w = z / k`` with ``value = p_z`` and
    ``reference = g_opt(z / k)``.
    """
    profile = optimal_profile(prior)
    if channel is None:
        w = np.linspace(0.0, 1.0, points)
        return ["w", "value"], list(zip(w.tolist(), profile(w).tolist()))
    w = np.arange(channel.k + 1) / channel.k
    return ["w", "value", "reference"], list(zip(w.tolist(), channel.p.tolist(), profile(w).tolist()))


def normalized_payoff_table(
    prior: ContinuousPrior, channel: CollusionChannel, points: int = 99, margin: float = J_MARGIN
):
    """Rows ``(w, normalised payoff, J_opt(w))`` on ``[margin, 1 - margin]``."""
    w = np.linspace(margin, 1.0 - margin, points)
    value = normalized_payoff(w, channel)
    ref = optimal_local_payoff(prior)(w)
    return ["w", "value", "reference"], list(zip(w.tolist(), value.tolist(), ref.tolist()))


__all__ = [
    "J_MARGIN",
    "ChannelProfile",
    "lift_profile",
    "angle_transform",
    "local_payoff_J",
    "fisher_integral",
    "optimal_profile",
    "optimal_local_payoff",
    "asymptotic_capacity",
    "AsymptoticReport",
    "asymptotic_report",
    "normalized_payoff",
    "bernstein_expansion_check",
    "expected_J",
    "profile_table",
    "normalized_payoff_table",
]
