"""Brute-force and independent cross-checks for the solvers.

Nothing here shares code paths with :mod:`fpgame.games` beyond the payoff
evaluation itself: the saddle value is recomputed by exhaustive grids, the
analytic gradients by central differences, and prior expectations by two
unrelated quadrature families.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (
    CollusionChannel,
    ContinuousPrior,
    DecoderKind,
    FiniteSpectrumPrior,
    expand_free,
    n_free,
)
from .errors import CrossCheckError, DomainError
from .payoff import NodePayoff
from .quadrature import build_quadrature, gauss_jacobi_unit
from .serialize import dumps, to_plain

#: supported coalition sizes for the exhaustive oracle
GRID_K = (2, 3, 4, 5)
MASS_RESOLUTION = 64
#: dual quadrature results further apart than this are flagged
DUAL_TOLERANCE = 1e-7
_LIPSCHITZ_SAFETY = 4.0
_CHUNK = 4096
# Gauss-Jacobi rules from scipy lose accuracy beyond a few thousand nodes
_GJ_LIMIT = 2048


@dataclass(frozen=True)
class GridSpec:
    w_points: int = 401
    p_points: int = 401
    prior_support_cap: Optional[int] = None

    def __post_init__(self):
        if self.w_points < 3 or self.p_points < 3:
            raise DomainError("grid counts must be at least 3")

    def cap(self, k: int) -> int:
        bound = (k + 1) // 2
        if self.prior_support_cap is None:
            return bound
        if not 1 <= self.prior_support_cap <= bound:
            raise DomainError(f"prior support cap must lie in [1, {bound}] for k={k}")
        return self.prior_support_cap


@dataclass(frozen=True)
class GridResult:
    """Outcome of :func:`grid_minimax`; unpacks as ``(value, prior, channel)``."""

    value: float
    prior: FiniteSpectrumPrior
    channel: CollusionChannel
    slack: float
    spec: GridSpec = field(repr=False, default=GridSpec())

    def __iter__(self):
        return iter((self.value, self.prior, self.channel))


def _channel_grid(k: int, points: int) -> np.ndarray:
    """Every symmetric attack on the grid, as columns of a ``(k + 1, m)`` array."""
    m = n_free(k)
    axis = np.linspace(0.0, 1.0, points)
    if m == 0:
        return expand_free(k, [])[:, None], (1,)
    mesh = np.stack(np.meshgrid(*([axis] * m), indexing="ij"), axis=-1).reshape(-1, m)
    return np.stack([expand_free(k, q) for q in mesh], axis=1), (points,) * m


def _payoff_matrix(k, decoder, w, channels):
    node = NodePayoff(k, w)
    out = np.empty((w.size, channels.shape[1]))
    for lo in range(0, channels.shape[1], _CHUNK):
        out[:, lo : lo + _CHUNK] = node.values(channels[:, lo : lo + _CHUNK], decoder)
    return out


def _candidate_priors(half, cap):
    """Symmetric priors on the half grid: ``(center mass, half-atom index)``.

    A half-atom ``w < 1/2`` stands for the pair ``{w, 1 - w}``.  With
    ``cap <= 3`` at most one pair fits, optionally together with ``1/2``.
    """
    center = half.size - 1
    yield 1.0, center
    if cap < 2:
        return
    masses = np.arange(MASS_RESOLUTION + 1) / MASS_RESOLUTION if cap >= 3 else np.zeros(1)
    for i in range(center):
        for m in masses:
            yield float(m), i


def grid_minimax(k: int, decoder, spec: GridSpec = GridSpec()) -> GridResult:
    """Exhaustive max over symmetric grid priors of min over grid attacks.

    Attacks range over symmetric channels with free coordinates on a
    ``p_points`` grid.  Priors are symmetric with support on the ``w_points``
    grid, at most ``prior_support_cap`` points, and masses on a ``1/64``
    simplex grid.  ``slack`` is an empirical Lipschitz allowance: four times
    the largest change of the best prior's payoff between neighbouring grid
    attacks.

    Raises
    ------
    DomainError
        For ``k`` outside ``{2, 3, 4, 5}``.
    """
    if k not in GRID_K:
        raise DomainError(f"grid oracle supports k in {GRID_K}, got {k}")
    decoder = DecoderKind.parse(decoder)
    cap = spec.cap(k)
    w = np.linspace(0.0, 1.0, spec.w_points)
    half = np.concatenate((w[w < 0.5], [0.5]))
    channels, shape = _channel_grid(k, spec.p_points)
    # symmetric attacks give I(w) = I(1 - w), so pairs reduce to one row
    M = _payoff_matrix(k, decoder, half, channels)
    center = M[-1]

    best = (-np.inf, None, None, None)
    rows = list(_candidate_priors(half, cap))
    for lo in range(0, len(rows), 64):
        block = rows[lo : lo + 64]
        mass = np.array([m for m, _ in block])[:, None]
        idx = np.array([i for _, i in block])
        mixed = mass * center[None, :] + (1.0 - mass) * M[idx]
        worst = mixed.argmin(axis=1)
        vals = mixed[np.arange(len(block)), worst]
        j = int(np.argmax(vals))
        if vals[j] > best[0]:
            best = (float(vals[j]), block[j], int(worst[j]), mixed[j])

    value, (mass, i), j, profile = best
    if i == half.size - 1 or mass >= 1.0:
        prior = FiniteSpectrumPrior.point(0.5)
    elif mass <= 0.0:
        prior = FiniteSpectrumPrior.symmetric([half[i]], [1.0])
    else:
        prior = FiniteSpectrumPrior.symmetric([half[i], 0.5], [1.0 - mass, mass])
    channel = CollusionChannel(k, channels[:, j].copy())

    # slopes next to the grid minimiser; the attack payoff is steep near p = 0
    grid = profile.reshape(shape)
    at = np.unravel_index(j, shape)
    jumps = []
    for a in range(grid.ndim):
        line = grid[tuple(slice(None) if b == a else at[b] for b in range(grid.ndim))]
        lo, hi = max(at[a] - 1, 0), min(at[a] + 2, line.size)
        if hi - lo > 1:
            jumps.append(float(np.max(np.abs(np.diff(line[lo:hi])))))
    slack = _LIPSCHITZ_SAFETY * max(jumps, default=0.0)
    return GridResult(value, prior, channel, float(slack), spec)


def fd_gradient(
    w: float, channel: CollusionChannel, decoder, step: float = 1e-6, symmetric: bool = False
) -> np.ndarray:
    """Central-difference gradient of the payoff at bias ``w``.

    By default this is the full-length vector ``dI / dp_z`` (with zeros at the
    fixed ends, as the analytic gradient reports them).  With ``symmetric``
    it is the gradient with respect to the free coordinates ``q`` of a
    symmetric attack, where raising ``q_j = p_j`` lowers ``p_{k-j}``.
    """
    decoder = DecoderKind.parse(decoder)
    k = channel.k
    node = NodePayoff(k, [float(w)])
    p = channel.p.astype(float)

    def f(vec):
        return float(node.values(vec, decoder)[0])

    if symmetric:
        q = p[1 : n_free(k) + 1]
        out = np.empty(q.size)
        for j in range(q.size):
            e = np.zeros(q.size)
            e[j] = step
            out[j] = (f(expand_free(k, q + e)) - f(expand_free(k, q - e))) / (2 * step)
        return out
    out = np.zeros(k + 1)
    for z in range(1, k):
        hi, lo = p.copy(), p.copy()
        hi[z] += step
        lo[z] -= step
        out[z] = (f(hi) - f(lo)) / (2 * step)
    return out


@dataclass(frozen=True)
class DualQuadrature:
    """Two independent estimates of one expectation; unpacks as ``(a, b, discrepancy)``."""

    value_a: float
    value_b: float
    discrepancy: float
    nodes_a: int
    nodes_b: int

    @property
    def agree(self) -> bool:
        return self.discrepancy <= DUAL_TOLERANCE

    def __iter__(self):
        return iter((self.value_a, self.value_b, self.discrepancy))


def _settle(rule_at, evaluate, start, limit, tol):
    """Double the node count until two levels agree; the last level otherwise."""
    prev = None
    n = start
    while True:
        val = evaluate(rule_at(n))
        if prev is not None and abs(val - prev) <= tol * max(1.0, abs(val)):
            return val, n
        if 2 * n > limit:
            return val, n
        prev = val
        n *= 2


def dual_quadrature(
    integrand: Callable,
    prior: ContinuousPrior,
    singularity=(0.0, 0.0),
    pair: bool = False,
    tol: float = 1e-10,
    strict: bool = False,
) -> DualQuadrature:
    """``E_prior[integrand(W)]`` by Gauss-Jacobi and by tanh-sinh.

    ``singularity = (a, b)`` declares that the integrand behaves like
    ``w^a (1 - w)^b`` at the ends; the Gauss-Jacobi rule absorbs it together
    with the prior's own endpoint powers, while tanh-sinh needs no hint.
    With ``pair`` the integrand is called as ``integrand(w, 1 - w)`` with an
    accurate complement.  A discrepancy above ``1e-7`` raises
    :class:`CrossCheckError` when ``strict`` is set.
    """
    sa, sb = (float(s) for s in singularity)
    pa, pb = prior.hint
    ea, eb = pa + sa, pb + sb
    if ea <= -1.0 or eb <= -1.0:
        raise DomainError("integrand times density is not integrable at an endpoint")

    def call(x, xc):
        vals = integrand(x, xc) if pair else integrand(x)
        return np.broadcast_to(np.asarray(vals, dtype=float), x.shape)

    def gj_rule(n):
        x, xc, wts = gauss_jacobi_unit(n, ea, eb)
        return x, xc, wts * prior.regular_part(x)

    def gj_eval(rule):
        x, xc, wts = rule
        with np.errstate(divide="ignore", invalid="ignore"):
            reg = call(x, xc) / (x**sa * xc**sb)
        return float(wts @ reg)

    def ts_rule(n):
        r = build_quadrature(prior, n, "tanh-sinh")
        return r.nodes, r.complements, r.weights

    def ts_eval(rule):
        x, xc, wts = rule
        with np.errstate(all="ignore"):
            vals = call(x, xc)
        # nodes at the extreme tails can overflow; their weight underflows
        return float(wts @ np.where(np.isfinite(vals), vals, 0.0))

    a, na = _settle(gj_rule, gj_eval, 64, _GJ_LIMIT, tol)
    b, nb = _settle(ts_rule, ts_eval, 64, 8192, tol)
    result = DualQuadrature(a, b, abs(a - b), na, nb)
    if strict and not result.agree:
        raise CrossCheckError(f"quadrature disagreement {result.discrepancy:.3g}: {a!r} vs {b!r}")
    return result


@dataclass(frozen=True)
class OracleReport:
    operation: str
    inputs: dict
    value: float
    comparator: float
    delta: float
    passed: bool

    @classmethod
    def compare(cls, operation, inputs, value, comparator, tol) -> "OracleReport":
        delta = abs(float(value) - float(comparator))
        return cls(operation, dict(inputs), float(value), float(comparator), delta, bool(delta <= tol))

    def to_dict(self) -> dict:
        return {
            "operation": self.operation,
            "inputs": to_plain(self.inputs),
            "value": self.value,
            "comparator": self.comparator,
            "delta": self.delta,
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return dumps(self.to_dict())


def saddle_check(k: int, decoder, spec: GridSpec = GridSpec(), tol: float = 1e-3, opts=None):
    """Compare :func:`fpgame.games.solve_saddle` with :func:`grid_minimax`."""
    from .games import solve_saddle

    decoder = DecoderKind.parse(decoder)
    grid = grid_minimax(k, decoder, spec)
    sol = solve_saddle(k, decoder, opts) if opts is not None else solve_saddle(k, decoder)
    return OracleReport.compare(
        "grid_minimax",
        {"k": k, "decoder": decoder.value, "w_points": spec.w_points, "p_points": spec.p_points},
        grid.value,
        sol.value,
        tol,
    )


def gradient_check(w, channel: CollusionChannel, decoder, step: float = 1e-6, tol: float = 1e-6):
    """Relative max-norm error between finite-difference and analytic gradients."""
    from .payoff import payoff

    decoder = DecoderKind.parse(decoder)
    fd = fd_gradient(w, channel, decoder, step)
    an = payoff(w, channel, decoder).gradient_p
    scale = max(float(np.max(np.abs(an))), 1e-300)
    err = float(np.max(np.abs(fd - an))) / scale
    return OracleReport(
        "fd_gradient",
        {"w": float(w), "k": channel.k, "p": channel.p, "decoder": decoder.value, "step": step},
        err,
        0.0,
        err,
        bool(err <= tol),
    )


__all__ = [
    "GRID_K",
    "MASS_RESOLUTION",
    "DUAL_TOLERANCE",
    "GridSpec",
    "GridResult",
    "grid_minimax",
    "fd_gradient",
    "DualQuadrature",
    "dual_quadrature",
    "OracleReport",
    "saddle_check",
    "gradient_check",
]
