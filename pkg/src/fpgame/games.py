"""Solvers for the binary fingerprinting game.

* :func:`minimize_over_channel` - colluders' best attack against a prior
  (conditional gradient with exact line search).
* :func:`maximize_over_w` - embedder's best single bias against an attack.
* :func:`solve_saddle` - the full game by a double-oracle loop.
* :func:`degenerate_prior_maximin` and :func:`capacity_bounds` - the
  single-bias value and the closed-form bounds.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.optimize import minimize, nnls

from .core import (
    LN2,
    CollusionChannel,
    ContinuousPrior,
    DecoderKind,
    FiniteSpectrumPrior,
    binary_entropy,
    interleaving_channel,
    n_free,
    symmetrize,
    _check_k,
)
from .errors import DomainError, InfeasibleRestrictionError, NonConvergenceError
from .payoff import ExpectedPayoff, NodePayoff, payoff_values, payoff_w_derivatives
from .search import convex_step, golden_max

Prior = Union[FiniteSpectrumPrior, ContinuousPrior]


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances and budgets for the solvers.

    ``tol`` is the duality-gap target of :func:`solve_saddle`; ``fw_tol`` the
    conditional-gradient gap target of :func:`minimize_over_channel`.
    ``nodes`` fixes the quadrature size for continuous priors (``None``
    picks it by doubling).
    """

    tol: float = 1e-6
    fw_tol: float = 1e-9
    fw_max_iter: int = 20000
    max_rounds: int = 60
    w_grid: int = 4097
    w_tol: float = 1e-10
    restricted_tol: float = 1e-8
    merge_tol: float = 1e-6
    mass_floor: float = 1e-9
    nodes: Optional[int] = None

    def replace(self, **changes) -> "SolverOptions":
        return dataclasses.replace(self, **changes)


DEFAULT_OPTIONS = SolverOptions()


def _opts(opts):
    return DEFAULT_OPTIONS if opts is None else opts


class _Coords:
    """Affine map ``p = base + T x`` from optimisation variables to attacks.

    Symmetric mode uses ``x = p[1..floor((k-1)/2)]``; otherwise every
    interior coordinate ``p[1..k-1]`` is free.
    """

    def __init__(self, k: int, symmetric: bool):
        self.k = k
        self.symmetric = symmetric
        base = np.zeros(k + 1)
        base[k] = 1.0
        if symmetric:
            m = n_free(k)
            T = np.zeros((k + 1, m))
            for j, z in enumerate(range(1, m + 1)):
                T[z, j] = 1.0
                T[k - z, j] = -1.0
                base[k - z] = 1.0
            if k % 2 == 0:
                base[k // 2] = 0.5
        else:
            T = np.zeros((k + 1, k - 1))
            T[1:k, :] = np.eye(k - 1)
        self.base = base
        self.T = T
        self.dim = T.shape[1]

    def expand(self, x):
        p = self.base + self.T @ np.asarray(x, dtype=float)
        return np.clip(p, 0.0, 1.0)

    def reduce(self, grad_p):
        return grad_p @ self.T

    def take(self, c: CollusionChannel) -> np.ndarray:
        if c.k != self.k:
            raise DomainError(f"start channel has k={c.k}, expected {self.k}")
        if self.symmetric:
            c = symmetrize(c)
            return c.p[1 : self.dim + 1].copy()
        return c.p[1 : self.k].copy()


# ---------------------------------------------------------------------------
# colluders' best response
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChannelSolution:
    """Result of :func:`minimize_over_channel`; unpacks as ``(channel, value, gap)``."""

    channel: CollusionChannel
    value: float
    gap: float
    iterations: int
    converged: bool
    history: tuple = field(default=(), repr=False)

    def __iter__(self):
        return iter((self.channel, self.value, self.gap))

    @property
    def lower_bound(self) -> float:
        """Certified lower bound ``value - gap`` on the minimum."""
        return self.value - self.gap


def _frank_wolfe(ev: ExpectedPayoff, coords: _Coords, x0, tol, max_iter):
    x = np.clip(np.asarray(x0, dtype=float), 0.0, 1.0)
    fx = float(ev.value(coords.expand(x)))
    history = []
    gap = math.inf
    for it in range(max_iter + 1):
        g = coords.reduce(ev.gradient(coords.expand(x)))
        s = (g < 0.0).astype(float)
        d = s - x
        gap = max(float(-(g @ d)), 0.0)
        history.append((fx, gap))
        if gap <= tol:
            return x, fx, gap, it, True, history
        if it == max_iter:
            break

        def slope(t):
            return float(coords.reduce(ev.gradient(coords.expand(x + t * d))) @ d)

        t = convex_step(slope)
        xn = np.clip(x + t * d, 0.0, 1.0)
        fn = float(ev.value(coords.expand(xn)))
        if fn > fx + _ROUNDING * abs(fx):
            # the line search lost to rounding; a stalled iterate ends the loop
            break
        if np.array_equal(xn, x):
            break
        x, fx = xn, fn
    return x, fx, gap, len(history) - 1, False, history


_FW_BURST = 400
# relative size of evaluation noise in the expected payoff
_ROUNDING = 1e-14


def _projected_newton(ev: ExpectedPayoff, coords: _Coords, x, fx, max_iter: int = 50):
    """Projected Newton polish of a conditional-gradient iterate on the box.

    Coordinates on a bound whose gradient points outwards are held fixed;
    the rest take a Newton step with backtracking.  Only steps that do not
    increase the objective are kept.
    """
    T = coords.T
    g = coords.reduce(ev.gradient(coords.expand(x)))
    for _ in range(max_iter):
        p = coords.expand(x)
        held = ((x <= 0.0) & (g > 0.0)) | ((x >= 1.0) & (g < 0.0))
        free = ~held
        if not np.any(free):
            break
        H = (T.T @ ev.hessian(p) @ T)[np.ix_(free, free)]
        try:
            step = -np.linalg.solve(H, g[free])
        except np.linalg.LinAlgError:
            break
        d = np.zeros_like(x)
        d[free] = step
        gap = _box_gap(g, x)
        # near the minimiser the objective only changes at rounding level, so
        # a step that leaves it within rounding but shrinks the gap is kept
        slack = _ROUNDING * abs(fx)
        t = 1.0
        while t > 1e-12:
            xn = np.clip(x + t * d, 0.0, 1.0)
            fn = float(ev.value(coords.expand(xn)))
            gn = coords.reduce(ev.gradient(coords.expand(xn)))
            if fn <= fx or (fn <= fx + slack and _box_gap(gn, xn) < gap):
                break
            t *= 0.5
        else:
            break
        if np.array_equal(xn, x):
            break
        x, fx, g = xn, fn, gn
    return x, fx


def _box_gap(g, x):
    """Conditional-gradient gap ``max_s g . (x - s)`` over the unit box."""
    return float(np.sum(np.where(g > 0.0, g * x, -g * (1.0 - x))))


def _minimize_box(ev: ExpectedPayoff, coords: _Coords, x0, tol, max_iter):
    """Conditional gradient in bursts, with a Newton polish between bursts.

    Conditional gradient slows to a sublinear rate when the minimiser sits
    on a face of the box; the polish lands on the face and the next burst
    certifies the gap.
    """
    x, fx, gap, iters, ok, hist = _frank_wolfe(ev, coords, x0, tol, min(_FW_BURST, max_iter))
    while not ok and iters < max_iter:
        y, fy = _projected_newton(ev, coords, x, fx)
        budget = min(_FW_BURST, max_iter - iters)
        x2, f2, gap2, it2, ok, h2 = _frank_wolfe(ev, coords, y, tol, budget)
        hist.extend(h2)
        iters += it2 + 1
        if not ok and gap2 >= gap and np.array_equal(y, x):
            x, fx, gap = x2, f2, gap2
            break
        x, fx, gap = x2, f2, gap2
    return x, fx, gap, iters, ok, hist


def _prior_symmetric(prior) -> bool:
    if isinstance(prior, FiniteSpectrumPrior):
        return prior.is_symmetric()
    return bool(prior.symmetric)


def minimize_over_channel(
    prior: Prior,
    decoder,
    k: int,
    opts: Optional[SolverOptions] = None,
    start: Optional[CollusionChannel] = None,
    symmetric: Optional[bool] = None,
    raise_on_failure: bool = True,
) -> ChannelSolution:
    """Attack minimising ``E_prior[I(W, p)]`` over feasible channels.

    Conditional gradient on the box of free coordinates with an exact line
    search (root of the directional derivative), started from ``start`` or
    the interleaving attack.  ``symmetric=None`` restricts to symmetric
    channels exactly when the prior is symmetric; for an asymmetric prior
    such as a point mass away from ``1/2`` the symmetric restriction is not
    optimal and every marking channel is searched instead.

    Raises
    ------
    NonConvergenceError
        If the gap is still above ``opts.fw_tol`` after ``opts.fw_max_iter``
        iterations; ``best`` holds the last :class:`ChannelSolution`.
    """
    opts = _opts(opts)
    decoder = DecoderKind.parse(decoder)
    _check_k(k)
    if symmetric is None:
        symmetric = _prior_symmetric(prior)
    coords = _Coords(k, bool(symmetric))
    ev = ExpectedPayoff.from_prior(prior, k, decoder, opts.nodes)
    x0 = coords.take(start if start is not None else interleaving_channel(k))
    if coords.dim == 0:
        p = coords.expand(x0)
        value = float(ev.value(p))
        return ChannelSolution(CollusionChannel(k, p), value, 0.0, 0, True, ((value, 0.0),))
    x, fx, gap, iters, ok, hist = _minimize_box(ev, coords, x0, opts.fw_tol, opts.fw_max_iter)
    sol = ChannelSolution(CollusionChannel(k, coords.expand(x)), fx, gap, iters, ok, tuple(hist))
    if not ok and raise_on_failure:
        raise NonConvergenceError(
            f"conditional gradient stopped at gap {gap:.3e} after {iters} iterations",
            best=sol,
            gap=gap,
        )
    return sol


# ---------------------------------------------------------------------------
# embedder's best response
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BiasMaximum:
    """Unpacks as ``(w, value)``."""

    w: float
    value: float

    def __iter__(self):
        return iter((self.w, self.value))


def _better(a, b):
    """True if candidate ``a = (w, v)`` beats ``b``, ties going to smaller ``w``."""
    scale = max(abs(a[1]), abs(b[1]), 1e-300)
    if abs(a[1] - b[1]) <= 4e-16 * scale:
        return a[0] < b[0]
    return a[1] > b[1]


def maximize_over_w(
    channel: CollusionChannel,
    decoder,
    domain=(0.0, 1.0),
    grid: int = 4097,
    tol: float = 1e-10,
    candidates: int = 3,
) -> BiasMaximum:
    """Best single bias against a fixed attack.

    The payoff is scanned on ``grid`` equispaced points of ``domain`` and the
    ``candidates`` highest local maxima of the scan are refined by
    golden-section search to brackets of width ``tol``.
    """
    decoder = DecoderKind.parse(decoder)
    lo, hi = (float(x) for x in domain)
    if not 0.0 <= lo <= hi <= 1.0:
        raise DomainError(f"domain {domain!r} is not a sub-interval of [0, 1]")
    if grid < 3 or hi == lo:
        ws = np.array([lo]) if hi == lo else np.linspace(lo, hi, max(grid, 2))
    else:
        ws = np.linspace(lo, hi, grid)
    vals = payoff_values(channel, ws, decoder)
    n = ws.size
    peaks = [
        i
        for i in range(n)
        if (i == 0 or vals[i] >= vals[i - 1]) and (i == n - 1 or vals[i] >= vals[i + 1])
    ]
    peaks.sort(key=lambda i: (-vals[i], i))
    best = (float(ws[peaks[0]]), float(vals[peaks[0]]))

    def f(w):
        return float(payoff_values(channel, [w], decoder)[0])

    for i in peaks[:candidates]:
        a = ws[max(i - 1, 0)]
        b = ws[min(i + 1, n - 1)]
        if b <= a:
            continue
        cand = golden_max(f, a, b, tol)
        if _better(cand, best):
            best = cand
    # explicit comparison with the scan keeps the grid winner on exact ties
    for i in peaks[:candidates]:
        g = (float(ws[i]), float(vals[i]))
        if _better(g, best):
            best = g
    return BiasMaximum(best[0], best[1])


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KktReport:
    """First- and second-order residuals of the saddle conditions.

    ``stationarity_p`` is measured on the free symmetric coordinates and
    ignores the sign-consistent gradient of coordinates resting on a bound.
    """

    stationarity_w: float
    equal_value_spread: float
    second_order_ok: bool
    stationarity_p: float

    def satisfied(self, spread_tol: float = 1e-6, stationarity_tol: float = 1e-5) -> bool:
        return (
            self.equal_value_spread <= spread_tol
            and self.stationarity_w <= stationarity_tol
            and self.stationarity_p <= stationarity_tol
        )


def kkt_report(prior: FiniteSpectrumPrior, channel: CollusionChannel, decoder) -> KktReport:
    decoder = DecoderKind.parse(decoder)
    w = prior.support
    vals, d1, d2 = payoff_w_derivatives(channel, w, decoder)
    # atoms on the boundary only need a one-sided condition
    interior = (w > 0.0) & (w < 1.0)
    stat_w = float(np.max(np.abs(d1[interior]), initial=0.0))
    curv_ok = bool(np.all(d2[interior] < 0.0))
    coords = _Coords(channel.k, True)
    if coords.dim:
        node = NodePayoff(channel.k, w)
        g = coords.reduce(node.gradient(channel.p, prior.masses, decoder))
        x = channel.p[1 : coords.dim + 1]
        g = np.where((x <= 0.0) & (g > 0.0), 0.0, g)
        g = np.where((x >= 1.0) & (g < 0.0), 0.0, g)
        stat_p = float(np.max(np.abs(g)))
    else:
        stat_p = 0.0
    return KktReport(stat_w, float(np.ptp(vals)), curv_ok, stat_p)


# ---------------------------------------------------------------------------
# the saddle point
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GameSolution:
    """Solved game: strategies, value and the two certificates.

    ``lower`` is a certified maximin value (the payoff the prior guarantees
    against any attack) and ``upper`` a certified minimax value (the most the
    embedder can get against the channel); ``value`` is their midpoint.
    """

    value: float
    prior: FiniteSpectrumPrior
    channel: CollusionChannel
    decoder: DecoderKind
    kkt: KktReport
    duality_gap: float
    iterations: int
    lower: float
    upper: float
    converged: bool = True
    history: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        from .serialize import channel_to_dict, prior_to_dict

        return {
            "k": self.channel.k,
            "decoder": self.decoder.value,
            "value": self.value,
            "lower": self.lower,
            "upper": self.upper,
            "duality_gap": self.duality_gap,
            "iterations": self.iterations,
            "converged": self.converged,
            "prior": prior_to_dict(self.prior),
            "channel": channel_to_dict(self.channel),
            "kkt": dataclasses.asdict(self.kkt),
        }


def spectrum_cap(k: int) -> int:
    """Maximum support size ``floor((k + 1) / 2)`` of an optimal prior."""
    return (k + 1) // 2


def _support_size(atoms) -> int:
    return sum(1 if a == 0.5 else 2 for a in atoms)


class _Restricted:
    """``min_x max_j I(w_j, p(x))`` over the symmetric box for fixed atoms."""

    def __init__(self, k, decoder, coords: _Coords):
        self.k = k
        self.decoder = decoder
        self.coords = coords

    def solve(self, atoms, x0, tol):
        node = NodePayoff(self.k, atoms)
        coords = self.coords
        vals0 = node.values(coords.expand(x0), self.decoder)
        scale = 1.0 / max(float(vals0.max()), 1e-300)
        dim = coords.dim

        def cons(z):
            return z[dim] - scale * node.values(coords.expand(z[:dim]), self.decoder)

        def cons_jac(z):
            jac = coords.reduce(node.jacobian(coords.expand(z[:dim]), self.decoder))
            return np.hstack((-scale * jac, np.ones((len(atoms), 1))))

        z0 = np.append(x0, scale * float(vals0.max()))
        res = minimize(
            lambda z: z[dim],
            z0,
            jac=lambda z: np.eye(dim + 1)[dim],
            method="SLSQP",
            bounds=[(0.0, 1.0)] * dim + [(None, None)],
            constraints=[{"type": "ineq", "fun": cons, "jac": cons_jac}],
            options={"ftol": tol * 1e-3, "maxiter": 500},
        )
        x = np.clip(res.x[:dim], 0.0, 1.0)
        vals = node.values(coords.expand(x), self.decoder)
        jac = coords.reduce(node.jacobian(coords.expand(x), self.decoder))
        return x, vals, self.masses(x, vals, jac)

    @staticmethod
    def masses(x, vals, jac):
        """Multipliers from the stationarity system by non-negative least squares."""
        n = vals.size
        if n == 1:
            return np.ones(1)
        top = vals.max()
        active = vals >= top - 1e-7 * max(top, 1e-300)
        free = (x > 1e-12) & (x < 1.0 - 1e-12)
        G = jac[:, free].T / max(float(np.abs(jac).max()), 1e-300)
        rho = 1.0
        M = np.vstack((G[:, active], rho * np.ones((1, int(active.sum())))))
        rhs = np.append(np.zeros(G.shape[0]), rho)
        mu_a, _ = nnls(M, rhs)
        mu = np.zeros(n)
        mu[active] = mu_a
        total = mu.sum()
        if not total > 0.0:
            mu[active] = 1.0
            total = mu.sum()
        return mu / total


def _clusters(atoms, masses, radius):
    """Mass-weighted centroids of atoms whose neighbours lie within ``radius``."""
    order = np.argsort(atoms)
    groups = []
    for i in order:
        a, m = float(atoms[i]), float(masses[i])
        if groups and a - groups[-1][-1][0] <= radius:
            groups[-1].append((a, m))
        else:
            groups.append([(a, m)])
    pts, wts = [], []
    for grp in groups:
        tot = sum(m for _, m in grp)
        pts.append(sum(a * m for a, m in grp) / tot)
        wts.append(tot)
    return np.array(pts), np.array(wts)


def _consolidations(atoms, masses, cap):
    """Candidate supports within the spectrum bound, smallest first.

    Starting from the atoms clustered at radius ``1e-3``, neighbours are
    merged closest-first down to a single atom; every stage that respects
    the bound is a candidate, as is its variant with the innermost atom
    pulled onto ``1/2`` when it sits close to it.
    """
    pts, wts = _clusters(atoms, masses, 1e-3)
    stages = [(pts, wts)]
    while pts.size > 1:
        i = int(np.argmin(np.diff(pts)))
        tot = wts[i] + wts[i + 1]
        merged = (pts[i] * wts[i] + pts[i + 1] * wts[i + 1]) / tot
        pts = np.concatenate((pts[:i], [merged], pts[i + 2 :]))
        wts = np.concatenate((wts[:i], [tot], wts[i + 2 :]))
        stages.append((pts, wts))
    out = []
    for pts, wts in reversed(stages):
        if pts[-1] > 0.45 and pts[-1] != 0.5:
            snapped = np.append(pts[:-1], 0.5)
            if _support_size(snapped) <= cap:
                out.append((snapped, wts))
        if _support_size(pts) <= cap:
            out.append((pts, wts))
    return out


def _kkt_newton(k, decoder, coords, atoms, masses, x):
    """Solve the saddle conditions for a fixed number of atoms.

    Unknowns are the atom positions (an atom at ``1/2`` stays put), their
    masses, the channel coordinates off the bounds and the common value
    ``t``.  A coordinate resting on a bound is released when the expected
    gradient pushes it inwards.  Returns ``None`` if the root finder fails
    or leaves the feasible set.
    """
    free = (x > 1e-9) & (x < 1.0 - 1e-9)
    for _ in range(x.size + 1):
        out = _kkt_newton_fixed(k, decoder, coords, atoms, masses, x, free)
        if out is None:
            return None
        w, mu, xx = out
        node = NodePayoff(k, w)
        g = coords.reduce(node.gradient(coords.expand(xx), mu, decoder))
        wrong = ~free & (((xx <= 1e-9) & (g < 0.0)) | ((xx >= 1.0 - 1e-9) & (g > 0.0)))
        if not np.any(wrong):
            return out
        free = free | wrong
        x = xx
    return None


def _kkt_newton_fixed(k, decoder, coords, atoms, masses, x, free):
    from scipy.optimize import root

    atoms = np.asarray(atoms, dtype=float)
    n = atoms.size
    centre = np.isclose(atoms, 0.5, rtol=0.0, atol=1e-12)
    moving = ~centre
    nm = int(moving.sum())
    nf = int(free.sum())
    c0 = CollusionChannel(k, coords.expand(x))
    t0 = float(np.max(payoff_values(c0, atoms, decoder)))
    scale = 1.0 / t0

    def unpack(u):
        w = atoms.copy()
        w[moving] = u[:nm]
        mu = u[nm : nm + n]
        xx = x.copy()
        xx[free] = u[nm + n : nm + n + nf]
        return w, mu, xx, u[-1]

    def residual(u):
        w, mu, xx, t = unpack(u)
        if np.any(w <= 0.0) or np.any(w > 0.5) or np.any(xx < 0.0) or np.any(xx > 1.0):
            return np.full(u.size, 1e3)
        c = CollusionChannel(k, coords.expand(xx))
        vals, d1, _ = payoff_w_derivatives(c, w, decoder)
        node = NodePayoff(k, w)
        g = coords.reduce(node.gradient(c.p, mu, decoder))[free]
        return np.concatenate(
            (scale * d1[moving], scale * (vals - t / scale), scale * g, [mu.sum() - 1.0])
        )

    u0 = np.concatenate((atoms[moving], masses, x[free], [t0 * scale]))
    try:
        sol = root(residual, u0, method="hybr", options={"xtol": 1e-13})
    except (ValueError, FloatingPointError):
        return None
    if not sol.success:
        return None
    w, mu, xx, _ = unpack(sol.x)
    if np.any(mu <= 0.0) or np.max(np.abs(residual(sol.x))) > 1e-8:
        return None
    return w, mu, xx


def _certify(k, decoder, prior, channel, opts):
    """Maximin and minimax certificates for a strategy pair."""
    fw = minimize_over_channel(prior, decoder, k, opts, start=channel, raise_on_failure=False)
    _, upper = maximize_over_w(channel, decoder, (0.0, 0.5), opts.w_grid, opts.w_tol)
    return fw.lower_bound, upper


def _half_prior(atoms, masses, tol):
    """Symmetric prior from half-atoms, snapping atoms within ``tol`` of 1/2."""
    atoms = np.where(0.5 - np.asarray(atoms) < tol, 0.5, atoms)
    atoms, masses = _clusters(atoms, masses, 0.0)
    return FiniteSpectrumPrior.symmetric(atoms, masses / masses.sum())


def solve_saddle(k: int, decoder, opts: Optional[SolverOptions] = None) -> GameSolution:
    """Saddle point of the game over all priors and symmetric attacks.

    Double-oracle loop on atoms in ``[0, 1/2]`` (mirrored to a symmetric
    prior), started from the atom ``{1/2}`` and the interleaving attack.
    Each round solves the restricted game ``min_p max_j I(w_j, p)`` on the
    current atoms, whose multipliers are the restricted prior; the
    colluders' best response to that prior certifies a maximin value and
    the embedder's best bias against the restricted attack certifies a
    minimax value and becomes the next atom.  Once the certificates agree
    within ``opts.tol`` the clustered atoms are polished by solving the
    saddle conditions for a prior of that support size, which is kept when
    its own certificates still agree.

    Raises
    ------
    NonConvergenceError
        After ``opts.max_rounds`` rounds; ``best`` holds a solution with
        ``converged=False``.
    InfeasibleRestrictionError
        If the restricted game puts no mass on any atom.
    """
    opts = _opts(opts)
    decoder = DecoderKind.parse(decoder)
    _check_k(k)
    coords = _Coords(k, True)
    cap = spectrum_cap(k)

    if coords.dim == 0:
        channel = CollusionChannel(k, coords.expand(np.zeros(0)))
        w, value = maximize_over_w(channel, decoder, (0.0, 0.5), opts.w_grid, opts.w_tol)
        prior = _half_prior([w], np.ones(1), opts.merge_tol)
        return GameSolution(
            value, prior, channel, decoder, kkt_report(prior, channel, decoder),
            0.0, 1, value, value, True, ((value, value, 1),),
        )

    restricted = _Restricted(k, decoder, coords)
    atoms = np.array([0.5])
    x = coords.take(interleaving_channel(k))
    best_lower = (-math.inf, None)
    best_upper = (math.inf, None)
    history = []
    converged = False
    rounds = 0
    mu = np.ones(1)
    for rounds in range(1, opts.max_rounds + 1):
        x, _, mu = restricted.solve(atoms, x, opts.restricted_tol)
        if not np.any(mu > opts.mass_floor):
            raise InfeasibleRestrictionError("the restricted game lost its whole support")
        keep = mu > opts.mass_floor
        prior = _half_prior(atoms[keep], mu[keep], opts.merge_tol)
        channel = CollusionChannel(k, coords.expand(x))
        fw = minimize_over_channel(prior, decoder, k, opts, start=channel, raise_on_failure=False)
        if fw.lower_bound > best_lower[0]:
            best_lower = (fw.lower_bound, prior)
        new_w, upper = maximize_over_w(channel, decoder, (0.0, 0.5), opts.w_grid, opts.w_tol)
        if upper < best_upper[0]:
            best_upper = (upper, channel)
        history.append((best_lower[0], best_upper[0], prior.size))
        if best_upper[0] - best_lower[0] <= opts.tol:
            converged = True
            break
        if 0.5 - new_w < opts.merge_tol:
            new_w = 0.5
        if np.min(np.abs(atoms - new_w)) < opts.merge_tol:
            # the best response is already an atom; more rounds cannot help
            break
        if rounds == opts.max_rounds:
            break
        atoms = np.sort(np.append(atoms, new_w))

    # consolidate clustered atoms and polish on the saddle conditions
    keep = mu > opts.mass_floor
    for pts, wts in _consolidations(atoms[keep], mu[keep], cap):
        polished = _kkt_newton(k, decoder, coords, pts, wts, x)
        if polished is None:
            continue
        w_n, mu_n, x_n = polished
        if np.min(np.diff(np.sort(w_n)), initial=1.0) < 1e-4:
            continue
        prior_n = _half_prior(w_n, mu_n, opts.merge_tol)
        channel_n = CollusionChannel(k, coords.expand(x_n))
        lo_n, up_n = _certify(k, decoder, prior_n, channel_n, opts)
        if up_n - lo_n <= opts.tol:
            best_lower = (lo_n, prior_n)
            best_upper = (up_n, channel_n)
            converged = True
            history.append((lo_n, up_n, prior_n.size))
            break

    lower, prior = best_lower
    upper, channel = best_upper
    sol = GameSolution(
        0.5 * (lower + upper),
        prior,
        channel,
        decoder,
        kkt_report(prior, channel, decoder),
        upper - lower,
        rounds,
        lower,
        upper,
        converged,
        tuple(history),
    )
    if not converged:
        raise NonConvergenceError(
            f"double oracle stopped with certificates [{lower:.10g}, {upper:.10g}]",
            best=sol,
            gap=upper - lower,
        )
    return sol


# ---------------------------------------------------------------------------
# single-bias value and closed-form bounds
# ---------------------------------------------------------------------------


def degenerate_prior_maximin(k: int, opts: Optional[SolverOptions] = None, grid: int = 17) -> float:
    """``max_w min_p I_joint(w, p)`` for a prior concentrated on one bias.

    The inner minimum runs over all marking channels, not only symmetric
    ones, because a point mass away from ``1/2`` is not symmetric.  The
    outer maximum is a coarse scan of ``[0, 1/2]`` refined by golden
    section (the game is symmetric under ``w -> 1 - w``).
    """
    opts = _opts(opts)
    _check_k(k)
    cache = {}

    def inner(w):
        if w not in cache:
            sol = minimize_over_channel(
                FiniteSpectrumPrior.point(w),
                DecoderKind.JOINT,
                k,
                opts,
                symmetric=False,
                raise_on_failure=False,
            )
            # a stalled burst still leaves a usable value; only a loose gap is fatal
            if sol.gap > opts.tol:
                raise NonConvergenceError(
                    f"inner minimum at w={w:.6g} stalled at gap {sol.gap:.3e}", best=sol, gap=sol.gap
                )
            cache[w] = sol.value
        return cache[w]

    ws = np.linspace(0.0, 0.5, grid)
    vals = [inner(float(w)) for w in ws]
    i = int(np.argmax(vals))
    lo, hi = ws[max(i - 1, 0)], ws[min(i + 1, grid - 1)]
    _, value = golden_max(inner, float(lo), float(hi), 1e-9)
    return float(max(value, vals[i]))


@dataclass(frozen=True)
class BoundsReport:
    """Closed-form bounds in bits.

    ``lower_arcsine`` is the value guaranteed by the arcsine prior with the
    simple decoder and hence with the joint one; ``upper_interleaving`` is
    the capacity under the interleaving attack (an upper bound for the
    joint decoder, exact for the simple decoder); ``asymptote`` is the
    large-``k`` joint capacity ``1 / (2 k^2 ln 2)``.
    """

    k: int
    decoder: DecoderKind
    lower_arcsine: float
    upper_interleaving: float
    asymptote: float

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "decoder": self.decoder.value,
            "lower_arcsine": self.lower_arcsine,
            "upper_interleaving": self.upper_interleaving,
            "asymptote": self.asymptote,
        }


def capacity_bounds(k: int, decoder) -> BoundsReport:
    decoder = DecoderKind.parse(decoder)
    _check_k(k)
    lower = 2.0 / (k * k * math.pi**2 * LN2)
    if decoder is DecoderKind.JOINT:
        upper = 1.0 / (k * k * LN2)
    else:
        upper = 1.0 - binary_entropy(0.5 + 0.5 / k)
    return BoundsReport(k, decoder, lower, upper, 1.0 / (2.0 * k * k * LN2))


__all__ = [
    "SolverOptions",
    "DEFAULT_OPTIONS",
    "ChannelSolution",
    "minimize_over_channel",
    "BiasMaximum",
    "maximize_over_w",
    "KktReport",
    "kkt_report",
    "GameSolution",
    "spectrum_cap",
    "solve_saddle",
    "degenerate_prior_maximin",
    "BoundsReport",
    "capacity_bounds",
]
