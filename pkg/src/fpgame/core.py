"""Information-theoretic primitives, binomial kernels and strategy types.

Everything here works in bits.  Probabilities on the boundary of ``[0, 1]``
are handled by exact branching (``0 log 0 = 0``) rather than by flooring
with an epsilon, so entropies and divergences vanish exactly where they
should.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import betaln, entr, gammaln, xlogy

from .errors import DomainError, InfeasibleChannelError, InvalidPriorError

LN2 = math.log(2.0)

#: Absolute tolerance on ``p[z] = 1 - p[k - z]`` when validating channels.
SYMMETRY_TOL = 1e-9

#: Coalitions up to this size use exact integer binomial coefficients.
_EXACT_BINOMIAL_MAX = 60

#: Probabilities are clamped to ``[_CLAMP, 1 - _CLAMP]`` inside gradients only.
_CLAMP = 1e-12


# ---------------------------------------------------------------------------
# entropy and divergence
# ---------------------------------------------------------------------------


def _check_probability(name, x):
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"{name}={x!r} is not a probability")


def binary_entropy(p: float) -> float:
    """Binary entropy ``h(p)`` in bits, with ``h(0) = h(1) = 0``."""
    p = float(p)
    _check_probability("p", p)
    if p == 0.0 or p == 1.0:
        return 0.0
    return -(p * math.log2(p) + (1.0 - p) * math.log2(1.0 - p))


def kl_bernoulli(r: float, s: float) -> float:
    """Divergence ``d(r || s)`` between Bernoulli(r) and Bernoulli(s), in bits.

    Raises
    ------
    DomainError
        If either argument is not a probability, or if ``s`` is 0 or 1 while
        ``r != s`` (the divergence is infinite there).
    """
    r = float(r)
    s = float(s)
    _check_probability("r", r)
    _check_probability("s", s)
    if r == s:
        return 0.0
    if s == 0.0 or s == 1.0:
        raise DomainError(f"d({r} || {s}) is infinite")
    return float(kl_bits(np.array(r), np.array(s)))


def entropy_bits(x):
    """Vectorised binary entropy without domain checks."""
    x = np.asarray(x, dtype=float)
    return (entr(x) + entr(1.0 - x)) / LN2


def entropy_slope(x):
    """``h'(x) = log2((1 - x) / x)`` with ``x`` clamped away from 0 and 1."""
    x = np.clip(np.asarray(x, dtype=float), _CLAMP, 1.0 - _CLAMP)
    return np.log((1.0 - x) / x) / LN2


def entropy_curvature(x):
    """``h''(x) = -1 / (x (1 - x) ln 2)`` with the same clamping."""
    x = np.clip(np.asarray(x, dtype=float), _CLAMP, 1.0 - _CLAMP)
    return -1.0 / (x * (1.0 - x) * LN2)


def log1pmx(x):
    """``log(1 + x) - x`` without cancellation for small ``|x|``."""
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log1p(flat) - flat
    small = np.abs(flat) < 1e-2
    if np.any(small):
        xs = flat[small]
        term = xs * xs
        acc = -0.5 * term
        for n in range(3, 12):
            term = -term * xs
            acc = acc - term / n
        out[small] = acc
    return out.reshape(x.shape)


def kl_bits(r, s, delta=None, sc=None):
    """Vectorised ``d(r || s)`` in bits for ``s`` strictly inside ``(0, 1)``.

    ``delta`` may carry ``r - s`` and ``sc`` may carry ``1 - s``, each
    computed by a more accurate route than the subtraction.  The divergence is assembled as
    ``delta^2 / (s (1 - s)) + r L(delta / s) + (1 - r) L(-delta / (1 - s))``
    with ``L(x) = log(1 + x) - x``, which keeps full relative accuracy when
    ``r`` is close to ``s``.  Entries with ``s`` on the boundary return 0 when
    ``r == s`` and ``inf`` otherwise.
    """
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    delta = r - s if delta is None else np.asarray(delta, dtype=float)
    sc = 1.0 - s if sc is None else np.asarray(sc, dtype=float)
    r, s, delta, sc = np.broadcast_arrays(r, s, delta, sc)
    inside = (s > 0.0) & (sc > 0.0)
    ss = np.where(inside, s, 0.5)
    dd = np.where(inside, delta, 0.0)
    rr = np.where(inside, r, 0.5)
    sc = np.where(inside, sc, 0.5)
    with np.errstate(all="ignore"):
        quad = dd * dd / (ss * sc)
        xu = dd / ss
        xd = -dd / sc
        # far from zero the logarithm of the ratio itself is accurate
        lu = np.where(xu > -0.5, log1pmx(xu), np.log(rr / ss) - xu)
        ld = np.where(xd > -0.5, log1pmx(xd), np.log((1.0 - rr) / sc) - xd)
        up = np.where(rr > 0.0, rr * lu, 0.0)
        down = np.where(rr < 1.0, (1.0 - rr) * ld, 0.0)
        # relative distance of order one or more: the plain form has no cancellation
        far = (np.abs(xu) > 0.5) | (np.abs(xd) > 0.5)
        lr = np.log(np.where(rr > 0.0, rr, 1.0))
        lrc = np.log(np.where(rr < 1.0, 1.0 - rr, 1.0))
        plain = rr * (lr - np.log(ss)) + (1.0 - rr) * (lrc - np.log(sc))
        near = quad + up + down
    out = np.where(far, plain, near) / LN2
    out = np.maximum(out, 0.0)
    boundary = np.where(r == s, 0.0, np.inf)
    return np.where(inside, out, boundary)


# ---------------------------------------------------------------------------
# binomial kernels and Bernstein polynomials
# ---------------------------------------------------------------------------


def binomial_matrix(n: int, w, wc=None) -> np.ndarray:
    """Binomial pmf ``C(n, z) w^z (1 - w)^(n - z)`` as a ``(len(w), n + 1)`` array.

    ``wc`` optionally supplies ``1 - w`` computed without cancellation (the
    quadrature rules carry it for nodes close to 1).
    """
    w = np.atleast_1d(np.asarray(w, dtype=float))
    wc = 1.0 - w if wc is None else np.atleast_1d(np.asarray(wc, dtype=float))
    z = np.arange(n + 1)
    if n <= _EXACT_BINOMIAL_MAX:
        coef = np.array([math.comb(n, j) for j in z], dtype=float)
        return coef[None, :] * np.power(w[:, None], z[None, :]) * np.power(
            wc[:, None], (n - z)[None, :]
        )
    logc = gammaln(n + 1.0) - gammaln(z + 1.0) - gammaln(n - z + 1.0)
    logp = logc[None, :] + xlogy(z[None, :], w[:, None]) + xlogy((n - z)[None, :], wc[:, None])
    return np.exp(logp)


def bernstein(coeffs, w, order: int = 0, wc=None):
    """Evaluate a Bernstein polynomial or one of its derivatives.

    ``coeffs`` has length ``n + 1``.  The ``order``-th derivative is the
    degree ``n - order`` Bernstein polynomial with coefficients
    ``n! / (n - order)! * diff(coeffs, order)``.
    """
    c = np.asarray(coeffs, dtype=float)
    n = c.size - 1
    if order > n:
        return np.zeros(np.shape(np.atleast_1d(w)))
    scale = float(math.perm(n, order))
    dc = np.diff(c, order) * scale
    return binomial_matrix(n - order, w, wc) @ dc


@dataclass(frozen=True)
class KernelTriple:
    """Laws of ``Z`` given ``W = w``: unconditional and given ``X_1 = 1 / 0``."""

    k: int
    w: float
    alpha: np.ndarray
    alpha1: np.ndarray
    alpha0: np.ndarray


def kernels(k: int, w: float) -> KernelTriple:
    """Binomial kernels for ``k`` colluders at bias ``w``.

    ``alpha`` is Binomial(k, w); ``alpha1`` is Binomial(k - 1, w) shifted up
    by one (the first colluder holds a 1) and ``alpha0`` is Binomial(k - 1, w)
    padded with a trailing zero.
    """
    _check_k(k)
    w = float(w)
    _check_probability("w", w)
    alpha = binomial_matrix(k, w)[0]
    base = binomial_matrix(k - 1, w)[0]
    alpha1 = np.concatenate(([0.0], base))
    alpha0 = np.concatenate((base, [0.0]))
    for a in (alpha, alpha1, alpha0):
        a.setflags(write=False)
    return KernelTriple(k, w, alpha, alpha1, alpha0)


def _check_k(k):
    if int(k) != k or k < 2:
        raise DomainError(f"coalition size must be an integer >= 2, got {k!r}")


# ---------------------------------------------------------------------------
# strategies
# ---------------------------------------------------------------------------


class DecoderKind(str, enum.Enum):
    JOINT = "joint"
    SIMPLE = "simple"

    @classmethod
    def parse(cls, value) -> "DecoderKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(f"unknown decoder {value!r}") from None


def _frozen(values) -> np.ndarray:
    a = np.array(values, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CollusionChannel:
    """Attack vector ``p[z] = Pr(Y = 1 | Z = z)`` for ``z = 0..k``.

    Construction only checks the shape; feasibility is reported by
    :func:`validate_channel` and enforced by :meth:`require_feasible`.
    """

    k: int
    p: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_k(self.k)
        p = _frozen(self.p)
        if p.ndim != 1 or p.size != self.k + 1:
            raise DomainError(f"channel for k={self.k} needs {self.k + 1} entries, got {p.size}")
        if not np.all(np.isfinite(p)):
            raise DomainError("channel entries must be finite")
        object.__setattr__(self, "p", p)

    def __repr__(self):
        return f"CollusionChannel(k={self.k}, p={np.array2string(self.p, precision=6)})"

    def __eq__(self, other):
        if not isinstance(other, CollusionChannel):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.p, other.p)

    def __hash__(self):
        return hash((self.k, self.p.tobytes()))

    @classmethod
    def from_free(cls, k: int, free) -> "CollusionChannel":
        """Symmetric channel from its free coordinates ``p[1..floor((k-1)/2)]``."""
        return cls(k, expand_free(k, free))

    def free(self) -> np.ndarray:
        """Free coordinates of a symmetric channel."""
        return self.p[1 : n_free(self.k) + 1].copy()

    def is_symmetric(self, tol: float = SYMMETRY_TOL) -> bool:
        return bool(np.max(np.abs(self.p + self.p[::-1] - 1.0)) <= tol)

    def require_feasible(self, symmetric: bool = False) -> "CollusionChannel":
        bad = validate_channel(self, symmetric)
        if bad:
            raise InfeasibleChannelError(bad)
        return self


def n_free(k: int) -> int:
    """Number of free coordinates of a symmetric channel, ``floor((k-1)/2)``."""
    return (k - 1) // 2


def expand_free(k: int, free) -> np.ndarray:
    """Full symmetric attack vector from its free coordinates."""
    m = n_free(k)
    q = np.asarray(free, dtype=float).reshape(-1)
    if q.size != m:
        raise DomainError(f"k={k} has {m} free coordinates, got {q.size}")
    p = np.empty(k + 1)
    p[0] = 0.0
    p[k] = 1.0
    p[1 : m + 1] = q
    p[k - m : k] = 1.0 - q[::-1]
    if k % 2 == 0:
        p[k // 2] = 0.5
    return p


def interleaving_channel(k: int) -> CollusionChannel:
    """The attack ``p[z] = z / k``: each output copied from a random colluder."""
    _check_k(k)
    return CollusionChannel(k, np.arange(k + 1) / k)


def symmetrize(c: CollusionChannel) -> CollusionChannel:
    """Average a channel with its symbol-swapped image ``1 - p[k - z]``."""
    return CollusionChannel(c.k, 0.5 * (c.p + 1.0 - c.p[::-1]))


@dataclass(frozen=True)
class Violation:
    constraint: str
    index: int
    magnitude: float

    def __str__(self):
        return f"{self.constraint} at z={self.index} (by {self.magnitude:.3g})"


def validate_channel(c: CollusionChannel, symmetric: bool = False) -> list[Violation]:
    """List every violated constraint; an empty list means feasible."""
    p = c.p
    k = c.k
    out: list[Violation] = []
    if p[0] != 0.0:
        out.append(Violation("marking", 0, abs(float(p[0]))))
    if p[k] != 1.0:
        out.append(Violation("marking", k, abs(1.0 - float(p[k]))))
    for z in range(k + 1):
        x = float(p[z])
        if x < 0.0 or x > 1.0:
            out.append(Violation("range", z, max(-x, x - 1.0)))
    if symmetric:
        for z in range(k // 2 + 1):
            dev = abs(float(p[z] + p[k - z]) - 1.0)
            if dev > SYMMETRY_TOL:
                out.append(Violation("symmetry", z, dev))
    return out


@dataclass(frozen=True)
class FiniteSpectrumPrior:
    """Discrete distribution of the bias ``W`` on finitely many points."""

    support: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        s = _frozen(np.atleast_1d(self.support))
        m = _frozen(np.atleast_1d(self.masses))
        if s.ndim != 1 or s.size == 0 or s.size != m.size:
            raise InvalidPriorError("support and masses must be non-empty vectors of equal length")
        if np.any(s < 0.0) or np.any(s > 1.0):
            raise InvalidPriorError("support points must lie in [0, 1]")
        if np.any(np.diff(s) <= 0.0):
            raise InvalidPriorError("support points must be strictly increasing")
        if np.any(m <= 0.0):
            raise InvalidPriorError("masses must be positive")
        if abs(float(m.sum()) - 1.0) > 1e-12:
            raise InvalidPriorError(f"masses sum to {m.sum()!r}, not 1")
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "masses", m)

    def __repr__(self):
        pairs = ", ".join(f"{w:.6g}:{m:.6g}" for w, m in zip(self.support, self.masses))
        return f"FiniteSpectrumPrior({pairs})"

    def __eq__(self, other):
        if not isinstance(other, FiniteSpectrumPrior):
            return NotImplemented
        return np.array_equal(self.support, other.support) and np.array_equal(
            self.masses, other.masses
        )

    def __hash__(self):
        return hash((self.support.tobytes(), self.masses.tobytes()))

    @classmethod
    def point(cls, w: float) -> "FiniteSpectrumPrior":
        return cls(np.array([float(w)]), np.array([1.0]))

    @classmethod
    def from_weights(cls, support, weights) -> "FiniteSpectrumPrior":
        """Sort, merge duplicate points, drop zero weights and normalise."""
        s = np.asarray(support, dtype=float).reshape(-1)
        m = np.asarray(weights, dtype=float).reshape(-1)
        keep = m > 0.0
        s, m = s[keep], m[keep]
        uniq, inv = np.unique(s, return_inverse=True)
        merged = np.zeros(uniq.size)
        np.add.at(merged, inv, m)
        return cls(uniq, merged / merged.sum())

    @classmethod
    def symmetric(cls, half_points, masses) -> "FiniteSpectrumPrior":
        """Symmetric prior from atoms on ``[0, 1/2]``.

        Each atom ``w < 1/2`` with mass ``m`` becomes the pair
        ``{(w, m/2), (1 - w, m/2)}``; an atom at ``1/2`` stays a single point.
        """
        pts = np.asarray(half_points, dtype=float).reshape(-1)
        m = np.asarray(masses, dtype=float).reshape(-1)
        if np.any(pts > 0.5) or np.any(pts < 0.0):
            raise InvalidPriorError("half-space atoms must lie in [0, 1/2]")
        centre = pts == 0.5
        support = np.concatenate((pts[~centre], 1.0 - pts[~centre], pts[centre]))
        weights = np.concatenate((m[~centre] / 2, m[~centre] / 2, m[centre]))
        return cls.from_weights(support, weights)

    @property
    def size(self) -> int:
        return int(self.support.size)

    def is_symmetric(self, tol: float = SYMMETRY_TOL) -> bool:
        mirrored = 1.0 - self.support[::-1]
        return bool(
            np.max(np.abs(mirrored - self.support)) <= tol
            and np.max(np.abs(self.masses[::-1] - self.masses)) <= tol
        )


class PriorKind(str, enum.Enum):
    BETA = "beta"
    ARCSINE = "arcsine"
    CUSTOM = "custom"


@dataclass(frozen=True)
class ContinuousPrior:
    """Density of the bias ``W`` on ``(0, 1)``.

    ``hint = (a, b)`` records the endpoint behaviour ``w^a (1 - w)^b`` of the
    density; quadrature rules use it to absorb endpoint singularities.  Use
    the :meth:`beta`, :meth:`arcsine` and :meth:`custom` constructors.
    """

    kind: PriorKind
    theta: Optional[float] = None
    hint: tuple = (0.0, 0.0)
    density: Optional[Callable] = field(default=None, repr=False)
    symmetric: bool = True

    @classmethod
    def beta(cls, theta: float) -> "ContinuousPrior":
        """Symmetric Beta(theta, theta); theta = 1/2 is the arcsine law."""
        theta = float(theta)
        if not theta > 0.0 or not math.isfinite(theta):
            raise InvalidPriorError(f"beta parameter must be positive, got {theta!r}")
        if theta == 0.5:
            return cls.arcsine()
        return cls(PriorKind.BETA, theta, (theta - 1.0, theta - 1.0))

    @classmethod
    def arcsine(cls) -> "ContinuousPrior":
        return cls(PriorKind.ARCSINE, 0.5, (-0.5, -0.5))

    @classmethod
    def custom(cls, pdf: Callable, hint=(0.0, 0.0), symmetric: bool = False) -> "ContinuousPrior":
        """Arbitrary vectorised density with endpoint exponents ``hint``.

        The density must integrate to one; this is checked when a quadrature
        rule is built for it.
        """
        a, b = (float(x) for x in hint)
        if a <= -1.0 or b <= -1.0:
            raise InvalidPriorError(f"endpoint exponents {hint!r} are not integrable")
        return cls(PriorKind.CUSTOM, None, (a, b), pdf, bool(symmetric))

    @property
    def is_beta_family(self) -> bool:
        return self.kind in (PriorKind.BETA, PriorKind.ARCSINE)

    def pdf(self, w):
        w = np.asarray(w, dtype=float)
        return self.pdf_pair(w, 1.0 - w)

    def pdf_pair(self, w, wc):
        """Density at ``w`` given an accurate complement ``wc = 1 - w``."""
        w = np.asarray(w, dtype=float)
        wc = np.asarray(wc, dtype=float)
        if self.kind is PriorKind.CUSTOM:
            return np.asarray(self.density(w), dtype=float)
        th = self.theta
        return np.exp(xlogy(th - 1.0, w) + xlogy(th - 1.0, wc) - betaln(th, th))

    def regular_part(self, w):
        """Density divided by ``w^a (1 - w)^b``, bounded near the endpoints."""
        w = np.clip(np.asarray(w, dtype=float), 1e-300, 1.0 - 2.0**-53)
        if self.is_beta_family:
            return np.full(w.shape, math.exp(-betaln(self.theta, self.theta)))
        a, b = self.hint
        return np.asarray(self.density(w), dtype=float) / (w**a * (1.0 - w) ** b)


def pinsker_bound(r, s):
    """``(2 / ln 2) (r - s)^2``, the Pinsker lower bound on ``d(r || s)``."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    return 2.0 / LN2 * (r - s) ** 2


__all__ = [
    "LN2",
    "SYMMETRY_TOL",
    "binary_entropy",
    "kl_bernoulli",
    "entropy_bits",
    "entropy_slope",
    "entropy_curvature",
    "kl_bits",
    "log1pmx",
    "binomial_matrix",
    "bernstein",
    "KernelTriple",
    "kernels",
    "DecoderKind",
    "CollusionChannel",
    "n_free",
    "expand_free",
    "interleaving_channel",
    "symmetrize",
    "Violation",
    "validate_channel",
    "FiniteSpectrumPrior",
    "PriorKind",
    "ContinuousPrior",
    "pinsker_bound",
]
