"""One-dimensional searches shared by the solvers."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200):
    """Golden-section search for a maximiser of a unimodal ``f`` on ``[lo, hi]``.

    Returns ``(x, f(x))`` for the best point evaluated, which includes both
    endpoints; on ties the smaller ``x`` wins.
    """
    a, b = float(lo), float(hi)
    best = min(((a, f(a)), (b, f(b))), key=lambda t: (-t[1], t[0]))
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    for cand in ((c, fc), (d, fd)):
        if cand[1] > best[1] or (cand[1] == best[1] and cand[0] < best[0]):
            best = cand
    return best


def convex_step(slope, lo: float = 0.0, hi: float = 1.0, xtol: float = 1e-15) -> float:
    """Minimiser on ``[lo, hi]`` of a convex function given its derivative ``slope``."""
    s_lo = slope(lo)
    if s_lo >= 0.0:
        return lo
    s_hi = slope(hi)
    if s_hi <= 0.0:
        return hi
    return float(brentq(slope, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps))


__all__ = ["golden_max", "convex_step"]
