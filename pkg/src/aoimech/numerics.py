"""Small numerical building blocks: monotone root finding and quadrature."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import NumericalError

BRACKET_LO = 1e-12
BRACKET_HI = 1.0
MAX_BISECT_ITER = 200
MAX_DOUBLINGS = 2000
RTOL = 1e-10
EPS = float(np.finfo(float).eps)


def bisect_increasing(fn, target, lo=BRACKET_LO, hi=BRACKET_HI, rtol=RTOL,
                      max_iter=MAX_BISECT_ITER):
    """Solve ``fn(x) = target`` for a strictly increasing ``fn`` on (0, inf).

    The upper end of the bracket is doubled until it covers ``target``; if
    ``target`` lies below ``fn(lo)`` the bracket becomes ``[0, lo]``.
    """
    if target <= 0.0:
        return 0.0
    f_hi = fn(hi)
    doublings = 0
    while f_hi < target:
        lo, hi = hi, 2.0 * hi
        f_hi = fn(hi)
        doublings += 1
        if doublings > MAX_DOUBLINGS or not math.isfinite(hi):
            raise NumericalError("bracket exhausted while doubling",
                                 target=target, hi=hi, f_hi=f_hi)
    if fn(lo) > target:
        lo = 0.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            return 0.5 * (lo + hi)
    raise NumericalError("bisection did not converge", target=target,
                         lo=lo, hi=hi, iterations=max_iter)


def bisect_increasing_vec(fn, targets, lo=BRACKET_LO, hi=BRACKET_HI,
                          rtol=RTOL, max_iter=MAX_BISECT_ITER):
    """Vectorised :func:`bisect_increasing`; ``fn`` maps arrays to arrays."""
    targets = np.asarray(targets, dtype=float)
    shape = targets.shape
    t = targets.ravel()
    out = np.zeros_like(t)
    live = t > 0.0
    if not live.any():
        return out.reshape(shape)
    tl = t[live]
    lo_a = np.full(tl.shape, lo)
    hi_a = np.full(tl.shape, hi)
    for _ in range(MAX_DOUBLINGS):
        short = fn(hi_a) < tl
        if not short.any():
            break
        lo_a[short] = hi_a[short]
        hi_a[short] *= 2.0
    else:
        raise NumericalError("bracket exhausted while doubling",
                             worst_target=float(tl.max()))
    if not np.all(np.isfinite(hi_a)):
        raise NumericalError("bracket exhausted while doubling",
                             worst_target=float(tl.max()))
    lo_a[fn(lo_a) > tl] = 0.0
    for _ in range(max_iter):
        mid = 0.5 * (lo_a + hi_a)
        below = fn(mid) < tl
        lo_a = np.where(below, mid, lo_a)
        hi_a = np.where(below, hi_a, mid)
        if np.all(hi_a - lo_a <= rtol * hi_a):
            break
    else:
        raise NumericalError("vectorised bisection did not converge",
                             iterations=max_iter)
    out[live] = 0.5 * (lo_a + hi_a)
    return out.reshape(shape)


def bisect_nondecreasing_vec(fn, targets, lo, hi, iters=100):
    """Smallest ``x`` in ``[lo, hi]`` with ``fn(x) >= target``, elementwise.

    ``fn`` only needs to be non-decreasing, so flat stretches are allowed.
    Targets outside the range of ``fn`` clip to the interval ends.
    """
    targets = np.asarray(targets, dtype=float)
    a = np.full(targets.shape, float(lo))
    b = np.full(targets.shape, float(hi))
    for _ in range(iters):
        mid = 0.5 * (a + b)
        below = fn(mid) < targets
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
        if np.all(b - a <= 1e-15 * np.maximum(1.0, np.abs(b))):
            break
    return b


def adaptive_simpson(fn, a, b, tol=1e-9, max_depth=40):
    """Adaptive Simpson quadrature of a scalar function on ``[a, b]``.

    Raises :class:`NumericalError` when a subinterval reaches ``max_depth``
    without meeting its share of the tolerance.
    """
    if b <= a:
        return 0.0
    fa, fm, fb = fn(a), fn(0.5 * (a + b)), fn(b)
    whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0
    return _simpson_step(fn, a, b, fa, fm, fb, whole, tol, max_depth)


def _simpson_step(fn, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = fn(lm), fn(rm)
    left = (m - a) * (fa + 4.0 * flm + fm) / 6.0
    right = (b - m) * (fm + 4.0 * frm + fb) / 6.0
    delta = left + right - whole
    if abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    if depth <= 0:
        # near a jump the error shrinks no faster than the halved tolerance;
        # a residual at rounding level is as good as it gets
        if abs(delta) <= 64.0 * EPS * max(1.0, abs(whole)):
            return left + right
        raise NumericalError("adaptive Simpson hit max depth", a=a, b=b,
                             residual=abs(delta))
    return (_simpson_step(fn, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + _simpson_step(fn, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1))


def integrate_sqrt_substituted(fn, a, b, tol=1e-9, max_depth=40):
    """Adaptive Simpson on ``[a, b]`` after substituting ``z = a + u**2``.

    The substitution removes inverse-square-root blow-ups at ``a`` (rates
    near a zero virtual cost) and is harmless for smooth integrands.
    """
    if b <= a:
        return 0.0
    def integrand(u):
        # an uncapped 1/sqrt blow-up at a has a finite limit; 0 is close enough
        # for the single endpoint sample
        return 2.0 * u * fn(a + u * u) if u > 0.0 else 0.0

    return adaptive_simpson(integrand, 0.0, math.sqrt(b - a), tol=tol, max_depth=max_depth)


@lru_cache(maxsize=None)
def gauss_legendre(n):
    """Nodes and weights of the ``n``-point rule on ``[-1, 1]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gl_nodes(a, b, n):
    """Map the ``n``-point rule onto intervals ``[a, b]`` (broadcasts).

    Returns nodes and weights with a trailing axis of length ``n``.
    """
    x, w = gauss_legendre(n)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def gl_integrate(fn, a, b, n=200):
    """Fixed ``n``-point Gauss-Legendre integral of a vectorised ``fn``."""
    z, w = gl_nodes(a, b, n)
    return float(np.sum(w * fn(z)))


def composite_gl(fn, breakpoints, n=200):
    """Gauss-Legendre with ``n`` nodes on each piece between breakpoints."""
    pts = np.unique(np.asarray(breakpoints, dtype=float))
    if pts.size < 2:
        return 0.0, 0
    z, w = gl_nodes(pts[:-1], pts[1:], n)
    return float(np.sum(w * fn(z))), int(z.size)
