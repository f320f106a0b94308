"""Truncation toolkit backing the numerically verified inequality suite.

The production solver never truncates; this module exists so the structural
inequalities the convergence analysis rests on can be checked numerically on
a lattice of truncation levels, and to inform the saturation guard strategy.

The building blocks are the clamp ``trunc_T``, the capped diffusion
coefficients ``s_k1`` (carrier statistics) and ``s_k2`` (vacancy
statistics), the capped logarithm ``L_k``, and the regularized functionals

    G_{k,d}(s)  = double integral of S_k^1(z) / (T_k(z) + d),
    gt_{k,d}(s) = integral of S_k^1(y) / sqrt(T_k(y) + d)            from 0,
    H_{k,d}(s)  = double integral of S_k^2(z) / (T_{k/(k+1)}(z) + d),
    ht_{k,d}(s) = integral of S_k^2(y) / sqrt(T_{k/(k+1)}(y) + d)    from 1/2,

with both double integrals referenced at the point where the inverse
statistics map vanishes.  Evaluation reduces the double integrals exactly to
single ones, (s - z) times the weight; the literal nested quadrature with a
memoized inner antiderivative is kept as an independent oracle for tests.

Pure functions; any caches are call-local.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from . import statistics as stats
from .statistics import F12_ZERO, _quiet_quad

__all__ = [
    "TruncationLevel",
    "trunc_T",
    "s_k1",
    "s_k2",
    "L_k",
    "G_k_delta",
    "G_k_delta_prime",
    "G_k_delta_second_fd",
    "g_tilde_k_delta",
    "H_k_delta",
    "H_k_delta_prime",
    "h_tilde_k_delta",
    "h_tilde_k_delta_prime",
    "G_k_delta_nested",
    "H_k_delta_nested",
]

BLAKEMORE_REF = 0.5   # where the inverse vacancy statistics map vanishes


@dataclass(frozen=True)
class TruncationLevel:
    """Truncation index k >= 1 with shift delta in [0, F_{1/2}(0)).

    delta = 0 selects the shift-free family obtained in the limit.
    """

    k: int
    delta: float = 0.0

    def __post_init__(self):
        if not (isinstance(self.k, (int, np.integer)) and self.k >= 1):
            raise ValueError("truncation level needs an integer k >= 1")
        if not 0.0 <= self.delta < F12_ZERO:
            raise ValueError(
                f"delta must lie in [0, {F12_ZERO}), got {self.delta}")

    @property
    def knee(self) -> float:
        """Vacancy-side truncation point k/(k+1)."""
        return self.k / (self.k + 1.0)


def trunc_T(k, z):
    """Clamp of z to [0, k] for any truncation height k > 0."""
    if not np.all(np.asarray(k) > 0):
        raise ValueError("trunc_T requires k > 0")
    out = np.clip(np.asarray(z, dtype=float), 0.0, k)
    return float(out) if np.isscalar(z) else out


def s_k1(k, z):
    """Capped carrier diffusion coefficient:

    1 for z <= 0;  z g'(z) on (0, k];  k^{2/3} z^{1/3} g'(z) beyond.
    Continuous, bounded, strictly positive on the whole line.
    """
    if not k >= 1:
        raise ValueError("s_k1 requires k >= 1")
    scalar = np.isscalar(z)
    za = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.ones_like(za)
    inner = (za > 0.0) & (za <= k)
    outer = za > k
    if inner.any():
        out[inner] = za[inner] * stats.g_prime(za[inner])
    if outer.any():
        out[outer] = k ** (2.0 / 3.0) * za[outer] ** (1.0 / 3.0) \
            * stats.g_prime(za[outer])
    return float(out[0]) if scalar else out.reshape(np.shape(z))


def s_k2(k, z):
    """Capped vacancy diffusion coefficient:

    1 for z <= 0;  z h'(z) = 1/(1-z) on (0, k/(k+1)];  1 + k beyond.
    """
    if not k >= 1:
        raise ValueError("s_k2 requires k >= 1")
    scalar = np.isscalar(z)
    za = np.atleast_1d(np.asarray(z, dtype=float))
    knee = k / (k + 1.0)
    out = np.ones_like(za)
    inner = (za > 0.0) & (za <= knee)
    out[inner] = 1.0 / (1.0 - za[inner])
    out[za > knee] = 1.0 + k
    return float(out[0]) if scalar else out.reshape(np.shape(z))


def L_k(k, s):
    """Capped logarithm: -log(1-s) up to s = k/(k+1), then its tangent
    continuation (k+1) s - k + log(k+1).  Nondecreasing in s and in k;
    continuous at the knee."""
    if not k >= 1:
        raise ValueError("L_k requires k >= 1")
    scalar = np.isscalar(s)
    sa = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any((sa < 0.0) | (sa >= 1.0)):
        raise ValueError("L_k requires s in [0, 1)")
    knee = k / (k + 1.0)
    out = np.where(sa <= knee, -np.log1p(-np.minimum(sa, knee)),
                   (k + 1.0) * sa - k + np.log(k + 1.0))
    return float(out[0]) if scalar else out.reshape(np.shape(s))


# ---------------------------------------------------------------------------
# regularized functionals
# ---------------------------------------------------------------------------

def _carrier_weight(level: TruncationLevel):
    k, d = level.k, level.delta

    def w(z):
        return s_k1(k, z) / (trunc_T(k, z) + d)

    return w


def _vacancy_weight(level: TruncationLevel):
    k, d = level.k, level.delta
    knee = level.knee

    def w(z):
        return s_k2(k, z) / (trunc_T(knee, z) + d)

    return w



_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def _gauss_panel(f, lo: float, hi: float, tol: float) -> float:
    """Composite 24-point Gauss-Legendre with panel doubling until two
    successive refinements agree; the integrand is evaluated on whole node
    arrays at once."""
    prev = None
    best = 0.0
    for panels in (1, 2, 4, 8, 16, 32, 64, 128):
        edges = np.linspace(lo, hi, panels + 1)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1:] - edges[:-1])
        nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
        wts = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
        best = float(np.dot(wts, f(nodes)))
        if prev is not None and abs(best - prev) <= tol * (abs(best) + 1.0):
            return best
        prev = best
    return best


def _gauss_quad(f, a: float, b: float, tol: float,
                breakpoints: tuple[float, ...]) -> float:
    """Oriented integral of a piecewise-smooth vectorized integrand, split
    at its kink locations."""
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    pts = [a] + sorted(x for x in breakpoints if a < x < b) + [b]
    return sign * sum(_gauss_panel(f, lo, hi, tol)
                      for lo, hi in zip(pts[:-1], pts[1:]))


def _single_quad(w, ref: float, s: float, tol: float,
                 breakpoints: tuple[float, ...]) -> float:
    """integral_ref^s (s - z) w(z) dz, equal to the nested double integral."""
    return _gauss_quad(lambda z: (s - z) * w(z), ref, s, tol, breakpoints)


def G_k_delta(level: TruncationLevel, s, tol: float = 1e-10):
    """Regularized carrier energy density G_{k,delta}(s), s >= 0; vanishes at
    s = F_{1/2}(0) together with its derivative, convex."""
    scalar = np.isscalar(s)
    sa = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(sa < 0.0):
        raise ValueError("G_k_delta requires s >= 0")
    w = _carrier_weight(level)
    bp = (0.0, float(level.k))
    out = np.array([_single_quad(w, F12_ZERO, sv, tol, bp) for sv in sa])
    return float(out[0]) if scalar else out.reshape(np.shape(s))


def G_k_delta_prime(level: TruncationLevel, s, tol: float = 1e-10):
    """Derivative of G_{k,delta}: integral of the weight from F_{1/2}(0)."""
    scalar = np.isscalar(s)
    sa = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(sa < 0.0):
        raise ValueError("G_k_delta_prime requires s >= 0")
    w = _carrier_weight(level)
    bp = (0.0, float(level.k))

    out = np.array([_gauss_quad(w, F12_ZERO, sv, tol, bp) for sv in sa])
    return float(out[0]) if scalar else out.reshape(np.shape(s))


def g_tilde_k_delta(level: TruncationLevel, s, tol: float = 1e-9):
    """sqrt-weighted regularized carrier functional, referenced at 0:
    integral_0^s S_k^1(y) / sqrt(T_k(y) + delta) dy.

    For delta = 0 the integrand behaves like y^{-1/2} near zero; the
    substitution y = u^2 removes the singularity before quadrature.
    """
    scalar = np.isscalar(s)
    sa = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(sa < 0.0):
        raise ValueError("g_tilde_k_delta requires s >= 0")
    k, d = level.k, level.delta

    def one(sv):
        # y = u^2: dy = 2 u du; integrand S(u^2) / sqrt(T + d) * 2u
        return _gauss_quad(
            lambda u: 2.0 * u * s_k1(k, u * u)
            / np.sqrt(trunc_T(k, u * u) + d),
            0.0, np.sqrt(sv), tol, (np.sqrt(float(k)),))

    out = np.array([one(sv) for sv in sa])
    return float(out[0]) if scalar else out.reshape(np.shape(s))


def H_k_delta(level: TruncationLevel, s, tol: float = 1e-10):
    """Regularized vacancy energy density H_{k,delta}(s), referenced at 1/2.

    For the shift-free family (delta = 0) the admissible range is [0, 1),
    matching the saturation semantics of the underlying statistics.
    """
    scalar = np.isscalar(s)
    sa = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(sa < 0.0):
        raise ValueError("H_k_delta requires s >= 0")
    if level.delta == 0.0 and np.any(sa >= 1.0):
        raise ValueError("H_k_delta with delta = 0 requires s < 1")
    w = _vacancy_weight(level)
    bp = (0.0, level.knee)
    out = np.array([_single_quad(w, BLAKEMORE_REF, sv, tol, bp) for sv in sa])
    return float(out[0]) if scalar else out.reshape(np.shape(s))


def H_k_delta_prime(level: TruncationLevel, s, tol: float = 1e-10):
    scalar = np.isscalar(s)
    sa = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(sa < 0.0):
        raise ValueError("H_k_delta_prime requires s >= 0")
    if level.delta == 0.0 and np.any(sa >= 1.0):
        raise ValueError("H_k_delta_prime with delta = 0 requires s < 1")
    w = _vacancy_weight(level)
    bp = (0.0, level.knee)

    out = np.array([_gauss_quad(w, BLAKEMORE_REF, sv, tol, bp) for sv in sa])
    return float(out[0]) if scalar else out.reshape(np.shape(s))


def h_tilde_k_delta(level: TruncationLevel, s):
    """sqrt-weighted regularized vacancy functional, referenced at 1/2 so it
    matches the untruncated closed form below the knee.  Closed form:

    below the knee (delta = 0): 2 atanh(sqrt s) - 2 atanh(sqrt(1/2));
    beyond: linear continuation with slope (1+k) sqrt((k+1)/k).
    Positive delta falls back to quadrature of the defining integrand.
    """
    scalar = np.isscalar(s)
    sa = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(sa < 0.0):
        raise ValueError("h_tilde_k_delta requires s >= 0")
    if level.delta == 0.0 and np.any(sa >= 1.0):
        raise ValueError("h_tilde_k_delta with delta = 0 requires s < 1")
    k = level.k
    knee = level.knee
    if level.delta == 0.0:
        ref = 2.0 * np.arctanh(np.sqrt(0.5))
        below = np.minimum(sa, knee)
        out = 2.0 * np.arctanh(np.sqrt(below)) - ref
        over = sa > knee
        if over.any():
            slope = (1.0 + k) * np.sqrt((k + 1.0) / k)
            out[over] += slope * (sa[over] - knee)
    else:
        def one(sv):
            return _gauss_quad(
                lambda y: s_k2(k, y) / np.sqrt(trunc_T(knee, y) + level.delta),
                BLAKEMORE_REF, sv, 1e-10, (knee,))

        out = np.array([one(sv) for sv in sa])
    return float(out[0]) if scalar else out.reshape(np.shape(s))


def h_tilde_k_delta_prime(level: TruncationLevel, s):
    """Derivative S_k^2(s) / sqrt(T_{k/(k+1)}(s) + delta); for delta = 0 it
    dominates both 1/sqrt(s) and 1 on (0, 1)."""
    scalar = np.isscalar(s)
    sa = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(sa < 0.0):
        raise ValueError("h_tilde_k_delta_prime requires s >= 0")
    if level.delta == 0.0 and np.any(sa == 0.0):
        raise ValueError("h_tilde_k_delta_prime with delta = 0 requires s > 0")
    out = s_k2(level.k, sa) / np.sqrt(trunc_T(level.knee, sa) + level.delta)
    return float(out[0]) if scalar else out.reshape(np.shape(s))


def G_k_delta_second_fd(level: TruncationLevel, s, h: float = 1e-4,
                        tol: float = 1e-12):
    """Central finite difference (G'(s+h) - G'(s-h)) / (2h) of the
    first-derivative function.

    The difference of the two anti-derivative values is evaluated as the
    integral of the weight over [s-h, s+h], so quadrature noise does not
    amplify through the cancellation; the quotient is still exactly the
    central difference of G_k_delta_prime.
    """
    scalar = np.isscalar(s)
    sa = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(sa - h < 0.0):
        raise ValueError("G_k_delta_second_fd requires s - h >= 0")
    w = _carrier_weight(level)
    bp = (0.0, float(level.k))
    out = np.array([_gauss_quad(w, sv - h, sv + h, tol, bp) / (2.0 * h)
                    for sv in sa])
    return float(out[0]) if scalar else out.reshape(np.shape(s))


# ---------------------------------------------------------------------------
# nested-quadrature oracles
# ---------------------------------------------------------------------------

def _nested(w, ref: float, s: float, tol: float,
            breakpoints: tuple[float, ...]) -> float:
    """Literal double integral with a memoized inner antiderivative.

    Inner values are cached at every outer node already visited and extended
    incrementally, so the total work stays close to a single sweep of the
    weight; kept as the independent check of the single-quadrature route.
    """
    if s == ref:
        return 0.0
    cache: dict[float, float] = {ref: 0.0}
    anchor = [ref]

    def inner(y: float) -> float:
        if y in cache:
            return cache[y]
        a = anchor[0]
        pts = sorted(b for b in breakpoints if min(a, y) < b < max(a, y))
        seg = _quiet_quad(w, a, y, tol, points=pts or None, limit=400)
        val = cache[a] + seg
        cache[y] = val
        anchor[0] = y
        return val

    pts = sorted(b for b in breakpoints if min(ref, s) < b < max(ref, s))
    return _quiet_quad(inner, ref, s, tol, points=pts or None, limit=400)


def G_k_delta_nested(level: TruncationLevel, s: float,
                     tol: float = 1e-8) -> float:
    """Oracle route for G_{k,delta}: nested adaptive quadrature."""
    if not float(s) >= 0.0:
        raise ValueError("G_k_delta_nested requires s >= 0")
    return _nested(_carrier_weight(level), F12_ZERO, float(s), tol,
                   (0.0, float(level.k)))


def H_k_delta_nested(level: TruncationLevel, s: float,
                     tol: float = 1e-8) -> float:
    """Oracle route for H_{k,delta}: nested adaptive quadrature."""
    s = float(s)
    if not s >= 0.0:
        raise ValueError("H_k_delta_nested requires s >= 0")
    if level.delta == 0.0 and s >= 1.0:
        raise ValueError("H_k_delta_nested with delta = 0 requires s < 1")
    return _nested(_vacancy_weight(level), BLAKEMORE_REF, s, tol,
                   (0.0, level.knee))
