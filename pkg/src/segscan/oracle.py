"""Slow, direct reference implementations used to cross-check the fast paths.

Nothing here imports from the rest of the package: means are summed
window by window, pooled statistics are re-derived with plain loops, the
reverse segmentation rescans every surviving point at each step and the
window grid is enumerated with exact rational powers. Test use only.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

_EPS = 1e-15


def _window_mean(y, start, width):
    # observations start+1 .. start+width, 1-based
    return math.fsum(y[start + i] for i in range(width)) / width


def naive_z_stat(y, t, k, l):
    y = [float(v) for v in np.ravel(y)]
    T = len(y)
    if k < 1 or l < 1 or t < l or t + k > T:
        raise ValueError(f"window out of range for length {T}")
    diff = _window_mean(y, t, k) - _window_mean(y, t - l, l)
    return diff / math.sqrt(1.0 / k + 1.0 / l)


def naive_local_stat(y, t, k, l):
    return abs(naive_z_stat(y, t, k, l))


def naive_two_sided_p(z):
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return min(max(p, _EPS), 1.0 - _EPS)


def naive_hc(pvalues):
    p = sorted(min(max(float(v), _EPS), 1.0 - _EPS) for v in pvalues)
    N = len(p)
    best = -math.inf
    for n in range(1, N // 2 + 1):
        q = p[n - 1]
        best = max(best, (n - N * q) / math.sqrt(N * q * (1.0 - q)))
    return best


def naive_b_plus(u, p):
    if u <= p:
        return 0.0
    out = 0.0
    if u > 0:
        out += u * math.log(u / p)
    if u < 1:
        out += (1.0 - u) * math.log((1.0 - u) / (1.0 - p))
    return out


def naive_bj(pvalues):
    p = sorted(min(max(float(v), _EPS), 1.0 - _EPS) for v in pvalues)
    N = len(p)
    return N * max(naive_b_plus(n / N, p[n - 1]) for n in range(1, N // 2 + 1))


def naive_score_term(z, p0):
    # log(1 - p0 + p0 e^x / sqrt 2) = x + log(p0 / sqrt 2 + (1 - p0) e^-x)
    x = z * z / 4.0
    return x + math.log(p0 / math.sqrt(2.0) + (1.0 - p0) * math.exp(-x))


def naive_score(zs, p0):
    return math.fsum(naive_score_term(float(z), p0) for z in zs)


def naive_panel_stat(values, t, k, l, kind, p0=None):
    """Pooled statistic at one triple; a single row gives ``|z|``."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    N, T = values.shape
    zs = [naive_z_stat(values[n], t, k, l) for n in range(N)]
    if N == 1 or kind == "single":
        return abs(zs[0])
    if kind == "score":
        if p0 is None:
            p0 = math.sqrt(math.log(T) / N)
        return naive_score(zs, p0)
    pv = [naive_two_sided_p(z) for z in zs]
    if kind == "hc":
        return naive_hc(pv)
    if kind == "bj":
        return naive_bj(pv)
    raise ValueError(f"unknown statistic {kind!r}")


def naive_reverse(stat, T, c=math.inf):
    """Delete the weakest interior point until every survivor reaches ``c``.

    ``stat(t, k, l)`` is evaluated afresh for all survivors at every step.
    Returns ``(order, values, survivors)``.
    """
    points = list(range(T + 1))
    order, values = [], []
    while len(points) > 2:
        best_i, best_x = None, math.inf
        for i in range(1, len(points) - 1):
            t = points[i]
            x = float(stat(t, points[i + 1] - t, t - points[i - 1]))
            if x < best_x:
                best_i, best_x = i, x
        if best_x >= c:
            break
        order.append(points.pop(best_i))
        values.append(best_x)
    return order, values, points[1:-1]


def enumerate_grid(T, r, h):
    """Every ``(floor(r^a), floor(r^b))`` with ``k + l <= T`` and aspect within ``h``."""
    ratio = Fraction(str(r))
    aspect = Fraction(str(h))
    lengths = set()
    a = 0
    while True:
        f = math.floor(ratio**a)
        if f > T:
            break
        lengths.add(int(f))
        a += 1
    pairs = set()
    for k in lengths:
        for l in lengths:
            if k + l <= T and l <= aspect * k and k <= aspect * l:
                pairs.add((k, l))
    return pairs


def mixture_loglik(b, xi, sigma2_sq):
    """Full log-likelihood of the equal mixture of N(-b, s2) and N(b, s2)."""
    xi = np.asarray(xi, dtype=float)
    s = math.sqrt(sigma2_sq)
    lo = -0.5 * ((xi + b) / s) ** 2
    hi = -0.5 * ((xi - b) / s) ** 2
    dens = np.logaddexp(lo, hi) - math.log(2.0) - math.log(s * math.sqrt(2.0 * math.pi))
    return float(np.sum(dens))


def grid_mle_b(xi, sigma2_sq, n_grid=20001, b_max=None, rounds=4):
    """Maximise :func:`mixture_loglik` over ``b >= 0`` by repeated grid zoom.

    Returns ``(b_hat, loglik)``.
    """
    xi = np.asarray(xi, dtype=float)
    if b_max is None:
        b_max = float(np.max(np.abs(xi))) + 4.0 * math.sqrt(sigma2_sq)
    lo, hi = 0.0, b_max
    best_b, best_f = 0.0, mixture_loglik(0.0, xi, sigma2_sq)
    for _ in range(rounds):
        grid = np.linspace(lo, hi, n_grid)
        f = np.array([mixture_loglik(b, xi, sigma2_sq) for b in grid])
        i = int(np.argmax(f))
        if f[i] > best_f:
            best_b, best_f = float(grid[i]), float(f[i])
        step = (hi - lo) / (n_grid - 1)
        lo, hi = max(0.0, best_b - 2 * step), min(b_max, best_b + 2 * step)
        n_grid = 401
    return best_b, best_f


def naive_glr(xi_left, xi_right, sigma2_sq, **kw):
    """``2 log U`` from three grid-searched likelihood maxima."""
    _, fl = grid_mle_b(xi_left, sigma2_sq, **kw)
    _, fr = grid_mle_b(xi_right, sigma2_sq, **kw)
    _, fj = grid_mle_b(np.concatenate([xi_left, xi_right]), sigma2_sq, **kw)
    return max(2.0 * (fl + fr - fj), 0.0)


def normal_tail_mp(z, dps=40):
    """Upper normal tail by mpmath quadrature of the density."""
    import mpmath

    with mpmath.workdps(dps):
        dens = lambda x: mpmath.exp(-x * x / 2) / mpmath.sqrt(2 * mpmath.pi)
        z = mpmath.mpf(z)
        if z >= 0:
            return float(mpmath.quad(dens, [z, mpmath.inf]))
        return float(1 - mpmath.quad(dens, [-z, mpmath.inf]))
