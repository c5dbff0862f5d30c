"""Two-channel (total + allelic imbalance) statistics for allele-specific copy number.

Each individual contributes a total-intensity channel ``Y = mu + N(0, s1^2)``
and an allelic channel ``Z = alpha + xi`` where ``xi`` is an equal mixture of
``N(-b, s2^2)`` and ``N(b, s2^2)``. Both ``mu`` and ``b >= 0`` are piecewise
constant.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from numpy.lib.stride_tricks import sliding_window_view
from scipy.optimize import minimize_scalar
from sklearn.exceptions import ConvergenceWarning

from .panel import PrefixSums
from .stats import P_EPS, _bj_from_sorted, _hc_from_sorted

_LOG2 = math.log(2.0)


@dataclass(frozen=True, eq=False)
class AlleleModelParams:
    sigma1_sq: float
    sigma2_sq: float
    alpha: np.ndarray
    trace: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not (self.sigma1_sq > 0 and self.sigma2_sq > 0):
            raise ValueError("variances must be positive")


def _logcosh(x):
    a = np.abs(x)
    return a + np.log1p(np.exp(-2.0 * a)) - _LOG2


def mixture_profile(b, xi, sigma2_sq):
    """Log-likelihood of ``b`` for the rows of ``xi``, up to a b-free constant.

    ``sum_i log cosh(b xi_i / s2^2) - m b^2 / (2 s2^2)``; zero at ``b = 0``.
    """
    xi = np.atleast_2d(xi)
    b = np.asarray(b, dtype=float).reshape(-1, 1)
    m = xi.shape[1]
    val = np.sum(_logcosh(b * xi / sigma2_sq), axis=1) - m * b[:, 0] ** 2 / (2.0 * sigma2_sq)
    return val


@njit(cache=True)
def _profile_1d(b, xi, s):
    acc = 0.0
    for v in xi:
        a = abs(b * v / s)
        acc += a + math.log1p(math.exp(-2.0 * a))
    return acc - xi.size * (_LOG2 + b * b / (2.0 * s))


@njit(cache=True)
def _derivs_1d(b, xi, s):
    g = 0.0
    hess = 0.0
    for v in xi:
        th = math.tanh(b * v / s)
        g += v * th
        hess += v * v * (1.0 - th * th)
    m = xi.size
    return g / s - m * b / s, hess / (s * s) - m / s


@njit(cache=True)
def _max_rows(xi, s, newton_steps, tol):
    rows = xi.shape[0]
    b_out = np.empty(rows)
    f_out = np.empty(rows)
    grad = np.empty(rows)
    bmax = np.empty(rows)
    s2 = math.sqrt(s)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    for i in range(rows):
        row = xi[i]
        hi = 0.0
        for v in row:
            hi = max(hi, abs(v))
        hi += 4.0 * s2
        bmax[i] = hi
        lo = 0.0
        c = hi - invphi * (hi - lo)
        d = lo + invphi * (hi - lo)
        fc = _profile_1d(c, row, s)
        fd = _profile_1d(d, row, s)
        while hi - lo > tol * max(1.0, hi):
            if fc >= fd:  # maximum lies in [lo, d]
                hi, d, fd = d, c, fc
                c = hi - invphi * (hi - lo)
                fc = _profile_1d(c, row, s)
            else:
                lo, c, fc = c, d, fd
                d = lo + invphi * (hi - lo)
                fd = _profile_1d(d, row, s)
        b = 0.5 * (lo + hi)
        f = _profile_1d(b, row, s)
        # the endpoint b = 0 is a legitimate maximiser
        if f < 0.0:
            b, f = 0.0, 0.0
        for _ in range(newton_steps):
            g, h = _derivs_1d(b, row, s)
            if not (h < 0.0 and b > 0.0):
                break
            cand = min(max(b - g / h, 0.0), bmax[i])
            fcand = _profile_1d(cand, row, s)
            if not fcand > f:
                break
            b, f = cand, fcand
        b_out[i] = b
        f_out[i] = f
        grad[i] = _derivs_1d(b, row, s)[0]
    return b_out, f_out, grad, bmax


def max_mixture_profile(xi, sigma2_sq, newton_steps: int = 5, tol: float = 1e-10):
    """Maximise :func:`mixture_profile` over ``b >= 0`` row by row.

    Golden-section search on ``[0, max|xi| + 4 s2]`` followed by up to
    ``newton_steps`` guarded Newton steps. A ``ConvergenceWarning`` naming
    the bracket is issued when an interior solution keeps a large gradient.

    Returns
    -------
    b_hat, value : ndarray
    """
    xi = np.ascontiguousarray(np.atleast_2d(np.asarray(xi, dtype=float)))
    b, f, g, bmax = _max_rows(xi, float(sigma2_sq), int(newton_steps), float(tol))
    interior = (b > 0) & (b < bmax)
    scale = np.sum(np.abs(xi), axis=1) / sigma2_sq + 1.0
    bad = interior & (np.abs(g) > 1e-6 * scale)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        warnings.warn(
            f"mixture MLE did not converge for {int(bad.sum())} segment(s); "
            f"first bracket [0, {bmax[i]:.6g}], b = {b[i]:.6g}, gradient {g[i]:.3g}",
            ConvergenceWarning,
            stacklevel=2,
        )
    return b, f


def glr_allelic(xi_left, xi_right, sigma2_sq) -> float:
    """``2 log U``: separate ``b`` on each side versus one common ``b``."""
    xi_left = np.asarray(xi_left, dtype=float)
    xi_right = np.asarray(xi_right, dtype=float)
    _, fl = max_mixture_profile(xi_left[None, :], sigma2_sq)
    _, fr = max_mixture_profile(xi_right[None, :], sigma2_sq)
    _, fj = max_mixture_profile(np.concatenate([xi_left, xi_right])[None, :], sigma2_sq)
    return float(max(2.0 * (fl[0] + fr[0] - fj[0]), 0.0))


def allele_v_stat(y, z, t: int, w, params: AlleleModelParams, row: int = 0):
    """Two-channel statistic ``V`` and its chi-square(2) upper-tail p-value.

    ``y`` and ``z`` are single sequences (or panels with ``row``). The first
    term is the squared standardized mean difference of ``y``; the second is
    ``2 log U`` for a change in ``b`` of the centred ``z``.
    """
    k, l = w
    y = np.atleast_2d(np.asarray(y, dtype=float))[row]
    z = np.atleast_2d(np.asarray(z, dtype=float))[row]
    T = y.size
    if not (l <= t <= T - k) or k < 1 or l < 1:
        raise ValueError(f"window out of range for length {T}")
    diff = y[t : t + k].mean() - y[t - l : t].mean()
    first = diff**2 / (params.sigma1_sq * (1.0 / k + 1.0 / l))
    xi = z - np.atleast_1d(params.alpha)[row if np.size(params.alpha) > 1 else 0]
    v = first + glr_allelic(xi[t - l : t], xi[t : t + k], params.sigma2_sq)
    return float(v), float(math.exp(-0.5 * v))


class AlleleStat:
    """Statistic source on two aligned panels.

    For N >= 2 the per-individual ``V`` statistics are converted to
    chi-square(2) p-values and pooled with Berk-Jones (``kind="bj"``) or
    higher criticism (``kind="hc"``); a single individual yields ``V``.
    """

    def __init__(self, y, z, params: AlleleModelParams, kind: str = "bj"):
        self.y = np.atleast_2d(np.asarray(y, dtype=float))
        self.z = np.atleast_2d(np.asarray(z, dtype=float))
        if self.y.shape != self.z.shape:
            raise ValueError("Y and Z panels must have the same shape")
        if kind not in ("bj", "hc"):
            raise ValueError("allele statistic pools with 'bj' or 'hc'")
        self.N, self.T = self.y.shape
        self.kind = kind
        self.params = params
        self._cum = PrefixSums.from_values(self.y).cumulative
        alpha = np.broadcast_to(np.asarray(params.alpha, dtype=float), (self.N,))
        self._xi = self.z - alpha[:, None]
        self._by_length: dict[int, np.ndarray] = {}
        self._by_segment: dict[tuple[int, int], np.ndarray] = {}

    # maximised profile for segments (s, s+m], all sequences
    def _full_length(self, m):
        if m not in self._by_length:
            windows = sliding_window_view(self._xi, m, axis=1)  # (N, T-m+1, m)
            flat = windows.reshape(-1, m)
            _, f = max_mixture_profile(flat, self.params.sigma2_sq)
            self._by_length[m] = f.reshape(self.N, -1)
        return self._by_length[m]

    def _segment(self, s, m):
        key = (int(s), int(m))
        if key not in self._by_segment:
            if m in self._by_length:
                self._by_segment[key] = self._by_length[m][:, s]
            else:
                _, f = max_mixture_profile(self._xi[:, s : s + m], self.params.sigma2_sq)
                self._by_segment[key] = f
        return self._by_segment[key]

    def vstats(self, t, k, l):
        t = np.asarray(t)
        right = (self._cum[:, t + k] - self._cum[:, t]) / k
        left = (self._cum[:, t] - self._cum[:, t - l]) / l
        first = (right - left) ** 2 / (self.params.sigma1_sq * (1.0 / k + 1.0 / l))
        if t.ndim == 0:
            glr = 2.0 * (
                self._segment(t - l, l) + self._segment(t, k) - self._segment(t - l, k + l)
            )
        else:
            k = int(np.unique(k)[0]) if np.ndim(k) else int(k)
            l = int(np.unique(l)[0]) if np.ndim(l) else int(l)
            glr = 2.0 * (
                self._full_length(l)[:, t - l]
                + self._full_length(k)[:, t]
                - self._full_length(k + l)[:, t - l]
            )
        return first + np.maximum(glr, 0.0)

    def __call__(self, t, k, l):
        if np.ndim(t) and (np.unique(np.asarray(k)).size > 1 or np.unique(np.asarray(l)).size > 1):
            return np.array([self(int(a), int(b), int(c)) for a, b, c in zip(t, k, l)])
        v = self.vstats(t, k, l)
        if self.N == 1:
            out = v[0]
            return float(out) if np.ndim(out) == 0 else out
        scalar = np.ndim(v) == 1
        p = np.exp(-0.5 * (v[:, None] if scalar else v))
        p = np.clip(np.sort(p, axis=0)[: self.N // 2], P_EPS, 1.0 - P_EPS)
        out = _bj_from_sorted(p, self.N) if self.kind == "bj" else _hc_from_sorted(p, self.N)
        return float(out[0]) if scalar else out

    def sweep(self, k, l):
        t = np.arange(l, self.T - k + 1)
        return t, self(t, k, l)


# --------------------------------------------------------------------------
# variance estimation


def _segments(T, changepoints):
    edges = np.concatenate(([0], np.sort(np.asarray(changepoints, dtype=int)), [T]))
    return list(zip(edges[:-1], edges[1:]))


def fit_segments(y, z, changepoints, params: AlleleModelParams):
    """Segment-wise ``mu`` (means of Y) and ``b`` (mixture MLE of centred Z).

    Returns arrays of shape (N, J+1).
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    z = np.atleast_2d(np.asarray(z, dtype=float))
    alpha = np.broadcast_to(np.asarray(params.alpha, dtype=float), (y.shape[0],))
    xi = z - alpha[:, None]
    segs = _segments(y.shape[1], changepoints)
    mu = np.column_stack([y[:, a:b].mean(axis=1) for a, b in segs])
    bh = np.column_stack(
        [max_mixture_profile(xi[:, a:b], params.sigma2_sq)[0] for a, b in segs]
    )
    return mu, bh


def _z_loglik(xi, bfull, s):
    return float(
        np.sum(
            -0.5 * math.log(2 * math.pi * s)
            - (xi**2 + bfull**2) / (2 * s)
            + _logcosh(bfull * xi / s)
        )
    )


def estimate_variances(
    y, z, changepoints=None, *, max_iter: int = 10, rtol: float = 1e-4
) -> AlleleModelParams:
    """Noise variances and per-individual offsets of the two-channel model.

    Without a segmentation: ``s1^2`` is half the pooled sample variance of
    first differences of Y, ``alpha`` the per-individual mean of Z and
    ``s2^2`` the pooled variance of ``Z - alpha``. With change-points, the
    variances (together with segment-wise ``mu`` and ``b``) are refitted by
    maximum likelihood, alternating until the relative change is below
    ``rtol`` or ``max_iter`` rounds have run.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if y.shape != z.shape:
        raise ValueError("Y and Z panels must have the same shape")
    N, T = y.shape
    if T < 2:
        raise ValueError("need at least 2 observations per sequence")
    alpha = z.mean(axis=1)
    s1 = 0.5 * float(np.var(np.diff(y, axis=1).ravel(), ddof=1)) if T > 2 else float(np.var(y))
    s2 = float(np.var((z - alpha[:, None]).ravel(), ddof=1))
    if not (s1 > 0 and s2 > 0):
        raise ValueError("zero-variance input: cannot estimate noise levels")
    trace = [(s1, s2)]
    if changepoints is None:
        return AlleleModelParams(s1, s2, alpha, tuple(trace))

    segs = _segments(T, changepoints)
    xi = z - alpha[:, None]
    for _ in range(max_iter):
        params = AlleleModelParams(s1, s2, alpha)
        mu, bh = fit_segments(y, z, changepoints, params)
        mu_full = np.concatenate([np.repeat(mu[:, [j]], b - a, axis=1) for j, (a, b) in enumerate(segs)], axis=1)
        b_full = np.concatenate([np.repeat(bh[:, [j]], b - a, axis=1) for j, (a, b) in enumerate(segs)], axis=1)
        new_s1 = float(np.mean((y - mu_full) ** 2))
        res = minimize_scalar(
            lambda logs: -_z_loglik(xi, b_full, math.exp(logs)),
            bounds=(math.log(s2) - 5.0, math.log(s2) + 5.0),
            method="bounded",
            options={"xatol": 1e-10},
        )
        new_s2 = math.exp(res.x)
        if not (new_s1 > 0 and new_s2 > 0):
            raise ValueError("zero-variance input: cannot estimate noise levels")
        change = max(abs(new_s1 - s1) / s1, abs(new_s2 - s2) / s2)
        s1, s2 = new_s1, new_s2
        trace.append((s1, s2))
        if change < rtol:
            break
    return AlleleModelParams(s1, s2, alpha, tuple(trace))
