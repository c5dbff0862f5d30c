"""Local two-window statistics and their multi-sequence pooled versions.

Every statistic here is evaluated at a triple ``(t, k, l)``: the right
window covers observations ``t+1 .. t+k`` and the left window
``t-l+1 .. t`` (1-based). A triple is valid when ``l <= t <= T - k``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .panel import PrefixSums, SequencePanel

#: p-values are clamped to [P_EPS, 1 - P_EPS] before use.
P_EPS = 1e-15
STAT_KINDS = ("single", "hc", "bj", "score")

_LOG_SQRT2 = 0.5 * math.log(2.0)


def normal_sf(z):
    """Upper-tail standard normal probability."""
    return ndtr(-np.asarray(z, dtype=float)) if np.ndim(z) else float(ndtr(-float(z)))


def two_sided_pvalues(z) -> np.ndarray:
    """Sorted two-sided p-values ``2 * normal_sf(|z|)``."""
    p = 2.0 * ndtr(-np.abs(np.asarray(z, dtype=float)))
    return np.sort(np.clip(p, P_EPS, 1.0 - P_EPS))


def _check_window(T, t, k, l):
    t = np.asarray(t)
    k = np.asarray(k)
    l = np.asarray(l)
    if np.any(k < 1) or np.any(l < 1):
        raise ValueError("window lengths must be positive")
    if np.any(t < l) or np.any(t + k > T):
        raise ValueError(f"window out of range for length {T}: need l <= t <= T - k")


def _signed(cum, t, k, l):
    t = np.asarray(t)
    right = (cum[..., t + k] - cum[..., t]) / k
    left = (cum[..., t] - cum[..., t - l]) / l
    return (right - left) / np.sqrt(1.0 / k + 1.0 / l)


def z_stat(prefix: PrefixSums, t, w, row: int = 0):
    """Signed standardized difference of right-window and left-window means."""
    k, l = w
    _check_window(prefix.length, t, k, l)
    out = _signed(prefix.cumulative[row], t, k, l)
    return float(out) if np.ndim(out) == 0 else out


def local_stat(prefix: PrefixSums, t, w, row: int = 0):
    """Absolute value of :func:`z_stat`."""
    return np.abs(z_stat(prefix, t, w, row))


# --------------------------------------------------------------------------
# pooled statistics on p-values / z-scores


def b_plus(u, p):
    """One-sided binomial relative entropy; zero when ``u <= p``.

    Uses ``0 * log 0 = 0`` so ``u = 1`` is allowed.
    """
    u = np.asarray(u, dtype=float)
    p = np.clip(np.asarray(p, dtype=float), P_EPS, 1.0 - P_EPS)
    with np.errstate(divide="ignore", invalid="ignore"):
        first = np.where(u > 0, u * np.log(u / p), 0.0)
        second = np.where(u < 1, (1.0 - u) * np.log((1.0 - u) / (1.0 - p)), 0.0)
    out = np.where(u > p, first + second, 0.0)
    return float(out) if out.ndim == 0 else out


def _top_pvalues(z, n_top):
    """Smallest ``n_top`` two-sided p-values per column, ascending."""
    a = np.abs(z)
    if a.ndim == 1:
        a = a[:, None]
    a = np.sort(a, axis=0)[: -n_top - 1 : -1]
    np.negative(a, out=a)
    p = ndtr(a)
    p *= 2.0
    return np.clip(p, P_EPS, 1.0 - P_EPS, out=p)


def _hc_from_sorted(p, N):
    n = np.arange(1, p.shape[0] + 1, dtype=float)[:, None]
    return np.max((n - N * p) / np.sqrt(N * p * (1.0 - p)), axis=0)


def _bj_from_sorted(p, N):
    # u = n/N stays inside (0, 1/2], so both entropy terms are finite
    u = np.arange(1, p.shape[0] + 1, dtype=float)[:, None] / N
    const = u * np.log(u) + (1.0 - u) * np.log1p(-u)
    kl = const - u * np.log(p) - (1.0 - u) * np.log1p(-p)
    kl[p >= u] = 0.0
    return N * np.max(kl, axis=0)


def _as_sorted_pvalues(p):
    p = np.sort(np.clip(np.asarray(p, dtype=float).ravel(), P_EPS, 1.0 - P_EPS))
    if p.size < 2:
        raise ValueError("pooled p-value statistics need at least 2 sequences")
    return p


def hc_stat(p) -> float:
    """Higher-criticism statistic of a p-value vector (max over n <= N/2)."""
    p = _as_sorted_pvalues(p)
    N = p.size
    return float(_hc_from_sorted(p[: N // 2, None], N)[0])


def bj_stat(p) -> float:
    """Berk-Jones statistic ``N * max_{n <= N/2} B+(n/N, p_(n))``."""
    p = _as_sorted_pvalues(p)
    N = p.size
    return float(_bj_from_sorted(p[: N // 2, None], N)[0])


@dataclass(frozen=True)
class ScoreParams:
    """Mixture weight of the score statistic."""

    p0: float

    def __post_init__(self):
        if not self.p0 > 0:
            raise ValueError("p0 must be positive")

    @classmethod
    def from_shape(cls, T: int, N: int) -> "ScoreParams":
        p0 = math.sqrt(math.log(T) / N)
        if p0 >= 1:
            warnings.warn(
                f"score weight p0 = {p0:.3f} >= 1: too few sequences for length {T}",
                RuntimeWarning,
                stacklevel=2,
            )
        return cls(p0)


def score_terms(z, p0: float):
    """Per-sequence terms ``log(1 + p0 * (exp(z^2/4)/sqrt(2) - 1))``."""
    x = 0.25 * np.square(np.asarray(z, dtype=float))
    big = x > 700.0
    if big.any():
        out = np.log1p(p0 * (np.exp(np.where(big, 0.0, x)) / math.sqrt(2.0) - 1.0))
        return np.where(big, x - _LOG_SQRT2 + math.log(p0), out)
    np.exp(x, out=x)
    x *= p0 / math.sqrt(2.0)
    x += 1.0 - p0
    return np.log(x, out=x)


def score_stat(z, params: ScoreParams) -> float:
    """Sum of :func:`score_terms` over sequences; may be negative."""
    z = np.asarray(z, dtype=float).ravel()
    if not np.all(np.isfinite(z)):
        raise ValueError("z-scores must be finite")
    return float(np.sum(score_terms(z, params.p0)))


# --------------------------------------------------------------------------
# statistic sources consumed by the segmentation algorithms


class MeanShiftStat:
    """|z| of a single standardized sequence, computed from prefix sums.

    Calling the object with scalars returns a float; with equal-shaped
    integer arrays ``t, k, l`` it returns an array.
    """

    kind = "single"

    def __init__(self, values):
        values = np.asarray(values, dtype=float)
        if values.ndim == 2:
            if values.shape[0] != 1:
                raise ValueError("MeanShiftStat takes one sequence")
            values = values[0]
        self.T = values.shape[0]
        self._cum = PrefixSums.from_values(values).cumulative[0]

    def zscores(self, t, k, l):
        return _signed(self._cum, t, k, l)

    def __call__(self, t, k, l):
        out = np.abs(_signed(self._cum, t, k, l))
        return float(out) if out.ndim == 0 else out

    def sweep(self, k, l):
        t = np.arange(l, self.T - k + 1)
        return t, np.abs(_sweep_signed(self._cum, k, l))


def _sweep_signed(cum, k, l):
    """``_signed`` over every valid ``t`` using slices instead of gathers."""
    T = cum.shape[-1] - 1
    mid = cum[..., l : T - k + 1]
    right = (cum[..., l + k : T + 1] - mid) / k
    left = (mid - cum[..., 0 : T - k - l + 1]) / l
    return (right - left) / math.sqrt(1.0 / k + 1.0 / l)


class PooledStat:
    """Pooled statistic across N aligned, standardized sequences.

    Parameters
    ----------
    values : ndarray of shape (N, T)
    kind : {"hc", "bj", "score"}
    score_params : ScoreParams, optional
        Defaults to ``p0 = sqrt(log(T) / N)``.
    """

    def __init__(self, values, kind: str, score_params: ScoreParams | None = None):
        values = np.atleast_2d(np.asarray(values, dtype=float))
        if kind not in ("hc", "bj", "score"):
            raise ValueError(f"unknown pooled statistic {kind!r}")
        self.N, self.T = values.shape
        if kind in ("hc", "bj") and self.N < 2:
            raise ValueError(f"--stat {kind} needs at least 2 sequences")
        self.kind = kind
        self._cum = PrefixSums.from_values(values).cumulative
        if kind == "score":
            self.score_params = score_params or ScoreParams.from_shape(self.T, self.N)

    def zscores(self, t, k, l):
        return _signed(self._cum, t, k, l)

    def pool(self, z):
        """Pool an (N,) or (N, M) array of z-scores column-wise."""
        scalar = np.ndim(z) == 1
        if self.kind == "score":
            out = np.sum(score_terms(z, self.score_params.p0), axis=0)
        else:
            p = _top_pvalues(z, self.N // 2)
            if self.kind == "hc":
                out = _hc_from_sorted(p, self.N)
            else:
                out = _bj_from_sorted(p, self.N)
            if scalar:
                out = out[0]
        return float(out) if scalar else out

    def __call__(self, t, k, l):
        return self.pool(_signed(self._cum, t, k, l))

    def sweep(self, k, l):
        t = np.arange(l, self.T - k + 1)
        return t, self.pool(_sweep_signed(self._cum, k, l))


def make_stat(values, kind: str = "single", score_params: ScoreParams | None = None):
    """Statistic source for a standardized (N, T) array.

    ``kind="single"`` or a one-row input gives :class:`MeanShiftStat`;
    pooling is bypassed for N = 1.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if kind not in STAT_KINDS:
        raise ValueError(f"unknown statistic {kind!r}; choose from {STAT_KINDS}")
    if values.shape[0] == 1:
        return MeanShiftStat(values[0])
    if kind == "single":
        raise ValueError("statistic 'single' needs exactly one sequence")
    return PooledStat(values, kind, score_params)


def panel_stat(panel: SequencePanel, t, w, kind: str) -> float:
    """Pooled statistic of a panel at one triple."""
    k, l = w
    _check_window(panel.length, t, k, l)
    return make_stat(panel.values, kind)(t, k, l)
