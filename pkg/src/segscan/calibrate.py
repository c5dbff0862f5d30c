"""Data-driven threshold calibration.

A replicate "detects" when the segmentation would report at least one
change-point. For local segmentation that happens iff some
``X(t,k,l) - base(k,l) >= c``; for reverse segmentation iff the largest
per-step minimum along the deletion path is ``>= c``. Each replicate is
therefore reduced to a single number and the level is an order statistic
of that pool, so every replicate is simulated once.
"""
from __future__ import annotations

import math
import os

import numpy as np
from joblib import Parallel, delayed

from .grid import WindowGrid
from .segment import deletion_path
from .stats import make_stat
from .thresholds import ThresholdPolicy


def n_workers() -> int:
    """Worker cap from ``SEGSCAN_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("SEGSCAN_THREADS", "1")))
    except ValueError:
        return 1


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for replicate ``index``; independent of scheduling order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def max_excess(source, grid: WindowGrid | None, algorithm: str, mode: str) -> float:
    """The value ``c`` would have to exceed for this data set to detect nothing.

    ``mode`` picks the uncalibrated part of the threshold (see
    :meth:`ThresholdPolicy.base`); for ``theorem2`` the result is a slope
    ``a`` instead of an offset.
    """
    T = source.T
    logT = math.log(T)
    if algorithm == "reverse":
        if mode == "multiscale":
            raise ValueError("reverse segmentation cannot use multiscale thresholds")
        _, values = deletion_path(source, T)
        top = float(values.max())
        if mode == "theorem2":
            return top / logT
        return top - ThresholdPolicy(mode).base(1, 1, T)
    if algorithm != "local":
        raise ValueError(f"algorithm must be 'local' or 'reverse', got {algorithm!r}")
    if grid is None:
        raise ValueError("local segmentation needs a window grid")
    probe = ThresholdPolicy(mode if mode != "theorem2" else "calibrated")
    best = -math.inf
    for k, l in grid:
        if k + l > T:
            continue
        _, x = source.sweep(k, l)
        m = float(x.max())
        if mode == "theorem2":
            best = max(best, m / logT)
        else:
            best = max(best, m - probe.base(k, l, T))
    return best


def level_from_pool(pool, alpha: float) -> float:
    """Smallest ``c`` with at most ``floor(alpha * n)`` pool entries ``>= c``."""
    pool = np.sort(np.asarray(pool, dtype=float))
    n = pool.size
    allowed = math.floor(alpha * n + 1e-9)
    idx = min(n - allowed, n - 1)
    c = float(pool[idx])
    # ties: move up until the count condition holds
    while np.count_nonzero(pool >= c) > allowed:
        c = float(np.nextafter(c, math.inf))
    return c


def _policy(mode, level, **meta):
    if mode == "theorem2":
        return ThresholdPolicy("theorem2", a=level, meta=meta)
    return ThresholdPolicy(mode, c=level, meta=meta)


def _null_one(seed, i, T, N, grid, stat_kind, algorithm, mode):
    y = replicate_rng(seed, i).standard_normal((N, T))
    return max_excess(make_stat(y, stat_kind), grid, algorithm, mode)


def null_pool(T, N, grid, stat_kind, algorithm, mode, n_mc, seed, n_jobs=None) -> np.ndarray:
    """Per-replicate :func:`max_excess` under i.i.d. N(0, 1) data."""
    jobs = n_jobs or n_workers()
    out = Parallel(n_jobs=jobs)(
        delayed(_null_one)(seed, i, T, N, grid, stat_kind, algorithm, mode) for i in range(n_mc)
    )
    return np.asarray(out, dtype=float)


def _check_args(alpha, n):
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if n < 100:
        raise ValueError(f"need at least 100 replicates, got {n}")


def calibrate_null(
    T: int,
    N: int,
    grid: WindowGrid | None,
    stat_kind: str = "single",
    algorithm: str = "local",
    alpha: float = 0.05,
    n_mc: int = 1000,
    seed: int = 0,
    mode: str | None = None,
    n_jobs: int | None = None,
) -> ThresholdPolicy:
    """Calibrate the threshold offset to a global false-detection rate ``alpha``.

    Parameters
    ----------
    T, N : int
        Sequence length and number of sequences.
    grid : WindowGrid or None
        Needed for ``algorithm="local"``.
    mode : str, optional
        Threshold family whose offset ``c`` (or slope ``a``) is calibrated.
        Defaults to ``"constant"`` for a single sequence and
        ``"calibrated"`` (a flat level) for pooled statistics.
    """
    _check_args(alpha, n_mc)
    if mode is None:
        mode = "constant" if stat_kind == "single" or N == 1 else "calibrated"
    pool = null_pool(T, N, grid, stat_kind, algorithm, mode, n_mc, seed, n_jobs)
    finite = np.isfinite(pool)
    if not finite.any():
        raise ValueError("alpha unreachable: no window pair fits the sequence length")
    level = level_from_pool(pool, alpha)
    return _policy(
        mode, level, source="null", algorithm=algorithm, stat=stat_kind,
        alpha=alpha, n_mc=n_mc, seed=seed, length=T, n_sequences=N,
    )


def _perm_one(seed, i, values, grid, stat_kind, algorithm, mode):
    rng = replicate_rng(seed, i)
    y = rng.permuted(values, axis=1)
    return max_excess(make_stat(y, stat_kind), grid, algorithm, mode)


def calibrate_permutation(
    values,
    grid: WindowGrid | None,
    stat_kind: str = "single",
    algorithm: str = "local",
    alpha: float = 0.05,
    n_perm: int = 1000,
    seed: int = 0,
    mode: str | None = None,
    n_jobs: int | None = None,
) -> ThresholdPolicy:
    """Calibrate on within-sequence permutations of standardized data.

    Each replicate shuffles every sequence independently; the level is the
    ``ceil((1 - alpha) * n_perm)``-th smallest replicate maximum.
    """
    _check_args(alpha, n_perm)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    N, T = values.shape
    if T < 10:
        raise ValueError(f"permutation calibration needs T >= 10, got {T}")
    if mode is None:
        mode = "constant" if stat_kind == "single" or N == 1 else "calibrated"
    jobs = n_jobs or n_workers()
    pool = np.asarray(
        Parallel(n_jobs=jobs)(
            delayed(_perm_one)(seed, i, values, grid, stat_kind, algorithm, mode)
            for i in range(n_perm)
        ),
        dtype=float,
    )
    rank = max(1, math.ceil((1.0 - alpha) * n_perm - 1e-9))
    level = float(np.sort(pool)[rank - 1])
    return _policy(
        mode, level, source="permutation", algorithm=algorithm, stat=stat_kind,
        alpha=alpha, n_mc=n_perm, seed=seed, length=T, n_sequences=N,
    )
