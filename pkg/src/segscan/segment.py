"""Local segmentation, reverse segmentation and change-point refinement.

Both algorithms work with any statistic source: a callable
``source(t, k, l)`` that accepts scalars or equal-shaped integer arrays,
exposes the sequence length as ``source.T`` and offers
``source.sweep(k, l) -> (t, values)`` over all valid ``t``.

Change-points are reported as the last index of the left segment, in
``1 .. T-1``.
"""
from __future__ import annotations

import heapq
from bisect import bisect_left, insort
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .grid import WindowGrid
from .thresholds import ThresholdPolicy


class CandidateTriple(NamedTuple):
    t: int
    k: int
    l: int
    x: float
    lam: float


@dataclass(frozen=True, eq=False)
class SegmentationResult:
    """Output of :func:`local_segment` or :func:`reverse_segment`.

    ``raw`` holds the estimated change-points, ``refined`` the adjusted ones
    once :func:`refine` has run. In reverse mode ``ranking`` lists every
    interior location, most significant first, and ``deletion_values``
    records the minimum statistic at each deletion step.
    """

    raw: np.ndarray
    statistics: np.ndarray
    refined: np.ndarray | None = None
    ranking: np.ndarray | None = None
    deletion_values: np.ndarray | None = None
    admitted: tuple[CandidateTriple, ...] = field(default=())

    @property
    def j_hat(self) -> int:
        return int(self.raw.size)

    @property
    def changepoints(self) -> np.ndarray:
        return self.raw if self.refined is None else self.refined

    def with_refined(self, refined) -> "SegmentationResult":
        refined = np.asarray(refined, dtype=int)
        if refined.shape != self.raw.shape:
            raise ValueError("refined change-points must match the raw count")
        return replace(self, refined=refined)


# --------------------------------------------------------------------------
# local segmentation


def _exceedance_groups(source, grid: WindowGrid, policy: ThresholdPolicy):
    """Step 1: exceedances grouped by (max(k,l), min(k,l)) in processing order."""
    T = source.T
    groups: dict[tuple[int, int], list] = {}
    for k, l in grid:
        if k + l > T:
            continue
        level = policy.lam(k, l, T)
        t, x = source.sweep(k, l)
        hit = x >= level
        if hit.any():
            n = int(hit.sum())
            groups.setdefault((max(k, l), min(k, l)), []).append(
                (t[hit], x[hit], np.full(n, k), np.full(n, l), np.full(n, level))
            )
    for key in sorted(groups):
        parts = groups[key]
        t, x, k, l, level = (np.concatenate(col) for col in zip(*parts))
        order = np.lexsort((t, -x))
        yield t[order], x[order], k[order], l[order], level[order]


def local_segment(
    source,
    grid: WindowGrid,
    thresholds: ThresholdPolicy,
    admission: str = "interval",
) -> SegmentationResult:
    """Bottom-up segmentation from exceedances of short windows first.

    Candidates ``(t, k, l)`` with ``X >= lambda_{k,l}`` are visited in
    increasing ``max(k, l)``, then increasing ``min(k, l)``, then decreasing
    ``X`` (then increasing ``t``).

    ``admission="interval"`` admits ``t`` when ``[t-l+1, t+k-1]`` holds no
    admitted change-point. ``admission="disjoint"`` admits it when
    ``(t-l, t+k]`` is disjoint from the windows of all admitted candidates.
    """
    if admission not in ("interval", "disjoint"):
        raise ValueError(f"admission must be 'interval' or 'disjoint', got {admission!r}")
    if len(grid) == 0:
        raise ValueError("empty window grid")

    admitted: list[CandidateTriple] = []
    taus: list[int] = []  # sorted admitted locations
    starts: list[int] = []  # disjoint mode: sorted window starts / ends
    ends: list[int] = []

    for t, x, k, l, level in _exceedance_groups(source, grid, thresholds):
        if admission == "interval":
            lo, hi = t - l + 1, t + k - 1
            if taus:
                arr = np.asarray(taus)
                i = np.searchsorted(arr, lo)
                blocked = (i < arr.size) & (arr[np.minimum(i, arr.size - 1)] <= hi)
                keep = np.flatnonzero(~blocked)
            else:
                keep = np.arange(t.size)
            for j in keep:
                a, b = int(lo[j]), int(hi[j])
                i = bisect_left(taus, a)
                if i < len(taus) and taus[i] <= b:
                    continue
                insort(taus, int(t[j]))
                admitted.append(CandidateTriple(int(t[j]), int(k[j]), int(l[j]), float(x[j]), float(level[j])))
        else:
            a_all, b_all = t - l, t + k
            if starts:
                s_arr, e_arr = np.asarray(starts), np.asarray(ends)
                i = np.searchsorted(s_arr, b_all)
                blocked = (i > 0) & (e_arr[np.maximum(i - 1, 0)] > a_all)
                keep = np.flatnonzero(~blocked)
            else:
                keep = np.arange(t.size)
            for j in keep:
                a, b = int(a_all[j]), int(b_all[j])
                i = bisect_left(starts, b)
                if i > 0 and ends[i - 1] > a:
                    continue
                starts.insert(i, a)
                ends.insert(i, b)
                insort(taus, int(t[j]))
                admitted.append(CandidateTriple(int(t[j]), int(k[j]), int(l[j]), float(x[j]), float(level[j])))

    admitted.sort(key=lambda c: c.t)
    raw = np.array([c.t for c in admitted], dtype=int)
    stats = np.array([c.x for c in admitted], dtype=float)
    return SegmentationResult(raw=raw, statistics=stats, admitted=tuple(admitted))


# --------------------------------------------------------------------------
# reverse segmentation


def deletion_path(source, T: int) -> tuple[np.ndarray, np.ndarray]:
    """Delete interior points one at a time, weakest first, down to none.

    Each interior point ``t`` is scored by ``X(t, next - t, t - prev)``
    with ``prev``/``next`` its current surviving neighbours (0 and T are
    fixed). Only the two neighbours of a deleted point are rescored; stale
    heap entries are skipped by version stamp. Ties go to the smaller index.

    Returns
    -------
    order : ndarray of int, shape (T-1,)
        Interior points in deletion order.
    values : ndarray of float, shape (T-1,)
        The minimum statistic at each deletion.
    """
    if T < 2:
        raise ValueError("need T >= 2")
    prev = list(range(-1, T))
    nxt = list(range(1, T + 2))
    version = [0] * (T + 1)
    alive = [True] * (T + 1)
    t0 = np.arange(1, T)
    x0 = np.atleast_1d(source(t0, np.ones_like(t0), np.ones_like(t0)))
    heap = [(float(x), int(t), 0) for x, t in zip(x0, t0)]
    heapq.heapify(heap)

    order: list[int] = []
    values: list[float] = []
    while heap:
        x, t, v = heapq.heappop(heap)
        if not alive[t] or v != version[t]:
            continue
        alive[t] = False
        order.append(t)
        values.append(x)
        p, n = prev[t], nxt[t]
        nxt[p] = n
        prev[n] = p
        for u in (p, n):
            if 0 < u < T:
                version[u] += 1
                xu = float(source(u, nxt[u] - u, u - prev[u]))
                heapq.heappush(heap, (xu, u, version[u]))
    return np.array(order, dtype=int), np.array(values, dtype=float)


def stop_index(values: np.ndarray, c: float) -> int:
    """Number of deletions performed before the minimum reaches ``c``."""
    above = np.flatnonzero(values >= c)
    return int(above[0]) if above.size else int(values.size)


def boundary_stats(source, taus: np.ndarray, T: int) -> np.ndarray:
    """``X(tau_i, tau_{i+1} - tau_i, tau_i - tau_{i-1})`` for sorted ``taus``."""
    taus = np.asarray(taus, dtype=int)
    if taus.size == 0:
        return np.empty(0)
    edges = np.concatenate(([0], taus, [T]))
    return np.atleast_1d(source(taus, edges[2:] - taus, taus - edges[:-2])).astype(float)


def reverse_segment(source, T: int, c: float) -> SegmentationResult:
    """Start with every location as a change-point and delete the weakest.

    Deletion stops as soon as the smallest current statistic is ``>= c``.
    The deletion order does not depend on ``c``; ``c`` only picks where to
    stop, so ``ranking`` (reverse deletion order) is threshold-free.
    """
    if c < 0:
        raise ValueError("threshold c must be non-negative")
    order, values = deletion_path(source, T)
    stop = stop_index(values, c)
    raw = np.sort(order[stop:])
    return SegmentationResult(
        raw=raw,
        statistics=boundary_stats(source, raw, T),
        ranking=order[::-1].copy(),
        deletion_values=values,
    )


def cut_path(result: SegmentationResult, source, T: int, c: float) -> SegmentationResult:
    """Re-threshold a reverse-segmentation result without redoing deletions."""
    if result.ranking is None or result.deletion_values is None:
        raise ValueError("cut_path needs a reverse-segmentation result")
    order = result.ranking[::-1]
    raw = np.sort(order[stop_index(result.deletion_values, c):])
    return SegmentationResult(
        raw=raw,
        statistics=boundary_stats(source, raw, T),
        ranking=result.ranking,
        deletion_values=result.deletion_values,
    )


# --------------------------------------------------------------------------
# refinement


def refine(raw, source, T: int | None = None, search: str = "wide") -> np.ndarray:
    """Relocate each change-point to the best split between its neighbours.

    For ``j = 1..J`` in turn, ``tau*_j`` maximises
    ``X(t, tau_{j+1} - t, t - tau*_{j-1})`` over
    ``tau*_{j-1} < t < tau_{j+1}`` (``search="wide"``) or
    ``tau*_{j-1} < t < tau_j`` (``search="narrow"``; the raw point is kept
    when that range is empty). Ties prefer the raw location, then the
    smaller ``t``.
    """
    if isinstance(raw, SegmentationResult):
        raw = raw.raw
    taus = np.sort(np.asarray(raw, dtype=int))
    if search not in ("wide", "narrow"):
        raise ValueError(f"search must be 'wide' or 'narrow', got {search!r}")
    T = source.T if T is None else T
    refined = np.empty_like(taus)
    prev_star = 0
    for j, tau in enumerate(taus):
        right = int(taus[j + 1]) if j + 1 < taus.size else T
        hi = right - 1 if search == "wide" else int(tau) - 1
        lo = prev_star + 1
        if hi < lo:
            refined[j] = tau
            prev_star = int(tau)
            continue
        ts = np.arange(lo, hi + 1)
        x = np.atleast_1d(source(ts, right - ts, ts - prev_star))
        best = ts[x == x.max()]
        pick = int(tau) if tau in best else int(best[0])
        refined[j] = pick
        prev_star = pick
    return refined
