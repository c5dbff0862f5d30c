"""Geometric grid of (right, left) window lengths."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple


class WindowPair(NamedTuple):
    """Right window length ``k`` and left window length ``l``."""

    k: int
    l: int


@dataclass(frozen=True)
class WindowGrid:
    pairs: tuple[WindowPair, ...]
    r: float
    h: float
    length: int

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __contains__(self, pair):
        return tuple(pair) in set(self.pairs)


def geometric_lengths(limit: int, r: float) -> list[int]:
    """Distinct values of floor(r**a), a = 0, 1, ..., not exceeding ``limit``."""
    if r <= 1:
        raise ValueError(f"ratio r must exceed 1, got {r}")
    out = []
    a = 0
    while True:
        f = math.floor(r**a)
        if f > limit:
            return out
        if not out or f != out[-1]:
            out.append(f)
        a += 1


def build_grid(T: int, r: float = 1.2, h: float = 10.0) -> WindowGrid:
    """All deduplicated pairs (floor(r^a), floor(r^b)) with k + l <= T and l/k in [1/h, h].

    Pairs are ordered by max(k, l), then min(k, l), then k.
    """
    if r <= 1:
        raise ValueError(f"ratio r must exceed 1, got {r}")
    if h < 1:
        raise ValueError(f"aspect bound h must be at least 1, got {h}")
    if T < 2:
        raise ValueError(f"sequence length must be at least 2, got {T}")
    lengths = geometric_lengths(T - 1, r)
    pairs = [
        WindowPair(k, l)
        for k in lengths
        for l in lengths
        if k + l <= T and l <= h * k and k <= h * l
    ]
    pairs.sort(key=lambda p: (max(p), min(p), p.k))
    return WindowGrid(tuple(pairs), float(r), float(h), int(T))
