"""Aligned sequence panels, prefix sums and missing-value handling."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from numbers import Real

import numpy as np

_MISSING_TOKENS = frozenset({"", "na", "nan", "n/a", "null", "none"})


@dataclass(frozen=True, eq=False)
class PrefixSums:
    """Row-wise cumulative sums with a leading zero column.

    ``cumulative[n, t]`` is the sum of the first ``t`` observations of
    sequence ``n``, so ``cumulative[:, 0] == 0``.
    """

    cumulative: np.ndarray

    @classmethod
    def from_values(cls, values) -> "PrefixSums":
        values = np.atleast_2d(np.asarray(values, dtype=float))
        cum = np.zeros((values.shape[0], values.shape[1] + 1))
        np.cumsum(values, axis=1, out=cum[:, 1:])
        return cls(cum)

    @property
    def length(self) -> int:
        return self.cumulative.shape[1] - 1

    def window_mean(self, start, width, row=None):
        """Mean of observations ``start+1 .. start+width`` (1-based)."""
        cum = self.cumulative if row is None else self.cumulative[row]
        start = np.asarray(start)
        return (cum[..., start + width] - cum[..., start]) / width


@dataclass(frozen=True, eq=False)
class SequencePanel:
    """N aligned sequences after dropping every column with a missing value.

    Attributes
    ----------
    values : ndarray of shape (n_sequences, length)
        Retained observations.
    missing : ndarray of bool, shape (n_sequences, original_length)
        Missing-value mask of the raw input.
    index_map : ndarray of int, shape (length,)
        1-based original coordinate of each retained column.
    """

    values: np.ndarray
    missing: np.ndarray
    index_map: np.ndarray
    _prefix: PrefixSums | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError("values must be 2-D (n_sequences, length)")
        if self.values.shape[1] < 2:
            raise ValueError("a panel needs at least 2 retained columns")
        if len(self.index_map) != self.values.shape[1]:
            raise ValueError("index_map length must equal the retained column count")
        if np.any(np.diff(self.index_map) <= 0):
            raise ValueError("index_map must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("retained columns must not contain missing values")

    @property
    def n_sequences(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]

    @property
    def original_length(self) -> int:
        return self.missing.shape[1]

    @property
    def prefix(self) -> PrefixSums:
        if self._prefix is None:
            object.__setattr__(self, "_prefix", PrefixSums.from_values(self.values))
        return self._prefix

    def to_original(self, taus) -> np.ndarray:
        """Translate internal change-points (1..length-1) to original coordinates.

        A change-point is the last index of the left segment, so internal
        ``tau`` maps to the original coordinate of retained column ``tau``.
        """
        taus = np.asarray(taus, dtype=int)
        if taus.size and (taus.min() < 1 or taus.max() > self.length):
            raise ValueError("change-point outside 1..length")
        return self.index_map[taus - 1] if taus.size else taus.copy()

    def with_values(self, values) -> "SequencePanel":
        return SequencePanel(np.asarray(values, dtype=float), self.missing, self.index_map)


def _coerce(entry) -> float:
    if entry is None:
        return math.nan
    if isinstance(entry, str):
        s = entry.strip()
        if s.lower() in _MISSING_TOKENS:
            return math.nan
        return float(s)
    if isinstance(entry, Real):
        return float(entry)
    raise TypeError(f"cannot interpret {entry!r} as an observation")


def _to_matrix(raw) -> np.ndarray:
    if isinstance(raw, np.ndarray) and raw.dtype.kind in "fiub":
        arr = np.asarray(raw, dtype=float)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2:
            raise ValueError("expected a 1-D sequence or a 2-D (n_sequences, length) matrix")
        return arr
    rows = list(raw)
    if not rows:
        raise ValueError("empty input")
    if all(isinstance(r, (Real, str)) or r is None for r in rows):
        rows = [rows]
    rows = [list(r) for r in rows]
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise ValueError(
                f"ragged input: row {i + 1} has {len(r)} entries, expected {width}"
            )
    return np.array([[_coerce(e) for e in r] for r in rows], dtype=float).reshape(
        len(rows), width
    )


def build_panel(raw, *, index_map=None) -> SequencePanel:
    """Ingest a raw matrix that may contain missing markers.

    Any column holding a missing value in any sequence is dropped so that
    the sequences stay aligned. Missing markers are NaN, ``None`` or the
    strings ``""``/``"NA"``.

    Parameters
    ----------
    raw : array-like of shape (n_sequences, length) or (length,)
    index_map : array-like of int, optional
        Original 1-based coordinates of the raw columns. Defaults to
        ``1..length``.
    """
    values = _to_matrix(raw)
    if values.size == 0:
        raise ValueError("empty input")
    missing = ~np.isfinite(values)
    keep = ~missing.any(axis=0)
    if index_map is None:
        coords = np.arange(1, values.shape[1] + 1)
    else:
        coords = np.asarray(index_map, dtype=int)
        if coords.shape != (values.shape[1],):
            raise ValueError("index_map must have one entry per raw column")
    if keep.sum() < 2:
        raise ValueError(f"only {int(keep.sum())} column(s) survive missing-value removal")
    return SequencePanel(values[:, keep].copy(), missing, coords[keep])


def difference_sigma(values) -> np.ndarray:
    """Per-sequence noise scale from first differences.

    Returns ``sqrt(var(diff(y)) / 2)`` for each row; robust to a small
    number of mean shifts.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[1] < 3:
        raise ValueError("need at least 3 observations to estimate the noise scale")
    return np.sqrt(0.5 * np.var(np.diff(values, axis=1), axis=1, ddof=1))


def standardize(panel: SequencePanel, sigma=None) -> tuple[SequencePanel, np.ndarray]:
    """Divide each sequence by its noise scale.

    ``sigma`` may be a scalar, a per-sequence array, or ``None`` to use
    :func:`difference_sigma`.
    """
    if sigma is None:
        scale = difference_sigma(panel.values)
        # constant rows have no signal either way
        scale[scale == 0] = 1.0
    else:
        scale = np.broadcast_to(np.asarray(sigma, dtype=float), (panel.n_sequences,)).copy()
    if np.any(~np.isfinite(scale)) or np.any(scale <= 0):
        raise ValueError("noise scale must be positive; is a sequence constant?")
    return panel.with_values(panel.values / scale[:, None]), scale
