"""Input checks shared by the estimators and the command line."""
from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .panel import SequencePanel, _to_matrix, build_panel


def check_matrix(X) -> np.ndarray:
    """Float (n_sequences, length) array with NaN for missing entries.

    Unlike most scikit-learn inputs, rows are sequences and columns are
    locations; a 1-D array is one sequence.
    """
    if not isinstance(X, np.ndarray):
        X = _to_matrix(X)  # maps "NA" / "" / None to NaN
    arr = check_array(
        X, dtype=float, ensure_2d=False, ensure_all_finite="allow-nan",
        ensure_min_samples=1,
    )
    return arr[None, :] if arr.ndim == 1 else arr


def check_panel(X, index_map=None) -> SequencePanel:
    """Coerce ``X`` to a :class:`SequencePanel`, dropping incomplete columns."""
    if isinstance(X, SequencePanel):
        return X
    return build_panel(check_matrix(X), index_map=index_map)


def check_choice(name: str, value, choices):
    if value not in choices:
        raise ValueError(f"{name} must be one of {tuple(choices)}, got {value!r}")
    return value


def check_positive(name: str, value, strict: bool = True):
    if value is None:
        return value
    ok = value > 0 if strict else value >= 0
    if not ok or not np.isfinite(value):
        raise ValueError(f"{name} must be {'positive' if strict else 'non-negative'}, got {value!r}")
    return value


def check_alpha(alpha):
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    return alpha
