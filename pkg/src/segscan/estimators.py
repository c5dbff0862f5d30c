"""Scikit-learn style front ends for the segmentation algorithms.

Rows of ``X`` are aligned sequences and columns are locations. After
``fit`` the change-points are available in original column coordinates
(``changepoints_``) and in retained-column coordinates
(``raw_changepoints_``, ``refined_changepoints_``).
"""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_alpha, check_choice, check_matrix, check_panel, check_positive
from .allele import AlleleStat, estimate_variances, fit_segments
from .calibrate import calibrate_null, calibrate_permutation, level_from_pool, replicate_rng
from .grid import build_grid
from .panel import build_panel, standardize
from .segment import local_segment, refine, reverse_segment
from .stats import STAT_KINDS, make_stat
from .thresholds import MODES, ThresholdPolicy


def resolve_threshold(threshold, c=None, a=None):
    """Turn a threshold setting into a policy, or ``None`` when it must be calibrated.

    Accepts a :class:`ThresholdPolicy`, ``"calibrated:<path>"`` for a saved
    policy, or one of the mode names.
    """
    if isinstance(threshold, ThresholdPolicy):
        return threshold
    if isinstance(threshold, str) and threshold.startswith("calibrated:"):
        return ThresholdPolicy.load(threshold.split(":", 1)[1])
    check_choice("threshold", threshold, MODES)
    if threshold == "theorem2":
        return None if a is None else ThresholdPolicy("theorem2", a=float(a))
    return None if c is None else ThresholdPolicy(threshold, c=float(c))


def segment_labels(changepoints, length):
    """Segment index of each location ``1..length``."""
    return np.searchsorted(np.asarray(changepoints), np.arange(1, length + 1), side="left")


class _SegmentationBase(BaseEstimator):
    _algorithm = ""

    def _check_params(self):
        check_choice("stat", self.stat, STAT_KINDS)
        check_choice("calibration", self.calibration, ("null", "permutation"))
        check_choice("refine_search", self.refine_search, ("wide", "narrow"))
        check_alpha(self.alpha)
        if self.sigma is not None and np.ndim(self.sigma) == 0:
            check_positive("sigma", self.sigma)
        if self.r <= 1:
            raise ValueError(f"r must exceed 1, got {self.r}")
        if self.h < 1:
            raise ValueError(f"h must be at least 1, got {self.h}")

    def _grid(self, T):
        return None

    def _policy(self, values, grid):
        N, T = values.shape
        policy = resolve_threshold(self.threshold, self.c, self.a)
        if policy is not None:
            return policy
        kind = "single" if N == 1 else self.stat
        mode = self.threshold
        if self.calibration == "permutation":
            return calibrate_permutation(
                values, grid, kind, self._algorithm, self.alpha, self.n_mc,
                self.random_state, mode=mode, n_jobs=self.n_jobs,
            )
        return calibrate_null(
            T, N, grid, kind, self._algorithm, self.alpha, self.n_mc,
            self.random_state, mode=mode, n_jobs=self.n_jobs,
        )

    def fit(self, X, y=None):
        """Estimate change-points of the panel ``X`` (rows are sequences)."""
        self._check_params()
        panel = check_panel(X)
        N = panel.n_sequences
        if self.stat == "single" and N > 1:
            raise ValueError("stat='single' needs exactly one sequence; use hc, bj or score")
        std, scale = standardize(panel, self.sigma)
        T = std.length
        grid = self._grid(T)
        policy = self._policy(std.values, grid)
        source = make_stat(std.values, self.stat if N > 1 else "single")
        result = self._segment(source, T, policy, grid)
        if self.refine:
            result = result.with_refined(refine(result.raw, source, T, self.refine_search))

        self.panel_ = panel
        self.sigma_ = scale
        self.threshold_ = policy
        self.grid_ = grid
        self.result_ = result
        self.raw_changepoints_ = result.raw
        self.refined_changepoints_ = result.refined
        self.changepoints_ = panel.to_original(result.changepoints)
        self.n_changepoints_ = result.j_hat
        self.statistics_ = result.statistics
        self._source = source
        return self

    def fit_predict(self, X, y=None):
        """Fit, then return the segment label of every retained location."""
        return self.fit(X).predict()

    def predict(self, X=None):
        """Segment labels for the retained locations of the fitted panel."""
        check_is_fitted(self, "result_")
        if X is not None:
            raise ValueError("segmentation is transductive: call fit_predict on new data")
        return segment_labels(self.result_.changepoints, self.panel_.length)

    def contributions(self, top: int = 5):
        """Sequences with the largest ``|z|`` at each change-point.

        Each entry is ``(changepoint, [(row, z), ...])`` using windows that
        reach to the neighbouring change-points.
        """
        check_is_fitted(self, "result_")
        taus = self.result_.changepoints
        T = self.panel_.length
        edges = np.concatenate(([0], taus, [T]))
        out = []
        if not hasattr(self._source, "zscores"):
            return out
        for j, tau in enumerate(taus):
            z = np.atleast_1d(self._source.zscores(int(tau), int(edges[j + 2] - tau), int(tau - edges[j])))
            rows = np.argsort(-np.abs(z), kind="stable")[:top]
            out.append((int(self.panel_.to_original([tau])[0]), [(int(i), float(z[i])) for i in rows]))
        return out


class LocalSegmentation(_SegmentationBase):
    """Bottom-up segmentation testing short windows first.

    Parameters
    ----------
    stat : {"single", "hc", "bj", "score"}
        Statistic; pooled kinds need at least two sequences.
    threshold : str or ThresholdPolicy
        ``"multiscale"``, ``"constant"``, ``"theorem2"``, ``"calibrated"``
        or ``"calibrated:<path>"``. Without ``c`` (or ``a``) the offset is
        calibrated to global false-detection rate ``alpha``.
    sigma : float, array or None
        Noise scale per sequence; estimated from first differences if None.
    admission : {"interval", "disjoint"}
    calibration : {"null", "permutation"}
    """

    _algorithm = "local"

    def __init__(
        self, stat="single", threshold="constant", c=None, a=None, sigma=None,
        alpha=0.05, n_mc=1000, calibration="null", r=1.2, h=10.0,
        admission="interval", refine=True, refine_search="wide",
        random_state=0, n_jobs=None,
    ):
        self.stat = stat
        self.threshold = threshold
        self.c = c
        self.a = a
        self.sigma = sigma
        self.alpha = alpha
        self.n_mc = n_mc
        self.calibration = calibration
        self.r = r
        self.h = h
        self.admission = admission
        self.refine = refine
        self.refine_search = refine_search
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _check_params(self):
        super()._check_params()
        check_choice("admission", self.admission, ("interval", "disjoint"))

    def _grid(self, T):
        return build_grid(T, self.r, self.h)

    def _segment(self, source, T, policy, grid):
        return local_segment(source, grid, policy, self.admission)


class ReverseSegmentation(_SegmentationBase):
    """Start from every location and delete the weakest change-point first.

    Takes the same parameters as :class:`LocalSegmentation` except
    ``admission``; ``threshold="multiscale"`` is rejected. After fitting,
    ``ranking_`` lists all interior locations (original coordinates), most
    significant first, independently of the threshold.
    """

    _algorithm = "reverse"

    def __init__(
        self, stat="single", threshold="calibrated", c=None, a=None, sigma=None,
        alpha=0.05, n_mc=1000, calibration="null", r=1.2, h=10.0,
        refine=True, refine_search="wide", random_state=0, n_jobs=None,
    ):
        self.stat = stat
        self.threshold = threshold
        self.c = c
        self.a = a
        self.sigma = sigma
        self.alpha = alpha
        self.n_mc = n_mc
        self.calibration = calibration
        self.r = r
        self.h = h
        self.refine = refine
        self.refine_search = refine_search
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _check_params(self):
        super()._check_params()
        if self.threshold == "multiscale":
            raise ValueError("reverse segmentation needs a single level; multiscale is local-only")

    def _segment(self, source, T, policy, grid):
        return reverse_segment(source, T, policy.reverse_level(T))

    def fit(self, X, y=None):
        super().fit(X, y)
        self.ranking_ = self.panel_.to_original(self.result_.ranking)
        self.deletion_values_ = self.result_.deletion_values
        return self


# --------------------------------------------------------------------------


def _simulate_allele_null(rng, N, T, params, b):
    y = math.sqrt(params.sigma1_sq) * rng.standard_normal((N, T))
    signs = rng.choice([-1.0, 1.0], size=(N, T))
    z = params.alpha[:, None] + signs * b[:, None] + math.sqrt(params.sigma2_sq) * rng.standard_normal((N, T))
    return y, z


class AlleleSpecificSegmentation(BaseEstimator):
    """Joint segmentation of a total-intensity panel ``Y`` and an allelic panel ``Z``.

    Each location is scored by the two-channel statistic (squared mean
    shift of Y plus the mixture likelihood ratio for a change in ``b``),
    pooled over individuals with Berk-Jones or higher criticism. Variances
    are estimated from the data, then re-estimated by maximum likelihood
    once change-points are available and the data re-segmented.

    Parameters
    ----------
    kind : {"bj", "hc"}
    algorithm : {"reverse", "local"}
    c : float or None
        Flat threshold on the statistic. If None it is calibrated by
        simulating ``n_mc`` data sets from the fitted no-change model.
    """

    def __init__(
        self, kind="bj", algorithm="reverse", c=None, alpha=0.05, n_mc=200,
        r=1.2, h=10.0, refine=True, max_iter=10, rtol=1e-4, random_state=0,
    ):
        self.kind = kind
        self.algorithm = algorithm
        self.c = c
        self.alpha = alpha
        self.n_mc = n_mc
        self.r = r
        self.h = h
        self.refine = refine
        self.max_iter = max_iter
        self.rtol = rtol
        self.random_state = random_state

    def _run(self, y, z, params, c, grid):
        source = AlleleStat(y, z, params, self.kind)
        T = source.T
        if self.algorithm == "reverse":
            res = reverse_segment(source, T, c)
        else:
            res = local_segment(source, grid, ThresholdPolicy("calibrated", c=c))
        if self.refine:
            res = res.with_refined(refine(res.raw, source, T))
        return res

    def _max_null(self, y, z, params, grid):
        source = AlleleStat(y, z, params, self.kind)
        if self.algorithm == "reverse":
            return float(reverse_segment(source, source.T, math.inf).deletion_values.max())
        return max(float(source.sweep(k, l)[1].max()) for k, l in grid if k + l <= source.T)

    def _calibrate(self, N, T, params, b, grid):
        pool = []
        for i in range(self.n_mc):
            y, z = _simulate_allele_null(replicate_rng(self.random_state, i), N, T, params, b)
            pool.append(self._max_null(y, z, params, grid))
        return level_from_pool(pool, self.alpha)

    def fit(self, Y, Z):
        check_choice("kind", self.kind, ("bj", "hc"))
        check_choice("algorithm", self.algorithm, ("reverse", "local"))
        check_alpha(self.alpha)
        raw_y, raw_z = check_matrix(Y), check_matrix(Z)
        if raw_y.shape != raw_z.shape:
            raise ValueError(f"Y has shape {raw_y.shape} but Z has shape {raw_z.shape}")
        # keep only locations observed in both channels
        panel = build_panel(np.vstack([raw_y, raw_z]))
        N = raw_y.shape[0]
        y, z = panel.values[:N], panel.values[N:]
        T = y.shape[1]
        grid = build_grid(T, self.r, self.h) if self.algorithm == "local" else None

        params = estimate_variances(y, z)
        if self.c is None:
            _, b0 = fit_segments(y, z, [], params)
            c = self._calibrate(N, T, params, b0[:, 0], grid)
        else:
            c = float(self.c)
        result = self._run(y, z, params, c, grid)
        if result.j_hat:
            params = estimate_variances(y, z, result.changepoints, max_iter=self.max_iter, rtol=self.rtol)
            result = self._run(y, z, params, c, grid)
        mu, b = fit_segments(y, z, result.changepoints, params)

        self.panel_ = panel
        self.params_ = params
        self.threshold_ = c
        self.result_ = result
        self.raw_changepoints_ = result.raw
        self.changepoints_ = panel.to_original(result.changepoints)
        self.n_changepoints_ = result.j_hat
        self.segment_means_ = mu
        self.segment_b_ = b
        self.variance_trace_ = params.trace
        return self

    def fit_predict(self, Y, Z):
        self.fit(Y, Z)
        return segment_labels(self.result_.changepoints, self.panel_.length)


__all__ = [
    "AlleleSpecificSegmentation",
    "LocalSegmentation",
    "ReverseSegmentation",
    "resolve_threshold",
    "segment_labels",
]
