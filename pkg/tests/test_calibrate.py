import math

import numpy as np
import pytest

from segscan.calibrate import (
    calibrate_null,
    calibrate_permutation,
    level_from_pool,
    max_excess,
    n_workers,
    null_pool,
    replicate_rng,
)
from segscan.grid import build_grid
from segscan.segment import local_segment, reverse_segment
from segscan.stats import make_stat
from segscan.thresholds import ThresholdPolicy


def test_level_from_pool_order_statistic():
    pool = np.arange(1.0, 101.0)
    c = level_from_pool(pool, 0.05)
    assert np.count_nonzero(pool >= c) == 5
    assert level_from_pool(pool, 1.0) == 1.0
    # ties are pushed past
    tied = np.array([1.0, 2.0, 3.0, 3.0, 3.0])
    c = level_from_pool(tied, 0.2)
    assert np.count_nonzero(tied >= c) <= 1


def test_alpha_one_gives_minimum():
    grid = build_grid(60)
    pool = null_pool(60, 1, grid, "single", "local", "constant", 100, 4)
    pol = calibrate_null(60, 1, grid, "single", "local", alpha=1.0, n_mc=100, seed=4)
    assert pol.c == pool.min()
    # every replicate detects at this level
    for i in range(100):
        y = replicate_rng(4, i).standard_normal((1, 60))
        assert local_segment(make_stat(y), grid, pol).j_hat > 0


def test_max_excess_is_the_detection_boundary(rng):
    T = 80
    grid = build_grid(T)
    for _ in range(5):
        src = make_stat(rng.standard_normal(T))
        m = max_excess(src, grid, "local", "multiscale")
        # offsets and levels differ by rounding only
        assert local_segment(src, grid, ThresholdPolicy("multiscale", c=m - 1e-9)).j_hat > 0
        assert local_segment(src, grid, ThresholdPolicy("multiscale", c=m + 1e-9)).j_hat == 0
        r = max_excess(src, None, "reverse", "constant")
        lvl = ThresholdPolicy("constant", c=r).reverse_level(T)
        assert reverse_segment(src, T, lvl - 1e-9).j_hat > 0
        assert reverse_segment(src, T, lvl + 1e-9).j_hat == 0


def test_monotone_in_alpha_and_replay():
    grid = build_grid(100)
    levels = [calibrate_null(100, 1, grid, alpha=a, n_mc=200, seed=9).c for a in (0.01, 0.05, 0.1, 0.5)]
    assert levels == sorted(levels, reverse=True)
    again = calibrate_null(100, 1, grid, alpha=0.05, n_mc=200, seed=9)
    assert again.c == levels[1]
    assert again.meta["seed"] == 9 and again.meta["n_mc"] == 200


def test_scheduling_independence():
    grid = build_grid(80)
    a = null_pool(80, 3, grid, "hc", "local", "calibrated", 120, 5, n_jobs=1)
    b = null_pool(80, 3, grid, "hc", "local", "calibrated", 120, 5, n_jobs=2)
    assert np.array_equal(a, b)


def test_theorem2_slope():
    grid = build_grid(100)
    pol = calibrate_null(100, 1, grid, "single", "local", 0.05, 150, seed=2, mode="theorem2")
    assert pol.mode == "theorem2" and pol.a > 0
    pol_r = calibrate_null(100, 1, None, "single", "reverse", 0.05, 150, seed=2, mode="theorem2")
    assert pol_r.reverse_level(100) == pytest.approx(pol_r.a * math.log(100))


def test_reverse_rejects_multiscale():
    with pytest.raises(ValueError, match="multiscale"):
        calibrate_null(50, 1, None, "single", "reverse", 0.05, 100, mode="multiscale")


@pytest.mark.parametrize(
    "kwargs, match",
    [({"alpha": 0.0}, "alpha"), ({"alpha": 1.5}, "alpha"), ({"n_mc": 50}, "100")],
)
def test_argument_checks(kwargs, match):
    args = dict(T=50, N=1, grid=build_grid(50), alpha=0.05, n_mc=100)
    args.update(kwargs)
    with pytest.raises(ValueError, match=match):
        calibrate_null(**args)


def test_permutation_agrees_with_null_on_null_data():
    T = 200
    grid = build_grid(T)
    y = np.random.default_rng(77).standard_normal((1, T))
    perm = calibrate_permutation(y, grid, "single", "local", 0.05, 400, seed=1)
    null = calibrate_null(T, 1, grid, "single", "local", 0.05, 400, seed=2)
    lam_p, lam_n = perm.lam(1, 1, T), null.lam(1, 1, T)
    assert abs(lam_p - lam_n) / lam_n < 0.03
    assert perm.meta["source"] == "permutation"


def test_permutation_leaves_constant_rows_alone():
    y = np.vstack([np.full(30, 2.0), np.random.default_rng(1).standard_normal(30)])
    for i in range(5):
        shuffled = replicate_rng(3, i).permuted(y, axis=1)
        assert np.all(shuffled[0] == 2.0)
    pol = calibrate_permutation(y, None, "hc", "reverse", 0.05, 100, seed=3)
    assert np.isfinite(pol.c)


def test_permutation_rejects_short_sequences():
    with pytest.raises(ValueError, match="T >= 10"):
        calibrate_permutation(np.zeros((1, 9)), None, "single", "reverse", 0.05, 100)


def test_worker_count_from_environment(monkeypatch):
    monkeypatch.setenv("SEGSCAN_THREADS", "3")
    assert n_workers() == 3
    monkeypatch.setenv("SEGSCAN_THREADS", "junk")
    assert n_workers() == 1
    monkeypatch.delenv("SEGSCAN_THREADS")
    assert n_workers() == 1
