"""Exit criteria, each run at its stated tolerance.

Every test appends one PASS/FAIL line to the summary printed at the end of
the pytest run. Run this file alone with ``python3 tests/test_acceptance.py``.
These are Monte Carlo runs; the whole module takes tens of minutes on one
core. Set ``SEGSCAN_THREADS`` to fan replicates out over more workers.
"""
from __future__ import annotations

import math
import os
import sys
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from segscan import oracle
from segscan.calibrate import replicate_rng
from segscan.grid import build_grid
from segscan.segment import cut_path, deletion_path, reverse_segment
from segscan.simlab import (
    MethodConfig,
    detection_boundary,
    example1_spec,
    power_comparison,
    run_benchmark,
    segment_values,
)
from segscan.stats import make_stat

pytestmark = pytest.mark.acceptance

TABLE_P = (0.803, 0.889, 0.901, 0.902, 0.893)
N_REPS = 1000


def _report(name: str, ok: bool, detail: str):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def _fmt(values):
    return "(" + ", ".join(f"{v:.3f}" for v in values) + ")"


@pytest.fixture(scope="module")
def example1_runs():
    spec = example1_spec()
    methods = {
        "reverse": MethodConfig("reverse", "calibrated", n_mc=1000),
        "local_constant": MethodConfig("local", "constant", n_mc=1000),
        "local_multiscale": MethodConfig("local", "multiscale", n_mc=1000),
    }
    return {name: run_benchmark(spec, m, n_reps=N_REPS, seed=2024) for name, m in methods.items()}


def test_c01_reverse_row(example1_runs):
    m = example1_runs["reverse"]
    ok_j = abs(m.j_bias - (-0.11)) <= 0.10
    ok_p = all(abs(p - q) <= 0.05 for p, q in zip(m.interval_hits, TABLE_P))
    detail = f"J_hat-J={m.j_bias:+.3f} (target -0.11+-0.10), P={_fmt(m.interval_hits)} (target {_fmt(TABLE_P)} +-0.05)"
    assert _report("1 reverse row", ok_j and ok_p, detail)


def test_c02_local_constant_row(example1_runs):
    m = example1_runs["local_constant"]
    ok_j = abs(m.j_bias - (-0.33)) <= 0.12
    ok_p1 = abs(m.interval_hits[0] - 0.678) <= 0.05
    ok_rest = all(abs(p - q) <= 0.05 for p, q in zip(m.interval_hits[1:], TABLE_P[1:]))
    detail = (
        f"J_hat-J={m.j_bias:+.3f} (target -0.33+-0.12), P1={m.interval_hits[0]:.3f} (target 0.678+-0.05), "
        f"P2..P5={_fmt(m.interval_hits[1:])} (target {_fmt(TABLE_P[1:])} +-0.05)"
    )
    assert _report("2 local constant row", ok_j and ok_p1 and ok_rest, detail)


def test_c03_local_multiscale_row(example1_runs):
    ms = example1_runs["local_multiscale"].interval_hits[0]
    const = example1_runs["local_constant"].interval_hits[0]
    ok = abs(ms - 0.486) <= 0.06 and const - ms >= 0.10
    detail = f"P1={ms:.3f} (target 0.486+-0.06), constant P1 - multiscale P1 = {const - ms:.3f} (need >= 0.10)"
    assert _report("3 local multiscale row", ok, detail)


def _null_rate(algorithm, kind, T=200, N=26, n_fresh=2000, seed=77):
    method = MethodConfig(algorithm, "calibrated", stat=kind, n_mc=1000, refine=False, calibration_seed=seed)
    policy = method.policy(T, N)
    grid = build_grid(T) if algorithm == "local" else None
    hits = 0
    for i in range(n_fresh):
        y = replicate_rng(seed + 1000, i).standard_normal((N, T))
        hits += segment_values(y, method, policy, grid).j_hat > 0
    return hits / n_fresh


@pytest.mark.parametrize("algorithm", ["local", "reverse"])
@pytest.mark.parametrize("kind", ["hc", "bj", "score"])
def test_c04_null_false_detection(algorithm, kind):
    rate = _null_rate(algorithm, kind)
    ok = 0.03 <= rate <= 0.07
    assert _report(f"4 null rate {algorithm}/{kind}", ok, f"{rate:.4f} over 2000 fresh replicates (need [0.03, 0.07])")


def test_c05_oracle_equivalence():
    rng = np.random.default_rng(5)
    worst, n_triples = 0.0, 0
    for kind in ("single", "hc", "bj", "score"):
        for _ in range(25):
            N = 1 if kind == "single" else int(rng.integers(2, 12))
            T = int(rng.integers(10, 200))
            y = rng.standard_normal((N, T)) * rng.uniform(0.5, 3.0)
            y[:, T // 3 :] += rng.normal(0, 2, size=(N, 1))
            src = make_stat(y, kind)
            for _ in range(100):
                k = int(rng.integers(1, T))
                l = int(rng.integers(1, T - k + 1))
                t = int(rng.integers(l, T - k + 1))
                fast = src(t, k, l)
                slow = oracle.naive_panel_stat(y, t, k, l, kind)
                worst = max(worst, abs(fast - slow) / max(1.0, abs(slow)))
                n_triples += 1
    heap_ok = 0
    for _ in range(100):
        T = int(rng.integers(2, 301))
        y = rng.standard_normal(T)
        y[rng.integers(0, T) :] += rng.normal(0, 2)
        src = make_stat(y)
        order, values = deletion_path(src, T)
        o_order, o_values, _ = oracle.naive_reverse(src, T)
        heap_ok += order.tolist() == o_order and values.tolist() == o_values
    ok = worst <= 1e-10 and n_triples >= 10_000 and heap_ok == 100
    detail = f"max rel. diff {worst:.2e} over {n_triples} triples; heap == rescan on {heap_ok}/100 sequences"
    assert _report("5 oracle equivalence", ok, detail)


def _single_jump(threshold, alpha, n_reps=500, T=1000, seed=606):
    tau = T // 2
    method = MethodConfig("local", threshold, alpha=alpha, n_mc=1000, calibration_seed=seed)
    policy = method.policy(T, 1)
    grid = build_grid(T)
    raw_ok = ref_ok = 0
    for i in range(n_reps):
        y = replicate_rng(seed, i).standard_normal(T)
        y[tau:] += 1.0
        res = segment_values(y, method, policy, grid)
        if res.j_hat == 1:
            raw_ok += abs(int(res.raw[0]) - tau) <= 20
            ref_ok += abs(int(res.changepoints[0]) - tau) <= 20
    return raw_ok / n_reps, ref_ok / n_reps


def test_c06_single_jump_consistency():
    # alpha is not fixed by the criterion; at alpha = 0.05 the false-detection
    # budget alone caps P(J_hat = 1) near 0.95, so the gate runs at 0.01
    lines, ok = [], True
    for threshold in ("constant", "multiscale"):
        for alpha in (0.01, 0.05):
            raw, ref = _single_jump(threshold, alpha)
            lines.append(f"{threshold} a={alpha}: raw {raw:.3f}, refined {ref:.3f}")
            if alpha == 0.01:
                ok &= ref >= 0.95
    detail = "; ".join(lines) + " (gate: refined at alpha=0.01 >= 0.95 for both)"
    assert _report("6 single jump consistency", ok, detail)


def test_c07_pooled_power():
    out = power_comparison(N=100, T=500, beta=0.4, d=50, n_reps=500, n_mc=500, seed=7)
    gap = out["pooled_power"] - out["best_per_sequence_power"]
    detail = (
        f"pooled {out['pooled_power']:.3f} vs best single {out['best_per_sequence_power']:.3f}, "
        f"gap {gap:.3f} (need >= 0.2)"
    )
    assert _report("7 multi-sequence power", gap >= 0.2, detail)


def test_c08_refinement(example1_runs):
    parts, ok = [], True
    for name in ("reverse", "local_constant"):
        m = example1_runs[name]
        ok &= m.refined_error <= m.raw_error
        parts.append(f"{name}: refined {m.refined_error:.3f} <= raw {m.raw_error:.3f} on {m.n_exact} exact reps")
    assert _report("8 refinement", ok, "; ".join(parts))


def test_c09_reverse_structure():
    rng = np.random.default_rng(9)
    good = 0
    for i in range(100):
        T = int(rng.integers(5, 250))
        N = 1 if i % 2 == 0 else int(rng.integers(8, 20))
        y = rng.standard_normal((N, T))
        for _ in range(int(rng.integers(0, 4))):
            y[:, rng.integers(1, T) :] += rng.normal(0, 2)
        src = make_stat(y, "single" if N == 1 else "score")
        full = reverse_segment(src, T, 0.0)
        ranking = full.ranking
        cs = np.sort(rng.uniform(0, 15, size=6))
        results = [reverse_segment(src, T, c) for c in cs]
        nested = all(set(b.raw) <= set(a.raw) for a, b in zip(results, results[1:]))
        same_rank = all(np.array_equal(r.ranking, ranking) for r in results)
        prefix = all(set(r.raw) == set(ranking[: r.j_hat]) for r in results)
        cut = all(np.array_equal(cut_path(full, src, T, c).raw, r.raw) for c, r in zip(cs, results))
        good += nested and same_rank and prefix and cut
    assert _report("9 reverse structure", good == 100, f"nested, ranking fixed, prefix and cut agree on {good}/100")


def test_c10_detection_boundary():
    worst = 0.0
    for zeta in np.linspace(0.0, 0.95, 96):
        mid = 3 * (1 - zeta) / 4
        left = mid - (1 - zeta) / 2
        right = (math.sqrt(1 - zeta) - math.sqrt(1 - zeta - mid)) ** 2
        worst = max(worst, abs(left - right), abs(detection_boundary(mid, zeta) - right))
        worst = max(worst, abs(detection_boundary(np.nextafter(mid, 1), zeta) - detection_boundary(mid, zeta)))
    classical = detection_boundary(0.75, 0.0)
    ok = worst <= 1e-12 and abs(classical - 0.25) <= 1e-12
    assert _report("10 detection boundary", ok, f"max jump {worst:.1e} at the kink; rho(0.75, 0) = {classical:.15f}")


DATA_DIR = os.environ.get("SEGSCAN_GBM_DIR")


@pytest.mark.skipif(not DATA_DIR, reason="set SEGSCAN_GBM_DIR to the copy-number data directory")
def test_c11_example2():
    from segscan import LocalSegmentation, ReverseSegmentation
    from segscan.cli import read_table

    root = Path(DATA_DIR)
    g29, _ = read_table(root / "GBM29_chr7.csv")
    g31, _ = read_table(root / "GBM31_chr13.csv")
    panel, _ = read_table(root / "chr7_panel.csv")
    got29 = set(ReverseSegmentation().fit(g29).changepoints_.tolist())
    got29_local = set(LocalSegmentation(threshold="constant", n_mc=1000).fit(g29).changepoints_.tolist())
    got31 = set(ReverseSegmentation().fit(g31).changepoints_.tolist())
    top5 = set(ReverseSegmentation(stat="hc", calibration="permutation").fit(panel).ranking_[:5].tolist())
    want29, want31, want_top = {81, 85, 89, 96, 123, 133}, {317, 318, 538, 727, 728}, {82, 119, 125, 132, 147}
    ok = got29 == want29 and got29_local == want29 and got31 == want31 and top5 == want_top
    detail = f"GBM29 {sorted(got29)} / local {sorted(got29_local)}, GBM31 {sorted(got31)}, HC top-5 {sorted(top5)}"
    assert _report("11 copy-number example", ok, detail)


if __name__ == "__main__":
    here = Path(__file__).resolve()
    sys.exit(pytest.main([str(here), "-v", "-s", "--rootdir", str(here.parent.parent)]))
