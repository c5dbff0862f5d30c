"""Command-line interface: ``segscan {segment,multiseg,simulate,calibrate,ascn}``.

Input files are delimited text (comma or tab), one row per sequence, with
an optional header row of location labels. Empty fields and ``NA`` mark
missing values. Results are written as JSON (default) or a flat CSV of
change-points. Exit status is 0 on success, 2 for invalid input or flags
and 1 for any other failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .calibrate import calibrate_null, calibrate_permutation
from .estimators import AlleleSpecificSegmentation, LocalSegmentation, ReverseSegmentation
from .grid import build_grid
from .panel import standardize
from ._validation import check_panel
from .simlab import MethodConfig, example1_spec, metrics_table, run_benchmark
from .thresholds import ThresholdPolicy

_MISSING = {"", "na", "nan", "n/a", "null", "none"}


class InputError(ValueError):
    """Bad input file or inconsistent flags; exit status 2."""


# --------------------------------------------------------------------------
# input


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def read_table(path) -> tuple[np.ndarray, list[str] | None]:
    """Read a delimited matrix; returns ``(values, header_labels)``.

    The delimiter is a tab if the first non-empty line has one, otherwise a
    comma. The first row is a header when any of its fields is neither a
    number nor a missing marker.
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    lines = [(i, ln) for i, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        raise InputError(f"{path}: empty input")
    delim = "\t" if "\t" in lines[0][1] else ","
    rows = [(i, [f.strip() for f in next(csv.reader([ln], delimiter=delim))]) for i, ln in lines]

    header = None
    first = rows[0][1]
    if any(tok.lower() not in _MISSING and not _is_number(tok) for tok in first):
        header = first
        rows = rows[1:]
    if not rows:
        raise InputError(f"{path}: no data rows")
    width = len(header) if header is not None else len(rows[0][1])
    values = np.empty((len(rows), width))
    for r, (lineno, fields) in enumerate(rows):
        if len(fields) != width:
            raise InputError(f"{path}, line {lineno}: expected {width} fields, found {len(fields)}")
        for c, tok in enumerate(fields):
            if tok.lower() in _MISSING:
                values[r, c] = math.nan
                continue
            try:
                values[r, c] = float(tok)
            except ValueError:
                raise InputError(
                    f"{path}, line {lineno}, field {c + 1}: cannot parse {tok!r} as a number"
                ) from None
    return values, header


# --------------------------------------------------------------------------
# output


def _emit(doc: dict, args, rows: list[dict] | None = None):
    if args.format == "csv":
        buf = io.StringIO()
        rows = rows or []
        fields = list(rows[0]) if rows else ["changepoint"]
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        text = buf.getvalue()
    else:
        text = json.dumps(doc, indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def _ints(a):
    return [int(v) for v in np.asarray(a).ravel()] if a is not None else None


def _floats(a):
    return [float(v) for v in np.asarray(a).ravel()] if a is not None else None


def _threshold_arg(args):
    if args.threshold.startswith("calibrated:"):
        path = args.threshold.split(":", 1)[1]
        try:
            return ThresholdPolicy.load(path)
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot load threshold policy from {path}: {exc}") from None
    return args.threshold


def _run_config(args, stat) -> dict:
    return {
        "input": str(args.input),
        "algo": args.algo,
        "stat": stat,
        "threshold": args.threshold,
        "c": args.c,
        "a": args.a,
        "alpha": args.alpha,
        "r": args.r,
        "h": args.h,
        "admission": args.admission if args.algo == "local" else None,
        "refine": not args.no_refine,
        "sigma": args.sigma,
        "seed": args.seed,
        "reps": args.reps,
        "permute": args.permute,
    }


def _segment_doc(args, values, labels, stat, top=None):
    if args.algo == "reverse" and args.threshold == "multiscale":
        raise InputError("--algo reverse cannot use --threshold multiscale")
    panel = check_panel(values)
    if stat in ("hc", "bj") and panel.n_sequences < 2:
        raise InputError(f"--stat {stat} requires at least 2 sequences")
    if stat == "single" and panel.n_sequences > 1:
        raise InputError("--stat single requires exactly one sequence")
    common = dict(
        stat=stat, threshold=_threshold_arg(args), c=args.c, a=args.a, sigma=args.sigma,
        alpha=args.alpha, n_mc=args.reps, calibration="permutation" if args.permute else "null",
        r=args.r, h=args.h, refine=not args.no_refine, random_state=args.seed,
    )
    if args.algo == "local":
        est = LocalSegmentation(admission=args.admission, **common)
    else:
        est = ReverseSegmentation(**common)
    est.fit(panel)
    res = est.result_
    to_orig = panel.to_original
    doc = {
        "config": _run_config(args, stat),
        "threshold": est.threshold_.to_dict(),
        "n_sequences": panel.n_sequences,
        "length": panel.length,
        "original_length": panel.original_length,
        "sigma": _floats(est.sigma_),
        "n_changepoints": est.n_changepoints_,
        "raw": _ints(to_orig(res.raw)),
        "refined": _ints(to_orig(res.refined)) if res.refined is not None else None,
        "changepoints": _ints(est.changepoints_),
        "statistics": _floats(res.statistics),
    }
    if args.algo == "reverse":
        doc["ranking"] = _ints(est.ranking_)
    if labels is not None:
        doc["changepoint_labels"] = [labels[c - 1] for c in doc["changepoints"]]
    if top is not None and panel.n_sequences > 1:
        doc["contributions"] = [
            {"changepoint": cp, "sequences": [{"row": r + 1, "z": z} for r, z in seqs]}
            for cp, seqs in est.contributions()
        ]
        if args.algo == "reverse":
            doc["top"] = doc["ranking"][:top]
    rows = [
        {"changepoint": cp, "raw": raw, "statistic": x}
        for cp, raw, x in zip(doc["changepoints"], doc["raw"], doc["statistics"])
    ]
    return doc, rows


def cmd_segment(args):
    values, labels = read_table(args.input)
    if args.row is not None:
        if not 1 <= args.row <= values.shape[0]:
            raise InputError(f"--row {args.row} out of range 1..{values.shape[0]}")
        values = values[args.row - 1 : args.row]
    elif values.shape[0] != 1:
        raise InputError(
            f"{args.input} holds {values.shape[0]} sequences; pick one with --row or use multiseg"
        )
    if args.stat != "single":
        raise InputError(f"--stat {args.stat} requires at least 2 sequences (use multiseg)")
    # single-sequence ingestion drops only this sequence's missing positions
    doc, rows = _segment_doc(args, values, labels, "single")
    _emit(doc, args, rows)


def cmd_multiseg(args):
    values, labels = read_table(args.input)
    if values.shape[0] == 1:
        doc, rows = _segment_doc(args, values, labels, "single")
    else:
        doc, rows = _segment_doc(args, values, labels, args.stat, top=args.top)
    _emit(doc, args, rows)


def cmd_simulate(args):
    if args.scenario != "example1":
        raise InputError(f"unknown scenario {args.scenario!r}")
    if args.algo == "reverse" and args.threshold == "multiscale":
        raise InputError("--algo reverse cannot use --threshold multiscale")
    threshold = args.threshold
    policy = None
    if threshold.startswith("calibrated:"):
        policy = _threshold_arg(args)
        threshold = policy.mode
    method = MethodConfig(
        algorithm=args.algo, threshold=threshold, c=args.c, a=args.a, r=args.r, h=args.h,
        admission=args.admission, refine=not args.no_refine, alpha=args.alpha,
        n_mc=args.mc, calibration_seed=args.seed + 1,
    )
    spec = example1_spec(args.sigma_noise)
    metrics = run_benchmark(spec, method, n_reps=args.reps, seed=args.seed, policy=policy)
    label = f"{args.algo} ({threshold})"
    if args.format == "json":
        config = dict(asdict(method), reps=args.reps, seed=args.seed,
                      scenario=args.scenario, sigma=args.sigma_noise)
        doc = {"config": config,
               "policy": metrics.policy, "rows": [metrics.row(label)]}
        _emit(doc, args)
    else:
        text = metrics_table({label: metrics}, "csv")
        if args.output:
            Path(args.output).write_text(text)
        else:
            sys.stdout.write(text)


def cmd_calibrate(args):
    if args.algo == "reverse" and args.threshold == "multiscale":
        raise InputError("--algo reverse cannot use --threshold multiscale")
    if args.threshold.startswith("calibrated:"):
        raise InputError("calibrate takes a threshold family, not a saved policy")
    if args.input:
        values, _ = read_table(args.input)
        panel = check_panel(values)
        std, _ = standardize(panel, args.sigma)
        N, T = std.values.shape
    elif args.permute:
        raise InputError("--permute needs an input file")
    else:
        if args.length is None:
            raise InputError("give an input file or --length")
        N, T = args.n_seq, args.length
    stat = "single" if N == 1 else args.stat
    if stat == "single" and N > 1:
        raise InputError("--stat single requires exactly one sequence")
    if stat in ("hc", "bj") and N < 2:
        raise InputError(f"--stat {stat} requires at least 2 sequences")
    grid = build_grid(T, args.r, args.h) if args.algo == "local" else None
    if args.permute:
        policy = calibrate_permutation(
            std.values, grid, stat, args.algo, args.alpha, args.reps, args.seed, mode=args.threshold
        )
    else:
        policy = calibrate_null(
            T, N, grid, stat, args.algo, args.alpha, args.reps, args.seed, mode=args.threshold
        )
    meta = dict(policy.meta, r=args.r, h=args.h)
    policy = ThresholdPolicy(policy.mode, policy.c, policy.a, policy.table, meta)
    _emit(policy.to_dict(), args)


def cmd_ascn(args):
    y, labels = read_table(args.y)
    z, _ = read_table(args.z)
    if y.shape != z.shape:
        raise InputError(f"Y file has shape {y.shape} but Z file has shape {z.shape}")
    est = AlleleSpecificSegmentation(
        kind=args.kind, algorithm=args.algo, c=args.c, alpha=args.alpha, n_mc=args.reps,
        r=args.r, h=args.h, refine=not args.no_refine, random_state=args.seed,
    )
    est.fit(y, z)
    res = est.result_
    panel = est.panel_
    edges = np.concatenate(([0], res.changepoints, [panel.length]))
    segments = []
    for j in range(edges.size - 1):
        segments.append({
            "start": int(panel.index_map[edges[j]]),
            "end": int(panel.index_map[edges[j + 1] - 1]),
            "mu": _floats(est.segment_means_[:, j]),
            "b": _floats(est.segment_b_[:, j]),
        })
    doc = {
        "config": {
            "y": str(args.y), "z": str(args.z), "kind": args.kind, "algo": args.algo,
            "c": args.c, "alpha": args.alpha, "reps": args.reps, "seed": args.seed,
            "r": args.r, "h": args.h, "refine": not args.no_refine,
        },
        "threshold": est.threshold_,
        "n_sequences": panel.n_sequences // 2,
        "length": panel.length,
        "raw": _ints(panel.to_original(res.raw)),
        "changepoints": _ints(est.changepoints_),
        "statistics": _floats(res.statistics),
        "segments": segments,
        "sigma1_sq": est.params_.sigma1_sq,
        "sigma2_sq": est.params_.sigma2_sq,
        "alpha_offsets": _floats(est.params_.alpha),
        "variance_trace": [list(map(float, step)) for step in est.variance_trace_],
    }
    if labels is not None:
        doc["changepoint_labels"] = [labels[c - 1] for c in doc["changepoints"]]
    rows = [{"changepoint": cp, "statistic": x} for cp, x in zip(doc["changepoints"], doc["statistics"])]
    _emit(doc, args, rows)


# --------------------------------------------------------------------------
# argument parsing


def _threshold_type(value: str) -> str:
    if value in ("multiscale", "constant", "theorem2", "calibrated") or value.startswith("calibrated:"):
        return value
    raise argparse.ArgumentTypeError(
        "expected multiscale, constant, theorem2, calibrated or calibrated:<file>"
    )


def _alpha_type(value: str) -> float:
    a = float(value)
    if not 0 < a <= 1:
        raise argparse.ArgumentTypeError("alpha must lie in (0, 1]")
    return a


def _output_flags(p):
    p.add_argument("-o", "--output", help="write here instead of standard output")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def _method_flags(p, threshold_default="constant", reps_default=1000):
    p.add_argument("--algo", choices=("local", "reverse"), default="reverse")
    p.add_argument("--threshold", type=_threshold_type, default=threshold_default)
    p.add_argument("--c", type=float, help="threshold offset; calibrated when omitted")
    p.add_argument("--a", type=float, help="slope for --threshold theorem2")
    p.add_argument("--alpha", type=_alpha_type, default=0.05)
    p.add_argument("--r", type=float, default=1.2, help="geometric ratio of window lengths")
    p.add_argument("--h", type=float, default=10.0, help="largest window aspect ratio")
    p.add_argument("--admission", choices=("interval", "disjoint"), default="interval")
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=reps_default)
    p.add_argument("--permute", action="store_true", help="calibrate by within-sequence permutation")
    p.add_argument("--sigma", type=float, help="noise scale; estimated from differences if omitted")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="segscan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="segment one sequence")
    p.add_argument("input")
    p.add_argument("--row", type=int, help="1-based row to use from a multi-row file")
    p.add_argument("--stat", choices=("single", "hc", "bj", "score"), default="single")
    _method_flags(p, threshold_default="calibrated")
    _output_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("multiseg", help="segment aligned sequences jointly")
    p.add_argument("input")
    p.add_argument("--stat", choices=("single", "hc", "bj", "score"), default="hc")
    p.add_argument("--top", type=int, default=10, help="length of the reported ranking")
    _method_flags(p, threshold_default="calibrated")
    _output_flags(p)
    p.set_defaults(func=cmd_multiseg)

    p = sub.add_parser("simulate", help="benchmark on a built-in scenario")
    p.add_argument("--scenario", default="example1")
    p.add_argument("--sigma-noise", type=float, default=0.25)
    p.add_argument("--mc", type=int, default=1000, help="null replicates for calibration")
    _method_flags(p, threshold_default="calibrated")
    _output_flags(p)
    p.set_defaults(func=cmd_simulate, format="csv")

    p = sub.add_parser("calibrate", help="calibrate and save a threshold policy")
    p.add_argument("input", nargs="?")
    p.add_argument("--length", type=int, help="sequence length when no input is given")
    p.add_argument("--n-seq", type=int, default=1)
    p.add_argument("--stat", choices=("single", "hc", "bj", "score"), default="single")
    _method_flags(p, threshold_default="calibrated")
    _output_flags(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("ascn", help="allele-specific two-channel segmentation")
    p.add_argument("y", help="total-intensity file")
    p.add_argument("z", help="allelic-channel file")
    p.add_argument("--kind", choices=("bj", "hc"), default="bj")
    p.add_argument("--algo", choices=("local", "reverse"), default="reverse")
    p.add_argument("--c", type=float)
    p.add_argument("--alpha", type=_alpha_type, default=0.05)
    p.add_argument("--r", type=float, default=1.2)
    p.add_argument("--h", type=float, default=10.0)
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=200)
    _output_flags(p)
    p.set_defaults(func=cmd_ascn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except (InputError, ValueError, KeyError) as exc:
        msg = exc.args[0] if exc.args else str(exc)
        print(f"segscan {args.command}: error: {msg}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report anything else as a runtime failure
        print(f"segscan {args.command}: runtime error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
