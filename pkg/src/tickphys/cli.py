"""Command line front end: one subcommand per pipeline plus synthetic
generation and the built-in acceptance suite.

Every subcommand requires --out DIR and drops a manifest.json next to its
artifacts.  Artifacts are collected in memory and written together, so a
failing run leaves no partial output; reruns with identical flags and
inputs are byte-identical except for the manifest's started/finished
stamps.  Exit codes: 0 success, 1 usage, 2 data, 3 fit failure.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DataError, FitError, TickphysError, UsageError
from .hurst import DfaConfig, local_hurst
from .invstat import (
    ExitTimeConfig,
    entry_time_distribution,
    exit_times,
    first_passage_hist,
    fit_first_passage,
    fit_tail_power_law,
    optimal_horizon,
)
from .market_data import RegularSeries, parse_book, parse_regular_series, serialize_regular_series
from .numerics import linfit
from .obrelax import (
    fit_stretched_exp,
    imbalance_series,
    mean_relaxation_from_fit,
    relaxation_hist,
    relaxation_times,
)
from .synth import FbmSpec, gen_brownian, gen_fbm, gen_tick_walk

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_FIT = 3


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems instead of calling sys.exit."""

    def error(self, message):
        raise UsageError(message)


def _utcnow() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat()


def _digest(paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        h.update(Path(p).read_bytes())
    return h.hexdigest()


def _manifest(subcommand: str, params: dict, input_paths, started: str) -> str:
    doc = {
        "subcommand": subcommand,
        "parameters": params,
        "input_digest": _digest(input_paths),
        "tool_version": __version__,
        "started": started,
        "finished": _utcnow(),
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _write_all(out_dir: str, files: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)


def _fmt(x) -> str:
    return repr(float(x))


def _json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _pdf_csv(hist) -> str:
    rows = ["# columns: tau_lo,tau_hi,density"]
    for i in range(len(hist)):
        rows.append(f"{_fmt(hist.edges[i])},{_fmt(hist.edges[i + 1])},{_fmt(hist.densities[i])}")
    return "\n".join(rows) + "\n"


def _parse_int_list(text: str, flag: str) -> list:
    try:
        vals = [int(p) for p in text.split(",") if p != ""]
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated integers, got {text!r}")
    if not vals:
        raise UsageError(f"{flag} is empty")
    return vals


def _parse_float_list(text: str, flag: str) -> list:
    try:
        vals = [float(p) for p in text.split(",") if p != ""]
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated numbers, got {text!r}")
    if not vals:
        raise UsageError(f"{flag} is empty")
    return vals


# ------------------------------------------------------------- subcommands


def _cmd_synth(args) -> int:
    started = _utcnow()
    if args.n < 2:
        raise UsageError("--n must be at least 2")
    if args.model == "fbm":
        if args.hurst is None:
            raise UsageError("--hurst is required for --model fbm")
        if not 0.0 < args.hurst < 1.0:
            raise UsageError("--hurst must lie in (0, 1)")
        path = gen_fbm(FbmSpec(hurst=args.hurst, n=args.n, scale=args.scale, seed=args.seed))
    elif args.model == "brownian":
        path = gen_brownian(args.n, scale=args.scale, seed=args.seed)
    else:
        path = gen_tick_walk(args.n, p_zero=args.p_zero, seed=args.seed).astype(float)
    series = RegularSeries(start_ns=0, interval_ns=1, values=np.asarray(path, dtype=float))
    params = {
        "model": args.model,
        "n": args.n,
        "seed": args.seed,
        "scale": args.scale,
        "hurst": args.hurst,
        "p_zero": args.p_zero,
    }
    _write_all(
        args.out,
        {
            "series.csv": serialize_regular_series(series),
            "manifest.json": _manifest("synth", params, [], started),
        },
    )
    return EXIT_OK


def _cmd_hurst(args) -> int:
    started = _utcnow()
    if args.window < 8:
        raise UsageError("--window must be at least 8")
    if args.shift < 1:
        raise UsageError("--shift must be at least 1")
    series = parse_regular_series(Path(args.input).read_text())
    if args.boxes:
        try:
            lo, hi, count = (int(p) for p in args.boxes.split(":"))
        except ValueError:
            raise UsageError(f"--boxes expects min:max:count, got {args.boxes!r}")
        sizes = tuple(np.unique(np.round(np.geomspace(lo, hi, count)).astype(int)))
        config = DfaConfig(box_sizes=sizes, poly_order=args.order)
    else:
        config = DfaConfig.for_length(args.window - 1, poly_order=args.order)
    hs = local_hurst(series, args.window, args.shift, config)

    rows = ["# columns: t,h,stderr"]
    for t, h, se in zip(hs.times, hs.h, hs.stderr):
        rows.append(f"{int(t)},{_fmt(h)},{_fmt(se)}")
    finite = hs.h[np.isfinite(hs.h)]
    summary = {
        "mean": float(finite.mean()) if finite.size else None,
        "sd": float(finite.std(ddof=1)) if finite.size > 1 else 0.0,
        "n_windows": int(finite.size),
    }
    params = {
        "input": args.input,
        "window": args.window,
        "shift": args.shift,
        "boxes": args.boxes,
        "order": args.order,
    }
    _write_all(
        args.out,
        {
            "hurst.csv": "\n".join(rows) + "\n",
            "summary.json": _json(summary),
            "manifest.json": _manifest("hurst", params, [args.input], started),
        },
    )
    return EXIT_OK


def _cmd_invstat(args) -> int:
    started = _utcnow()
    targets = _parse_int_list(args.target, "--target")
    if any(r < 1 for r in targets):
        raise UsageError("--target values must be >= 1 tick")
    series = parse_regular_series(Path(args.input).read_text())

    files = {}
    scaling_rows = ["# columns: R,tau_star"]
    for r in targets:
        cfg = ExitTimeConfig(threshold=r, direction=args.direction, clock=args.clock)
        exits = exit_times(series, cfg)
        hist = first_passage_hist(exits, args.bins_per_decade, min_samples=args.min_samples)
        fit = fit_first_passage(hist)
        tau_star = optimal_horizon(fit)
        files[f"pdf_R{r}.csv"] = _pdf_csv(hist)
        files[f"fit_R{r}.json"] = _json(
            {
                "alpha": fit.alpha,
                "nu": fit.nu,
                "beta": fit.beta,
                "tau0": fit.tau0,
                "sse": fit.sse,
                "tau_star": tau_star,
                "n_resolved": len(exits),
                "n_censored": exits.censored_count,
            }
        )
        entry_rows = ["# columns: start_s,end_s,count,rate_per_hour"]
        if np.any(np.isfinite(exits.entry_second)):
            for row in entry_time_distribution(exits, bin_seconds=args.entry_bin_seconds):
                entry_rows.append(
                    f"{_fmt(row.start_second)},{_fmt(row.end_second)},"
                    f"{row.count},{_fmt(row.rate_per_hour)}"
                )
        files[f"entry_R{r}.csv"] = "\n".join(entry_rows) + "\n"
        scaling_rows.append(f"{r},{_fmt(tau_star)}")
    files["scaling.csv"] = "\n".join(scaling_rows) + "\n"

    params = {
        "input": args.input,
        "target": args.target,
        "direction": args.direction,
        "clock": args.clock,
        "bins_per_decade": args.bins_per_decade,
        "min_samples": args.min_samples,
    }
    files["manifest.json"] = _manifest("invstat", params, [args.input], started)
    _write_all(args.out, files)
    return EXIT_OK


def _cmd_relax(args) -> int:
    started = _utcnow()
    kappas = _parse_float_list(args.kappa, "--kappa")
    if any(not 0.0 < k < 1.0 for k in kappas):
        raise UsageError("--kappa values must lie in (0, 1)")
    if args.depth < 1:
        raise UsageError("--depth must be at least 1")
    snaps, _, _ = parse_book(Path(args.input).read_text())
    sig = imbalance_series(snaps, depth=args.depth)
    clock = {"ticks": "event", "trades": "trade"}[args.clock]

    files = {}
    mean_rows = ["# columns: kappa,mean_tau,n_resolved,n_censored"]
    for kappa in kappas:
        samples = relaxation_times(sig, kappa, clock=clock)
        hist = relaxation_hist(samples, args.bins_per_decade, min_samples=args.min_samples)
        fit = fit_stretched_exp(hist)
        occ = np.nonzero(hist.occupied)[0]
        x = np.log(hist.centers[occ])
        y = np.log(hist.densities[occ])
        power = linfit(x, y)
        resid = y - (power.intercept + power.slope * x)
        tag = f"{kappa:g}"
        files[f"pdf_k{tag}.csv"] = _pdf_csv(hist)
        files[f"fit_k{tag}.json"] = _json(
            {
                "tau_tilde": fit.tau_tilde,
                "alpha": fit.alpha,
                "sse_stretched": fit.sse,
                "gamma": -power.slope,
                "sse_power": float(resid @ resid),
                "mean_tau": mean_relaxation_from_fit(fit),
            }
        )
        resolved = samples.resolved_tau
        mean_rows.append(
            f"{_fmt(kappa)},{_fmt(resolved.mean())},{resolved.size},{samples.censored_count}"
        )
    files["mean_vs_kappa.csv"] = "\n".join(mean_rows) + "\n"

    params = {
        "input": args.input,
        "kappa": args.kappa,
        "depth": args.depth,
        "clock": args.clock,
        "bins_per_decade": args.bins_per_decade,
        "min_samples": args.min_samples,
    }
    files["manifest.json"] = _manifest("relax", params, [args.input], started)
    _write_all(args.out, files)
    return EXIT_OK


def _cmd_selftest(args) -> int:
    from . import selftest

    started = _utcnow()
    indices = [args.criterion] if args.criterion else None
    results = selftest.run_selftest(indices)
    for res in results:
        print(selftest.format_line(res))
    report = {
        "criteria": [
            {
                "criterion": r.index,
                "name": r.name,
                "measured": r.measured,
                "expected": r.expected,
                "tolerance": r.tolerance,
                "pass": r.passed,
            }
            for r in results
        ],
        "all_pass": all(r.passed for r in results),
    }
    params = {"criterion": args.criterion}
    _write_all(
        args.out,
        {
            "report.json": _json(report),
            "manifest.json": _manifest("selftest", params, [], started),
        },
    )
    return EXIT_OK


# ------------------------------------------------------------------ wiring


def _build_parser() -> _Parser:
    parser = _Parser(prog="tickphys", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", help="generate a synthetic price series")
    p.add_argument("--model", required=True, choices=("fbm", "brownian", "tickwalk"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--hurst", type=float, default=None)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--p-zero", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("hurst", help="local Hurst exponents of a series")
    p.add_argument("--input", required=True)
    p.add_argument("--window", type=int, required=True)
    p.add_argument("--shift", type=int, default=1)
    p.add_argument("--boxes", default=None, metavar="MIN:MAX:COUNT")
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_hurst)

    p = sub.add_parser("invstat", help="first-passage statistics of a series")
    p.add_argument("--input", required=True)
    p.add_argument("--target", required=True, metavar="R[,R2,...]")
    p.add_argument("--direction", default="up", choices=("up", "down", "both"))
    p.add_argument("--clock", default="tick", choices=("tick", "wall"))
    p.add_argument("--bins-per-decade", type=int, default=10)
    p.add_argument("--min-samples", type=int, default=100)
    p.add_argument("--entry-bin-seconds", type=float, default=1800.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_invstat)

    p = sub.add_parser("relax", help="imbalance relaxation times of a book file")
    p.add_argument("--input", required=True)
    p.add_argument("--kappa", required=True, metavar="K[,K2,...]")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--clock", default="ticks", choices=("ticks", "trades"))
    p.add_argument("--bins-per-decade", type=int, default=10)
    p.add_argument("--min-samples", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_relax)

    p = sub.add_parser("selftest", help="run the synthetic acceptance suite")
    p.add_argument("--criterion", type=int, default=None, choices=range(1, 12))
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_selftest)

    return parser


def run(argv) -> int:
    """Dispatch argv; returns the process exit code instead of raising."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (DataError, TickphysError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
