"""Command-line front end.

    predbands fit-cops --data cars.csv --x horsepower --y mpg --bins 8 \\
        --scheme equal-count --hx 14 --hy 1.4 --variant conditional_density

Every subcommand writes CSV (or a text report for ``tune``) to ``--out`` and
prints a one-line summary.  Exit status: 0 success, 2 user error, 3 numeric
failure.  ``--config FILE`` supplies ``key=value`` defaults that explicit
flags override.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io as bio
from .baseline import linear_baseline
from .conformal import default_kernels, default_y_grid, slicer_band
from .cops import VARIANTS, build_partition, cops_band
from .density import Dataset
from .kernels import FAMILIES, KernelSpec
from .simulation import (
    LW_SUPPORT,
    MODELS,
    NumericError,
    SyntheticModel,
    coverage_report,
    loglog_slope,
    oracle_band,
    rate_trend,
    sample,
)
from .tuning import TuningGrid, TuningInfeasible, default_tuning_grid, tune_cops

COMMANDS = ("fit-slicer", "fit-cops", "tune", "simulate", "coverage", "oracle", "rate")


class UsageError(Exception):
    pass


def _floats(s: str) -> list[float]:
    return [float(v) for v in s.split(",") if v.strip()]


def _ints(s: str) -> list[int]:
    return [int(v) for v in s.split(",") if v.strip()]


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value file of defaults")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (default: standard output)")
    p.add_argument("--y-grid-points", type=int, default=512)
    p.add_argument("--x-grid-points", type=int, default=101)
    p.add_argument("--threshold", choices=("alpha", "alpha-tilde"), default="alpha")
    p.add_argument("--kernel", choices=FAMILIES, default="gaussian")


def _data_source(p: argparse.ArgumentParser):
    p.add_argument("--data", help="CSV file with a header row")
    p.add_argument("--x", help="predictor column(s), comma separated")
    p.add_argument("--y", help="response column")
    p.add_argument("--transform", choices=("none", "reciprocal"), default="none")
    p.add_argument("--model", choices=MODELS, help="draw a synthetic sample instead of --data")
    p.add_argument("--n", type=int, default=1000)


def _partition_args(p: argparse.ArgumentParser):
    p.add_argument("--bins", type=int, help="number of bins")
    p.add_argument("--width", type=float, help="bin width (equal-width only)")
    p.add_argument("--scheme", choices=("equal-width", "equal-count"), default="equal-width")
    p.add_argument("--n-min", type=int, default=20)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="predbands", description="Distribution-free prediction bands")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-slicer", help="marginally valid band from the joint KDE")
    _common(p)
    _data_source(p)
    p.add_argument("--hx", type=float)
    p.add_argument("--hy", type=float)

    p = sub.add_parser("fit-cops", help="locally valid COPS band")
    _common(p)
    _data_source(p)
    _partition_args(p)
    p.add_argument("--hx", type=float)
    p.add_argument("--hy", type=float)
    p.add_argument("--variant", choices=VARIANTS, default="local_marginal")
    p.add_argument("--linear-baseline", metavar="PATH", help="also write the OLS band here")

    p = sub.add_parser("tune", help="choose bin width and bandwidths by sample splitting")
    _common(p)
    _data_source(p)
    p.add_argument("--widths", type=_floats)
    p.add_argument("--bandwidths", type=_floats)
    p.add_argument("--n-min", type=int, default=20)
    p.add_argument("--report", help="tuning report path (default: <out>.tuning.txt)")

    p = sub.add_parser("simulate", help="fit a band to a synthetic sample")
    _common(p)
    p.add_argument("--model", choices=MODELS, default="lw_mixture")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--method", choices=("cops", "slicer"), default="cops")
    _partition_args(p)
    p.add_argument("--hx", type=float)
    p.add_argument("--hy", type=float)
    p.add_argument("--test-draws", type=int, default=10000)

    p = sub.add_parser("coverage", help="Monte Carlo coverage of a saved band")
    _common(p)
    p.add_argument("--band", required=True)
    p.add_argument("--model", choices=MODELS, default="lw_mixture")
    p.add_argument("--reps", type=int, default=5000)
    p.add_argument("--bins", type=int, help="report coverage in this many equal-width bins")

    p = sub.add_parser("oracle", help="conditional oracle band of a synthetic model")
    _common(p)
    p.add_argument("--model", choices=MODELS, default="lw_mixture")
    p.add_argument("--x-lo", type=float)
    p.add_argument("--x-hi", type=float)

    p = sub.add_parser("rate", help="distance to the oracle as n grows")
    _common(p)
    p.add_argument("--model", choices=MODELS, default="lw_mixture")
    p.add_argument("--n-list", type=_ints, default=[200, 500, 1000, 2000])
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--w0", type=float, default=0.3)
    p.add_argument("--h0", type=float, default=0.3)
    p.add_argument("--n0", type=int, default=1000)
    return parser


def _config_argv(argv: list[str]) -> list[str]:
    """Splice ``--config`` entries in front of the explicit flags."""
    if "--config" not in argv or not argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        return argv
    conf = bio.read_config(argv[i + 1])
    extra = []
    for k, v in conf.items():
        extra += [f"--{k.replace('_', '-')}", v]
    return argv[:1] + extra + argv[1:]


def _load_data(args) -> Dataset:
    if args.data:
        if not args.x or not args.y:
            raise UsageError("--data needs --x and --y")
        data = bio.load_csv(args.data, args.x, args.y)
        dropped = data.meta.get("dropped", 0)
        if dropped:
            print(f"dropped {dropped} rows with missing values", file=sys.stderr)
    elif args.model:
        data = sample(SyntheticModel(args.model), args.n, args.seed)
    else:
        raise UsageError("give --data (with --x/--y) or --model")
    if args.transform == "reciprocal":
        if np.any(data.y == 0):
            raise UsageError("reciprocal transform needs nonzero responses")
        data = Dataset(data.x, 1.0 / data.y, data.x_names, f"1/{data.y_name}", dict(data.meta))
    return data


def _kernels(args, data: Dataset):
    kx, ky = default_kernels(data, args.kernel)
    if getattr(args, "hx", None) is not None:
        kx = [KernelSpec(args.kernel, args.hx)] * data.d
    if getattr(args, "hy", None) is not None:
        ky = KernelSpec(args.kernel, args.hy)
    return kx, ky


def _x_grid(data: Dataset, m: int):
    if data.d != 1:
        return data.x
    return np.linspace(data.x[:, 0].min(), data.x[:, 0].max(), m)


def _partition(args, data: Dataset, support=None):
    scheme = args.scheme.replace("-", "_")
    if scheme == "equal_count":
        if data.d > 1:
            raise UsageError("--scheme equal-count requires a single predictor")
        if args.bins is None:
            raise UsageError("--scheme equal-count needs --bins")
        return build_partition(data, scheme, args.bins, support=support)
    if args.width is not None:
        w = args.width
    elif args.bins is not None:
        lo, hi = support if support is not None else (data.x.min(axis=0).min(), data.x.max(axis=0).max())
        w = (hi - lo) / args.bins
    else:
        raise UsageError("give --bins or --width")
    return build_partition(data, scheme, w, support=support)


def _emit(args, text: str):
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _summary(band, extra: str = "") -> str:
    return f"{band.method} alpha={band.alpha:g} mean_measure={band.measures().mean():.6g}{extra}"


def _meta(args, data, kx, ky, partition=None, **more):
    meta = {
        "kernel": args.kernel,
        "bandwidths": ",".join(f"{k.bandwidth:.10g}" for k in list(kx) + [ky]),
        "partition": partition.describe() if partition is not None else "none",
        "seed": args.seed,
        "fingerprint": bio.fingerprint(data),
        "threshold": args.threshold,
    }
    if getattr(args, "transform", "none") != "none":
        meta["transform"] = args.transform
    meta.update(more)
    return meta


def cmd_fit_slicer(args):
    data = _load_data(args)
    kx, ky = _kernels(args, data)
    yg = default_y_grid(data, ky, args.y_grid_points)
    band = slicer_band(data, kx, ky, args.alpha, _x_grid(data, args.x_grid_points), yg)
    _emit(args, bio.format_band(band, _meta(args, data, kx, ky)))
    return _summary(band)


def _fit_cops(args, data, support=None):
    kx, ky = _kernels(args, data)
    part = _partition(args, data, support)
    yg = default_y_grid(data, ky, args.y_grid_points)
    if support is not None:
        xg = np.linspace(*support, args.x_grid_points)
    else:
        xg = _x_grid(data, args.x_grid_points)
    band = cops_band(
        data, part, ky, args.alpha, yg, xg,
        variant=getattr(args, "variant", "local_marginal"), kx=kx,
        n_min=args.n_min, threshold=args.threshold,
    )
    return band, part, kx, ky


def cmd_fit_cops(args):
    data = _load_data(args)
    band, part, kx, ky = _fit_cops(args, data)
    _emit(args, bio.format_band(band, _meta(args, data, kx, ky, part, variant=args.variant)))
    extra = ""
    cov = band.covers(data.x, data.y).mean()
    extra += f" in_sample_coverage={cov:.4f}"
    if args.linear_baseline:
        base = linear_baseline(data, args.alpha, band.x_grid[:, 0])
        bio.write_band(args.linear_baseline, base, _meta(args, data, kx, ky))
        extra += f" linear_in_sample_coverage={base.covers(data.x, data.y).mean():.4f}"
    return _summary(band, extra)


def cmd_tune(args):
    data = _load_data(args)
    grid = default_tuning_grid(data)
    if args.widths or args.bandwidths:
        grid = TuningGrid(tuple(args.widths or grid.widths), tuple(args.bandwidths or grid.bandwidths))
    support = LW_SUPPORT if args.model == "lw_mixture" and not args.data else None
    result, band = tune_cops(
        data, grid, args.alpha, seed=args.seed, family=args.kernel, n_min=args.n_min,
        support=support, threshold=args.threshold,
        x_grid=np.linspace(*(support or (data.x.min(), data.x.max())), args.x_grid_points) if data.d == 1 else None,
    )
    ky = KernelSpec(args.kernel, band.info["bandwidths"][0])
    meta = _meta(args, data, [], ky, None, chosen_w=f"{result.chosen_w:.10g}")
    meta["bandwidths"] = ",".join(f"{h:.10g}" for h in band.info["bandwidths"])
    meta["partition"] = band.info["partition"]
    _emit(args, bio.format_band(band, meta))
    report = args.report or (f"{args.out}.tuning.txt" if args.out else None)
    if report:
        Path(report).write_text(result.report())
    else:
        sys.stdout.write(result.report())
    return _summary(band, f" chosen_w={result.chosen_w:.6g}")


def cmd_simulate(args):
    model = SyntheticModel(args.model)
    data = sample(model, args.n, args.seed)
    args.transform = "none"
    if args.method == "cops":
        band, part, kx, ky = _fit_cops(args, data, model.x_support)
    else:
        kx, ky = _kernels(args, data)
        part = None
        lo, hi = model.x_support or (data.x.min(), data.x.max())
        band = slicer_band(
            data, kx, ky, args.alpha, np.linspace(lo, hi, args.x_grid_points),
            default_y_grid(data, ky, args.y_grid_points),
        )
    rep = coverage_report(band, model, args.test_draws, args.seed + 1, conditional=False)
    _emit(args, bio.format_band(band, _meta(args, data, kx, ky, part, model=args.model)))
    return _summary(band, f" marginal_coverage={rep.marginal[0]:.4f}")


def cmd_coverage(args):
    band, meta = bio.read_band(args.band)
    model = SyntheticModel(args.model)
    locator = None
    if args.bins:
        support = model.x_support or (band.x_grid.min(), band.x_grid.max())
        edges = np.linspace(support[0], support[1], args.bins + 1)
        locator = lambda x: np.searchsorted(edges[1:-1], np.asarray(x).ravel(), side="right")
    rep = coverage_report(band, model, args.reps, args.seed, locator=locator)
    _emit(args, bio.format_coverage(rep, {"band": args.band, "model": args.model}))
    return f"coverage {band.method} alpha={band.alpha:g} marginal={rep.marginal[0]:.4f} se={rep.marginal[1]:.4f}"


def cmd_oracle(args):
    model = SyntheticModel(args.model)
    lo, hi = model.x_support or (-3.0, 3.0)
    lo = args.x_lo if args.x_lo is not None else lo
    hi = args.x_hi if args.x_hi is not None else hi
    band = oracle_band(model, args.alpha, np.linspace(lo, hi, args.x_grid_points))
    _emit(args, bio.format_band(band, {"model": args.model, "seed": args.seed}))
    return _summary(band)


def cmd_rate(args):
    model = SyntheticModel(args.model)
    table = rate_trend(
        model, [args.alpha], args.n_list, args.reps, args.seed,
        n0=args.n0, w0=args.w0, h0=args.h0, y_points=args.y_grid_points, family=args.kernel,
    )
    lines = [f"# model={args.model}", f"# alpha={args.alpha!r}", f"# seed={args.seed}", "n,w,h,median_sup,median_mean"]
    lines += [f"{r['n']},{r['w']!r},{r['h']!r},{r['median_sup']!r},{r['median_mean']!r}" for r in table]
    _emit(args, "\n".join(lines) + "\n")
    return f"rate alpha={args.alpha:g} slope={loglog_slope(table):.4f}"


HANDLERS = {
    "fit-slicer": cmd_fit_slicer,
    "fit-cops": cmd_fit_cops,
    "tune": cmd_tune,
    "simulate": cmd_simulate,
    "coverage": cmd_coverage,
    "oracle": cmd_oracle,
    "rate": cmd_rate,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _config_argv(argv)
    except (OSError, bio.DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not 0 < args.alpha < 1:
        print("error: alpha must lie in (0,1)", file=sys.stderr)
        return 2
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            summary = HANDLERS[args.command](args)
    except (UsageError, bio.DataError, TuningInfeasible, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, FloatingPointError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    print(summary, file=sys.stderr if not args.out else sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
