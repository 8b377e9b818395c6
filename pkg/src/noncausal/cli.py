"""Command-line interface.

Exit status is 0 on success, 2 for usage or configuration errors and 3 when
the input data cannot be used.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import constancy as cst
from . import harness as hn
from . import quantreg as qr
from . import spectest as spt
from .distributions import FAMILIES, InnovationSpec
from .simulate import ArchSpec, MarModel, simulate_ar_arch, simulate_mar

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

EXIT_CONFIG = 2
EXIT_DATA = 3


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _param(text: str) -> tuple[str, float]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key.strip(), float(value)


GLOBAL_OPTIONS = ("seed", "threads", "config", "out")


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # subcommands repeat the flags with suppressed defaults so that values
    # given before the command name are not overwritten
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=d(0), help="master seed (default 0)")
    parser.add_argument("--threads", type=int, default=d(1), help="worker processes for Monte Carlo cells")
    parser.add_argument("--config", type=Path, default=d(None), help="TOML file with option defaults")
    parser.add_argument("--out", type=Path, default=d(None), help="output directory")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)

    parser = argparse.ArgumentParser(prog="noncausal", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    parser.commands = sub.choices

    p = sub.add_parser("simulate", parents=[common], help="simulate a MAR or AR-ARCH series")
    p.add_argument("--phi", type=float, nargs="*", default=[], help="causal coefficients")
    p.add_argument("--psi", type=float, nargs="*", default=[], help="non-causal coefficients")
    p.add_argument("--dist", default="gaussian", help=f"innovation family: {', '.join(FAMILIES)}")
    p.add_argument("--param", type=_param, action="append", default=[], help="family parameter key=value")
    p.add_argument("--standardized", action="store_true", help="rescale innovations to unit variance")
    p.add_argument("--arch", type=float, nargs=2, metavar=("G0", "G1"), help="linear ARCH(1) scale coefficients")
    p.add_argument("--T", type=int, default=500)

    p = sub.add_parser("test", parents=[common], help="run one test on a series stored as CSV")
    p.add_argument("--method", choices=hn.TESTS, required=True)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--p", type=int, help="QAR order (selected from the PACF when omitted)")
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--transform", choices=("none", "diff", "detrend"), default="none")
    p.add_argument("--interval", type=float, nargs=2, default=list(cst.DEFAULT_INTERVAL), metavar=("LO", "HI"))
    p.add_argument("--k", type=float, default=4.0, help="EV subsample size constant")
    p.add_argument("--B", type=int, default=500, help="EG bootstrap replications")

    p = sub.add_parser("table", parents=[common], help="reproduce a Monte Carlo table")
    p.add_argument("table_id", help=f"one of {', '.join(hn.TABLE_IDS)}, or 'custom' for [[cells]] in --config")
    p.add_argument("--scale", type=float, default=1.0, help="fraction of the 500 replications per cell")

    p = sub.add_parser("analyze", parents=[common], help="order selection and all tests on a series")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--transform", choices=("none", "diff", "detrend"), default="none")
    p.add_argument("--max-lag", type=int, default=10)
    p.add_argument("--tests", default="constancy,ev,eg")
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--order-rule", choices=("cutoff", "largest"), default="cutoff")
    p.add_argument("--B", type=int, default=500)
    p.add_argument("--format", choices=("json", "text"), default="json")

    p = sub.add_parser("demo-density", parents=[common], help="conditional density slices of an AR(1)")
    p.add_argument("--coef", type=float, default=0.6)
    p.add_argument("--noncausal", action="store_true")
    p.add_argument("--dist", default="exponential")
    p.add_argument("--T", type=int, default=500)
    p.add_argument("--percentiles", type=_floats, default=[10, 30, 50, 70, 90])
    p.add_argument("--neighbors", type=float, default=0.1, help="fraction of observations in each slice")

    p = sub.add_parser("critvals", parents=[common], help="simulated critical values of the constancy test")
    p.add_argument("--p", type=int, nargs="+", default=[1, 2, 7])
    p.add_argument("--interval", type=float, nargs=2, default=list(cst.DEFAULT_INTERVAL), metavar=("LO", "HI"))
    p.add_argument("--levels", type=_floats, default=list(cst.DEFAULT_LEVELS))
    p.add_argument("--reps", type=int, default=cst.CV_REPS)
    p.add_argument("--steps", type=int, default=cst.CV_STEPS)
    p.add_argument("--norm", choices=("l1", "l2", "linf"), default="l1")
    return parser


def _load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def parse(argv=None) -> tuple[argparse.Namespace, dict]:
    """Parse arguments; values from ``--config`` act as defaults.

    Top-level keys of the config apply as global options, a table named after
    the command (``[table]``, ``[test]``, ...) to that command only. Options
    given on the command line always win.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    cfg = _load_config(args.config)
    if not cfg:
        return args, cfg
    top = {k.replace("-", "_"): v for k, v in cfg.items() if not isinstance(v, (dict, list))}
    own = {k.replace("-", "_"): v for k, v in cfg.get(args.command, {}).items()}
    bad = set(top) - set(GLOBAL_OPTIONS)
    if bad:
        raise ConfigError(f"unknown global options in config: {sorted(bad)}")
    sub = parser.commands[args.command]
    known = {a.dest for a in sub._actions}
    bad = set(own) - known
    if bad:
        raise ConfigError(f"unknown options for {args.command} in config: {sorted(bad)}")
    for key in ("out", "input"):
        for d in (top, own):
            if key in d:
                d[key] = Path(d[key])
    parser.set_defaults(**top)
    sub.set_defaults(**own)
    return parser.parse_args(argv), cfg


def _emit(text: str, out_dir: Path | None, name: str) -> None:
    if out_dir is None:
        sys.stdout.write(text)
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text, encoding="utf-8")


def _cmd_simulate(args) -> None:
    spec = InnovationSpec(args.dist, dict(args.param), standardized=args.standardized)
    model = MarModel(phi=tuple(args.phi), psi=tuple(args.psi), innovation=spec)
    if args.arch is not None:
        y = simulate_ar_arch(model, ArchSpec(tuple(args.arch)), args.T, args.seed)["y"]
    else:
        y = simulate_mar(model, args.T, args.seed)
    _emit("".join(f"{v:.17g}\n" for v in y), args.out, "series.csv")


def _cmd_test(args) -> None:
    x = hn.transform_series(hn.read_series(args.input), args.transform)
    p = args.p if args.p is not None else qr.select_order(x, 10)
    if p < 1:
        raise ConfigError("the tests need an order p >= 1")
    if x.size < max(50, 4 * (p + 1)):
        raise hn.DataError(f"series has {x.size} observations, too few for order {p}")
    if args.method == "constancy":
        res = cst.constancy_test(x, p, interval=tuple(args.interval))
        tuning = {"interval": list(args.interval), "norm": res.norm}
    elif args.method == "ev":
        res = spt.ev_test(x, p, k=args.k)
        tuning = res.tuning
    else:
        res = spt.eg_test(x, p, B=args.B, seed=args.seed)
        tuning = res.tuning
    entry = hn._entry(args.method, p, res, args.level, tuning, args.seed)
    entry.pop("stars")
    _emit(json.dumps(entry, indent=2) + "\n", args.out, f"test_{args.method}.json")


def _cmd_table(args, cfg) -> None:
    if args.table_id == "custom":
        cells = cfg.get("cells")
        if not cells:
            raise ConfigError("'table custom' needs [[cells]] entries in --config")
        results = []
        for c in cells:
            c = {"seed": args.seed, **c}
            ref = c.pop("reference_rate", None)
            results.append(hn.run_cell(hn.config_from_mapping(c), threads=args.threads, reference_rate=ref))
    else:
        if args.table_id not in hn.TABLE_IDS:
            raise ConfigError(f"unknown table id {args.table_id!r}; choose from {', '.join(hn.TABLE_IDS)}")
        progress = lambda r: print(f"{r.cell_id}: {100 * r.rejection_rate:.1f}%", file=sys.stderr)  # noqa: E731
        results = hn.run_table(args.table_id, args.scale, args.seed, args.threads, progress=progress)
    if args.out is None:
        sys.stdout.write(hn.table_csv(results))
    else:
        hn.write_table(results, args.out, args.table_id)
        sys.stdout.write(hn.render_table(results))


def _cmd_analyze(args) -> None:
    tests = [t.strip() for t in args.tests.split(",") if t.strip()]
    bad = set(tests) - set(hn.TESTS)
    if bad:
        raise ConfigError(f"unknown tests {sorted(bad)}")
    report = hn.analyze_series(
        args.input, args.transform, args.max_lag, tests, args.level, args.seed, args.order_rule, args.B
    )
    if args.format == "text":
        _emit(hn.format_report(report), args.out, "analysis.txt")
    else:
        _emit(json.dumps(report, indent=2) + "\n", args.out, "analysis.json")


def _cmd_density(args) -> None:
    slices = hn.conditional_density_demo(
        args.coef, not args.noncausal, args.dist, args.T, args.percentiles, args.seed, args.neighbors
    )
    _emit(hn.density_csv(slices), args.out, "density.csv")


def _cmd_critvals(args) -> None:
    lines = ["p,level,critical_value"]
    for p in args.p:
        cvs = cst.critical_values(p, tuple(args.interval), args.levels, reps=args.reps, steps=args.steps, norm=args.norm)
        lines += [f"{p},{a:g},{v:.4f}" for a, v in cvs.items()]
    _emit("\n".join(lines) + "\n", args.out, "critical_values.csv")


def main(argv=None) -> int:
    try:
        args, cfg = parse(argv)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0) and EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "simulate":
            _cmd_simulate(args)
        elif args.command == "test":
            _cmd_test(args)
        elif args.command == "table":
            _cmd_table(args, cfg)
        elif args.command == "analyze":
            _cmd_analyze(args)
        elif args.command == "demo-density":
            _cmd_density(args)
        else:
            _cmd_critvals(args)
    except hn.DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
