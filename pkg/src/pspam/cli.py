"""Command-line entry point: ``pspam <command> [options]``.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import metrics, shaping
from .config import load_config, parse_grid
from .errors import ConfigError, PspamError
from .experiment import ExperimentSpec, run_point, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _add_sim_options(p, sweep=False):
    p.add_argument("--config", type=Path, help="experiment INI file (defaults used when omitted)")
    p.add_argument("--seed", type=int, help="master seed (overrides [link] seed)")
    p.add_argument("--out", type=Path, help="output directory")
    if sweep:
        p.add_argument("--values", help="grid override, start:stop:step or comma list")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
    else:
        p.add_argument("--vpp", type=float, help="DAC peak-to-peak swing in mV")
        p.add_argument("--baud", type=float, help="symbol rate in GBd")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pspam", description="Probabilistically shaped PAM-8 IM/DD link toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("design-dist", help="solve nu for a target PS overhead and print the PMF")
    p.add_argument("--ps-oh", type=float, required=True)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--polarity", choices=("cap", "cup"), default="cap")
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--out", type=Path, help="directory for pmfs/<name>.csv (stdout when omitted)")

    p = sub.add_parser("rates", help="PAS / AIR / ONBR calculator")
    p.add_argument("--H", dest="entropy", type=float, required=True, help="entropy in bits/symbol")
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--fec-oh", type=float, default=metrics.HD_FEC_OH)
    p.add_argument("--baud", type=float, required=True, help="symbol rate in GBd")
    p.add_argument("--ber", type=float, help="pre-FEC BER (enables AIR and the ONBR threshold test)")
    p.add_argument("--threshold", type=float, default=metrics.HD_FEC_THRESHOLD)

    _add_sim_options(sub.add_parser("simulate", help="run a single trial"))
    _add_sim_options(sub.add_parser("sweep-vpp", help="sweep the DAC swing"), sweep=True)
    _add_sim_options(sub.add_parser("sweep-baud", help="sweep the symbol rate"), sweep=True)
    p = sub.add_parser("histogram", help="per-level histograms of one trial")
    _add_sim_options(p)
    p.add_argument("--bins", type=int, default=180)
    return parser


def _load_spec(args) -> ExperimentSpec:
    spec = load_config(args.config) if args.config else ExperimentSpec()
    link = spec.link
    if args.seed is not None:
        link = link.with_(seed=args.seed)
    if getattr(args, "vpp", None) is not None:
        link = link.with_(vpp_dac=args.vpp)
    if getattr(args, "baud", None) is not None:
        link = link.with_(symbol_rate=args.baud)
    return replace(spec, link=link)


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.2f}"


def cmd_design_dist(args) -> int:
    dist = shaping.design(args.ps_oh, args.alpha, args.polarity, args.m)
    h = shaping.entropy(dist)
    print(f"# nu={dist.nu:.12g} alpha={dist.alpha:g} polarity={dist.polarity} "
          f"entropy={h:.6f} ps_oh={metrics.ps_overhead(h, args.m):.6f}")
    if args.out:
        path = dist.to_csv(args.out / "pmfs" / f"{args.polarity}-a{args.alpha:g}.csv")
        print(f"# written {path}")
    print("level,probability")
    for level, p in zip(dist.levels, dist.probabilities):
        print(f"{int(level)},{p:.12g}")
    return EXIT_OK


def cmd_rates(args) -> int:
    h, m = args.entropy, args.m
    se = metrics.se_pas(h, m, args.fec_oh)
    print(f"PS OH        {100 * metrics.ps_overhead(h, m):.4f} %")
    print(f"total OH     {100 * metrics.total_overhead(h, m, args.fec_oh):.4f} %")
    print(f"SE (PAS)     {se:.5f} bit/symbol")
    if args.ber is None:
        print(f"ONBR         {args.baud * se:.2f} Gb/s")
        return EXIT_OK
    sehd = metrics.se_hd(h, m, args.ber)
    print(f"H2(BER)      {metrics.binary_entropy(args.ber):.6f}")
    print(f"SE (HD)      {sehd:.5f} bit/symbol")
    print(f"AIR          {metrics.air(args.baud, sehd):.2f} Gb/s")
    rate = metrics.onbr(args.baud, h, m, args.fec_oh, args.ber, args.threshold)
    print(f"ONBR         {_fmt(rate)}{'' if rate is None else ' Gb/s'}")
    return EXIT_OK


def _print_reports(reports):
    for r in reports:
        print(f"{r.meta['format']:>10} {r.meta['equalizer']:>5} vpp={r.meta['vpp_mV']:g}mV "
              f"baud={r.symbol_rate:g}GBd BER={r.ber:.3e} AIR={r.air_gbps:.2f}Gb/s "
              f"ONBR={_fmt(r.onbr_gbps)} ER={r.extinction_ratio_db:.2f}dB")


def _single_point(spec: ExperimentSpec):
    if spec.sweep_axis == "vpp_dac":
        point = spec.link.vpp_dac
    elif spec.sweep_axis == "symbol_rate":
        point = spec.link.symbol_rate
    else:
        point = spec.distribution.alpha
    return run_point(spec, point, spec.link.seed)


def cmd_simulate(args) -> int:
    spec = _load_spec(args)
    reports = _single_point(spec)
    _print_reports(reports)
    if args.out:
        from .experiment import write_results_csv
        rows = [{**{k: r.meta[k] for k in ("vpp_mV", "symbol_rate_GBd", "format", "equalizer")},
                 **r.row()} for r in reports]
        write_results_csv(rows, args.out / "results.csv")
    return EXIT_OK


def cmd_histogram(args) -> int:
    spec = replace(_load_spec(args), histogram_bins=args.bins)
    reports = _single_point(spec)
    out = args.out or Path(".")
    for r in reports:
        path = r.level_histograms.to_csv(out / "histograms" / f"{r.meta['format']}_{r.meta['equalizer']}.csv")
        print(f"{r.meta['equalizer']}: BER={r.ber:.3e} overlap={r.level_histograms.overlap_mass():.4f} -> {path}")
    return EXIT_OK


def _cmd_sweep(args, axis) -> int:
    spec = _load_spec(args)
    if args.values:
        grid = parse_grid(args.values)
    elif spec.sweep_axis == axis:
        grid = spec.grid
    elif axis == "symbol_rate":
        grid = tuple(float(v) for v in range(100, 131, 5))
    else:
        grid = spec.grid
    spec = replace(spec, sweep_axis=axis, grid=grid)
    result = run_sweep(spec, jobs=args.jobs)
    _print_reports(r for _, r in result.reports)
    for index, point, msg in result.failures:
        print(f"point {index} ({point:g}) failed: {msg}", file=sys.stderr)
    if args.out:
        print(f"# written {result.write(args.out)}")
    return EXIT_OK if result.reports else EXIT_RUNTIME


COMMANDS = {
    "design-dist": cmd_design_dist,
    "rates": cmd_rates,
    "simulate": cmd_simulate,
    "histogram": cmd_histogram,
    "sweep-vpp": lambda a: _cmd_sweep(a, "vpp_dac"),
    "sweep-baud": lambda a: _cmd_sweep(a, "symbol_rate"),
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        if args.command in ("design-dist", "rates"):
            # flag values are the whole configuration for the calculators
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (PspamError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
