"""``nrcsim`` command-line front end.

Exit codes: 0 success, 1 usage error, 2 invalid config or input, 3 runtime
failure. Without ``--out`` the CSV goes to standard output and summaries to
standard error; with ``--out`` the CSV, a ``.manifest.json`` sidecar and a
PNG figure are written next to each other and summaries go to standard output.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Callable, Sequence

from . import __version__, experiments, io, plotting
from .experiments import SENSITIVITY_GROUPS, SweepSpec
from .model import NrcsimError, ValidationError, db_to_linear, linear_to_db, precoder_kinds

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2, 3

DEFAULT_LEVEL_GRID_DB = tuple(float(x) for x in range(-40, -9))


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _u64(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 unsigned bits, got {value}")
    return value


def _nonneg(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return value


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default="baseline",
                   help="config file or built-in name (default: %(default)s)")
    p.add_argument("--out", help="CSV output path; also writes <out>.manifest.json and a PNG")
    p.add_argument("--seed", type=_u64, help="override the config seed")
    p.add_argument("--realizations", type=int, help="Monte Carlo realizations per point")
    p.add_argument("--threads", type=_nonneg,
                   help="worker threads, 0 = one per CPU (default: $NRCSIM_THREADS or 0)")
    p.add_argument("--freeze-nrc", action="store_true",
                   help="hold one NRC draw fixed across realizations (non-default model)")
    p.add_argument("--no-plot", action="store_true", help="skip the figure")
    p.add_argument("--precoders", nargs="+", metavar="P", help="subset of ZF MRT")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nrcsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_, grid_help=None, engines=False):
        p = sub.add_parser(name, help=help_)
        _common(p)
        if grid_help:
            p.add_argument("--grid", type=float, nargs="+", metavar="X", help=grid_help)
        if engines:
            p.add_argument("--engines", nargs="+", choices=experiments.ENGINES,
                           default=["analytic"], help="default: analytic")
        return p

    add("analytic", "closed-form sweep", "override the config grid")
    add("mc", "Monte Carlo sweep", "override the config grid")
    add("compare", "both engines plus the max SINR deviation", "override the config grid")
    p = add("sensitivity", "one NRC source at a time",
            "NRC levels in dB (default -40..-10)", engines=True)
    p.add_argument("--groups", nargs="+", choices=tuple(SENSITIVITY_GROUPS),
                   default=list(SENSITIVITY_GROUPS))
    p = add("kopt", "optimal number of users vs NRC level", "NRC levels in dB (default -40..-10)")
    p.add_argument("--rho-d-db", type=float, nargs="+", default=[0.0, 20.0])
    p = add("max-nrc", "largest NRC level meeting a target SINR")
    p.add_argument("--target-sinr-db", type=float, nargs="+", required=True)
    p.add_argument("--rho-d-db", type=float, nargs="+",
                   help="downlink SNRs (default: the config value)")
    p.add_argument("--level-hi-db", type=float, default=0.0,
                   help="upper end of the search bracket (default: %(default)s)")
    add("asymptote", "BS-antenna sweep with the large-N saturation",
        "BS antenna counts (default: config grid for n_bs sweeps, else 30..10000)", engines=True)
    return parser


def _spec(args) -> SweepSpec:
    _, _, spec = io.parse_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.realizations is not None:
        changes["mc_realizations"] = args.realizations
    if args.threads is not None:
        changes["threads"] = args.threads
    if args.freeze_nrc:
        changes["freeze_nrc"] = True
    if args.precoders:
        try:
            changes["precoders"] = precoder_kinds(args.precoders)
        except ValueError:
            raise ValidationError(f"unknown precoder in {args.precoders}; use ZF and/or MRT")
    return replace(spec, **changes)


def _level_grid(args, spec: SweepSpec) -> tuple[float, ...]:
    if getattr(args, "grid", None):
        return tuple(args.grid)
    if spec.variable in ("nrc_level_db", "single_nrc_param"):
        return spec.grid
    return DEFAULT_LEVEL_GRID_DB


class _Output:
    """Routes the CSV, manifest, figure and summary lines."""

    def __init__(self, args, command: str, spec: SweepSpec):
        self.args, self.command, self.spec = args, command, spec
        self.started = time.perf_counter()
        if args.out:
            try:
                Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise io.IoError(f"cannot create the directory for {args.out}: {exc}") from exc

    def say(self, line: str) -> None:
        print(line, file=sys.stdout if self.args.out else sys.stderr)

    def write(self, rows, emit: Callable, plot: Callable | None) -> None:
        if not self.args.out:
            emit(rows, sys.stdout)
            return
        emit(rows, self.args.out)
        outputs = [self.args.out]
        if plot and not self.args.no_plot:
            outputs.append(plot(rows, io.figure_path(self.args.out)))
        io.RunManifest.build(self.command, self.spec, self.started, outputs).write(
            io.manifest_path(self.args.out))


def _cmd_sweep(args, engines: Sequence[str]) -> None:
    spec = _spec(args)
    spec = spec.with_(engines=tuple(engines), grid=tuple(args.grid) if args.grid else spec.grid)
    out = _Output(args, args.command, spec)
    rows = experiments.run_sweep(spec)
    if args.command == "compare":
        out.say(f"max |dSINR| (mc vs analytic, per antenna) = "
                f"{experiments.max_deviation_db(rows):.4f} dB")
    out.write(rows, io.emit_csv, lambda r, p: plotting.plot_sweep(r, p))


def _cmd_sensitivity(args) -> None:
    spec = _spec(args)
    spec = spec.with_(engines=tuple(args.engines), grid=_level_grid(args, spec))
    out = _Output(args, "sensitivity", spec)
    rows = experiments.run_single_param_sensitivity(spec, args.groups)
    out.write(rows, io.emit_csv, lambda r, p: plotting.plot_sweep(r, p, metric="alpha"))


def _cmd_kopt(args) -> None:
    spec = _spec(args)
    spec = spec.with_(grid=_level_grid(args, spec))
    out = _Output(args, "kopt", spec)
    rows = experiments.run_kopt_study(spec, args.rho_d_db)
    out.write(rows, lambda r, d: io.emit_table(r, d, _KOPT_HEADER), plotting.plot_kopt)


def _cmd_max_nrc(args) -> None:
    spec = _spec(args)
    snrs = args.rho_d_db or [linear_to_db(spec.base.rho_d)]
    out = _Output(args, "max-nrc", spec)
    rows = experiments.run_max_nrc_study(spec, args.target_sinr_db, snrs,
                                         level_hi=db_to_linear(args.level_hi_db))
    for r in rows:
        level = f"{r.max_level_db:.4f} dB" if r.feasible else "infeasible"
        out.say(f"{r.precoder} rho_d={r.rho_d_db:g} dB target={r.target_sinr_db:g} dB: "
                f"max NRC level {level}")
    out.write(rows, lambda r, d: io.emit_table(r, d, _MAXNRC_HEADER), plotting.plot_max_nrc)


def _cmd_asymptote(args) -> None:
    spec = _spec(args)
    if args.grid:
        grid = tuple(args.grid)
    elif spec.variable == "n_bs":
        grid = spec.grid
    else:
        grid = experiments.DEFAULT_ASYMPTOTE_GRID
    spec = spec.with_(variable="n_bs", grid=grid, engines=tuple(args.engines))
    out = _Output(args, "asymptote", spec)
    rows = experiments.run_asymptote(spec)
    out.write(rows, io.emit_csv, lambda r, p: plotting.plot_sweep(r, p, log_x=True))


_KOPT_HEADER = ("nrc_level_db", "rho_d_db", "precoder", "k_opt", "spectral_efficiency")
_MAXNRC_HEADER = ("target_sinr_db", "precoder", "rho_d_db", "max_level_db", "feasible")

_COMMANDS: dict[str, Callable] = {
    "analytic": lambda a: _cmd_sweep(a, ("analytic",)),
    "mc": lambda a: _cmd_sweep(a, ("mc",)),
    "compare": lambda a: _cmd_sweep(a, ("analytic", "mc")),
    "sensitivity": _cmd_sensitivity,
    "kopt": _cmd_kopt,
    "max-nrc": _cmd_max_nrc,
    "asymptote": _cmd_asymptote,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        _COMMANDS[args.command](args)
    except (ValidationError, io.ParseError) as exc:
        print(f"nrcsim: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except BrokenPipeError:
        # downstream reader closed early (e.g. `| head`); not an error
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except (NrcsimError, OSError) as exc:
        print(f"nrcsim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
