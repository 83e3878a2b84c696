"""Command-line batch runner.

    afcsim theory  [--finesse 3,4,5]
    afcsim pit     [--config run.ini] [--out DIR] [--sequence FILE]
    afcsim comb    [--power P] [--chirp-width KHZ]
    afcsim echo    [--power P] [--chirp-width KHZ]
    afcsim sweep   [--workers N] [--powers 0.1,0.2]
    afcsim fit     SPECTRUM.csv [--readout]

Exit status: 0 success, 1 usage or input error, 2 simulation failure,
3 acceptance check failed.  Every run writes ``manifest.json`` with the
SHA-256 of each output and the effective configuration.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, pipeline
from .analytic import CONVENTIONS, efficiency
from .config import ConfigError, ExperimentConfig, load_config
from .levels import SchemeError, max_pit_width
from .population import AbsorptionSpectrum
from .probe import FitError, fit_comb, infer_from_readout
from .propagation import AliasingError, default_windows
from .pumping import PitError, SequenceParseError

log = logging.getLogger("afcsim")

EXIT_OK, EXIT_USAGE, EXIT_SIMULATION, EXIT_ACCEPTANCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class AcceptanceFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{float(v):.10g}"
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _float_list(text: str) -> tuple:
    try:
        vals = tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


class Run:
    """Output directory plus the bookkeeping for the manifest."""

    def __init__(self, out: Path, command: str, cfg: ExperimentConfig, figures: bool):
        self.out = out
        self.command = command
        self.cfg = cfg
        self.figures = figures
        self.files: list[str] = []
        self.results: dict = {}
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out / name

    def figure(self, name: str, fn, *args, **kwargs) -> None:
        if self.figures:
            fn(*args, self.path(name), **kwargs)

    def manifest(self, status: str) -> None:
        outputs = {}
        for name in sorted(set(self.files)):
            p = self.out / name
            if p.exists():
                outputs[name] = hashlib.sha256(p.read_bytes()).hexdigest()
        doc = {
            "command": self.command,
            "config": self.cfg.as_dict(),
            "outputs": outputs,
            "results": self.results,
            "status": status,
            "version": __version__,
        }
        with open(self.out / "manifest.json", "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=_fmt)
            fh.write("\n")


def _figs():
    from . import figures  # matplotlib is only imported when asked for
    return figures


def _pit(run: Run, args) -> tuple:
    if not Path(run.cfg.sequence).is_file():
        raise UsageError(f"sequence file not found: {run.cfg.sequence}")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        before, pit = pipeline.prepare_pit(run.cfg)
    for w in {str(w.message) for w in caught}:
        log.warning(w)
    return before, pit


def cmd_theory(run: Run, args) -> int:
    cfg = run.cfg
    if args.finesse:
        cfg = replace(cfg, theory=replace(cfg.theory, finesse=args.finesse))
    rows = pipeline.theory_rows(cfg)
    header = ["F", "d", "d_eff", "T", "eta", "eta_squared"]
    write_csv(run.path("theory.csv"), header, rows)
    if not args.quiet:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    run.figure("theory.png", _figs().plot_theory, rows)
    return EXIT_OK


def cmd_pit(run: Run, args) -> int:
    cfg = run.cfg
    before, pit = _pit(run, args)
    s0 = pipeline.total_spectrum(before, cfg)
    s1 = pipeline.total_spectrum(pit, cfg)
    s0.to_csv(run.path("pit_before.csv"))
    s1.to_csv(run.path("pit_after.csv"))
    pit.save(run.path("population.npz"))
    residual = pipeline.pit_residual(s1, cfg)
    bound = cfg.pit.max_fraction * cfg.grid.background_depth
    drift = abs(pit.total_population() - before.total_population()) / before.total_population()
    ok = residual < bound
    write_csv(run.path("pit_summary.csv"), ["quantity", "value"], [
        ("check_min_MHz", cfg.pit.check_min),
        ("check_max_MHz", cfg.pit.check_max),
        ("max_d_in_pit", residual),
        ("bound", bound),
        ("max_pit_width_MHz", max_pit_width(cfg.scheme)),
        ("population_drift", drift),
        ("warnings", len(pit.warnings)),
        ("passed", ok),
    ])
    run.results.update(max_d_in_pit=residual, bound=bound, passed=ok)
    run.figure("pit.png", _figs().plot_pit, s0, s1, check=(cfg.pit.check_min, cfg.pit.check_max))
    print(f"pit: max d in [{cfg.pit.check_min:g}, {cfg.pit.check_max:g}] MHz = {residual:.4g} "
          f"(bound {bound:.4g}) {'ok' if ok else 'FAILED'}")
    if not ok and not args.no_check:
        raise AcceptanceFailure(f"pit residual {residual:.4g} exceeds {bound:.4g}")
    return EXIT_OK


def _comb_overrides(cfg, args):
    comb = cfg.comb
    if args.power is not None:
        comb = replace(comb, power=args.power)
    if args.chirp_width is not None:
        comb = replace(comb, chirp_width=args.chirp_width)
    return replace(cfg, comb=comb)


def cmd_comb(run: Run, args) -> int:
    cfg = run.cfg
    _, pit = _pit(run, args)
    comb = pipeline.build_comb(pit, cfg)
    pipeline.total_spectrum(comb, cfg).to_csv(run.path("comb_spectrum.csv"))
    comb.save(run.path("population.npz"))
    weak, strong, fit = pipeline.readout(comb, cfg)
    weak.to_csv(run.path("readout_weak.csv"))
    strong.to_csv(run.path("readout_inferred.csv"))
    fit.write_csv(run.path("comb_fit.csv"))
    q = fit.params
    run.results.update(d=q.d, gamma_kHz=q.gamma, delta_MHz=q.delta, F=q.finesse)
    run.figure("comb.png", _figs().plot_comb, strong, fit)
    print(f"comb: d = {q.d:.4g}, gamma = {q.gamma:.4g} kHz, delta = {q.delta:.4g} MHz, "
          f"F = {q.finesse:.4g}")
    return EXIT_OK


def cmd_echo(run: Run, args) -> int:
    cfg = run.cfg
    _, pit = _pit(run, args)
    res = pipeline.echo_experiment(pit, cfg)
    res.reference.to_csv(run.path("trace_reference.csv"))
    res.output.to_csv(run.path("trace_echo.csv"))
    rows = [("T_meas", res.transmission), ("eta_meas", res.eta),
            ("echo_delay_us", res.echo_delay)]
    if res.fit is not None:
        q = res.fit.params
        rows += [("d", q.d), ("gamma_kHz", q.gamma), ("delta_MHz", q.delta), ("F", q.finesse)]
        for conv in CONVENTIONS:
            t, eta = res.theory(convention=conv)
            rows += [(f"T_theory_{conv}", t), (f"eta_theory_{conv}", eta)]
        res.fit.write_csv(run.path("comb_fit.csv"))
    write_csv(run.path("echo_summary.csv"), ["quantity", "value"], rows)
    run.results.update(dict(rows))
    run.figure("echo.png", _figs().plot_echo, res.reference, res.output,
               windows=default_windows(res.reference, cfg.comb.delta))
    print(f"echo: T = {res.transmission:.4f}, eta = {res.eta:.4f}, "
          f"delay = {res.echo_delay * 1e3:.1f} ns")
    return EXIT_OK


def cmd_sweep(run: Run, args) -> int:
    cfg = run.cfg
    if args.powers:
        cfg = replace(cfg, sweep=replace(cfg.sweep, powers=args.powers))
    if args.background_coeff is not None:
        cfg = replace(cfg, sweep=replace(cfg.sweep, background_coeff=args.background_coeff))
    run.cfg = cfg
    series = cfg.sweep.series
    if args.series:
        wanted = set(args.series.split(","))
        series = tuple(s for s in series if s.name in wanted)
        if not series:
            raise UsageError(f"no sweep series named {args.series!r}")
    _, pit = _pit(run, args)
    summary = []
    failed = 0
    for s in series:
        rows = pipeline.run_sweep(pit, cfg, s, workers=args.workers)
        cols = pipeline.sweep_columns(s)
        write_csv(run.path(f"sweep_{s.name}.csv"), cols, rows)
        ok = [r for r in rows if r[-1] == "ok"]
        failed += len(rows) - len(ok)
        mean_gamma = float(np.mean([r[2] for r in ok])) if ok else math.nan
        mean_f = float(np.mean([r[3] for r in ok])) if ok else math.nan
        summary.append((s.name, s.chirp_width, len(rows), len(ok), mean_gamma, mean_f))
        run.figure(f"sweep_{s.name}.png", _figs().plot_sweep, cols, rows, s.theory_finesse,
                   title=f"chirp {s.chirp_width:g} kHz, mean gamma {mean_gamma:.0f} kHz")
        print(f"sweep {s.name}: {len(ok)}/{len(rows)} points, mean gamma = {mean_gamma:.4g} kHz, "
              f"mean F = {mean_f:.4g}")
    write_csv(run.path("sweep_summary.csv"),
              ["series", "chirp_width_kHz", "points", "ok", "mean_gamma_kHz", "mean_F"], summary)
    run.results.update(failed_points=failed)
    return EXIT_OK


def cmd_fit(run: Run, args) -> int:
    cfg = run.cfg
    src = args.spectrum or cfg.fit_spectrum
    if src is None:
        raise UsageError("fit needs a spectrum CSV (argument or [fit] spectrum)")
    src = Path(src)
    if not src.is_file():
        raise UsageError(f"spectrum file not found: {src}")
    try:
        spec = AbsorptionSpectrum.from_csv(src)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"cannot read {src}: {exc}") from None
    if args.readout:
        spec = infer_from_readout(spec, cfg.scheme, cfg.readout, cfg.storage)
        spec.to_csv(run.path("readout_inferred.csv"))
    fit = fit_comb(spec)
    fit.write_csv(run.path("comb_fit.csv"))
    q = fit.params
    run.results.update(d=q.d, gamma_kHz=q.gamma, delta_MHz=q.delta, F=q.finesse,
                       eta_theory=efficiency(q.d / q.finesse, q.finesse))
    print(f"fit: d = {q.d:.4g}, gamma = {q.gamma:.4g} kHz, delta = {q.delta:.4g} MHz, "
          f"F = {q.finesse:.4g}")
    return EXIT_OK


COMMANDS = {
    "theory": (cmd_theory, "closed-form transmission and efficiency tables"),
    "pit": (cmd_pit, "burn the spectral pit and check it is empty"),
    "comb": (cmd_comb, "prepare a comb and fit its readout scan"),
    "echo": (cmd_echo, "propagate the probe pulse through the comb"),
    "sweep": (cmd_sweep, "efficiency versus back-burn power"),
    "fit": (cmd_fit, "fit a comb to a spectrum CSV"),
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("-c", "--config", type=Path, help="INI experiment file")
    common.add_argument("-o", "--out", type=Path, default=Path("afcsim_out"),
                        help="output directory (default: %(default)s)")
    common.add_argument("-j", "--workers", type=int, default=1, help="sweep worker processes")
    common.add_argument("--figures", action="store_true", help="also render PNG figures")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="afcsim", description="Atomic frequency comb simulation runner.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    ps = {name: sub.add_parser(name, parents=[common], help=text)
          for name, (_, text) in COMMANDS.items()}

    ps["theory"].add_argument("--finesse", type=_float_list, help="comma-separated values")
    ps["theory"].add_argument("-q", "--quiet", action="store_true", help="do not print the table")
    for name in ("pit", "comb", "echo", "sweep"):
        ps[name].add_argument("--sequence", type=Path, help="override the pit sequence file")
    ps["pit"].add_argument("--no-check", action="store_true",
                           help="report but do not fail on the pit bound")
    for name in ("comb", "echo"):
        ps[name].add_argument("--power", type=float, help="back-burn power")
        ps[name].add_argument("--chirp-width", type=float, help="back-burn chirp (kHz)")
    ps["sweep"].add_argument("--powers", type=_float_list, help="comma-separated powers")
    ps["sweep"].add_argument("--series", help="comma-separated series names")
    ps["sweep"].add_argument("--background-coeff", type=float,
                             help="background absorption added per unit back-burn power")
    ps["fit"].add_argument("spectrum", nargs="?", type=Path, help="CSV with nu_MHz,d columns")
    ps["fit"].add_argument("--readout", action="store_true",
                           help="input is a readout-transition scan; infer the storage depth")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    try:
        cfg = load_config(args.config)
        seq = getattr(args, "sequence", None)
        if seq is not None:
            if not seq.is_file():
                raise FileNotFoundError(f"sequence file not found: {seq}")
            cfg = replace(cfg, sequence=seq)
        if "power" in args:
            cfg = _comb_overrides(cfg, args)
    except (FileNotFoundError, ConfigError, SchemeError, ValueError) as exc:
        print(f"afcsim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    run = Run(args.out, args.command, cfg, args.figures)
    func = COMMANDS[args.command][0]
    try:
        code = func(run, args)
        status = "ok"
    except UsageError as exc:
        print(f"afcsim: error: {exc}", file=sys.stderr)
        code, status = EXIT_USAGE, f"usage error: {exc}"
    except AcceptanceFailure as exc:
        print(f"afcsim: acceptance check failed: {exc}", file=sys.stderr)
        code, status = EXIT_ACCEPTANCE, f"acceptance failed: {exc}"
    except SequenceParseError as exc:
        print(f"afcsim: sequence error: {exc}", file=sys.stderr)
        code, status = EXIT_SIMULATION, f"sequence error: {exc}"
    except (AliasingError, PitError, FitError, ValueError, RuntimeError) as exc:
        print(f"afcsim: simulation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        code, status = EXIT_SIMULATION, f"{type(exc).__name__}: {exc}"
    run.manifest(status)
    return code


if __name__ == "__main__":
    sys.exit(main())
