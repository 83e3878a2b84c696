"""End-to-end experiment steps shared by the command line and the tests."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import analytic
from .config import ExperimentConfig, SeriesConfig
from .population import (
    AbsorptionSpectrum,
    PopulationField,
    SpectralGrid,
    synthesize_absorption,
    uniform_field,
)
from .probe import CombFit, FitError, fit_comb, infer_from_readout, scan_spectrum
from .propagation import InputPulse, TimeTrace, default_windows, measure_efficiency, propagate
from .pumping import create_afc, load_sequence, run_program


def initial_field(cfg: ExperimentConfig) -> PopulationField:
    g = cfg.grid
    return uniform_field(SpectralGrid(g.nu_min, g.nu_max, g.step), g.background_depth, cfg.scheme)


def prepare_pit(cfg: ExperimentConfig, sequence=None) -> tuple[PopulationField, PopulationField]:
    """Run the pit-burning schedule; returns (unprepared, prepared) fields."""
    pulses, program = sequence if sequence is not None else load_sequence(cfg.sequence)
    before = initial_field(cfg)
    return before, run_program(before, cfg.scheme, pulses, program, cfg.pumping)


def probe_grid(cfg: ExperimentConfig) -> SpectralGrid:
    return SpectralGrid(cfg.probe.nu_min, cfg.probe.nu_max, cfg.grid.step)


def total_spectrum(fld: PopulationField, cfg: ExperimentConfig) -> AbsorptionSpectrum:
    """All nine transitions summed over the probe range."""
    return synthesize_absorption(fld, cfg.scheme, probe_grid(cfg))


def pit_residual(spec: AbsorptionSpectrum, cfg: ExperimentConfig) -> float:
    """Largest depth inside the pit check interval."""
    p = cfg.pit
    sel = (spec.nu >= p.check_min - 1e-9) & (spec.nu <= p.check_max + 1e-9)
    return float(spec.d[sel].max())


def build_comb(pit: PopulationField, cfg: ExperimentConfig, chirp_width=None, power=None,
               background_coeff=None) -> PopulationField:
    c = cfg.comb
    model = cfg.pumping
    if background_coeff is not None:
        model = replace(model, background_coeff=background_coeff)
    return create_afc(pit, cfg.scheme, c.n_peaks, c.delta,
                      c.chirp_width if chirp_width is None else chirp_width,
                      c.power if power is None else power, model, c.first_center)


def readout(comb: PopulationField, cfg: ExperimentConfig
            ) -> tuple[AbsorptionSpectrum, AbsorptionSpectrum, CombFit]:
    """Scan the weak transition, infer the storage-transition depth, fit the comb."""
    c, p = cfg.comb, cfg.probe
    off = cfg.scheme.offset_matrix
    rd = cfg.readout
    shift = off[rd.g, rd.e] - off[cfg.storage.g, cfg.storage.e]
    lo = c.first_center - p.scan_margin + shift
    hi = c.first_center + (c.n_peaks - 1) * c.delta + p.scan_margin + shift
    weak = scan_spectrum(comb, cfg.scheme, rd, (lo, hi), p.scan_points,
                         noise=p.noise, seed=cfg.seed)
    strong = infer_from_readout(weak, cfg.scheme, rd, cfg.storage)
    return weak, strong, fit_comb(strong)


def input_pulse(cfg: ExperimentConfig) -> InputPulse:
    return InputPulse(cfg.pulse.fwhm_duration, cfg.carrier())


def send(spec: AbsorptionSpectrum, cfg: ExperimentConfig) -> TimeTrace:
    pr = cfg.propagation
    return propagate(input_pulse(cfg), spec, window=pr.window, span=pr.span,
                     dispersion=pr.dispersion)


@dataclass
class EchoResult:
    fit: CombFit | None
    transmission: float
    eta: float
    echo_delay: float
    reference: TimeTrace
    output: TimeTrace
    spectrum: AbsorptionSpectrum

    def theory(self, finesse=None, convention="single"):
        """(T, eta) of the closed-form model at the fitted depth."""
        if self.fit is None:
            return 1.0, 0.0
        p = self.fit.params
        f = p.finesse if finesse is None else finesse
        d_eff = p.d / f
        return analytic.transmission(d_eff), analytic.efficiency(d_eff, f, convention)


def echo_experiment(pit: PopulationField, cfg: ExperimentConfig, comb: PopulationField | None = None,
                    reference: TimeTrace | None = None, fit: bool = True) -> EchoResult:
    """Reference pulse through the empty pit, then the storage pulse through the comb."""
    if reference is None:
        reference = send(total_spectrum(pit, cfg), cfg)
    if comb is None:
        comb = build_comb(pit, cfg)
    spec = total_spectrum(comb, cfg)
    out = send(spec, cfg)
    transmitted, echo = default_windows(reference, cfg.comb.delta)
    res = measure_efficiency(out, reference, echo, transmitted)
    try:
        delay = out.centroid(echo) - out.centroid(transmitted)
    except ValueError:
        delay = math.nan
    comb_fit = None
    if fit:
        try:
            comb_fit = readout(comb, cfg)[2]
        except FitError:
            comb_fit = None  # e.g. an empty pit: nothing to fit
    return EchoResult(comb_fit, res.transmission, res.eta, delay, reference, out, spec)


SWEEP_BASE_COLUMNS = ["power", "d", "gamma_kHz", "F", "T_meas", "eta_meas"]


def sweep_columns(series: SeriesConfig) -> list[str]:
    cols = list(SWEEP_BASE_COLUMNS)
    for f in series.theory_finesse:
        tag = f"{f:g}"
        cols += [f"T_theory_F{tag}", f"eta_theory_F{tag}"]
    return cols + ["status"]


def _sweep_point(args):
    pit, cfg, series, power, reference = args
    try:
        comb = build_comb(pit, cfg, series.chirp_width, power, cfg.sweep.background_coeff)
        res = echo_experiment(pit, cfg, comb=comb, reference=reference)
        p = res.fit.params
        row = [power, p.d, p.gamma, p.finesse, res.transmission, res.eta]
        for f in series.theory_finesse:
            row += list(res.theory(f))
        return row + ["ok"]
    except Exception as exc:  # one bad point must not sink the sweep
        n = len(sweep_columns(series)) - 2
        return [power] + [math.nan] * n + [f"error: {type(exc).__name__}: {exc}"]


def run_sweep(pit: PopulationField, cfg: ExperimentConfig, series: SeriesConfig,
              workers: int = 1) -> list[list]:
    """One row per back-burn power; theory columns per requested finesse."""
    reference = send(total_spectrum(pit, cfg), cfg)
    jobs = [(pit, cfg, series, float(p), reference) for p in cfg.sweep.powers]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_point, jobs))
    return [_sweep_point(j) for j in jobs]


def theory_rows(cfg: ExperimentConfig) -> list[tuple]:
    t = cfg.theory
    n = int(round((t.d_max - t.d_min) / t.d_step)) + 1
    ds = t.d_min + t.d_step * np.arange(n)
    rows = []
    for f in t.finesse:
        for d, T, eta in analytic.theory_table(f, ds):
            rows.append((f, d, d / f, T, eta, analytic.efficiency(d / f, f, "squared")))
    return rows
