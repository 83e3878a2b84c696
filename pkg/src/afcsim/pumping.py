"""Optical pumping: pit burning with chirped scans and comb creation by
two-pulse coherent burn-back.

Pulse sequences are plain text::

    # comments start with '#'
    wait_ms 1.0
    BurnPit1  +31.85 +24.15 3/2g->1/2e        # chirp scan
    BurnPit2  +23.85 +16.15 3/2g->5/2e 1.0    # optional relative power
    Peak0     burnback 0.0 200 0.3            # center MHz, chirp kHz, transfer
    Repeat 60: BurnPit5, BurnPit6
    Repeat 30 times: BurnPit1-4, BurnPit6-10  # numeric ranges expand

A chirp scan excites every transition of every ion class that falls inside
the scanned interval; the 1 ms wait after each pulse is long compared with
the excited-state lifetime, so all excitation decays back to the ground
levels with the branching ratios of :class:`~afcsim.levels.HyperfineScheme`
before the next pulse.
"""

from __future__ import annotations

import logging
import math
import re
import warnings
from dataclasses import dataclass, field

import numpy as np

from .levels import (
    HyperfineScheme,
    TransitionLabel,
    afc_bandwidth_limit,
)
from .population import PopulationField, SpectralGrid, synthesize_absorption

log = logging.getLogger(__name__)

CHIRP_SCAN = "chirp_scan"
BURNBACK_PAIR = "burnback_pair"
_EDGE_TOL = 1e-9  # MHz


class SequenceParseError(ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


class PitError(ValueError):
    """Comb requested where there is no empty pit to hold it."""


class PumpingWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PulseSpec:
    name: str
    kind: str
    nu_start: float = 0.0
    nu_end: float = 0.0
    target: TransitionLabel | None = None
    relative_power: float = 1.0
    center: float = 0.0
    chirp_width: float = 0.0  # kHz
    transfer_efficiency: float = 0.0

    def __post_init__(self):
        if self.kind == CHIRP_SCAN:
            if self.nu_start == self.nu_end:
                raise ValueError(f"{self.name}: chirp scan needs nu_start != nu_end")
            if self.target is None:
                raise ValueError(f"{self.name}: chirp scan needs a target transition")
        elif self.kind == BURNBACK_PAIR:
            if not self.chirp_width > 0:
                raise ValueError(f"{self.name}: burn-back chirp width must be positive")
            if not 0.0 <= self.transfer_efficiency <= 1.0:
                raise ValueError(f"{self.name}: transfer efficiency must lie in [0, 1]")
        else:
            raise ValueError(f"unknown pulse kind {self.kind!r}")
        if not self.relative_power >= 0:
            raise ValueError(f"{self.name}: relative power must be >= 0")

    @property
    def band(self) -> tuple[float, float]:
        return min(self.nu_start, self.nu_end), max(self.nu_start, self.nu_end)


@dataclass
class SequenceProgram:
    blocks: list = field(default_factory=list)  # [(repeat_count, [names])]
    inter_pulse_wait: float = 1.0  # ms

    def pulse_names(self):
        """Flattened execution order."""
        for count, names in self.blocks:
            for _ in range(count):
                yield from names

    def __len__(self):
        return sum(count * len(names) for count, names in self.blocks)


@dataclass(frozen=True)
class PumpingModel:
    """Calibration constants of the pumping model.

    kappa: excitation exponent for a target-matched pulse, p = 1 - exp(-kappa * x).
    profile_order: exponent of the burn-back spectral profile (2 = Gaussian).
    chirp_scale, laser_linewidth: burn-back profile FWHM is
        hypot(chirp_scale * chirp_width, laser_linewidth), both in kHz.
    background_coeff: flat depth added per unit burn-back power.
    pit_threshold: fraction of the reference depth below which a frequency
        counts as inside the pit.
    edge_reach: 1/e distance (MHz) over which a scan still excites
        transitions just beyond its end points; 0 gives hard band edges.
    """

    kappa: float = 2.0
    profile_order: float = 2.0
    chirp_scale: float = 0.73
    laser_linewidth: float = 80.0
    background_coeff: float = 0.0
    pit_threshold: float = 0.05
    edge_reach: float = 0.1

    def profile_fwhm(self, chirp_width: float) -> float:
        """Burn-back profile FWHM in kHz for a given sechyp chirp width."""
        return math.hypot(self.chirp_scale * chirp_width, self.laser_linewidth)


# ----------------------------------------------------------------- parsing

_REPEAT = re.compile(r"^\s*repeat\s+(\S+)(\s+times)?\s*:(.*)$", re.IGNORECASE)
_RANGE = re.compile(r"^([A-Za-z_][A-Za-z_]*?)(\d+)-(\d+)$")


def _number(token, line, col, what):
    try:
        value = float(token)
    except ValueError:
        raise SequenceParseError(f"malformed {what} {token!r}", line, col) from None
    if not math.isfinite(value):
        raise SequenceParseError(f"{what} must be finite", line, col)
    return value


def _tokens(text):
    """Split on whitespace/commas, keeping 1-based column positions."""
    return [(m.group(), m.start() + 1) for m in re.finditer(r"[^\s,]+", text)]


def _expand(item, line, col):
    m = _RANGE.match(item)
    if not m:
        return [item]
    prefix, a, b = m.group(1), int(m.group(2)), int(m.group(3))
    if b < a:
        raise SequenceParseError(f"descending range {item!r}", line, col)
    return [f"{prefix}{i}" for i in range(a, b + 1)]


def parse_sequence(text: str) -> tuple[dict, SequenceProgram]:
    """Parse a pulse-sequence file into ``(pulses_by_name, program)``."""
    pulses: dict[str, PulseSpec] = {}
    program = SequenceProgram()
    pending = []  # repeat blocks are resolved after all pulses are known
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        m = _REPEAT.match(body)
        if m:
            count_tok = m.group(1)
            col = body.lower().index("repeat") + 7
            try:
                count = int(count_tok)
            except ValueError:
                raise SequenceParseError(f"malformed repeat count {count_tok!r}", lineno, col) from None
            if count < 1:
                raise SequenceParseError("repeat count must be >= 1", lineno, col)
            offset = m.start(3)
            names = []
            for tok, c in _tokens(m.group(3)):
                names.extend((n, lineno, offset + c) for n in _expand(tok, lineno, offset + c))
            if not names:
                raise SequenceParseError("repeat block lists no pulses", lineno, offset + 1)
            pending.append((count, names))
            continue

        toks = _tokens(body)
        head, col0 = toks[0]
        if head.lower() in ("wait", "wait_ms"):
            if len(toks) != 2:
                raise SequenceParseError("expected 'wait_ms <milliseconds>'", lineno, col0)
            program.inter_pulse_wait = _number(toks[1][0], lineno, toks[1][1], "wait time")
            continue
        if head.lower() in ("pulse", "pulses", "name") and len(toks) == 1:
            continue  # tolerated header line
        if not re.match(r"^[A-Za-z_]\w*$", head):
            raise SequenceParseError(f"invalid pulse name {head!r}", lineno, col0)
        if head in pulses:
            raise SequenceParseError(f"duplicate pulse definition {head!r}", lineno, col0)
        if len(toks) >= 2 and toks[1][0].lower() == "burnback":
            if len(toks) != 5:
                raise SequenceParseError(
                    "burnback row needs: name burnback <center MHz> <chirp kHz> <transfer>",
                    lineno, col0)
            vals = [_number(t, lineno, c, w) for (t, c), w in
                    zip(toks[2:], ("center", "chirp width", "transfer efficiency"))]
            try:
                pulses[head] = PulseSpec(head, BURNBACK_PAIR, center=vals[0],
                                         chirp_width=vals[1], transfer_efficiency=vals[2])
            except ValueError as exc:
                raise SequenceParseError(str(exc), lineno, toks[2][1]) from None
            continue
        if len(toks) not in (4, 5):
            raise SequenceParseError(
                "pulse row needs: name <nu_start> <nu_end> <transition> [relative_power]",
                lineno, col0)
        start = _number(toks[1][0], lineno, toks[1][1], "start frequency")
        end = _number(toks[2][0], lineno, toks[2][1], "end frequency")
        try:
            target = TransitionLabel.parse(toks[3][0])
        except ValueError:
            raise SequenceParseError(f"unknown transition label {toks[3][0]!r}",
                                     lineno, toks[3][1]) from None
        power = _number(toks[4][0], lineno, toks[4][1], "relative power") if len(toks) == 5 else 1.0
        try:
            pulses[head] = PulseSpec(head, CHIRP_SCAN, start, end, target, power)
        except ValueError as exc:
            raise SequenceParseError(str(exc), lineno, col0) from None

    if not pulses:
        raise SequenceParseError("no pulses defined")
    for count, names in pending:
        for name, line, col in names:
            if name not in pulses:
                raise SequenceParseError(f"repeat block references undefined pulse {name!r}", line, col)
        program.blocks.append((count, [n for n, _, _ in names]))
    return pulses, program


def format_sequence(pulses: dict, program: SequenceProgram) -> str:
    """Canonical text form; ``parse_sequence`` of it reproduces the input."""
    lines = [f"wait_ms {program.inter_pulse_wait:g}"]
    for p in pulses.values():
        if p.kind == CHIRP_SCAN:
            lines.append(f"{p.name} {p.nu_start:+g} {p.nu_end:+g} {p.target} {p.relative_power:g}")
        else:
            lines.append(f"{p.name} burnback {p.center:g} {p.chirp_width:g} {p.transfer_efficiency:g}")
    for count, names in program.blocks:
        lines.append(f"Repeat {count}: " + ", ".join(names))
    return "\n".join(lines) + "\n"


def load_sequence(path) -> tuple[dict, SequenceProgram]:
    with open(path) as fh:
        return parse_sequence(fh.read())


# ----------------------------------------------------------------- dynamics

def _note(fld: PopulationField, message: str):
    fld.warnings.append(message)
    log.warning(message)
    warnings.warn(message, PumpingWarning, stacklevel=3)


def apply_chirp_scan(fld: PopulationField, scheme: HyperfineScheme, pulse: PulseSpec,
                     model: PumpingModel = PumpingModel()) -> PopulationField:
    """One chirped optical-pumping scan followed by full spontaneous decay.

    A ground level with in-band transitions ``e`` is excited with total
    probability ``1 - exp(-sum_e x_e)``, ``x_e = kappa * P * s(g, e) / s(target)``,
    shared between the in-band excited levels in proportion to ``x_e``.
    Excited population then returns to the ground levels by branching ratio.
    Scan direction does not matter in this model.
    """
    if pulse.kind != CHIRP_SCAN:
        raise ValueError(f"{pulse.name} is not a chirp scan")
    out = fld.copy()
    if pulse.relative_power == 0:
        return out
    lo, hi = pulse.band
    offsets = scheme.offset_matrix
    grid = fld.grid
    reach = 6 * model.edge_reach
    if (lo - reach - offsets.max() < grid.nu_min - _EDGE_TOL
            or hi + reach - offsets.min() > grid.nu_max + _EDGE_TOL):
        _note(out, f"{pulse.name}: scan [{lo}, {hi}] MHz reaches ion classes outside the "
                   f"simulated window; clipped")

    freq = fld.class_detunings[:, None, None] + offsets[None, :, :]
    outside = np.maximum(lo - freq, freq - hi)
    s = scheme.strengths
    drive = model.kappa * pulse.relative_power * s / scheme.strength(pulse.target)
    if model.edge_reach > 0:
        wing = np.exp(-(np.maximum(outside, 0.0) / model.edge_reach) ** 2)
        wing[outside > 6 * model.edge_reach] = 0.0
    else:
        wing = (outside <= _EDGE_TOL).astype(float)
    x = wing * drive[None, :, :]                           # (n, g, e)
    xg = x.sum(axis=2)                                     # (n, g)
    frac = -np.expm1(-xg)
    share = np.divide(x, xg[:, :, None], out=np.zeros_like(x), where=xg[:, :, None] > 0)
    excited = (fld.occupations * frac)[:, :, None] * share  # (n, g, e)
    per_e = excited.sum(axis=1)                            # (n, e)
    out.occupations = fld.occupations * (1.0 - frac) + per_e @ scheme.branching
    return out


def burnback_profile(detunings, center: float, chirp_width: float, transfer: float,
                     model: PumpingModel = PumpingModel()) -> np.ndarray:
    """Fraction of the 5/2g reservoir moved to 1/2g for each class.

    The pulse pair's spectral profile ``S`` (super-Gaussian of order
    ``model.profile_order``) acts as a local pulse area, so the transferred
    fraction is ``1 - (1 - transfer) ** S``: equal to ``transfer`` at the
    centre and saturation-broadened as ``transfer`` approaches 1.
    """
    w = model.profile_fwhm(chirp_width) * 1e-3
    u = np.abs(2.0 * (np.asarray(detunings, dtype=float) - center) / w)
    support = u <= 8.0
    shape = np.where(support, np.exp(-math.log(2.0) * u ** model.profile_order), 0.0)
    if transfer >= 1.0:
        return np.where(shape > 0, 1.0, 0.0)
    return -np.expm1(shape * math.log1p(-transfer))


def apply_burnback(fld: PopulationField, scheme: HyperfineScheme, pulse: PulseSpec,
                   model: PumpingModel = PumpingModel()) -> PopulationField:
    """Coherent 5/2g -> 5/2e -> 1/2g transfer for classes near ``pulse.center``."""
    if pulse.kind != BURNBACK_PAIR:
        raise ValueError(f"{pulse.name} is not a burn-back pulse pair")
    if not 0.0 <= pulse.transfer_efficiency <= 1.0:
        raise ValueError("transfer efficiency must lie in [0, 1]")
    out = fld.copy()
    if pulse.transfer_efficiency == 0:
        return out
    f = burnback_profile(fld.class_detunings, pulse.center, pulse.chirp_width,
                         pulse.transfer_efficiency, model)
    moved = f * fld.occupations[:, 2]
    out.occupations[:, 2] -= moved
    out.occupations[:, 0] += moved
    if model.background_coeff:
        out.background += model.background_coeff * burnback_power(pulse.transfer_efficiency)
    return out


def burnback_power(transfer: float) -> float:
    """Pulse power (pulse-area units) that yields the given central transfer."""
    return math.inf if transfer >= 1.0 else -math.log1p(-transfer)


def burnback_transfer(power: float) -> float:
    return -math.expm1(-power)


def apply_pulse(fld, scheme, pulse, model=PumpingModel()):
    if pulse.kind == CHIRP_SCAN:
        return apply_chirp_scan(fld, scheme, pulse, model)
    return apply_burnback(fld, scheme, pulse, model)


def run_program(fld: PopulationField, scheme: HyperfineScheme, pulses: dict,
                program: SequenceProgram, model: PumpingModel = PumpingModel()) -> PopulationField:
    """Apply every pulse of ``program`` in order."""
    for name in program.pulse_names():
        fld = apply_pulse(fld, scheme, pulses[name], model)
    return fld


def pit_mask(fld: PopulationField, scheme: HyperfineScheme, nu, model=PumpingModel()):
    """True where the total absorption is below the pit threshold."""
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    step = fld.grid.step
    lo, hi = nu.min() - step, nu.max() + step
    spec = synthesize_absorption(fld, scheme, SpectralGrid(lo, hi + step, step))
    d = np.interp(nu, spec.nu, spec.d)
    return d < model.pit_threshold * max(fld.reference_depth, 1e-12)


def create_afc(fld: PopulationField, scheme: HyperfineScheme, n_peaks: int, delta: float,
               chirp_width: float, power: float, model: PumpingModel = PumpingModel(),
               first_center: float = 0.0) -> PopulationField:
    """Burn ``n_peaks`` peaks back into a prepared pit at ``first_center + k * delta``.

    ``power`` is the burn-back pulse power; the central transfer fraction is
    ``1 - exp(-power)``.
    """
    if n_peaks < 1:
        raise ValueError("n_peaks must be >= 1")
    if n_peaks > 1 and not delta > 0:
        raise ValueError("comb period must be positive")
    if power < 0:
        raise ValueError("power must be >= 0")
    span = (n_peaks - 1) * delta
    limit = afc_bandwidth_limit(scheme)
    if span > limit:
        warnings.warn(
            f"comb span {span:g} MHz exceeds the {limit:g} MHz bandwidth set by the "
            f"excited-state splitting", PumpingWarning, stacklevel=2)
    centers = first_center + delta * np.arange(n_peaks)
    half = 2.0 * model.profile_fwhm(chirp_width) * 1e-3
    probe = np.concatenate([centers - half, centers, centers + half])
    if not np.all(pit_mask(fld, scheme, probe, model)):
        raise PitError("comb would extend outside the empty pit")
    transfer = burnback_transfer(power)
    for k, c in enumerate(centers):
        pulse = PulseSpec(f"peak{k}", BURNBACK_PAIR, center=float(c),
                          chirp_width=chirp_width, transfer_efficiency=transfer)
        fld = apply_burnback(fld, scheme, pulse, model)
    return fld

