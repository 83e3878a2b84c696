"""Experiment configuration files (INI).

Every key is optional; the defaults reproduce the four-peak, 1.2 MHz comb
and the 200 ns probe pulse of the reference experiment.  Example::

    [grid]
    background_depth = 60

    [comb]
    n_peaks = 4
    delta = 1.2          # MHz
    chirp_width = 160    # kHz
    power = 0.4

    [sweep]
    powers = 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8
    series = a, b

    [sweep.a]
    chirp_width = 200
    theory_finesse = 4, 5, 7
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

from .levels import HyperfineScheme, TransitionLabel, scheme_from_section
from .pumping import PumpingModel


class ConfigError(ValueError):
    pass


def bundled_sequence() -> Path:
    return Path(str(resources.files("afcsim") / "data" / "pit_table1.seq"))


@dataclass(frozen=True)
class GridConfig:
    nu_min: float = -60.0
    nu_max: float = 60.0
    step: float = 0.01
    background_depth: float = 60.0


@dataclass(frozen=True)
class PitConfig:
    check_min: float = -1.1
    check_max: float = 16.0
    max_fraction: float = 0.01


@dataclass(frozen=True)
class CombConfig:
    n_peaks: int = 4
    delta: float = 1.2
    chirp_width: float = 160.0
    power: float = 0.4
    first_center: float = 0.0


@dataclass(frozen=True)
class ProbeConfig:
    nu_min: float = -20.0
    nu_max: float = 44.0
    storage: str = "1/2g->1/2e"
    readout: str = "1/2g->5/2e"
    scan_margin: float = 0.6
    scan_points: int = 2401
    noise: float = 0.0


@dataclass(frozen=True)
class PulseConfig:
    fwhm_duration: float = 200.0
    carrier_detuning: float | None = None  # None: centre of the comb


@dataclass(frozen=True)
class PropagationConfig:
    window: float = 32.0
    span: float = 64.0
    dispersion: bool = True


@dataclass(frozen=True)
class SeriesConfig:
    name: str
    chirp_width: float
    theory_finesse: tuple


@dataclass(frozen=True)
class SweepConfig:
    powers: tuple = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8)
    series: tuple = (
        SeriesConfig("a", 200.0, (4.0, 5.0, 7.0)),
        SeriesConfig("b", 300.0, (3.0, 4.0, 5.0)),
    )
    background_coeff: float = 0.0


@dataclass(frozen=True)
class TheoryConfig:
    finesse: tuple = (3.0, 4.0, 5.0, 7.0, 10.0)
    d_min: float = 0.0
    d_max: float = 20.0
    d_step: float = 0.5


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: HyperfineScheme = field(default_factory=HyperfineScheme)
    grid: GridConfig = GridConfig()
    pumping: PumpingModel = PumpingModel()
    sequence: Path = field(default_factory=bundled_sequence)
    pit: PitConfig = PitConfig()
    comb: CombConfig = CombConfig()
    probe: ProbeConfig = ProbeConfig()
    pulse: PulseConfig = PulseConfig()
    propagation: PropagationConfig = PropagationConfig()
    sweep: SweepConfig = SweepConfig()
    theory: TheoryConfig = TheoryConfig()
    fit_spectrum: Path | None = None
    seed: int = 0

    @property
    def storage(self) -> TransitionLabel:
        return TransitionLabel.parse(self.probe.storage)

    @property
    def readout(self) -> TransitionLabel:
        return TransitionLabel.parse(self.probe.readout)

    def carrier(self) -> float:
        if self.pulse.carrier_detuning is not None:
            return self.pulse.carrier_detuning
        c = self.comb
        return c.first_center + 0.5 * (c.n_peaks - 1) * c.delta

    def as_dict(self) -> dict:
        """Plain, JSON-friendly view (used for the run manifest)."""
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "scheme":
                value = {
                    "ground_spacings": list(value.ground_spacings),
                    "excited_spacings": list(value.excited_spacings),
                    "oscillator_strengths": [list(r) for r in value.oscillator_strengths],
                    "excited_lifetime": value.excited_lifetime,
                }
            elif hasattr(value, "__dataclass_fields__"):
                value = asdict(value)
            elif isinstance(value, Path):
                value = str(value)
            out[f.name] = value
        return out


def _floats(text):
    try:
        return tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"expected a list of numbers, got {text!r}") from None


def _coerce(cls, section, name):
    """Build dataclass ``cls`` from an INI section, converting by default type."""
    kwargs = {}
    defaults = cls()
    for f in fields(cls):
        if f.name not in section:
            continue
        raw = section[f.name].strip()
        default = getattr(defaults, f.name)
        try:
            if isinstance(default, bool):
                kwargs[f.name] = section.getboolean(f.name)
            elif isinstance(default, int):
                kwargs[f.name] = int(raw)
            elif isinstance(default, tuple):
                kwargs[f.name] = _floats(raw)
            elif isinstance(default, str):
                kwargs[f.name] = raw
            elif default is None or isinstance(default, float):
                kwargs[f.name] = None if raw.lower() in ("", "auto", "none") else float(raw)
            else:
                kwargs[f.name] = raw
        except ValueError:
            raise ConfigError(f"[{name}] {f.name}: cannot parse {raw!r}") from None
    unknown = set(section) - {f.name for f in fields(cls)} - set(section.parser.defaults())
    if unknown:
        raise ConfigError(f"[{name}] unknown keys: {', '.join(sorted(unknown))}")
    return replace(defaults, **kwargs)


def load_config(path=None) -> ExperimentConfig:
    """Read an experiment config; ``None`` returns the defaults."""
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    cfg = ExperimentConfig()
    updates = {}
    simple = {
        "grid": GridConfig, "pit": PitConfig, "comb": CombConfig, "probe": ProbeConfig,
        "pulse": PulseConfig, "propagation": PropagationConfig, "theory": TheoryConfig,
    }
    for name, cls in simple.items():
        if parser.has_section(name):
            updates[name] = _coerce(cls, parser[name], name)
    if parser.has_section("scheme"):
        updates["scheme"] = scheme_from_section(parser["scheme"])
    if parser.has_section("pumping"):
        updates["pumping"] = _coerce(PumpingModel, parser["pumping"], "pumping")
    if parser.has_section("sequence") and "path" in parser["sequence"]:
        seq = Path(parser["sequence"]["path"])
        updates["sequence"] = seq if seq.is_absolute() else path.parent / seq
    if parser.has_section("fit") and "spectrum" in parser["fit"]:
        spec = Path(parser["fit"]["spectrum"])
        updates["fit_spectrum"] = spec if spec.is_absolute() else path.parent / spec
    if parser.has_section("run") and "seed" in parser["run"]:
        updates["seed"] = parser["run"].getint("seed")
    if parser.has_section("sweep"):
        updates["sweep"] = _sweep(parser)
    return replace(cfg, **updates)


def _sweep(parser) -> SweepConfig:
    sec = parser["sweep"]
    base = SweepConfig()
    powers = _floats(sec["powers"]) if "powers" in sec else base.powers
    if not powers:
        raise ConfigError("[sweep] powers must not be empty")
    coeff = float(sec.get("background_coeff", base.background_coeff))
    series = base.series
    if "series" in sec:
        series = []
        for name in sec["series"].replace(",", " ").split():
            key = f"sweep.{name}"
            if not parser.has_section(key):
                raise ConfigError(f"missing section [{key}]")
            s = parser[key]
            try:
                series.append(SeriesConfig(name, float(s["chirp_width"]),
                                           _floats(s.get("theory_finesse", "4, 5, 7"))))
            except KeyError:
                raise ConfigError(f"[{key}] needs chirp_width") from None
        series = tuple(series)
    return SweepConfig(tuple(powers), series, coeff)
