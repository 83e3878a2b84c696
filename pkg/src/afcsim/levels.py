"""Hyperfine level structure of a Pr3+:Y2SiO5-like ion (site 1).

Frequency convention
--------------------
Every ion class is labelled by the frequency of its |1/2g> -> |1/2e>
transition (the "class detuning").  The frequency of any other transition
of that class is

    nu(g, e) = class_detuning + ground_offset(g) + excited_offset(e)

with ground offsets (0, s1, s1 + s2) for (1/2g, 3/2g, 5/2g) and excited
offsets (0, e1, e1 + e2) for (1/2e, 3/2e, 5/2e).  Deeper ground reservoirs
therefore appear at *positive* detunings: with the defaults the 3/2g
transitions of near-zero classes sit between +10.2 and +19.6 MHz and the
5/2g transitions between +27.5 and +36.9 MHz.  This is the one place the
convention is defined; everything else calls :func:`transition_offset`.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

GROUND_LEVELS = ("1/2g", "3/2g", "5/2g")
EXCITED_LEVELS = ("1/2e", "3/2e", "5/2e")

# Approximate relative strengths for Pr:YSO site 1 (rows: ground, cols: excited).
# Configurable; not a measured input of this package.
DEFAULT_STRENGTHS = (
    (0.55, 0.38, 0.07),
    (0.40, 0.60, 0.01),
    (0.05, 0.02, 0.93),
)


class SchemeError(ValueError):
    """Raised for an inconsistent hyperfine scheme."""


@dataclass(frozen=True)
class TransitionLabel:
    ground: str
    excited: str

    def __post_init__(self):
        if self.ground not in GROUND_LEVELS:
            raise ValueError(f"unknown ground level {self.ground!r}")
        if self.excited not in EXCITED_LEVELS:
            raise ValueError(f"unknown excited level {self.excited!r}")

    @property
    def g(self) -> int:
        return GROUND_LEVELS.index(self.ground)

    @property
    def e(self) -> int:
        return EXCITED_LEVELS.index(self.excited)

    @classmethod
    def parse(cls, text: str) -> "TransitionLabel":
        """Parse ``"3/2g->1/2e"`` (also accepts ``3/2_g``, unicode arrows)."""
        cleaned = text.strip().replace("_", "").replace("→", "->").replace(" ", "")
        if "->" not in cleaned:
            raise ValueError(f"transition label {text!r} must look like '1/2g->1/2e'")
        left, right = cleaned.split("->", 1)
        return cls(left, right)

    @classmethod
    def from_indices(cls, g: int, e: int) -> "TransitionLabel":
        return cls(GROUND_LEVELS[g], EXCITED_LEVELS[e])

    def __str__(self):
        return f"{self.ground}->{self.excited}"


ALL_TRANSITIONS = tuple(
    TransitionLabel(g, e) for g in GROUND_LEVELS for e in EXCITED_LEVELS
)
STORAGE_TRANSITION = TransitionLabel("1/2g", "1/2e")
READOUT_TRANSITION = TransitionLabel("1/2g", "5/2e")


@dataclass(frozen=True)
class HyperfineScheme:
    """Three ground and three excited hyperfine levels.

    Spacings are in MHz, ``excited_lifetime`` in microseconds.  The default
    spacings reproduce the 27.5 MHz ground and 9.4 MHz excited totals.
    """

    ground_spacings: tuple[float, float] = (10.2, 17.3)
    excited_spacings: tuple[float, float] = (4.6, 4.8)
    oscillator_strengths: tuple = DEFAULT_STRENGTHS
    excited_lifetime: float = 164.0
    homogeneous_linewidth: float = 1e-3  # MHz
    _strengths: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        s = np.array(self.oscillator_strengths, dtype=float)
        if s.shape != (3, 3):
            raise SchemeError("oscillator_strengths must be a 3x3 matrix")
        if not np.all(np.isfinite(s)) or np.any(s <= 0) or np.any(s > 1):
            raise SchemeError("oscillator strengths must lie in (0, 1]")
        if s[0, 0] < s[0].max():
            raise SchemeError("1/2g->1/2e must be the strongest transition from 1/2g")
        if len(self.ground_spacings) != 2 or len(self.excited_spacings) != 2:
            raise SchemeError("need exactly two ground and two excited spacings")
        if any(x < 0 for x in (*self.ground_spacings, *self.excited_spacings)):
            raise SchemeError("level spacings must be non-negative")
        if self.excited_lifetime <= 0:
            raise SchemeError("excited_lifetime must be positive")
        s.setflags(write=False)
        object.__setattr__(self, "_strengths", s)
        object.__setattr__(self, "ground_spacings", tuple(map(float, self.ground_spacings)))
        object.__setattr__(self, "excited_spacings", tuple(map(float, self.excited_spacings)))
        object.__setattr__(
            self, "oscillator_strengths", tuple(tuple(map(float, row)) for row in s)
        )

    @property
    def strengths(self) -> np.ndarray:
        """Read-only 3x3 strength matrix, rows ground, columns excited."""
        return self._strengths

    @property
    def ground_offsets(self) -> np.ndarray:
        s1, s2 = self.ground_spacings
        return np.array([0.0, s1, s1 + s2])

    @property
    def excited_offsets(self) -> np.ndarray:
        e1, e2 = self.excited_spacings
        return np.array([0.0, e1, e1 + e2])

    @property
    def offset_matrix(self) -> np.ndarray:
        """3x3 transition offsets relative to the class detuning (MHz)."""
        return self.ground_offsets[:, None] + self.excited_offsets[None, :]

    @property
    def total_ground_splitting(self) -> float:
        return float(sum(self.ground_spacings))

    @property
    def total_excited_splitting(self) -> float:
        return float(sum(self.excited_spacings))

    @property
    def branching(self) -> np.ndarray:
        """Decay branching ratios, ``branching[e, g]``; each row sums to 1."""
        s = self._strengths
        return (s / s.sum(axis=0, keepdims=True)).T

    def strength(self, t: TransitionLabel) -> float:
        return float(self._strengths[t.g, t.e])

    def strength_ratio(self, strong: TransitionLabel, weak: TransitionLabel) -> float:
        return self.strength(strong) / self.strength(weak)


def transition_offset(scheme: HyperfineScheme, class_detuning: float, t: TransitionLabel) -> float:
    """Probe frequency (MHz) of transition ``t`` for the given ion class."""
    return float(class_detuning + scheme.ground_offsets[t.g] + scheme.excited_offsets[t.e])


def max_pit_width(scheme: HyperfineScheme) -> float:
    """Widest interval a single scan can empty: ground span minus excited span."""
    width = scheme.total_ground_splitting - scheme.total_excited_splitting
    if width < 0:
        raise SchemeError(
            f"excited splitting {scheme.total_excited_splitting} MHz exceeds "
            f"ground splitting {scheme.total_ground_splitting} MHz"
        )
    return width


def afc_bandwidth_limit(scheme: HyperfineScheme) -> float:
    """Usable comb bandwidth, set by the |1/2e>-|3/2e> separation."""
    return scheme.excited_spacings[0]


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def scheme_from_section(section) -> HyperfineScheme:
    """Build a scheme from a ``[scheme]`` config section (MHz / us units)."""
    kwargs = {}
    if "ground_spacings" in section:
        kwargs["ground_spacings"] = tuple(_floats(section["ground_spacings"]))
    if "excited_spacings" in section:
        kwargs["excited_spacings"] = tuple(_floats(section["excited_spacings"]))
    if "oscillator_strengths" in section:
        flat = _floats(section["oscillator_strengths"])
        if len(flat) != 9:
            raise SchemeError("oscillator_strengths needs 9 numbers (row-major)")
        kwargs["oscillator_strengths"] = tuple(tuple(flat[3 * i : 3 * i + 3]) for i in range(3))
    if "excited_lifetime" in section:
        kwargs["excited_lifetime"] = float(section["excited_lifetime"])
    if "homogeneous_linewidth" in section:
        kwargs["homogeneous_linewidth"] = float(section["homogeneous_linewidth"])
    return HyperfineScheme(**kwargs)


def load_scheme(path) -> HyperfineScheme:
    """Load a scheme from an INI file with a ``[scheme]`` section."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not parser.read(Path(path)):
        raise FileNotFoundError(path)
    if not parser.has_section("scheme"):
        return HyperfineScheme()
    return scheme_from_section(parser["scheme"])
