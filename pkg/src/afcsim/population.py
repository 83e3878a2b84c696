"""Ground-state populations across the inhomogeneous line and the
absorption spectra they produce."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .levels import ALL_TRANSITIONS, HyperfineScheme, TransitionLabel

SNAPSHOT_VERSION = 1
# Positions closer than this (in bins) to a grid point are snapped onto it.
_SNAP = 1e-9


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform frequency axis in MHz, endpoints included."""

    nu_min: float
    nu_max: float
    step: float = 0.01

    def __post_init__(self):
        if not (np.isfinite(self.nu_min) and np.isfinite(self.nu_max)):
            raise ValueError("grid bounds must be finite")
        if not self.nu_min < self.nu_max:
            raise ValueError("nu_min must be smaller than nu_max")
        if not self.step > 0:
            raise ValueError("step must be positive")

    @property
    def size(self) -> int:
        return int(round((self.nu_max - self.nu_min) / self.step)) + 1

    @property
    def points(self) -> np.ndarray:
        return self.nu_min + self.step * np.arange(self.size)


@dataclass
class PopulationField:
    """Ground-level occupations for every ion class on ``grid``.

    ``occupations[i, g]`` is the fraction of class ``i`` in ground level ``g``.
    ``density`` is the optical depth contributed per bin by a fully occupied
    transition of unit strength.  ``background`` is an additive flat depth
    (off-resonant excitation) that pumping may grow.
    """

    grid: SpectralGrid
    occupations: np.ndarray
    density: np.ndarray
    reference_depth: float = 0.0
    background: float = 0.0
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.occupations = np.asarray(self.occupations, dtype=float)
        self.density = np.asarray(self.density, dtype=float)
        n = self.grid.size
        if self.occupations.shape != (n, 3):
            raise ValueError(f"occupations must have shape ({n}, 3)")
        if self.density.shape != (n,):
            raise ValueError(f"density must have shape ({n},)")

    @property
    def class_detunings(self) -> np.ndarray:
        return self.grid.points

    def total_population(self) -> float:
        return float(np.sum(self.density[:, None] * self.occupations))

    def copy(self) -> "PopulationField":
        return replace(
            self,
            occupations=self.occupations.copy(),
            density=self.density.copy(),
            warnings=list(self.warnings),
        )

    def save(self, path) -> None:
        g = self.grid
        np.savez(
            path,
            format_version=SNAPSHOT_VERSION,
            grid=np.array([g.nu_min, g.nu_max, g.step]),
            occupations=self.occupations,
            density=self.density,
            reference_depth=self.reference_depth,
            background=self.background,
        )

    @classmethod
    def load(cls, path) -> "PopulationField":
        with np.load(path) as data:
            version = int(data["format_version"])
            if version != SNAPSHOT_VERSION:
                raise ValueError(f"unsupported snapshot version {version}")
            lo, hi, step = data["grid"]
            return cls(
                SpectralGrid(float(lo), float(hi), float(step)),
                data["occupations"].copy(),
                data["density"].copy(),
                float(data["reference_depth"]),
                float(data["background"]),
            )


@dataclass
class AbsorptionSpectrum:
    """Optical depth ``d`` sampled at probe frequencies ``nu`` (MHz)."""

    nu: np.ndarray
    d: np.ndarray
    transitions: tuple = ALL_TRANSITIONS

    def __post_init__(self):
        self.nu = np.asarray(self.nu, dtype=float)
        self.d = np.asarray(self.d, dtype=float)
        if self.nu.shape != self.d.shape or self.nu.ndim != 1:
            raise ValueError("nu and d must be 1-D arrays of equal length")
        if not np.all(np.isfinite(self.d)) or np.any(self.d < 0):
            raise ValueError("optical depth must be finite and non-negative")

    @property
    def step(self) -> float:
        """Grid spacing; raises if the axis is not uniform."""
        if self.nu.size < 2:
            raise ValueError("spectrum has fewer than two points")
        diffs = np.diff(self.nu)
        if np.ptp(diffs) > 1e-6 * abs(diffs[0]) or diffs[0] <= 0:
            raise ValueError("spectrum grid is not uniform")
        return float(diffs[0])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["nu_MHz", "d"])
            for nu, d in zip(self.nu, self.d):
                w.writerow([f"{nu:.6f}", f"{d:.10g}"])

    @classmethod
    def from_csv(cls, path) -> "AbsorptionSpectrum":
        data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1])


def uniform_field(grid: SpectralGrid, background_depth: float,
                  scheme: HyperfineScheme | None = None) -> PopulationField:
    """Unprepared line: equal thirds in every ground level.

    The density is chosen so that, away from the window edges, the summed
    absorption of all nine transitions equals ``background_depth``.
    """
    if not background_depth > 0:
        raise ValueError("background depth must be positive")
    scheme = scheme or HyperfineScheme()
    n = grid.size
    occ = np.full((n, 3), 1.0 / 3.0)
    rho = background_depth / (scheme.strengths.sum() / 3.0)
    return PopulationField(grid, occ, np.full(n, rho), reference_depth=background_depth)


def _selected(transition_filter) -> list[TransitionLabel]:
    if transition_filter is None:
        return list(ALL_TRANSITIONS)
    if isinstance(transition_filter, TransitionLabel):
        return [transition_filter]
    return list(transition_filter)


def _lorentz_kernel(fwhm: float, step: float, n_max: int) -> np.ndarray:
    """Lorentzian integrated over each bin, normalised to unit sum."""
    half = min(n_max, max(1, int(np.ceil(200 * fwhm / step))))
    edges = (np.arange(-half, half + 2) - 0.5) * step
    cdf = np.arctan(2 * edges / fwhm) / np.pi
    k = np.diff(cdf)
    return k / k.sum()


def synthesize_absorption(field: PopulationField, scheme: HyperfineScheme,
                          probe_grid: SpectralGrid, transition_filter=None,
                          kernel: str = "linear", lorentz_fwhm: float | None = None
                          ) -> AbsorptionSpectrum:
    """Forward model from populations to optical depth.

    Each (class, transition) deposits ``density * occupation * strength`` on
    the probe axis by linear interpolation between the two nearest bins.
    ``kernel="lorentzian"`` additionally convolves with a homogeneous
    Lorentzian (FWHM defaults to the scheme's homogeneous linewidth).
    """
    labels = _selected(transition_filter)
    offsets = scheme.offset_matrix
    used = np.array([offsets[t.g, t.e] for t in labels])
    lo = field.grid.nu_min + used.min()
    hi = field.grid.nu_max + used.max()
    tol = 1e-9 * max(1.0, abs(lo), abs(hi))
    if probe_grid.nu_min < lo - tol or probe_grid.nu_max > hi + tol:
        raise ValueError(
            f"probe range [{probe_grid.nu_min}, {probe_grid.nu_max}] MHz lies outside "
            f"the simulated window [{lo:.3f}, {hi:.3f}] MHz"
        )

    n_p = probe_grid.size
    h_p = probe_grid.step
    scale = field.grid.step / h_p
    classes = field.class_detunings
    d = np.zeros(n_p + 1)
    for t in labels:
        weight = field.density * field.occupations[:, t.g] * scheme.strengths[t.g, t.e] * scale
        x = (classes + offsets[t.g, t.e] - probe_grid.nu_min) / h_p
        xr = np.rint(x)
        x = np.where(np.abs(x - xr) < _SNAP, xr, x)
        i0 = np.floor(x).astype(np.int64)
        frac = x - i0
        inside = (i0 >= 0) & (i0 < n_p)
        d += np.bincount(i0[inside], weight[inside] * (1 - frac[inside]), minlength=n_p + 1)[: n_p + 1]
        nxt = inside & (i0 + 1 < n_p)
        d += np.bincount(i0[nxt] + 1, weight[nxt] * frac[nxt], minlength=n_p + 1)[: n_p + 1]
        # classes just below the probe axis still reach bin 0
        left = (i0 == -1)
        d[0] += np.sum(weight[left] * frac[left])
    d = d[:n_p]

    if kernel == "lorentzian":
        from scipy.signal import fftconvolve

        fwhm = lorentz_fwhm or scheme.homogeneous_linewidth
        d = np.clip(fftconvolve(d, _lorentz_kernel(fwhm, h_p, n_p), mode="same"), 0.0, None)
    elif kernel != "linear":
        raise ValueError(f"unknown kernel {kernel!r}")

    if field.background:
        d = d + field.background
    return AbsorptionSpectrum(probe_grid.points, d, tuple(labels))
