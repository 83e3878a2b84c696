"""Simulated readout: frequency scans, strong-transition depth inference and
Gaussian comb fits."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit
from scipy.signal import find_peaks

from .analytic import CombParams
from .levels import HyperfineScheme, TransitionLabel
from .population import AbsorptionSpectrum, PopulationField, SpectralGrid, synthesize_absorption

# Local maxima below this fraction of the global maximum are ignored.
DETECTION_THRESHOLD = 0.10
_FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


class FitError(RuntimeError):
    pass


def scan_spectrum(fld: PopulationField, scheme: HyperfineScheme, transition: TransitionLabel,
                  nu_range: tuple[float, float], n_points: int,
                  noise: float = 0.0, seed: int | None = None) -> AbsorptionSpectrum:
    """Ideal, non-perturbing scan of one transition.

    The spectrum is synthesised at the field's native resolution and then
    sampled at ``n_points`` equally spaced frequencies (a single point sits
    at the midpoint of the range).  ``noise`` adds Gaussian noise of that
    standard deviation, clipped at zero.
    """
    lo, hi = float(nu_range[0]), float(nu_range[1])
    if hi < lo:
        lo, hi = hi, lo
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    step = fld.grid.step
    if n_points == 1:
        nu = np.array([(lo + hi) / 2.0])
    else:
        nu = np.linspace(lo, hi, n_points)
    fine = SpectralGrid(nu[0] - step, nu[-1] + step, step)
    spec = synthesize_absorption(fld, scheme, fine, transition)
    d = np.interp(nu, spec.nu, spec.d)
    if noise:
        rng = np.random.default_rng(seed)
        d = np.clip(d + rng.normal(0.0, noise, d.shape), 0.0, None)
    return AbsorptionSpectrum(nu, d, (transition,))


def infer_strong_depth(weak_spec: AbsorptionSpectrum, strength_ratio: float,
                       axis_shift: float = 0.0) -> AbsorptionSpectrum:
    """Scale a weak-transition scan to the strong transition.

    ``axis_shift`` is (strong offset - weak offset) in MHz and moves the
    frequency axis onto the strong transition.
    """
    if not strength_ratio > 0:
        raise ValueError("strength ratio must be positive")
    return AbsorptionSpectrum(weak_spec.nu + axis_shift, strength_ratio * weak_spec.d)


def infer_from_readout(weak_spec: AbsorptionSpectrum, scheme: HyperfineScheme,
                       weak: TransitionLabel, strong: TransitionLabel) -> AbsorptionSpectrum:
    """:func:`infer_strong_depth` with ratio and shift taken from ``scheme``."""
    off = scheme.offset_matrix
    shift = off[strong.g, strong.e] - off[weak.g, weak.e]
    return infer_strong_depth(weak_spec, scheme.strength_ratio(strong, weak), shift)


@dataclass(frozen=True)
class PeakFit:
    center: float     # MHz
    amplitude: float  # optical depth
    fwhm: float       # kHz
    baseline: float
    residual: float   # rms residual over the fit window


@dataclass
class CombFit:
    params: CombParams
    peaks: list
    residual_norm: float

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            self.write(fh)

    def write(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["peak", "center_MHz", "amplitude", "fwhm_kHz", "baseline", "residual_rms"])
        for i, p in enumerate(self.peaks):
            w.writerow([i, f"{p.center:.6f}", f"{p.amplitude:.6g}", f"{p.fwhm:.6g}",
                        f"{p.baseline:.4g}", f"{p.residual:.4g}"])
        q = self.params
        w.writerow([])
        w.writerow(["summary", "d", "gamma_kHz", "delta_MHz", "F", "n_peaks", "residual_norm"])
        w.writerow(["summary", f"{q.d:.6g}", f"{q.gamma:.6g}", f"{q.delta:.6g}",
                    f"{q.finesse:.6g}", q.n_peaks, f"{self.residual_norm:.4g}"])


def _gauss(x, amp, x0, sigma, base):
    return base + amp * np.exp(-0.5 * ((x - x0) / sigma) ** 2)


def detect_peaks(spec: AbsorptionSpectrum, threshold: float = DETECTION_THRESHOLD) -> np.ndarray:
    d = spec.d
    top = float(d.max()) if d.size else 0.0
    if top <= 0:
        return np.array([], dtype=int)
    # prominence guards against ripples on a flat background
    idx, _ = find_peaks(d, height=threshold * top, prominence=threshold * top)
    return idx


def fit_comb(spec: AbsorptionSpectrum, threshold: float = DETECTION_THRESHOLD) -> CombFit:
    """Per-peak Gaussian least-squares fits, summarised as :class:`CombParams`.

    Each peak is fitted with amplitude, centre, width and a constant baseline
    inside a window of half the mean peak spacing.
    """
    idx = detect_peaks(spec, threshold)
    if idx.size < 2:
        raise FitError("no peaks" if idx.size == 0 else "fewer than two peaks detected")
    nu, d = spec.nu, spec.d
    spacing = float(np.mean(np.diff(nu[idx])))
    half = spacing / 2.0
    step = float(np.median(np.diff(nu)))
    peaks = []
    sq = 0.0
    for i in idx:
        sel = np.abs(nu - nu[i]) <= half
        x, y = nu[sel], d[sel]
        above = x[y >= d[i] / 2.0]
        sigma0 = max((above.max() - above.min()) / _FWHM_PER_SIGMA, step)
        p0 = (d[i], nu[i], sigma0, float(min(y.min(), d[i] * 0.1)))
        try:
            with warnings.catch_warnings():
                # exact synthetic peaks leave the covariance undefined
                warnings.simplefilter("ignore", OptimizeWarning)
                popt, _ = curve_fit(_gauss, x, y, p0=p0, maxfev=5000)
        except (RuntimeError, ValueError) as exc:
            raise FitError(f"fit of peak at {nu[i]:.4f} MHz did not converge: {exc}") from None
        amp, x0, sigma, base = popt
        if not np.all(np.isfinite(popt)) or amp <= 0 or abs(x0 - nu[i]) > half:
            raise FitError(f"fit of peak at {nu[i]:.4f} MHz did not converge")
        res = y - _gauss(x, *popt)
        sq += float(np.sum(res ** 2))
        peaks.append(PeakFit(float(x0), float(amp), abs(sigma) * _FWHM_PER_SIGMA * 1e3,
                             float(base), float(np.sqrt(np.mean(res ** 2)))))
    centers = np.array([p.center for p in peaks])
    params = CombParams(
        d=float(np.mean([p.amplitude for p in peaks])),
        gamma=float(np.mean([p.fwhm for p in peaks])),
        delta=float(np.mean(np.diff(centers))),
        n_peaks=len(peaks),
    )
    return CombFit(params, peaks, math.sqrt(sq))


def synthetic_comb(nu, d: float, gamma: float, delta: float, n_peaks: int,
                   first_center: float = 0.0, order: float = 2.0) -> np.ndarray:
    """Comb of super-Gaussian peaks (``order=2`` is Gaussian) with FWHM ``gamma`` kHz."""
    nu = np.asarray(nu, dtype=float)
    w = gamma * 1e-3
    out = np.zeros_like(nu)
    for k in range(n_peaks):
        u = np.abs(2.0 * (nu - first_center - k * delta) / w)
        out += d * np.exp(-math.log(2.0) * u ** order)
    return out
