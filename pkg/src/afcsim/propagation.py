"""Weak-pulse propagation through an arbitrary absorption spectrum.

The medium acts as a linear filter ``H(nu) = exp(-d(nu)/2 + i phi(nu))`` on
the pulse spectrum.  The phase is the Kramers-Kronig partner of the
amplitude (the minimum-phase construction via a folded cepstrum), which
makes the impulse response causal.  The echo is not put in by hand: it
appears because a periodic ``d(nu)`` has a periodic impulse response.

Conventions: time in microseconds, frequency in MHz, and a complex
envelope ``s(t) = sum_k S_k exp(+2 pi i nu_k t)``.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

from .population import AbsorptionSpectrum

log = logging.getLogger(__name__)

# Relative energy tolerated before the pulse arrives or in the wrap region.
LEAKAGE_TOL = 1e-6


class AliasingError(RuntimeError):
    def __init__(self, message, required_window):
        self.required_window = required_window
        super().__init__(f"{message}; use a time window of at least {required_window:g} us")


class WindowWarning(UserWarning):
    pass


@dataclass(frozen=True)
class InputPulse:
    """Gaussian input pulse; ``fwhm_duration`` is the intensity FWHM in ns."""

    fwhm_duration: float = 200.0
    carrier_detuning: float = 0.0
    amplitude: float = 1.0
    shape: str = "gaussian"

    def __post_init__(self):
        if not self.fwhm_duration > 0:
            raise ValueError("pulse duration must be positive")
        if self.shape != "gaussian":
            raise NotImplementedError(f"pulse shape {self.shape!r}")

    @property
    def power_spectrum_fwhm(self) -> float:
        """FWHM of the power spectrum in MHz, 2 ln2 / (pi * duration)."""
        return 2.0 * math.log(2.0) / (math.pi * self.fwhm_duration * 1e-3)

    def envelope(self, t, t_center: float) -> np.ndarray:
        tau = self.fwhm_duration * 1e-3
        t = np.asarray(t, dtype=float)
        field = np.exp(-2.0 * math.log(2.0) * ((t - t_center) / tau) ** 2)
        return self.amplitude * field * np.exp(2j * math.pi * self.carrier_detuning * t)


@dataclass
class TimeTrace:
    t0: float            # us
    dt: float            # ns
    samples: np.ndarray  # complex envelope

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("trace contains non-finite samples")

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * 1e-3 * np.arange(self.samples.size)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    def energy(self, window: tuple[float, float] | None = None) -> float:
        """Sum of |s|^2 dt (dt in us), optionally restricted to ``window``."""
        p = self.intensity
        if window is not None:
            t = self.t
            p = p[(t >= window[0]) & (t < window[1])]
        return float(np.sum(p) * self.dt * 1e-3)

    def centroid(self, window: tuple[float, float] | None = None) -> float:
        t, p = self.t, self.intensity
        if window is not None:
            sel = (t >= window[0]) & (t < window[1])
            t, p = t[sel], p[sel]
        total = p.sum()
        if total <= 0:
            raise ValueError("no energy in window")
        return float(np.sum(t * p) / total)

    def shifted(self, tau: float) -> "TimeTrace":
        return TimeTrace(self.t0 + tau, self.dt, self.samples.copy())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_us", "re", "im", "abs2"])
            for t, s in zip(self.t, self.samples):
                w.writerow([f"{t:.6f}", f"{s.real:.9e}", f"{s.imag:.9e}", f"{abs(s) ** 2:.9e}"])


def _uniform_step(nu: np.ndarray) -> float:
    if nu.size < 2:
        raise ValueError("spectrum needs at least two points")
    diffs = np.diff(nu)
    if diffs[0] <= 0 or np.ptp(diffs) > 1e-6 * diffs[0]:
        raise ValueError("transfer function needs a uniform frequency grid")
    return float(diffs[0])


def minimum_phase(log_amplitude: np.ndarray) -> np.ndarray:
    """Kramers-Kronig phase for a real log-amplitude sampled on a periodic grid."""
    n = log_amplitude.size
    c = sfft.ifft(log_amplitude)
    fold = np.zeros(n)
    fold[0] = 1.0
    fold[1:(n + 1) // 2] = 2.0
    if n % 2 == 0:
        fold[n // 2] = 1.0
    return sfft.fft(c * fold).imag


def transfer_function(spec: AbsorptionSpectrum, dispersion: bool = True) -> np.ndarray:
    """Complex field transmission ``H`` on the spectrum's own grid."""
    _uniform_step(spec.nu)
    log_amp = -0.5 * spec.d
    if not dispersion:
        return np.exp(log_amp).astype(complex)
    return np.exp(log_amp + 1j * minimum_phase(log_amp))


def propagation_grid(spec: AbsorptionSpectrum, window: float, span: float,
                     center: float | None = None) -> np.ndarray:
    """Frequency axis of step 1/window, at least ``span`` wide, FFT-friendly length."""
    step = 1.0 / window
    n = sfft.next_fast_len(int(math.ceil(span / step)))
    if center is None:
        center = 0.5 * (spec.nu[0] + spec.nu[-1])
    start = center - step * (n // 2)
    return start + step * np.arange(n)


def resample(spec: AbsorptionSpectrum, nu: np.ndarray) -> AbsorptionSpectrum:
    """Point-sample ``spec`` on ``nu``, holding the edge values outside its range."""
    return AbsorptionSpectrum(nu, np.interp(nu, spec.nu, spec.d))


def propagate(pulse: InputPulse, spec: AbsorptionSpectrum, window: float = 32.0,
              span: float = 64.0, t_center: float | None = None, dispersion: bool = True,
              check: bool = True) -> TimeTrace:
    """Transmitted field of ``pulse`` after the medium described by ``spec``.

    ``window`` (us) sets the frequency step 1/window and ``span`` (MHz) the
    time step 1/span.  The pulse is centred at ``t_center`` (default: four
    pulse durations after the start of the window).  With ``check`` the
    output is tested for wrap-around and for energy ahead of the pulse.
    """
    if window < 1.0:
        raise ValueError("time window must be at least 1 us")
    nu = propagation_grid(spec, window, span)
    n = nu.size
    step = nu[1] - nu[0]
    dt = 1.0 / (n * step)  # us
    tau = pulse.fwhm_duration * 1e-3
    if t_center is None:
        t_center = 4.0 * tau
    lead = t_center - 3.0 * tau
    if lead < 0:
        raise ValueError("pulse starts before the time window")
    bw = pulse.power_spectrum_fwhm
    if (pulse.carrier_detuning - 2 * bw < nu[0] or pulse.carrier_detuning + 2 * bw > nu[-1]):
        raise ValueError("pulse bandwidth extends beyond the frequency grid")

    t = dt * np.arange(n)
    s_in = pulse.envelope(t, t_center)
    base = np.exp(-2j * math.pi * nu[0] * t)  # move the grid origin to bin 0
    h = transfer_function(resample(spec, nu), dispersion)
    out = sfft.ifft(sfft.fft(s_in * base) * h) / base
    trace = TimeTrace(0.0, dt * 1e3, out)
    if check:
        _check_wrap(trace, t_center, tau, window)
    return trace


def _check_wrap(trace: TimeTrace, t_center: float, tau: float, window: float):
    total = trace.energy()
    if total <= 0:
        return
    t = trace.t
    early = trace.intensity[t < t_center - 3.0 * tau].sum() * trace.dt * 1e-3
    late = trace.intensity[t >= 0.9 * window].sum() * trace.dt * 1e-3
    if (early + late) / total > LEAKAGE_TOL:
        raise AliasingError(
            f"response wraps around the {window:g} us window "
            f"(leakage {(early + late) / total:.2e})", 2.0 * window)


@dataclass(frozen=True)
class EfficiencyResult:
    eta: float
    transmission: float
    echo_window: tuple
    transmitted_window: tuple


def default_windows(reference: TimeTrace, delta: float) -> tuple[tuple, tuple]:
    """Transmitted and first-echo windows, each one comb period wide."""
    t_ref = reference.centroid()
    period = 1.0 / delta
    transmitted = (t_ref - 0.5 * period, t_ref + 0.5 * period)
    echo = (t_ref + 0.5 * period, t_ref + 1.5 * period)
    return transmitted, echo


def measure_efficiency(out: TimeTrace, reference: TimeTrace, echo_window: tuple,
                       transmitted_window: tuple | None = None) -> EfficiencyResult:
    """Echo efficiency and transmission as energy ratios to the reference pulse."""
    e1, e2 = echo_window
    if not e2 > e1:
        raise ValueError("empty echo window")
    if transmitted_window is None:
        width = e2 - e1
        transmitted_window = (e1 - width, e1)
    t1, t2 = transmitted_window
    if max(t1, e1) < min(t2, e2):
        raise ValueError("transmitted and echo windows overlap")
    ref = reference.energy()
    if ref <= 0:
        raise ValueError("reference trace carries no energy")
    echo = out.energy(echo_window)
    if echo / ref > 1e-3:
        # an echo sitting near a window edge means the window is misplaced
        off = abs(out.centroid(echo_window) - 0.5 * (e1 + e2))
        if off > 0.25 * (e2 - e1):
            warnings.warn("echo energy is not centred in the echo window", WindowWarning,
                          stacklevel=2)
    return EfficiencyResult(echo / ref, out.energy(transmitted_window) / ref,
                            tuple(echo_window), tuple(transmitted_window))


def gaussian_comb_spectrum(d_eff: float, finesse: float, delta: float = 1.0, n_peaks: int = 24,
                           step: float | None = None, margin: float = 40.0,
                           center: float = 0.0) -> AbsorptionSpectrum:
    """Gaussian comb whose period-averaged depth is ``d_eff``.

    The peak depth is ``d_eff * F / sqrt(pi / (4 ln 2))``: the exact mean of a
    Gaussian comb, rather than the ``d/F`` approximation.
    """
    gamma = delta / finesse
    d_peak = d_eff * finesse / math.sqrt(math.pi / (4.0 * math.log(2.0)))
    if step is None:
        step = min(gamma / 10.0, delta / 50.0)
    half = 0.5 * (n_peaks - 1) * delta + margin
    nu = center + step * np.arange(-int(half / step), int(half / step) + 1)
    d = np.zeros_like(nu)
    first = center - 0.5 * (n_peaks - 1) * delta
    for k in range(n_peaks):
        d += d_peak * np.exp(-4.0 * math.log(2.0) * ((nu - first - k * delta) / gamma) ** 2)
    return AbsorptionSpectrum(nu, d)
