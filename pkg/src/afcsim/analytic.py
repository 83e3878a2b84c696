"""Closed-form efficiency model for a comb of well-separated Gaussian peaks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# pi^2 / (4 ln 2): exponent of the amplitude dephasing factor at F = 1
DEPHASING_CONST = math.pi ** 2 / (4.0 * math.log(2.0))

# How the dephasing factor enters the echo efficiency:
#   "single"  : once, exp(-pi^2 / (4 ln2 F^2))
#   "squared" : twice (amplitude factor squared), exp(-pi^2 / (2 ln2 F^2))
CONVENTIONS = ("single", "squared")
# Convention that the numerical propagator reproduces; see
# tests/test_acceptance.py::test_oracle_equivalence.
PREFERRED_CONVENTION = "squared"


@dataclass(frozen=True)
class CombParams:
    """Comb summary.  ``gamma`` is the peak FWHM in kHz, ``delta`` the period in MHz."""

    d: float
    gamma: float
    delta: float
    n_peaks: int = 0
    shape: str = "gaussian"

    def __post_init__(self):
        if not self.d >= 0:
            raise ValueError("peak depth d must be >= 0")
        if not self.gamma > 0:
            raise ValueError("peak width gamma must be positive")
        if not self.gamma * 1e-3 < self.delta:
            raise ValueError("peaks must be narrower than the comb period (F > 1)")
        if self.shape != "gaussian":
            raise NotImplementedError(f"comb shape {self.shape!r} has no closed form here")

    @property
    def finesse(self) -> float:
        return self.delta / (self.gamma * 1e-3)


def effective_depth(p: CombParams) -> float:
    """Depth seen by a broadband pulse, d/F."""
    return p.d / p.finesse


def transmission(d_eff) -> float:
    d_eff = np.asarray(d_eff, dtype=float)
    if np.any(d_eff < 0):
        raise ValueError("effective depth must be >= 0")
    out = np.exp(-d_eff)
    return float(out) if out.ndim == 0 else out


def absorption(d_eff):
    return 1.0 - transmission(d_eff)


def dephasing_factor(finesse):
    """Amplitude dephasing at the first echo, exp(-pi^2 / (4 ln2 F^2))."""
    finesse = np.asarray(finesse, dtype=float)
    if np.any(finesse <= 0):
        raise ValueError("finesse must be positive")
    with np.errstate(divide="ignore"):
        out = np.exp(-DEPHASING_CONST / finesse ** 2)
    return float(out) if out.ndim == 0 else out


def _dephasing(finesse, convention):
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    factor = dephasing_factor(finesse)
    return factor ** 2 if convention == "squared" else factor


def efficiency(d_eff, finesse, convention: str = "single"):
    """Forward echo efficiency for effective depth ``d_eff`` and finesse ``finesse``.

    ``finesse=np.inf`` gives the dephasing-free limit d^2 exp(-d).
    """
    d_eff = np.asarray(d_eff, dtype=float)
    if np.any(d_eff < 0):
        raise ValueError("effective depth must be >= 0")
    out = d_eff ** 2 * np.exp(-d_eff) * _dephasing(finesse, convention)
    return float(out) if np.ndim(out) == 0 else out


def echo_efficiency(p: CombParams, convention: str = "single") -> float:
    return efficiency(effective_depth(p), p.finesse, convention)


def amplitude_decay(t, gamma):
    """Echo-amplitude envelope at time ``t`` (us) for Gaussian peaks of FWHM ``gamma`` (kHz).

    Angular units: gamma_tilde = 2 pi gamma / sqrt(8 ln 2), so that
    ``amplitude_decay(1/delta, gamma) == dephasing_factor(delta/gamma)``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    g_tilde = 2.0 * math.pi * (gamma * 1e-3) / math.sqrt(8.0 * math.log(2.0))
    out = np.exp(-(t * g_tilde) ** 2 / 2.0)
    return float(out) if out.ndim == 0 else out


def optimal_depth(finesse, convention: str = "single") -> tuple[float, float]:
    """Maximiser of the efficiency over effective depth at fixed finesse.

    d^2 exp(-d) is stationary at d = 2 and the dephasing term does not depend
    on d, so the optimum is always d = 2.
    """
    if not finesse > 1:
        raise ValueError("finesse must exceed 1")
    return 2.0, 4.0 * math.exp(-2.0) * float(_dephasing(finesse, convention))


def theory_table(finesse, d_values, convention: str = "single"):
    """Rows of (d, T, eta) at fixed finesse, with d the peak depth."""
    rows = []
    for d in d_values:
        d_eff = d / finesse
        rows.append((float(d), transmission(d_eff), efficiency(d_eff, finesse, convention)))
    return rows
