"""Atomic frequency comb preparation and echo simulation in a three-level
hyperfine rare-earth ensemble."""

from .analytic import CombParams, echo_efficiency, efficiency, transmission
from .levels import HyperfineScheme, TransitionLabel, max_pit_width
from .population import AbsorptionSpectrum, PopulationField, SpectralGrid, uniform_field
from .probe import CombFit, fit_comb
from .propagation import InputPulse, TimeTrace, measure_efficiency, propagate
from .pumping import PumpingModel, create_afc, load_sequence, parse_sequence, run_program

__version__ = "0.1.0"

__all__ = [
    "AbsorptionSpectrum",
    "CombFit",
    "CombParams",
    "HyperfineScheme",
    "InputPulse",
    "PopulationField",
    "PumpingModel",
    "SpectralGrid",
    "TimeTrace",
    "TransitionLabel",
    "create_afc",
    "echo_efficiency",
    "efficiency",
    "fit_comb",
    "load_sequence",
    "max_pit_width",
    "measure_efficiency",
    "parse_sequence",
    "propagate",
    "run_program",
    "transmission",
    "uniform_field",
]
