import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from afcsim import pipeline
from afcsim.config import bundled_sequence
from afcsim.levels import ALL_TRANSITIONS, STORAGE_TRANSITION, HyperfineScheme, TransitionLabel
from afcsim.population import SpectralGrid, synthesize_absorption, uniform_field
from afcsim.pumping import (
    BURNBACK_PAIR,
    CHIRP_SCAN,
    PitError,
    PulseSpec,
    PumpingModel,
    PumpingWarning,
    SequenceParseError,
    SequenceProgram,
    apply_burnback,
    apply_chirp_scan,
    burnback_power,
    burnback_profile,
    burnback_transfer,
    create_afc,
    format_sequence,
    load_sequence,
    parse_sequence,
    pit_mask,
    run_program,
)

SCHEME = HyperfineScheme()


# ------------------------------------------------------------------ parser

def test_bundled_sequence():
    pulses, program = load_sequence(bundled_sequence())
    assert list(pulses) == [f"BurnPit{i}" for i in range(1, 11)]
    assert program.inter_pulse_wait == 1.0
    assert [c for c, _ in program.blocks] == [60, 30, 20, 30]
    assert program.blocks[1][1] == ["BurnPit1", "BurnPit2", "BurnPit3", "BurnPit4", "BurnPit6",
                                    "BurnPit7", "BurnPit8", "BurnPit9", "BurnPit10"]
    assert len(program) == 60 * 2 + 30 * 9 + 20 * 5 + 30 * 4
    p = pulses["BurnPit6"]
    assert (p.nu_start, p.nu_end) == (-8.85, -1.15)
    assert p.target == TransitionLabel("5/2g", "1/2e")


def test_format_round_trip():
    pulses, program = load_sequence(bundled_sequence())
    text = format_sequence(pulses, program)
    again = parse_sequence(text)
    assert again[0] == pulses
    assert again[1].blocks == program.blocks
    assert format_sequence(*again) == text


def test_burnback_rows_and_power_column():
    pulses, program = parse_sequence(
        "A 0 5 1/2g->1/2e 0.5\nB burnback 0.6 200 0.9\nrepeat 2: A B\n")
    assert pulses["A"].relative_power == 0.5
    assert pulses["B"].kind == BURNBACK_PAIR
    assert list(program.pulse_names()) == ["A", "B", "A", "B"]


@pytest.mark.parametrize("text, message, line", [
    ("", "no pulses", None),
    ("# only a comment\n", "no pulses", None),
    ("A 0 1 1/2g->1/2e\nA 1 2 1/2g->1/2e\n", "duplicate", 2),
    ("A 0 1 1/2g->1/2e\nRepeat 3: A, B\n", "undefined pulse 'B'", 2),
    ("A 0 x 1/2g->1/2e\n", "malformed end frequency", 1),
    ("A 0 1 9/2g->1/2e\n", "unknown transition", 1),
    ("A 0 1 1/2g->1/2e\nRepeat two: A\n", "repeat count", 2),
    ("A 0 1 1/2g->1/2e\nRepeat 0: A\n", ">= 1", 2),
    ("A1 0 1 1/2g->1/2e\nRepeat 1: A3-1\n", "descending", 2),
    ("A 1 1 1/2g->1/2e\n", "nu_start != nu_end", 1),
    ("A 0 1\n", "pulse row needs", 1),
])
def test_parse_errors(text, message, line):
    with pytest.raises(SequenceParseError, match=message) as info:
        parse_sequence(text)
    assert info.value.line == line


def test_parse_error_column_points_at_token():
    with pytest.raises(SequenceParseError) as info:
        parse_sequence("A 0 1 1/2g->1/2e\nRepeat 3: A,   Zed\n")
    assert info.value.column == 16


# ------------------------------------------------------------------ dynamics

def _tiny_field():
    return uniform_field(SpectralGrid(-0.05, 0.05, 0.01), 1.0, SCHEME)


@pytest.mark.filterwarnings("ignore::afcsim.pumping.PumpingWarning")
@pytest.mark.parametrize("n", [1, 3, 10])
def test_repeated_scan_geometric_decay(n):
    # one in-band transition: each scan leaves 1 - p (1 - b) of the level
    model = PumpingModel(edge_reach=0.0)
    pulse = PulseSpec("x", CHIRP_SCAN, -0.5, 0.5, STORAGE_TRANSITION)
    fld = _tiny_field()
    for _ in range(n):
        fld = apply_chirp_scan(fld, SCHEME, pulse, model)
    p = 1.0 - math.exp(-model.kappa)
    ratio = 1.0 - p * (1.0 - SCHEME.branching[0, 0])
    np.testing.assert_allclose(fld.occupations[:, 0], ratio ** n / 3.0, rtol=1e-12)
    np.testing.assert_allclose(fld.occupations.sum(axis=1), 1.0, rtol=1e-12)


def test_scan_outside_window_warns():
    pulse = PulseSpec("x", CHIRP_SCAN, -0.5, 0.5, STORAGE_TRANSITION)
    with pytest.warns(PumpingWarning, match="outside the simulated window"):
        out = apply_chirp_scan(_tiny_field(), SCHEME, pulse)
    assert out.warnings


def test_scan_direction_irrelevant():
    fld = uniform_field(SpectralGrid(-60, 60, 0.05), 10.0)
    up = PulseSpec("u", CHIRP_SCAN, -3.0, 4.0, TransitionLabel("3/2g", "1/2e"))
    down = PulseSpec("d", CHIRP_SCAN, 4.0, -3.0, TransitionLabel("3/2g", "1/2e"))
    a = apply_chirp_scan(fld, SCHEME, up)
    b = apply_chirp_scan(fld, SCHEME, down)
    np.testing.assert_array_equal(a.occupations, b.occupations)


def test_zero_power_is_identity():
    fld = uniform_field(SpectralGrid(-40, 40, 0.05), 10.0)
    p = PulseSpec("z", CHIRP_SCAN, -3.0, 4.0, STORAGE_TRANSITION, relative_power=0.0)
    np.testing.assert_array_equal(apply_chirp_scan(fld, SCHEME, p).occupations, fld.occupations)


pulse_strategy = st.builds(
    lambda lo, width, t, power: PulseSpec("p", CHIRP_SCAN, lo, lo + width, t, power),
    st.floats(-20, 20), st.floats(0.1, 18), st.sampled_from(ALL_TRANSITIONS), st.floats(0, 3),
)


@settings(max_examples=25, deadline=None)
@given(st.lists(pulse_strategy, min_size=1, max_size=6))
def test_random_programs_conserve_population(seq):
    fld = uniform_field(SpectralGrid(-40, 40, 0.05), 10.0)
    total = fld.total_population()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PumpingWarning)
        for p in seq:
            fld = apply_chirp_scan(fld, SCHEME, p)
    assert abs(fld.total_population() - total) / total < 1e-12
    assert fld.occupations.min() >= 0.0
    np.testing.assert_allclose(fld.occupations.sum(axis=1), 1.0, rtol=1e-12)


def test_one_band_pit_bounded_by_max_width():
    # a band wider than 18.1 MHz re-pumps ions into its own band
    fld = uniform_field(SpectralGrid(-60, 60, 0.01), 60.0)
    cfg_grid = SpectralGrid(-25, 25, 0.01)

    def cleared(width):
        p = PulseSpec("s", CHIRP_SCAN, 0.0, width, STORAGE_TRANSITION, relative_power=20.0)
        out = fld
        for _ in range(200):
            out = apply_chirp_scan(out, SCHEME, p, PumpingModel(edge_reach=0.0))
        d = synthesize_absorption(out, SCHEME, cfg_grid).d
        inside = (cfg_grid.points > 0.2) & (cfg_grid.points < width - 0.2)
        return d[inside].max()

    assert cleared(17.0) < 1e-3
    assert cleared(20.0) > 5.0


def test_partial_schedule_clears_low_side_only(cfg):
    pulses, _ = load_sequence(cfg.sequence)
    program = SequenceProgram([(60, ["BurnPit5", "BurnPit6"])])
    out = run_program(pipeline.initial_field(cfg), cfg.scheme, pulses, program, cfg.pumping)
    spec = pipeline.total_spectrum(out, cfg)
    low = (spec.nu >= -16.0) & (spec.nu <= -2.0)
    pit_region = (spec.nu >= 2.0) & (spec.nu <= 15.0)
    assert spec.d[low].max() < 0.02 * cfg.grid.background_depth
    assert spec.d[pit_region].min() > 10.0


def test_full_schedule_pit_edges(cfg, pit):
    spec = pipeline.total_spectrum(pit, cfg)
    d = dict(zip(np.round(spec.nu, 2), spec.d))
    assert pipeline.pit_residual(spec, cfg) < 0.6
    # walls just outside the cleared band
    assert d[-1.5] > 0.6 and d[16.5] > 0.6


def test_full_schedule_conserves_population(prepared):
    before, after = prepared
    drift = abs(after.total_population() - before.total_population()) / before.total_population()
    assert drift < 1e-9


# ------------------------------------------------------------------ burn-back

def test_power_transfer_inverse():
    for eta in (0.0, 0.1, 0.5, 0.99):
        assert burnback_transfer(burnback_power(eta)) == pytest.approx(eta, abs=1e-15)
    assert burnback_power(1.0) == math.inf


def _fwhm(x, y):
    above = x[y >= y.max() / 2]
    return above.max() - above.min()


def test_burnback_profile_width_and_peak():
    model = PumpingModel()
    half = 0.5e-3 * model.profile_fwhm(160.0)
    f = burnback_profile(np.array([-half, 0.0, half]), 0.0, 160.0, 1e-6, model)
    # weak transfer: the profile itself, half height at +-FWHM/2
    np.testing.assert_allclose(f / 1e-6, [0.5, 1.0, 0.5], rtol=1e-5)


def test_burnback_power_broadening():
    nu = np.linspace(-1, 1, 20001)
    widths = [_fwhm(nu, burnback_profile(nu, 0.0, 160.0, eta)) for eta in (0.1, 0.5, 0.9, 0.99)]
    assert np.all(np.diff(widths) > 0)


def test_burnback_moves_reservoir_only(pit):
    p = PulseSpec("b", BURNBACK_PAIR, center=2.0, chirp_width=160.0, transfer_efficiency=0.5)
    out = apply_burnback(pit, SCHEME, p)
    i = int(np.argmin(abs(pit.class_detunings - 2.0)))
    moved = pit.occupations[i, 2] * 0.5
    assert out.occupations[i, 0] - pit.occupations[i, 0] == pytest.approx(moved)
    np.testing.assert_array_equal(out.occupations[:, 1], pit.occupations[:, 1])
    assert out.total_population() == pytest.approx(pit.total_population(), rel=1e-14)


def test_create_afc_needs_pit(pit):
    with pytest.raises(PitError):
        create_afc(pit, SCHEME, 4, 1.2, 160.0, 0.4, first_center=20.0)
    assert pit_mask(pit, SCHEME, [0.0, 3.6]).all()
    assert not pit_mask(pit, SCHEME, [20.0]).any()


def test_create_afc_bandwidth_warning(pit):
    with pytest.warns(PumpingWarning, match="bandwidth"):
        create_afc(pit, SCHEME, 6, 1.2, 160.0, 0.1)


def test_create_afc_peak_positions(pit, cfg):
    comb = create_afc(pit, SCHEME, 4, 1.2, 160.0, 0.4)
    spec = pipeline.total_spectrum(comb, cfg)
    sel = (spec.nu > -0.5) & (spec.nu < 4.1)
    nu, d = spec.nu[sel], spec.d[sel]
    peaks = [nu[(nu > c - 0.3) & (nu < c + 0.3)][np.argmax(d[(nu > c - 0.3) & (nu < c + 0.3)])]
             for c in (0.0, 1.2, 2.4, 3.6)]
    np.testing.assert_allclose(peaks, [0.0, 1.2, 2.4, 3.6], atol=0.011)


def test_depth_grows_with_power(pit, cfg):
    depths = []
    for power in (0.1, 0.2, 0.4):
        comb = create_afc(pit, SCHEME, 4, 1.2, 160.0, power)
        spec = pipeline.total_spectrum(comb, cfg)
        depths.append(spec.d[(spec.nu > -0.5) & (spec.nu < 4.1)].max())
    assert np.all(np.diff(depths) > 0)
