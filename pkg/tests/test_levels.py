import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from afcsim.levels import (
    ALL_TRANSITIONS,
    READOUT_TRANSITION,
    STORAGE_TRANSITION,
    HyperfineScheme,
    SchemeError,
    TransitionLabel,
    afc_bandwidth_limit,
    load_scheme,
    max_pit_width,
    transition_offset,
)


def test_default_splittings():
    s = HyperfineScheme()
    assert s.total_ground_splitting == pytest.approx(27.5)
    assert s.total_excited_splitting == pytest.approx(9.4)
    assert s.ground_spacings == (10.2, 17.3)
    assert s.excited_spacings == (4.6, 4.8)


def test_max_pit_width_default():
    assert max_pit_width(HyperfineScheme()) == pytest.approx(18.1, abs=1e-12)


def test_max_pit_width_negative_raises():
    with pytest.raises(SchemeError):
        max_pit_width(HyperfineScheme(ground_spacings=(2.0, 3.0)))


def test_bandwidth_limit_is_first_excited_gap():
    assert afc_bandwidth_limit(HyperfineScheme()) == pytest.approx(4.6)


def test_offsets():
    s = HyperfineScheme()
    off = s.offset_matrix
    assert off[0, 0] == 0.0
    assert off[2, 2] == pytest.approx(36.9)
    assert off[1, 0] == pytest.approx(10.2)
    # readout sits 9.4 MHz above the storage transition of the same class
    r, st_ = READOUT_TRANSITION, STORAGE_TRANSITION
    assert off[r.g, r.e] - off[st_.g, st_.e] == pytest.approx(9.4)
    assert transition_offset(s, -3.0, TransitionLabel("3/2g", "3/2e")) == pytest.approx(11.8)


def test_storage_is_strongest_from_half_ground():
    s = HyperfineScheme()
    assert np.argmax(s.strengths[0]) == 0
    assert s.strength_ratio(STORAGE_TRANSITION, READOUT_TRANSITION) == pytest.approx(0.55 / 0.07)


def test_strengths_read_only():
    s = HyperfineScheme()
    with pytest.raises(ValueError):
        s.strengths[0, 0] = 1.0


@pytest.mark.parametrize("text", ["3/2g->1/2e", " 3/2_g -> 1/2_e ", "3/2g→1/2e"])
def test_label_parse(text):
    t = TransitionLabel.parse(text)
    assert (t.g, t.e) == (1, 0)
    assert str(t) == "3/2g->1/2e"


@pytest.mark.parametrize("text", ["3/2g", "7/2g->1/2e", "1/2g->1/2g"])
def test_label_parse_rejects(text):
    with pytest.raises(ValueError):
        TransitionLabel.parse(text)


def test_nine_transitions():
    assert len(set(ALL_TRANSITIONS)) == 9
    for t in ALL_TRANSITIONS:
        assert TransitionLabel.from_indices(t.g, t.e) == t


@pytest.mark.parametrize("kwargs", [
    dict(oscillator_strengths=((1, 1), (1, 1))),
    dict(oscillator_strengths=((0.1, 0.5, 0.1), (0.4, 0.6, 0.1), (0.1, 0.1, 0.9))),
    dict(oscillator_strengths=((0.5, 0.3, 0.0), (0.4, 0.6, 0.1), (0.1, 0.1, 0.9))),
    dict(ground_spacings=(-1.0, 17.3)),
    dict(excited_lifetime=0.0),
])
def test_invalid_schemes(kwargs):
    with pytest.raises(SchemeError):
        HyperfineScheme(**kwargs)


strength = st.floats(0.01, 1.0)


@given(st.lists(strength, min_size=9, max_size=9))
def test_branching_rows_sum_to_one(flat):
    flat[0] = 1.0  # keep the storage transition the strongest from 1/2g
    m = tuple(tuple(flat[3 * i:3 * i + 3]) for i in range(3))
    b = HyperfineScheme(oscillator_strengths=m).branching
    np.testing.assert_allclose(b.sum(axis=1), 1.0, rtol=1e-12)
    assert np.all(b > 0)


def test_load_scheme(tmp_path):
    p = tmp_path / "s.ini"
    p.write_text("[scheme]\nground_spacings = 10, 20\nexcited_spacings = 3 4\n"
                 "oscillator_strengths = 0.5 0.3 0.2, 0.3 0.5 0.2, 0.2 0.2 0.6\n")
    s = load_scheme(p)
    assert max_pit_width(s) == pytest.approx(23.0)
    assert s.strengths[2, 2] == pytest.approx(0.6)


def test_load_scheme_bad_strength_count(tmp_path):
    p = tmp_path / "s.ini"
    p.write_text("[scheme]\noscillator_strengths = 0.5 0.3\n")
    with pytest.raises(SchemeError):
        load_scheme(p)
