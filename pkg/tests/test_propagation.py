import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.special import dawsn

from afcsim.analytic import amplitude_decay
from afcsim.population import AbsorptionSpectrum
from afcsim.propagation import (
    AliasingError,
    InputPulse,
    TimeTrace,
    WindowWarning,
    default_windows,
    gaussian_comb_spectrum,
    measure_efficiency,
    minimum_phase,
    propagate,
    transfer_function,
)

PULSE = InputPulse(200.0, 0.0)


def flat(depth, lo=-40.0, hi=40.0, step=0.01):
    nu = np.arange(lo, hi + step / 2, step)
    return AbsorptionSpectrum(nu, np.full(nu.size, depth))


def test_pulse_spectrum_width():
    # transform-limited Gaussian: duration x power-spectrum FWHM = 2 ln2 / pi
    assert PULSE.power_spectrum_fwhm == pytest.approx(2 * math.log(2) / math.pi / 0.2)
    assert PULSE.power_spectrum_fwhm == pytest.approx(2.206, abs=1e-3)


def test_pulse_envelope_fwhm():
    t = np.linspace(0, 2, 20001)
    i = np.abs(PULSE.envelope(t, 1.0)) ** 2
    above = t[i >= 0.5]
    assert above.max() - above.min() == pytest.approx(0.2, abs=2e-4)


def test_empty_medium_is_identity():
    out = propagate(PULSE, flat(0.0))
    expected = PULSE.envelope(out.t, 0.8)
    np.testing.assert_allclose(out.samples, expected, atol=1e-12)


@pytest.mark.parametrize("d0", [0.5, 2.0, 6.0])
def test_flat_absorber_scales_amplitude(d0):
    out = propagate(PULSE, flat(d0))
    ref = propagate(PULSE, flat(0.0))
    np.testing.assert_allclose(out.samples, ref.samples * math.exp(-d0 / 2), atol=1e-12)
    assert out.energy() / ref.energy() == pytest.approx(math.exp(-d0), rel=1e-9)


def test_minimum_phase_matches_dawson():
    # log-amplitude -(d/2) exp(-x^2) has the Dawson-function phase (d/2)(2/sqrt(pi)) F(x)
    nu = np.arange(-200, 200, 0.01)
    w, d0 = 0.5, 3.0
    phi = minimum_phase(-(d0 / 2) * np.exp(-(nu / w) ** 2))
    ref = (d0 / 2) * (2 / math.sqrt(math.pi)) * dawsn(nu / w)
    sel = np.abs(nu) < 5
    np.testing.assert_allclose(phi[sel], ref[sel], atol=2e-4)


def test_transfer_function_needs_uniform_grid():
    spec = AbsorptionSpectrum([0.0, 0.1, 0.3], [0.0, 1.0, 0.0])
    with pytest.raises(ValueError, match="uniform"):
        transfer_function(spec)


def test_no_dispersion_option():
    spec = gaussian_comb_spectrum(1.0, 10.0)
    h = transfer_function(spec, dispersion=False)
    np.testing.assert_allclose(h.imag, 0.0)


def test_causal_response():
    # a single absorption line: nothing may arrive before the pulse
    nu = np.arange(-32, 32, 1 / 64)
    spec = AbsorptionSpectrum(nu, 4.0 * np.exp(-(nu / 0.3) ** 2))
    out = propagate(PULSE, spec, window=64.0, t_center=2.0, check=False)
    early = out.energy((0.0, 2.0 - 0.6))
    assert early / out.energy() < 1e-8


def test_time_shift_covariance():
    spec = gaussian_comb_spectrum(1.0, 10.0)
    a = propagate(PULSE, spec, window=64.0)
    k = 40
    b = propagate(PULSE, spec, window=64.0, t_center=0.8 + k * a.dt * 1e-3)
    np.testing.assert_allclose(b.samples[k:], a.samples[:-k], atol=1e-9)


def test_echo_delay_is_inverse_period():
    spec = gaussian_comb_spectrum(1.0, 10.0, delta=1.25, n_peaks=30)
    out = propagate(PULSE, spec, window=64.0)
    tx, echo = default_windows(propagate(PULSE, flat(0.0), window=64.0), 1.25)
    assert out.centroid(echo) - out.centroid(tx) == pytest.approx(0.8, rel=0.01)


@pytest.mark.parametrize("finesse", [8, 10, 16])
def test_echo_train_follows_dephasing(finesse):
    # weak comb: echo energies fall off as the squared amplitude envelope
    spec = gaussian_comb_spectrum(0.02, finesse, 1.0, n_peaks=60)
    out = propagate(PULSE, spec, window=128.0)
    e = [out.energy((0.8 + k - 0.5, 0.8 + k + 0.5)) for k in (1, 2, 3)]
    g = 1e3 / finesse
    for k in (2, 3):
        pred = (amplitude_decay(k, g) / amplitude_decay(1, g)) ** 2
        assert e[k - 1] / e[0] == pytest.approx(pred, rel=0.10)


def test_aliasing_guard():
    spec = gaussian_comb_spectrum(3.0, 16.0, 1.0, n_peaks=40)
    with pytest.raises(AliasingError) as info:
        propagate(PULSE, spec, window=16.0)
    assert info.value.required_window == 32.0
    propagate(PULSE, spec, window=128.0)  # large enough


def test_pulse_outside_grid_rejected():
    with pytest.raises(ValueError, match="bandwidth"):
        propagate(InputPulse(200.0, 31.0), flat(0.0), span=64.0)


@settings(max_examples=30, deadline=None)
@given(arrays(float, 64, elements=st.floats(0, 20)), st.floats(-2, 2))
def test_passivity(depths, carrier):
    # any non-negative absorption can only remove energy
    nu = np.linspace(-20, 20, 4001)
    coarse = np.linspace(-20, 20, depths.size)
    spec = AbsorptionSpectrum(nu, np.interp(nu, coarse, depths))
    pulse = InputPulse(200.0, carrier)
    out = propagate(pulse, spec, check=False)
    ref = propagate(pulse, flat(0.0, -20, 20), check=False)
    assert out.energy() <= ref.energy() * (1 + 1e-9)


def _trace(samples, dt=1.0):
    return TimeTrace(0.0, dt, np.asarray(samples, dtype=complex))


def test_trace_energy_and_centroid():
    tr = _trace([0, 1, 1, 0], dt=1000.0)
    assert tr.energy() == pytest.approx(2.0)
    assert tr.centroid() == pytest.approx(1.5)
    assert tr.energy((0.0, 1.5)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        tr.centroid((10.0, 11.0))
    assert tr.shifted(2.0).centroid() == pytest.approx(3.5)


def test_trace_rejects_nan():
    with pytest.raises(ValueError):
        _trace([0, np.nan])


def test_trace_csv(tmp_path):
    tr = _trace([1 + 1j, 2], dt=10.0)
    tr.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t_us,re,im,abs2"
    assert lines[1].startswith("0.000000,1.000000000e+00,1.000000000e+00,2.0")


def test_measure_efficiency_windows():
    tr = _trace([0, 1, 0, 0, 0.5, 0], dt=1000.0)
    ref = _trace([0, 2, 0], dt=1000.0)
    res = measure_efficiency(tr, ref, (3.5, 4.5), (0.5, 1.5))
    assert res.eta == pytest.approx(0.0625)
    assert res.transmission == pytest.approx(0.25)
    with pytest.raises(ValueError, match="overlap"):
        measure_efficiency(tr, ref, (1.0, 4.5), (0.5, 1.5))
    with pytest.raises(ValueError):
        measure_efficiency(tr, ref, (4.5, 3.5))


def test_misplaced_echo_window_warns():
    tr = _trace([0, 1, 0, 0, 0.5, 0], dt=1000.0)
    ref = _trace([0, 2, 0], dt=1000.0)
    with pytest.warns(WindowWarning):
        measure_efficiency(tr, ref, (3.5, 7.5), (0.5, 1.5))
