import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from batpinna.beam_model import (
    BeamModel, calibrate_from_track, frequency_response, gain, gain_array, peak_frequency, sidelobe_term,
)
from batpinna.farfield import LobeReport
from batpinna.geometry import Direction


def test_defaults():
    m = BeamModel()
    assert m.scan_band == (10e3, 20e3)
    assert_allclose(m.sidelobe_elevation([10e3, 20e3]), [60.0, 20.0])
    assert m.side_gain / m.main_gain == 0.7


def test_gain_at_sidelobe_centre():
    m = BeamModel(main_center=Direction(0.0, -60.0))
    f = 12e3
    g = gain(m, f, Direction(m.side_azimuth_center, float(m.sidelobe_elevation(f))))
    assert_allclose(g, m.side_gain, rtol=1e-6)


def test_gain_formula_direct():
    m = BeamModel()
    f, az, el = 15e3, 7.0, 33.0
    ang = np.degrees(np.arccos(np.cos(np.radians(el)) * np.cos(np.radians(az))))
    expected = np.exp(-ang**2 / 200) + 0.7 * np.exp(-((el - 40) ** 2) / 72 - az**2 / (2 * m.side_width_az**2))
    assert_allclose(gain(m, f, Direction(az, el)), expected, rtol=1e-12)


def test_out_of_band_has_no_sidelobe():
    m = BeamModel()
    assert_allclose(gain(m, 25e3, Direction(0.0, 40.0)), np.exp(-40.0**2 / 200))


@settings(max_examples=200, deadline=None)
@given(st.floats(1e3, 49e3), st.floats(-179, 179), st.floats(-90, 90))
def test_gain_positive_bounded_and_symmetric(f, az, el):
    m = BeamModel()
    g = gain(m, f, Direction(az, el))
    assert 0 < g <= m.main_gain + m.side_gain
    assert g == pytest.approx(gain(m, f, Direction(-az if az != -180 else az, el)), rel=1e-12)


def test_scan_direction_follows_slope_sign():
    el = np.linspace(-90, 90, 36001)
    for slope, intercept in ((-4.0, 100.0), (4.0, -20.0)):
        m = BeamModel(scan_slope=slope, scan_intercept=intercept, main_center=Direction(0.0, -89.0))
        peaks = [el[np.argmax(sidelobe_term(m, f, 0.0, el))] for f in np.arange(10e3, 20.1e3, 1e3)]
        steps = np.diff(peaks)
        assert np.all(steps > 0) if slope > 0 else np.all(steps < 0)


def test_sidelobe_azimuth_argmax_constant():
    m = BeamModel()
    az = np.linspace(-60, 60, 1201)
    for f in np.arange(10e3, 20.1e3, 2.5e3):
        best = az[np.argmax(sidelobe_term(m, f, az, float(m.sidelobe_elevation(f))))]
        assert best == m.side_azimuth_center


def test_distinct_peak_frequencies_for_20_and_60_degrees():
    m = BeamModel()
    lo = peak_frequency(m, Direction(0, 20), (5e3, 20e3), 100.0)
    hi = peak_frequency(m, Direction(0, 60), (5e3, 20e3), 100.0)
    assert lo != hi
    assert_allclose([lo, hi], [20e3, 10e3])


def test_peak_bin_matches_dense_scan():
    m = BeamModel()
    local = Direction(3.0, 37.3)
    f, g = frequency_response(m, local, (5e3, 20e3), 500.0)
    dense = np.arange(5e3, 20e3 + 1, 500.0)
    brute = [gain(m, x, local) for x in dense]
    assert f[np.argmax(g)] == dense[int(np.argmax(brute))]


def test_flat_response_without_sidelobe():
    m = BeamModel(side_gain=0.0, main_width=1e4)
    _, g = frequency_response(m, Direction(10, 30), (5e3, 20e3), 500.0)
    assert g.max() / g.min() < 1.01


def test_frequency_response_errors():
    with pytest.raises(ValueError):
        frequency_response(BeamModel(), Direction(0, 0), (20e3, 5e3), 500.0)
    with pytest.raises(ValueError):
        frequency_response(BeamModel(), Direction(0, 0), (5e3, 20e3), 0.0)


def test_invariants():
    with pytest.raises(ValueError):
        BeamModel(scan_band=(20e3, 10e3))
    with pytest.raises(ValueError):
        BeamModel(scan_slope=0.0)
    with pytest.raises(ValueError):
        BeamModel(side_width_el=0.0)
    with pytest.raises(ValueError):
        BeamModel(scan_intercept=200.0)


def _track(freqs, els, az=0.0):
    return [(f, LobeReport(Direction(0, 0), 20.0, Direction(az, e), -6.0, 0.5)) for f, e in zip(freqs, els)]


def test_calibrate_exact_affine():
    f = np.array([1e3, 2e3, 4e3, 7e3, 9e3])
    m, rms = calibrate_from_track(_track(f, 5 + 2 * f / 1e3))
    assert abs(m.scan_intercept - 5) < 1e-9 and abs(m.scan_slope - 2) < 1e-9
    assert rms < 1e-9


def test_calibrate_noisy_affine_within_bound():
    rng = np.random.default_rng(3)
    f = np.linspace(10e3, 20e3, 41)
    sigma = 0.5
    m, rms = calibrate_from_track(_track(f, 100 - 4 * f / 1e3 + sigma * rng.standard_normal(f.size)))
    # closed-form standard error of the least-squares slope
    x = f / 1e3
    se_slope = sigma / np.sqrt(np.sum((x - x.mean()) ** 2))
    assert abs(m.scan_slope + 4) < 5 * se_slope
    assert rms < 2 * sigma


def test_calibrate_errors():
    with pytest.raises(ValueError):
        calibrate_from_track(_track([10e3], [30.0]))
    with pytest.raises(ValueError):
        calibrate_from_track(_track([10e3, 10e3], [30.0, 40.0]))


def test_save_load_round_trip(tmp_path):
    m = BeamModel(scan_slope=-3.5, side_azimuth_center=2.0).with_elevation_offset(-40.0)
    m.save(tmp_path / "beam.txt")
    assert BeamModel.load(tmp_path / "beam.txt") == m


def test_elevation_offset_shifts_lobes():
    m = BeamModel().with_elevation_offset(-40.0)
    assert_allclose(m.sidelobe_elevation(10e3), 20.0)
    base = BeamModel()
    # exact on the meridian, where great-circle distance equals the elevation difference
    assert_allclose(gain(m, 13e3, Direction(0, -10)), gain(base, 13e3, Direction(0, 30)), rtol=1e-12)
    assert_allclose(sidelobe_term(m, 13e3, 5, -10), sidelobe_term(base, 13e3, 5, 30), rtol=1e-12)


def test_gain_array_broadcasts():
    g = gain_array(BeamModel(), np.array([10e3, 15e3])[:, None], np.zeros(3)[None, :], np.array([0, 40, 60.0])[None, :])
    assert g.shape == (2, 3)
    with pytest.raises(ValueError):
        gain_array(BeamModel(), 0.0, 0.0, 0.0)
