import numpy as np
import pytest

from holorec import ComplexField, Hologram, NumericsError, OpticalConfig, Rng


def test_rng_identical_streams_over_1e6_draws():
    a = Rng(1234).uniform(size=1 << 20)
    b = Rng(1234).uniform(size=1 << 20)
    assert a.tobytes() == b.tobytes()


def test_rng_different_seeds_differ():
    assert not np.array_equal(Rng(1).uniform(size=16), Rng(2).uniform(size=16))


def test_rng_children_independent():
    root = Rng(7)
    a = root.child(0).normal(size=8)
    b = root.child(1).normal(size=8)
    assert not np.array_equal(a, b)
    assert np.array_equal(a, Rng(7).child(0).normal(size=8))


def test_field_amp_phase_roundtrip():
    rng = Rng(3)
    amp = rng.uniform(0.1, 1.0, (16, 16))
    phase = rng.uniform(-np.pi, np.pi, (16, 16))
    f = ComplexField.from_amp_phase(amp, phase, 0.37)
    np.testing.assert_allclose(f.amplitude, amp, rtol=1e-12)
    np.testing.assert_allclose(f.phase, phase, rtol=1e-12, atol=1e-12)


def test_field_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        ComplexField(np.zeros((4, 4)), np.zeros((4, 5)), 0.37)


def test_field_nonfinite_rejected():
    bad = np.zeros((4, 4))
    bad[0, 0] = np.inf
    with pytest.raises(NumericsError):
        ComplexField(bad, np.zeros((4, 4)), 0.37)


def test_optical_config_defaults():
    cfg = OpticalConfig()
    assert cfg.wavelength_um == 0.530
    assert cfg.sensor_pitch_um == 2.24
    assert cfg.sr_pitch_um == 0.37
    assert cfg.sr_factor == 6


def test_optical_config_bad_ratio():
    with pytest.raises(ValueError):
        OpticalConfig(sr_pitch_um=1.0, sensor_pitch_um=2.5)
    with pytest.raises(ValueError):
        OpticalConfig(sr_pitch_um=3.0, sensor_pitch_um=2.0)


def test_with_pitch():
    cfg = OpticalConfig().with_pitch(2.22)
    assert cfg.sr_pitch_um == 2.22
    assert cfg.sr_factor == 1
    assert cfg.wavelength_um == 0.530


def test_hologram_validation():
    with pytest.raises(NumericsError):
        Hologram(np.full((4, 4), np.nan), 450.0)
    h = Hologram(np.ones((4, 4)), 450.0)
    assert h.z2_um == 450.0
