import numpy as np
import pytest

from holorec import ComplexField, OpticalConfig, Rng, propagate
from holorec.propagate import frequency_grid, transfer_function

CFG = OpticalConfig()
PITCH = CFG.sr_pitch_um


def banded_field(n, z_um, rng, frac=0.8, pitch=PITCH, cfg=CFG):
    """Random field whose spectrum sits strictly inside the band limit at z."""
    spec = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    f = np.fft.fftfreq(n, d=pitch)
    fx, fy = np.meshgrid(f, f)
    flim = 1.0 / (cfg.wavelength_um * np.hypot(2.0 * z_um / (n * pitch), 1.0))
    cut = frac * min(flim, 0.5 / pitch)
    spec[(np.abs(fx) > cut) | (np.abs(fy) > cut)] = 0.0
    u = np.fft.ifft2(spec)
    return ComplexField.from_complex(u / np.abs(u).max(), pitch)


def test_frequency_grid_layout():
    grid = frequency_grid((8, 8), PITCH)
    expected = np.array([k / (8 * PITCH) if k < 4 else (k - 8) / (8 * PITCH)
                         for k in range(8)])
    np.testing.assert_allclose(grid.fx[0], expected)
    np.testing.assert_allclose(grid.fy[:, 0], expected)
    assert np.abs(grid.fx).max() <= 0.5 / PITCH + 1e-12


def test_transfer_function_unity_at_dz0():
    grid = frequency_grid((32, 32), PITCH)
    H = transfer_function(grid, 0.0, CFG)
    inside = grid.fx ** 2 + grid.fy ** 2 < (CFG.medium_index / CFG.wavelength_um) ** 2
    np.testing.assert_allclose(H[inside], 1.0)


def test_transfer_function_full_wave_distance():
    grid = frequency_grid((16, 16), PITCH)
    H = transfer_function(grid, CFG.wavelength_um / CFG.medium_index, CFG)
    assert abs(H[0, 0] - 1.0) < 1e-12


def test_transfer_function_evanescent_zero():
    # pitch large enough that grid corners are evanescent
    cfg = OpticalConfig(sr_pitch_um=0.2, sensor_pitch_um=0.2)
    grid = frequency_grid((64, 64), 0.2)
    H = transfer_function(grid, 10.0, cfg)
    evan = grid.fx ** 2 + grid.fy ** 2 > (cfg.medium_index / cfg.wavelength_um) ** 2
    assert evan.any()
    assert np.all(H[evan] == 0)


def test_transfer_function_rejects_nonfinite_dz():
    grid = frequency_grid((8, 8), PITCH)
    with pytest.raises(ValueError):
        transfer_function(grid, np.nan, CFG)


def test_identity_at_dz0():
    f = banded_field(64, 20.0, Rng(0))
    out = propagate(f, 0.0, CFG)
    err = np.abs(out.data - f.data).max() / np.abs(f.data).max()
    assert err < 1e-12


def test_roundtrip_64():
    f = banded_field(64, 20.0, Rng(1))
    back = propagate(propagate(f, 20.0, CFG), -20.0, CFG)
    rel = np.linalg.norm(back.data - f.data) / np.linalg.norm(f.data)
    assert rel < 1e-10


def test_gaussian_beam_on_axis_amplitude():
    w0, z = 5.0, 100.0
    n = 256
    c = n / 2
    y, x = np.mgrid[0:n, 0:n]
    r2 = ((x - c) ** 2 + (y - c) ** 2) * PITCH ** 2
    f = ComplexField.from_complex(np.exp(-r2 / w0 ** 2), PITCH)
    out = propagate(f, z, CFG)
    zr = np.pi * w0 ** 2 * CFG.medium_index / CFG.wavelength_um
    analytic = w0 / (w0 * np.sqrt(1.0 + (z / zr) ** 2))
    numeric = np.abs(out.data[int(c), int(c)])
    assert abs(numeric - analytic) / analytic < 1e-3


def test_energy_conservation():
    f = banded_field(128, 50.0, Rng(2))
    out = propagate(f, 50.0, CFG)
    e0 = np.sum(np.abs(f.data) ** 2)
    e1 = np.sum(out.amplitude ** 2)
    assert abs(e1 - e0) / e0 < 1e-9


def test_composition():
    f = banded_field(64, 20.0, Rng(3))
    two_step = propagate(propagate(f, 8.0, CFG), 12.0, CFG)
    direct = propagate(f, 20.0, CFG)
    rel = (np.linalg.norm(two_step.data - direct.data)
           / np.linalg.norm(direct.data))
    assert rel < 1e-9


def test_linearity():
    rng = Rng(4)
    f = banded_field(64, 20.0, rng)
    g = banded_field(64, 20.0, rng)
    combo = ComplexField.from_complex(1.7 * f.data - 0.4j * g.data, PITCH)
    lhs = propagate(combo, 20.0, CFG).data
    rhs = 1.7 * propagate(f, 20.0, CFG).data - 0.4j * propagate(g, 20.0, CFG).data
    assert np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs) < 1e-10


def test_pitch_mismatch_rejected():
    f = banded_field(32, 10.0, Rng(5), pitch=1.0,
                     cfg=OpticalConfig(sr_pitch_um=1.0, sensor_pitch_um=1.0))
    with pytest.raises(ValueError):
        propagate(f, 10.0, CFG)


def test_padded_propagation_shape_and_agreement():
    # compact centered blob: padding must not change the result
    n = 64
    c = (n - 1) / 2
    y, x = np.mgrid[0:n, 0:n]
    r2 = ((x - c) ** 2 + (y - c) ** 2) * PITCH ** 2
    f = ComplexField.from_complex(np.exp(-r2 / 9.0) + 0.0j, PITCH)
    plain = propagate(f, 30.0, CFG)
    padded = propagate(f, 30.0, CFG, pad=True)
    assert padded.shape == f.shape
    rel = np.linalg.norm(padded.data - plain.data) / np.linalg.norm(plain.data)
    assert rel < 1e-3
