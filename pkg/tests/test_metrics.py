import numpy as np
import pytest

from holorec import ComplexField, LossWeights, MsssimParams, Rng
from holorec.metrics import (adversarial_loss, align_global_phase,
                             discriminator_loss, field_metrics,
                             gaussian_window, generator_loss, mae, msssim,
                             msssim_loss, rmse, ssim, write_metrics_csv,
                             CSV_HEADER)


# ---------------------------------------------------------------- oracles

def ssim_oracle(a, b, params, data_range=None):
    """Window-by-window direct implementation (no vectorized filtering)."""
    win = gaussian_window(params.window_size, params.window_sigma)
    k = params.window_size
    if data_range is None:
        data_range = b.max() - b.min()
        if data_range <= 0:
            data_range = 1.0
    c1 = (params.k1 * data_range) ** 2
    c2 = (params.k2 * data_range) ** 2
    c3 = c2 / 2.0
    h, w = a.shape
    vals = []
    for i in range(h - k + 1):
        for j in range(w - k + 1):
            pa = a[i:i + k, j:j + k]
            pb = b[i:i + k, j:j + k]
            mu_a = (win * pa).sum()
            mu_b = (win * pb).sum()
            va = max((win * pa * pa).sum() - mu_a ** 2, 0.0)
            vb = max((win * pb * pb).sum() - mu_b ** 2, 0.0)
            cov = (win * pa * pb).sum() - mu_a * mu_b
            lum = (2 * mu_a * mu_b + c1) / (mu_a ** 2 + mu_b ** 2 + c1)
            con = (2 * np.sqrt(va) * np.sqrt(vb) + c2) / (va + vb + c2)
            st = (cov + c3) / (np.sqrt(va) * np.sqrt(vb) + c3)
            vals.append(lum * con * st)
    return float(np.mean(vals))


def cs_means_oracle(a, b, params, data_range):
    win = gaussian_window(params.window_size, params.window_sigma)
    k = params.window_size
    c2 = (params.k2 * data_range) ** 2
    c3 = c2 / 2.0
    h, w = a.shape
    cons, structs = [], []
    for i in range(h - k + 1):
        for j in range(w - k + 1):
            pa = a[i:i + k, j:j + k]
            pb = b[i:i + k, j:j + k]
            mu_a = (win * pa).sum()
            mu_b = (win * pb).sum()
            va = max((win * pa * pa).sum() - mu_a ** 2, 0.0)
            vb = max((win * pb * pb).sum() - mu_b ** 2, 0.0)
            cov = (win * pa * pb).sum() - mu_a * mu_b
            cons.append((2 * np.sqrt(va) * np.sqrt(vb) + c2) / (va + vb + c2))
            structs.append((cov + c3) / (np.sqrt(va) * np.sqrt(vb) + c3))
    return float(np.mean(cons)), float(np.mean(structs))


def downsample_oracle(img, params):
    win = gaussian_window(params.window_size, params.window_sigma)
    k = params.window_size
    half = k // 2
    h, w = img.shape
    padded = np.pad(img, half, mode="symmetric")  # edge-including reflection
    smooth = np.empty_like(img)
    for i in range(h):
        for j in range(w):
            smooth[i, j] = (win * padded[i:i + k, j:j + k]).sum()
    return smooth[:h - h % 2, :w - w % 2].reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def msssim_oracle(a, b, params, data_range=None):
    if data_range is None:
        data_range = b.max() - b.min()
        if data_range <= 0:
            data_range = 1.0
    out = 1.0
    for j in range(params.scales):
        w = params.weights[j]
        if j == params.scales - 1:
            out *= max(ssim_oracle(a, b, params, data_range), 0.0) ** w
        else:
            cmean, smean = cs_means_oracle(a, b, params, data_range)
            out *= max(cmean, 0.0) ** w * max(smean, 0.0) ** w
            a, b = downsample_oracle(a, params), downsample_oracle(b, params)
    return out


# ----------------------------------------------------------------- rmse/mae

def test_rmse_trivials():
    a = Rng(0).uniform(size=(8, 8))
    assert rmse(a, a) == 0.0
    assert rmse(np.zeros((4, 4)), np.ones((4, 4))) == 1.0


def test_rmse_elementwise_oracle():
    rng = Rng(1)
    a, b = rng.uniform(size=(8, 8)), rng.uniform(size=(8, 8))
    acc = 0.0
    for i in range(8):
        for j in range(8):
            acc += (a[i, j] - b[i, j]) ** 2
    assert abs(rmse(a, b) - np.sqrt(acc / 64)) < 1e-12


def test_mae_trivials_and_oracle():
    assert mae(np.array([[0.0, 2.0]]), np.array([[1.0, 1.0]])) == 1.0
    rng = Rng(2)
    a, b = rng.uniform(size=(16, 16)), rng.uniform(size=(16, 16))
    acc = sum(abs(a[i, j] - b[i, j]) for i in range(16) for j in range(16))
    assert abs(mae(a, b) - acc / 256) < 1e-12


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        rmse(np.zeros((4, 4)), np.zeros((4, 5)))
    with pytest.raises(ValueError):
        mae(np.zeros((4, 4)), np.zeros((5, 4)))


# ---------------------------------------------------------------------- ssim

def test_ssim_identity():
    a = Rng(3).uniform(size=(32, 32))
    assert abs(ssim(a, a) - 1.0) < 1e-9


def test_ssim_uncorrelated_noise_low():
    rng = Rng(4)
    a = rng.normal(size=(128, 128))
    b = rng.normal(size=(128, 128))
    assert abs(ssim(a, b, data_range=6.0)) < 0.1


def test_ssim_luminance_shift_below_one():
    a = Rng(5).uniform(size=(32, 32))
    r = a.max() - a.min()
    assert ssim(a + 0.5 * r, a) < 1.0


def test_ssim_symmetry():
    rng = Rng(6)
    a, b = rng.uniform(size=(24, 24)), rng.uniform(size=(24, 24))
    assert abs(ssim(a, b, data_range=1.0) - ssim(b, a, data_range=1.0)) < 1e-12


def test_ssim_window_size_guard():
    with pytest.raises(ValueError):
        ssim(np.zeros((8, 8)), np.zeros((8, 8)))


def test_ssim_matches_direct_oracle():
    rng = Rng(7)
    for _ in range(4):
        a = rng.uniform(size=(24, 24))
        b = a + 0.1 * rng.normal(size=(24, 24))
        got = ssim(a, b, data_range=1.0)
        want = ssim_oracle(a, b, MsssimParams(), data_range=1.0)
        assert abs(got - want) < 1e-6


# -------------------------------------------------------------------- msssim

def test_msssim_identity_loss_zero():
    a = Rng(8).uniform(size=(64, 64))
    p = MsssimParams.for_scales(3)
    assert abs(msssim_loss(a, a, p)) < 1e-9


def test_msssim_noise_monotonicity():
    rng = Rng(9)
    a = np.fft.ifft2(np.fft.fft2(rng.uniform(size=(64, 64)))
                     * (np.abs(np.fft.fftfreq(64))[:, None] < 0.2)
                     * (np.abs(np.fft.fftfreq(64))[None, :] < 0.2)).real
    p = MsssimParams.for_scales(3)
    vals = []
    for sigma in (0.01, 0.05, 0.1):
        noisy = a + Rng(10).normal(0.0, sigma, a.shape)
        vals.append(msssim(a, noisy, p, data_range=1.0))
    assert vals[0] > vals[1] > vals[2]


def test_msssim_single_scale_equals_ssim():
    rng = Rng(11)
    a = rng.uniform(size=(32, 32))
    b = a + 0.05 * rng.normal(size=(32, 32))
    p1 = MsssimParams.for_scales(1)
    assert abs(msssim(a, b, p1, data_range=1.0)
               - ssim(a, b, data_range=1.0)) < 1e-9


def test_msssim_size_guard():
    p = MsssimParams()  # five scales need >= 176 pixels per side
    with pytest.raises(ValueError):
        msssim(np.zeros((64, 64)), np.zeros((64, 64)), p)


def test_msssim_matches_direct_oracle():
    rng = Rng(12)
    p = MsssimParams.for_scales(3)
    for _ in range(10):
        a = rng.uniform(size=(64, 64))
        b = np.clip(a + 0.1 * rng.normal(size=(64, 64)), 0, 1)
        got = msssim(a, b, p, data_range=1.0)
        want = msssim_oracle(a, b, p, data_range=1.0)
        assert abs(got - want) < 1e-6


def test_bounds():
    rng = Rng(13)
    a = rng.uniform(size=(64, 64))
    b = rng.uniform(size=(64, 64))
    s = ssim(a, b, data_range=1.0)
    m = msssim(a, b, MsssimParams.for_scales(2), data_range=1.0)
    assert -1.0 <= s <= 1.0
    assert -1.0 <= m <= 1.0
    assert msssim_loss(a, b, MsssimParams.for_scales(2), data_range=1.0) >= 0.0


# -------------------------------------------------------------------- losses

def test_generator_loss_vanishes_on_match():
    y = Rng(14).uniform(size=(64, 64))
    p = MsssimParams.for_scales(3)
    assert abs(generator_loss(y, y, 1.0, LossWeights(), p)) < 1e-9


def test_generator_loss_default_weights():
    w = LossWeights()
    assert (w.alpha, w.beta, w.gamma) == (3.0, 1.0, 0.5)


def test_generator_loss_adversarial_term():
    y = Rng(15).uniform(size=(64, 64))
    p = MsssimParams.for_scales(3)
    assert abs(generator_loss(y, y, 0.0, LossWeights(), p) - 0.5) < 1e-9
    assert adversarial_loss(0.0) == 1.0


def test_discriminator_loss_cases():
    assert discriminator_loss(0.0, 1.0) == 0.0
    assert discriminator_loss(1.0, 0.0) == 1.0
    assert discriminator_loss(0.5, 0.5) == 0.25


def test_discriminator_loss_requires_finite():
    with pytest.raises(ValueError):
        discriminator_loss(np.nan, 0.0)


# ------------------------------------------------------------- field metrics

def test_global_phase_alignment():
    rng = Rng(16)
    amp = rng.uniform(0.5, 1.0, (64, 64))
    phase = rng.uniform(-0.5, 0.5, (64, 64))
    ref = ComplexField.from_amp_phase(amp, phase, 1.0)
    rotated = ComplexField.from_complex(ref.data * np.exp(1j * 0.8), 1.0)
    m = field_metrics(rotated, ref)
    assert m["rmse_amp"] < 1e-12
    assert m["rmse_phase"] < 1e-12
    aligned = align_global_phase(rotated, ref)
    np.testing.assert_allclose(aligned.data, ref.data, atol=1e-12)


def test_metrics_csv(tmp_path):
    rows = [("s0", {k: 0.5 for k in CSV_HEADER[1:]}),
            ("s1", {k: 0.25 for k in CSV_HEADER[1:]})]
    path = tmp_path / "m.csv"
    write_metrics_csv(path, rows)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[1].startswith("s0,0.5")
    assert len(lines) == 3
