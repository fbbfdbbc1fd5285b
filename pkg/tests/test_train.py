import numpy as np
import pytest

from holorec import LossWeights, OpticalConfig, Rng
from holorec.core import NumericsError
from holorec.simulate import capture, synth_sample
from holorec.rnn.infer import (backprop_input, infer_rh_m, infer_rh_md,
                               load_checkpoint, mean_backprop_baseline,
                               raw_input, save_checkpoint)
from holorec.rnn.model import DiscriminatorConfig, GeneratorConfig, init_generator
from holorec.rnn.train import train_toy

CFG = OpticalConfig(sr_pitch_um=2.0, sensor_pitch_um=2.0)
Z_BAR = 450.0


def make_dataset(n, size, rng_seed=100, m=2, phase_std=0.7, corr=10.0):
    root = Rng(rng_seed)
    items = []
    for i in range(n):
        rng = root.child(i)
        sample = synth_sample("smooth_random", size, CFG, rng.child(0),
                              phase_std=phase_std, corr_length_um=corr,
                              amplitude_contrast=0.25)
        z_rng = rng.child(1)
        zs = [float(z_rng.uniform(350.0, 550.0)) for _ in range(m)]
        holos = [capture(sample, z, CFG).image for z in zs]
        inputs = [backprop_input(h, Z_BAR, CFG) for h in holos]
        target = np.stack([sample.transmittance.re, sample.transmittance.im])
        items.append((inputs, target))
    return items


def test_epochs_zero_returns_initialization():
    items = make_dataset(2, 32)
    cfg = GeneratorConfig(base=2, m_train=2)
    result = train_toy(items, cfg, None, LossWeights(3, 1, 0), 0, Rng(5))
    expected = init_generator(cfg, Rng(5).child(0))
    assert result.gen_params.keys() == expected.keys()
    for k in expected:
        np.testing.assert_array_equal(result.gen_params[k], expected[k])
    assert result.history["loss_g"] == []


def test_training_is_bitwise_deterministic():
    items = make_dataset(4, 32)
    cfg = GeneratorConfig(base=2, m_train=2)
    runs = [train_toy(items, cfg, None, LossWeights(3, 1, 0), 2, Rng(9),
                      batch_size=2, lr_g=1e-3, msssim_scales=2)
            for _ in range(2)]
    assert runs[0].history == runs[1].history
    for k in runs[0].gen_params:
        assert runs[0].gen_params[k].tobytes() == runs[1].gen_params[k].tobytes()


def test_mae_halves_in_200_iterations():
    # 20 samples, batch 4 -> 5 steps per epoch; 40 epochs = 200 updates
    items = make_dataset(20, 64, phase_std=0.5, corr=14.0)
    cfg = GeneratorConfig(base=4, m_train=2)
    result = train_toy(items, cfg, None, LossWeights(3.0, 1.0, 0.0), 40,
                       Rng(7), batch_size=4, lr_g=6e-3, lr_decay=0.98)
    history = result.history["mae"]
    assert history[-1] < 0.5 * history[0]


def test_rh_md_toy_beats_untrained_init():
    # sparse mixed-contrast disks, raw-hologram inputs, dilated network
    def make(n, seed):
        root = Rng(seed)
        items, meta = [], []
        for i in range(n):
            rng = root.child(i)
            s = synth_sample("phase_disks", 32, CFG, rng.child(0), n_disks=2,
                             radius_um=(4.0, 7.0), phase_rad=(0.5, 1.2),
                             absorption=0.35, softness_um=1.0)
            zs = [float(rng.child(1).uniform(400.0, 600.0)) for _ in range(2)]
            holos = [capture(s, z, CFG).image for z in zs]
            items.append((
                [raw_input(h) for h in holos],
                np.stack([s.transmittance.re, s.transmittance.im])))
            meta.append((s, holos))
        return items, meta

    from holorec.metrics import field_metrics
    train_items, _ = make(24, 500)
    _, test_meta = make(6, 900)
    cfg = GeneratorConfig(base=4, dilation=2, m_train=2)
    res = train_toy(train_items, cfg, None, LossWeights(3, 1, 0), 50, Rng(7),
                    batch_size=4, lr_g=5e-3, lr_decay=0.98, msssim_scales=2)
    init_params = init_generator(cfg, Rng(7).child(0))
    trained, untrained = [], []
    for s, holos in test_meta:
        rec_t = infer_rh_md(cfg, res.gen_params, holos, CFG)
        rec_u = infer_rh_md(cfg, init_params, holos, CFG)
        trained.append(field_metrics(rec_t, s.transmittance)["rmse_amp"])
        untrained.append(field_metrics(rec_u, s.transmittance)["rmse_amp"])
    assert np.mean(trained) <= 0.5 * np.mean(untrained)


def test_gan_training_updates_both_networks():
    items = make_dataset(4, 32)
    cfg = GeneratorConfig(base=2, m_train=2)
    disc = DiscriminatorConfig(base=2, hidden=8)
    result = train_toy(items, cfg, disc, LossWeights(3, 1, 0.5), 2, Rng(3),
                       batch_size=2, lr_g=1e-3, lr_d=1e-4, msssim_scales=2)
    assert result.disc_params is not None
    assert all(len(v) == 2 for v in result.history.values())
    assert result.history["loss_d"][0] > 0
    # discriminator moved away from its initialization
    init = train_toy(items, cfg, disc, LossWeights(3, 1, 0.5), 0, Rng(3))
    moved = any(not np.array_equal(result.disc_params[k], init.disc_params[k])
                for k in result.disc_params)
    assert moved


def test_gamma_requires_discriminator():
    items = make_dataset(2, 32)
    with pytest.raises(ValueError):
        train_toy(items, GeneratorConfig(base=2, m_train=2), None,
                  LossWeights(3, 1, 0.5), 1, Rng(0))


def test_empty_dataset_rejected():
    with pytest.raises(ValueError):
        train_toy([], GeneratorConfig(base=2), None, LossWeights(), 1, Rng(0))


def test_divergence_aborts_with_epoch_index():
    items = make_dataset(2, 32)
    seq, target = items[0]
    bad = np.array(target)
    bad[0, 0, 0] = np.nan
    with pytest.raises(NumericsError, match="epoch 0"):
        train_toy([(seq, bad)], GeneratorConfig(base=2, m_train=2), None,
                  LossWeights(3, 1, 0), 1, Rng(0), msssim_scales=2)


# ---------------------------------------------------------------- inference

def test_checkpoint_roundtrip(tmp_path):
    cfg = GeneratorConfig(base=2, m_train=3, dilation=2)
    params = init_generator(cfg, Rng(11))
    save_checkpoint(tmp_path, cfg, params, input_mode="raw")
    cfg2, params2, mode = load_checkpoint(tmp_path)
    assert cfg2 == cfg
    assert mode == "raw"
    assert params2.keys() == params.keys()
    for k in params:
        assert params2[k].tobytes() == params[k].tobytes()


def test_infer_rh_m_shapes_and_padding():
    cfg = GeneratorConfig(base=2, m_train=2)
    params = init_generator(cfg, Rng(0))
    sample = synth_sample("smooth_random", 32, CFG, Rng(1), phase_std=0.5)
    holo = capture(sample, 420.0, CFG).image
    one = infer_rh_m(cfg, params, [holo], Z_BAR, CFG)
    assert one.shape == (32, 32)
    assert one.pitch_um == CFG.sr_pitch_um
    # single hologram equals the replication-padded pair
    two = infer_rh_m(cfg, params, [holo, holo], Z_BAR, CFG)
    assert one.data.tobytes() == two.data.tobytes()


def test_infer_rh_md_requires_dilation():
    cfg = GeneratorConfig(base=2, m_train=2, dilation=1)
    params = init_generator(cfg, Rng(0))
    with pytest.raises(ValueError):
        infer_rh_md(cfg, params, [np.ones((32, 32))], CFG)


def test_raw_input_encoding():
    holo = Rng(2).uniform(0.5, 2.0, (16, 16))
    enc = raw_input(holo)
    np.testing.assert_allclose(enc[0], np.sqrt(holo))
    np.testing.assert_array_equal(enc[1], 0.0)


def test_mean_backprop_baseline_uniform():
    holos = [np.ones((32, 32)), np.ones((32, 32))]
    base = mean_backprop_baseline(holos, Z_BAR, CFG)
    np.testing.assert_allclose(base.amplitude, 1.0, atol=1e-9)
