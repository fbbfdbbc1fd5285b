import numpy as np
import pytest

from holorec import Rng
from holorec.rnn import autodiff as ad
from holorec.rnn.autodiff import Tensor

from fdcheck import max_rel_error

TOL = 1e-4


def rnd(rng, *shape):
    return rng.normal(size=shape)


def test_backward_requires_scalar():
    t = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ValueError):
        (t * 2.0).backward()


def test_gradient_accumulates_over_reuse():
    x = Tensor(np.array([3.0]), requires_grad=True)
    y = x * x + x * 2.0  # dy/dx = 2x + 2 = 8
    ad.total(y).backward()
    assert abs(x.grad[0] - 8.0) < 1e-12


def test_constant_folding_skips_grad():
    x = Tensor(np.ones(3))
    y = x * 2.0
    assert not y.requires_grad


@pytest.mark.parametrize("name,fn", [
    ("sigmoid", lambda ts: ad.mean(ad.sigmoid(ts["a"] * ts["b"]))),
    ("tanh", lambda ts: ad.mean(ad.tanh(ts["a"] - ts["b"]))),
    ("leaky_relu", lambda ts: ad.mean(ad.leaky_relu(ts["a"] * 2.0 - ts["b"]))),
    ("abs", lambda ts: ad.mean(ad.absolute(ts["a"] - ts["b"]))),
    ("sqrt", lambda ts: ad.mean(ad.sqrt(ad.clamp_min(
        ts["a"] * ts["a"] + 0.1, 1e-12)) + ts["b"])),
    ("div_pow", lambda ts: ad.mean((ts["a"] / (ts["b"] * ts["b"] + 1.0)) ** 1.7)),
    ("sum", lambda ts: ad.total(ts["a"] * ts["b"]) * 0.1),
])
def test_elementwise_gradients(name, fn):
    rng = Rng(hash(name) % 1000)
    arrays = {"a": rng.uniform(0.1, 1.0, (3, 4)),
              "b": rng.uniform(0.2, 0.9, (3, 4))}
    assert max_rel_error(fn, arrays) < TOL


@pytest.mark.parametrize("dilation", [1, 2])
def test_conv2d_gradients(dilation):
    rng = Rng(10 + dilation)
    arrays = {"x": rnd(rng, 2, 2, 6, 6), "w": rnd(rng, 3, 2, 3, 3) * 0.3,
              "b": rnd(rng, 3) * 0.1}
    fn = lambda ts: ad.mean(ad.conv2d(ts["x"], ts["w"], ts["b"], dilation) ** 2.0)
    assert max_rel_error(fn, arrays) < TOL


def test_conv1x1_gradients():
    rng = Rng(12)
    arrays = {"x": rnd(rng, 1, 3, 4, 4), "w": rnd(rng, 2, 3, 1, 1),
              "b": rnd(rng, 2)}
    fn = lambda ts: ad.mean(ad.conv2d(ts["x"], ts["w"], ts["b"]) ** 2.0)
    assert max_rel_error(fn, arrays) < TOL


def test_conv2d_identity_kernel():
    x = Rng(13).normal(size=(1, 1, 8, 8))
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 1, 1] = 1.0
    out = ad.conv2d(Tensor(x), Tensor(w), Tensor(np.zeros(1)))
    np.testing.assert_array_equal(out.data, x)


def test_conv2d_dilation_two_taps():
    # output at the center is the weighted sum of taps spaced 2 apart (5x5 span)
    x = Rng(14).normal(size=(1, 1, 8, 8))
    w = np.arange(1.0, 10.0).reshape(1, 1, 3, 3)
    out = ad.conv2d(Tensor(x), Tensor(w), Tensor(np.zeros(1)), dilation=2)
    manual = sum(w[0, 0, i, j] * x[0, 0, 4 + 2 * (i - 1), 4 + 2 * (j - 1)]
                 for i in range(3) for j in range(3))
    assert abs(out.data[0, 0, 4, 4] - manual) < 1e-12


def test_conv2d_matches_nested_loop_oracle():
    rng = Rng(15)
    x = rnd(rng, 1, 2, 6, 6)
    w = rnd(rng, 3, 2, 3, 3)
    b = rnd(rng, 3)
    out = ad.conv2d(Tensor(x), Tensor(w), Tensor(b)).data
    expect = np.zeros((1, 3, 6, 6))
    for o in range(3):
        for yy in range(6):
            for xx in range(6):
                acc = b[o]
                for c in range(2):
                    for i in range(3):
                        for j in range(3):
                            sy, sx = yy + i - 1, xx + j - 1
                            if 0 <= sy < 6 and 0 <= sx < 6:
                                acc += w[o, c, i, j] * x[0, c, sy, sx]
                expect[0, o, yy, xx] = acc
    assert np.abs(out - expect).max() < 1e-10


def test_pool_upsample_dense_concat_gradients():
    rng = Rng(16)
    x = {"x": rnd(rng, 1, 2, 4, 4)}
    assert max_rel_error(lambda ts: ad.mean(ad.avg_pool2x(ts["x"]) ** 2.0), x) < TOL
    assert max_rel_error(
        lambda ts: ad.mean(ad.upsample_nearest2x(ts["x"]) ** 3.0), x) < TOL
    arrays = {"x": rnd(rng, 3, 5), "w": rnd(rng, 2, 5), "b": rnd(rng, 2)}
    assert max_rel_error(
        lambda ts: ad.mean(ad.dense(ts["x"], ts["w"], ts["b"]) ** 2.0),
        arrays) < TOL
    pair = {"a": rnd(rng, 1, 2, 3, 3), "b": rnd(rng, 1, 1, 3, 3)}
    assert max_rel_error(
        lambda ts: ad.mean(ad.concat_channels([ts["a"], ts["b"]]) ** 2.0),
        pair) < TOL


def test_pad_and_window_gradients():
    rng = Rng(17)
    x = {"x": rnd(rng, 1, 1, 5, 5)}
    assert max_rel_error(
        lambda ts: ad.mean(ad.pad_symmetric2d(ts["x"], 2) ** 2.0), x) < TOL
    kern = np.outer([0.25, 0.5, 0.25], [0.25, 0.5, 0.25])
    assert max_rel_error(
        lambda ts: ad.mean(ad.window_filter_valid(ts["x"], kern) ** 2.0),
        x) < TOL


def test_pad_symmetric_matches_numpy():
    x = Rng(18).normal(size=(1, 1, 4, 5))
    out = ad.pad_symmetric2d(Tensor(x), 3).data
    expect = np.pad(x, ((0, 0), (0, 0), (3, 3), (3, 3)), mode="symmetric")
    np.testing.assert_array_equal(out, expect)


def test_avg_pool_and_upsample_values():
    x = np.arange(16.0).reshape(1, 1, 4, 4)
    pooled = ad.avg_pool2x(Tensor(x)).data
    np.testing.assert_allclose(pooled[0, 0], [[2.5, 4.5], [10.5, 12.5]])
    up = ad.upsample_nearest2x(Tensor(pooled)).data
    assert up.shape == (1, 1, 4, 4)
    assert up[0, 0, 0, 0] == up[0, 0, 1, 1] == 2.5


def test_linear_bias_gradient_counts_positions():
    # d(sum(conv(x)))/d(bias) equals the number of output positions
    x = Rng(19).normal(size=(2, 1, 5, 5))
    w = Tensor(np.zeros((1, 1, 3, 3)), requires_grad=True)
    b = Tensor(np.zeros(1), requires_grad=True)
    ad.total(ad.conv2d(Tensor(x), w, b)).backward()
    assert b.grad[0] == 2 * 5 * 5
