"""Differentiable training losses expressed on the autodiff tape.

The multi-scale SSIM here mirrors :mod:`holorec.metrics` exactly (same
window, same downsampling, same scale structure) so the metric and the
loss agree; scale means are clamped at a small positive floor before
powering to keep gradients finite.
"""

from __future__ import annotations

import numpy as np

from ..metrics import MsssimParams, gaussian_window
from . import autodiff as ad
from .autodiff import Tensor

_FLOOR = 1e-12


def mae_loss(y_hat: Tensor, y: np.ndarray) -> Tensor:
    return ad.mean(ad.absolute(y_hat - Tensor(y)))


def _crop_even(x: Tensor) -> Tensor:
    h, w = x.data.shape[-2:]
    if h % 2 == 0 and w % 2 == 0:
        return x
    old = x.data.shape

    def bwd(g):
        gx = np.zeros(old, dtype=np.float64)
        gx[..., :h - h % 2, :w - w % 2] = g
        x._accumulate(gx)

    return Tensor(x.data[..., :h - h % 2, :w - w % 2], parents=(x,), backward=bwd)


def _downsample(x: Tensor, win: np.ndarray) -> Tensor:
    smooth = ad.window_filter_valid(ad.pad_symmetric2d(x, win.shape[0] // 2), win)
    return ad.avg_pool2x(_crop_even(smooth))


def _ssim_maps(a: Tensor, b: Tensor, win, c1, c2, c3):
    mu_a = ad.window_filter_valid(a, win)
    mu_b = ad.window_filter_valid(b, win)
    va = ad.clamp_min(ad.window_filter_valid(a * a, win) - mu_a * mu_a, 0.0)
    vb = ad.clamp_min(ad.window_filter_valid(b * b, win) - mu_b * mu_b, 0.0)
    cov = ad.window_filter_valid(a * b, win) - mu_a * mu_b
    sig_a = ad.sqrt(ad.clamp_min(va, _FLOOR))
    sig_b = ad.sqrt(ad.clamp_min(vb, _FLOOR))
    lum = (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1)
    con = (2.0 * sig_a * sig_b + c2) / (va + vb + c2)
    struct = (cov + c3) / (sig_a * sig_b + c3)
    return lum, con, struct


def msssim(a: Tensor, b: Tensor, params: MsssimParams,
           data_range: float) -> Tensor:
    """Tape multi-scale SSIM over (B, C, H, W); means pool batch and channels."""
    m = params.scales
    if min(a.data.shape[-2:]) < params.min_side():
        raise ValueError(f"image {a.data.shape} too small for {m} scales")
    c1 = (params.k1 * data_range) ** 2
    c2 = (params.k2 * data_range) ** 2
    win = gaussian_window(params.window_size, params.window_sigma)
    result = None
    for j in range(m):
        lum, con, struct = _ssim_maps(a, b, win, c1, c2, c2 / 2.0)
        w = params.weights[j]
        if j == m - 1:
            factor = ad.clamp_min(ad.mean(lum * con * struct), 1e-6) ** w
        else:
            factor = (ad.clamp_min(ad.mean(con), 1e-6) ** w
                      * ad.clamp_min(ad.mean(struct), 1e-6) ** w)
            a, b = _downsample(a, win), _downsample(b, win)
        result = factor if result is None else result * factor
    return result


def msssim_loss(y_hat: Tensor, y: np.ndarray, params: MsssimParams) -> Tensor:
    y = np.asarray(y, dtype=np.float64)
    data_range = float(y.max() - y.min()) or 1.0
    return 1.0 - msssim(y_hat, Tensor(y), params, data_range)


def adversarial_generator_loss(d_fake: Tensor) -> Tensor:
    """Mean of (D(y_hat) - 1)^2 over the batch."""
    return ad.mean((d_fake - 1.0) ** 2)


def lsgan_discriminator_loss(d_fake: Tensor, d_real: Tensor) -> Tensor:
    """1/2 D(y_hat)^2 + 1/2 (D(y) - 1)^2, batch-averaged."""
    return 0.5 * ad.mean(d_fake ** 2) + 0.5 * ad.mean((d_real - 1.0) ** 2)
