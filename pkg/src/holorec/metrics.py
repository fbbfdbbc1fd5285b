"""Image-quality metrics and training losses.

Includes the pixel losses (RMSE, MAE), windowed SSIM and multi-scale
SSIM with the standard five-scale exponents, the weighted generator
objective (pixel + structural + adversarial terms), and the
least-squares discriminator objective. Complex fields are compared per
channel (amplitude, phase) after removing the best-fit global phase.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .core import ComplexField

# Standard five-scale exponents from the multi-scale SSIM literature.
STANDARD_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)

CSV_HEADER = ("name", "rmse_amp", "rmse_phase", "ssim_amp", "ssim_phase",
              "msssim_amp")


@dataclass(frozen=True)
class MsssimParams:
    """Hyperparameters of the multi-scale structural similarity index.

    ``weights[j]`` is used as both the contrast and structure exponent of
    scale j; the luminance exponent at the coarsest scale equals
    ``weights[-1]``. Stabilizers are ``C1 = (k1 R)^2``, ``C2 = (k2 R)^2``,
    ``C3 = C2 / 2`` for dynamic range R.
    """

    scales: int = 5
    weights: tuple = STANDARD_WEIGHTS
    k1: float = 0.01
    k2: float = 0.03
    window_size: int = 11
    window_sigma: float = 1.5

    def __post_init__(self):
        if self.scales < 1:
            raise ValueError("need at least one scale")
        if len(self.weights) != self.scales:
            raise ValueError("one weight per scale required")
        if self.window_size % 2 != 1 or self.window_size < 3:
            raise ValueError("window size must be odd and >= 3")

    @classmethod
    def for_scales(cls, m: int) -> "MsssimParams":
        """Renormalize the first m standard weights to sum to one."""
        if not 1 <= m <= len(STANDARD_WEIGHTS):
            raise ValueError(f"m must be in [1, {len(STANDARD_WEIGHTS)}]")
        w = np.array(STANDARD_WEIGHTS[:m])
        return cls(scales=m, weights=tuple(w / w.sum()))

    def min_side(self) -> int:
        return self.window_size * 2 ** (self.scales - 1)


@dataclass(frozen=True)
class LossWeights:
    """Relative weights of the generator's pixel/structural/adversarial terms."""

    alpha: float = 3.0
    beta: float = 1.0
    gamma: float = 0.5

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("loss weights must be non-negative")


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def rmse(a, b) -> float:
    a, b = _check_pair(a, b)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def mae(a, b) -> float:
    a, b = _check_pair(a, b)
    return float(np.mean(np.abs(a - b)))


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    g = np.exp(-0.5 * ((np.arange(size) - half) / sigma) ** 2)
    win = np.outer(g, g)
    return win / win.sum()


def _filter_valid(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    view = sliding_window_view(img, win.shape)
    return np.einsum("hwij,ij->hw", view, win, optimize=True)


def _ssim_maps(a, b, win, c1, c2, c3):
    mu_a = _filter_valid(a, win)
    mu_b = _filter_valid(b, win)
    var_a = np.maximum(_filter_valid(a * a, win) - mu_a ** 2, 0.0)
    var_b = np.maximum(_filter_valid(b * b, win) - mu_b ** 2, 0.0)
    cov = _filter_valid(a * b, win) - mu_a * mu_b
    sig_a = np.sqrt(var_a)
    sig_b = np.sqrt(var_b)
    lum = (2 * mu_a * mu_b + c1) / (mu_a ** 2 + mu_b ** 2 + c1)
    con = (2 * sig_a * sig_b + c2) / (var_a + var_b + c2)
    struct = (cov + c3) / (sig_a * sig_b + c3)
    return lum, con, struct


def _resolve_range(b, data_range):
    if data_range is None:
        data_range = float(b.max() - b.min())
    # an (almost) constant reference has no meaningful range; fall back to 1
    if data_range <= 1e-6 * max(1.0, float(np.abs(b).max())):
        return 1.0
    return data_range


def ssim(a, b, params: MsssimParams = MsssimParams(),
         data_range: float | None = None) -> float:
    """Mean over valid windows of luminance * contrast * structure.

    ``b`` is the reference; the dynamic range defaults to its max - min.
    """
    a, b = _check_pair(a, b)
    if min(a.shape) < params.window_size:
        raise ValueError(f"image {a.shape} smaller than the "
                         f"{params.window_size}-pixel window")
    r = _resolve_range(b, data_range)
    c1, c2 = (params.k1 * r) ** 2, (params.k2 * r) ** 2
    win = gaussian_window(params.window_size, params.window_sigma)
    lum, con, struct = _ssim_maps(a, b, win, c1, c2, c2 / 2.0)
    return float(np.mean(lum * con * struct))


def _downsample(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    """Gaussian low-pass (reflect boundary) then 2x2 mean-pool."""
    smooth = ndimage.correlate(img, win, mode="reflect")
    h, w = smooth.shape
    return smooth[:h - h % 2, :w - w % 2].reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def msssim(a, b, params: MsssimParams = MsssimParams(),
           data_range: float | None = None) -> float:
    """Multi-scale structural similarity.

    Scales 1..m-1 contribute ``mean(contrast)^w * mean(structure)^w``;
    the coarsest scale contributes the full per-window SSIM mean raised
    to its weight, so a single scale with weight 1 reduces exactly to
    :func:`ssim`. Scale means are clamped at zero before powering.
    """
    a, b = _check_pair(a, b)
    m = params.scales
    if min(a.shape) < params.min_side():
        raise ValueError(
            f"image {a.shape} too small for {m} dyadic scales "
            f"(needs >= {params.min_side()} per side)")
    r = _resolve_range(b, data_range)
    c1, c2 = (params.k1 * r) ** 2, (params.k2 * r) ** 2
    win = gaussian_window(params.window_size, params.window_sigma)

    result = 1.0
    for j in range(m):
        lum, con, struct = _ssim_maps(a, b, win, c1, c2, c2 / 2.0)
        w = params.weights[j]
        if j == m - 1:
            result *= max(float(np.mean(lum * con * struct)), 0.0) ** w
        else:
            result *= (max(float(np.mean(con)), 0.0) ** w
                       * max(float(np.mean(struct)), 0.0) ** w)
            a, b = _downsample(a, win), _downsample(b, win)
    return float(result)


def msssim_loss(a, b, params: MsssimParams = MsssimParams(),
                data_range: float | None = None) -> float:
    return 1.0 - msssim(a, b, params, data_range)


def adversarial_loss(d_of_y_hat: float) -> float:
    """Least-squares generator term (D(y_hat) - 1)^2."""
    return float((d_of_y_hat - 1.0) ** 2)


def generator_loss(y_hat, y, d_of_y_hat: float, w: LossWeights = LossWeights(),
                   params: MsssimParams = MsssimParams(),
                   data_range: float | None = None) -> float:
    """Weighted sum: alpha * MAE + beta * (1 - MSSSIM) + gamma * (D-1)^2."""
    return (w.alpha * mae(y_hat, y)
            + w.beta * msssim_loss(y_hat, y, params, data_range)
            + w.gamma * adversarial_loss(d_of_y_hat))


def discriminator_loss(d_of_y_hat: float, d_of_y: float) -> float:
    """Least-squares discriminator objective: 1/2 D(y_hat)^2 + 1/2 (D(y)-1)^2."""
    if not (np.isfinite(d_of_y_hat) and np.isfinite(d_of_y)):
        raise ValueError("discriminator outputs must be finite")
    return float(0.5 * d_of_y_hat ** 2 + 0.5 * (d_of_y - 1.0) ** 2)


def align_global_phase(est: ComplexField, ref: ComplexField,
                       support: np.ndarray | None = None) -> ComplexField:
    """Rotate ``est`` by the constant phase best matching ``ref``."""
    e, r = est.data, ref.data
    if support is not None:
        e_sel, r_sel = e[support], r[support]
    else:
        e_sel, r_sel = e, r
    corr = np.sum(e_sel * np.conj(r_sel))
    if corr == 0:
        return est
    theta = np.angle(corr)
    return ComplexField.from_complex(e * np.exp(-1j * theta), est.pitch_um)


def wrap_phase(phi: np.ndarray) -> np.ndarray:
    return np.angle(np.exp(1j * phi))


def _auto_msssim_params(shape, max_scales: int = 5) -> MsssimParams:
    m = 1
    side = min(shape)
    while m < max_scales and side >= 11 * 2 ** m:
        m += 1
    return MsssimParams.for_scales(m)


def field_metrics(est: ComplexField, ref: ComplexField,
                  support_threshold: float = 0.1) -> dict:
    """Per-channel comparison of two complex fields.

    Amplitude metrics are phase-invariant; phase metrics are evaluated on
    the wrapped difference after global-phase alignment, restricted to the
    support where the reference amplitude exceeds ``support_threshold``.
    The MS-SSIM scale count adapts to the image size (at most 5).
    """
    if est.shape != ref.shape:
        raise ValueError(f"field shapes differ: {est.shape} vs {ref.shape}")
    support = ref.amplitude > support_threshold
    if not support.any():
        raise ValueError("reference support is empty")
    aligned = align_global_phase(est, ref, support)
    amp_e, amp_r = aligned.amplitude, ref.amplitude
    dphi = wrap_phase(aligned.phase - ref.phase)
    params = _auto_msssim_params(ref.shape)
    return {
        "rmse_amp": rmse(amp_e, amp_r),
        "rmse_phase": float(np.sqrt(np.mean(dphi[support] ** 2))),
        "ssim_amp": ssim(amp_e, amp_r),
        "ssim_phase": ssim(aligned.phase, ref.phase),
        "msssim_amp": msssim(amp_e, amp_r, params),
    }


def write_metrics_csv(path, rows) -> None:
    """Rows of (name, metrics-dict) to CSV with the fixed header."""
    lines = [",".join(CSV_HEADER)]
    for name, m in rows:
        lines.append(",".join([str(name)] + [f"{m[k]:.9g}" for k in CSV_HEADER[1:]]))
    tmp = os.fspath(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)
