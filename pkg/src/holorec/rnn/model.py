"""Recurrent hologram-reconstruction generator and GAN discriminator.

The generator is a 4-scale encoder/decoder. Each encoder block k holds two
convolutions whose widths follow base * 2^(k-3+i) for layer i in {1, 2};
a convolutional gated recurrent unit connects encoder and decoder at every
scale, carrying state across the input hologram sequence and emitting
through a 1x1 convolution. The dilated variant sets dilation 2 on every
3x3 convolution, enlarging the receptive field for raw-hologram inputs.
The discriminator is a plain CNN: 5 blocks of two 3x3 convolutions with
widths base * 2^(k-1), average pooling, and two dense layers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import Rng
from . import autodiff as ad
from .autodiff import Tensor

LEAKY_SLOPE = 0.1


@dataclass(frozen=True)
class GeneratorConfig:
    base: int = 20          # 20 for the standard model, 16 for the dilated one
    scales: int = 4
    dilation: int = 1
    in_channels: int = 2
    out_channels: int = 2
    m_train: int = 2

    def __post_init__(self):
        if self.base < 2 or self.base % 2:
            raise ValueError("base must be an even integer >= 2")
        if self.scales != 4:
            raise ValueError("the architecture is defined for 4 scales")
        if self.dilation not in (1, 2):
            raise ValueError("dilation must be 1 or 2")
        if self.m_train < 1:
            raise ValueError("m_train must be >= 1")

    def channels(self, k: int, i: int) -> int:
        """Width of convolution layer i (1-based) in encoder block k."""
        if not (1 <= k <= self.scales and i in (1, 2)):
            raise ValueError(f"no layer ({k}, {i}) in this architecture")
        return self.base * 2 ** (k - 3 + i) if k - 3 + i >= 0 \
            else self.base // 2 ** (3 - k - i)


@dataclass(frozen=True)
class DiscriminatorConfig:
    base: int = 20
    blocks: int = 5
    hidden: int = 64
    in_channels: int = 2

    def channels(self, k: int) -> int:
        return self.base * 2 ** (k - 1)


# ----------------------------------------------------------- parameter maps

def _conv_shape(cin, cout, k=3):
    return ((cout, cin, k, k), (cout,))


def generator_param_shapes(config: GeneratorConfig) -> dict:
    shapes = {}

    def add(name, cin, cout, k=3):
        shapes[name + "_w"], shapes[name + "_b"] = _conv_shape(cin, cout, k)

    prev = config.in_channels
    for k in range(1, config.scales + 1):
        c1, c2 = config.channels(k, 1), config.channels(k, 2)
        add(f"enc{k}_conv1", prev, c1)
        add(f"enc{k}_conv2", c1, c2)
        prev = c2
    for k in range(1, config.scales + 1):
        c = config.channels(k, 2)
        add(f"cgru{k}_z", 2 * c, c)
        add(f"cgru{k}_r", 2 * c, c)
        add(f"cgru{k}_h", 2 * c, c)
        add(f"cgru{k}_out", c, c, k=1)
    bot = config.scales
    add(f"dec{bot}_conv1", config.channels(bot, 2), config.channels(bot, 2))
    add(f"dec{bot}_conv2", config.channels(bot, 2), config.channels(bot, 1))
    for k in range(config.scales - 1, 0, -1):
        cat = config.channels(k, 2) + config.channels(k + 1, 1)
        add(f"dec{k}_conv1", cat, config.channels(k, 2))
        add(f"dec{k}_conv2", config.channels(k, 2), config.channels(k, 1))
    add("final", config.channels(1, 1), config.out_channels, k=1)
    return shapes


def discriminator_param_shapes(config: DiscriminatorConfig) -> dict:
    shapes = {}
    prev = config.in_channels
    for k in range(1, config.blocks + 1):
        c = config.channels(k)
        shapes[f"blk{k}_conv1_w"], shapes[f"blk{k}_conv1_b"] = _conv_shape(prev, c)
        shapes[f"blk{k}_conv2_w"], shapes[f"blk{k}_conv2_b"] = _conv_shape(c, c)
        prev = c
    # dense input size depends on the image; stored as a per-feature shape
    shapes["dense1_w"] = ("hidden", "features")
    shapes["dense1_b"] = (config.hidden,)
    shapes["dense2_w"] = (1, config.hidden)
    shapes["dense2_b"] = (1,)
    return shapes


def init_params(shapes: dict, rng: Rng) -> dict:
    """Fan-in-scaled uniform weights, zero biases."""
    params = {}
    for name, shape in shapes.items():
        if name.endswith("_b"):
            params[name] = np.zeros(shape, dtype=np.float64)
        else:
            fan_in = int(np.prod(shape[1:]))
            lim = float(np.sqrt(1.0 / fan_in))
            params[name] = rng.uniform(-lim, lim, shape)
    return params


def init_generator(config: GeneratorConfig, rng: Rng) -> dict:
    return init_params(generator_param_shapes(config), rng)


def init_discriminator(config: DiscriminatorConfig, rng: Rng,
                       image_hw: tuple) -> dict:
    shapes = discriminator_param_shapes(config)
    h, w = image_hw
    if h % 2 ** config.blocks or w % 2 ** config.blocks:
        raise ValueError(f"image {h}x{w} not divisible by 2^{config.blocks}")
    feats = config.channels(config.blocks) * (h // 2 ** config.blocks) \
        * (w // 2 ** config.blocks)
    shapes["dense1_w"] = (config.hidden, feats)
    return init_params(shapes, rng)


def count_parameters(config) -> int:
    """Total trainable scalar count of a generator or discriminator config.

    Discriminator dense widths depend on the input size; 64 x 64 inputs
    are assumed for counting (the training patch size).
    """
    if isinstance(config, GeneratorConfig):
        shapes = generator_param_shapes(config)
    elif isinstance(config, DiscriminatorConfig):
        shapes = discriminator_param_shapes(config)
        feats = config.channels(config.blocks) * (64 // 2 ** config.blocks) ** 2
        shapes["dense1_w"] = (config.hidden, feats)
    else:
        raise TypeError(f"unsupported config type {type(config)!r}")
    return int(sum(np.prod(s) for s in shapes.values()))


# --------------------------------------------------------------- forward

def _as_tensors(params: dict, trainable: bool) -> dict:
    return {k: Tensor(v, requires_grad=trainable) for k, v in params.items()}


def _conv_block(x, p, name, dilation):
    x = ad.conv2d(x, p[f"{name}_conv1_w"], p[f"{name}_conv1_b"], dilation)
    x = ad.leaky_relu(x, LEAKY_SLOPE)
    x = ad.conv2d(x, p[f"{name}_conv2_w"], p[f"{name}_conv2_b"], dilation)
    return ad.leaky_relu(x, LEAKY_SLOPE)


def cgru_step(p: dict, name: str, h: Tensor, x: Tensor,
              dilation: int = 1) -> Tensor:
    """One convolutional GRU update: returns the new hidden state."""
    if h.shape != x.shape:
        raise ValueError(f"state {h.shape} does not match input {x.shape}")
    hx = ad.concat_channels([h, x])
    z = ad.sigmoid(ad.conv2d(hx, p[f"{name}_z_w"], p[f"{name}_z_b"], dilation))
    r = ad.sigmoid(ad.conv2d(hx, p[f"{name}_r_w"], p[f"{name}_r_b"], dilation))
    rhx = ad.concat_channels([r * h, x])
    h_tilde = ad.tanh(ad.conv2d(rhx, p[f"{name}_h_w"], p[f"{name}_h_b"], dilation))
    return (1.0 - z) * h + z * h_tilde


def pad_sequence(inputs: list, m_train: int) -> list:
    """Replication-pad a hologram sequence to the training length."""
    if not 1 <= len(inputs) <= m_train:
        raise ValueError(
            f"sequence length {len(inputs)} must be in [1, {m_train}]")
    return list(inputs) + [inputs[-1]] * (m_train - len(inputs))


def generator_forward(config: GeneratorConfig, params: dict, sequence,
                      trainable: bool = False) -> Tensor:
    """Run the recurrent generator over a hologram sequence.

    ``sequence`` is a list of (B, 2, H, W) arrays (or Tensors). Recurrent
    state persists across elements; the decoder output after the final
    element is the reconstructed field, channels (real, imaginary).
    """
    p = params if isinstance(next(iter(params.values())), Tensor) \
        else _as_tensors(params, trainable)
    d = config.dilation
    states = [None] * (config.scales + 1)
    out = None
    for step, element in enumerate(sequence):
        x = element if isinstance(element, Tensor) else Tensor(element)
        if x.data.ndim != 4 or x.data.shape[1] != config.in_channels:
            raise ValueError(f"expected (B, {config.in_channels}, H, W), "
                             f"got {x.data.shape}")
        h, w = x.data.shape[2], x.data.shape[3]
        div = 2 ** (config.scales - 1)
        if h % div or w % div:
            raise ValueError(f"spatial dims {h}x{w} not divisible by {div}")

        skips = {}
        for k in range(1, config.scales + 1):
            if k > 1:
                x = ad.avg_pool2x(x)
            x = _conv_block(x, p, f"enc{k}", d)
            if states[k] is None:
                states[k] = Tensor(np.zeros_like(x.data))
            states[k] = cgru_step(p, f"cgru{k}", states[k], x, d)
            skips[k] = ad.conv2d(states[k], p[f"cgru{k}_out_w"],
                                 p[f"cgru{k}_out_b"])
        if step < len(sequence) - 1:
            continue  # decoder carries no state; only the last output is used

        bot = config.scales
        y = _conv_block(skips[bot], p, f"dec{bot}", d)
        for k in range(config.scales - 1, 0, -1):
            y = ad.upsample_nearest2x(y)
            y = ad.concat_channels([skips[k], y])
            y = _conv_block(y, p, f"dec{k}", d)
        out = ad.conv2d(y, p["final_w"], p["final_b"])
    return out


def discriminator_forward(config: DiscriminatorConfig, params: dict, image,
                          trainable: bool = False) -> Tensor:
    """Scalar critic value per batch element; no output activation."""
    p = params if isinstance(next(iter(params.values())), Tensor) \
        else _as_tensors(params, trainable)
    x = image if isinstance(image, Tensor) else Tensor(image)
    if x.data.ndim != 4 or x.data.shape[1] != config.in_channels:
        raise ValueError(f"expected (B, {config.in_channels}, H, W), "
                         f"got {x.data.shape}")
    h, w = x.data.shape[2], x.data.shape[3]
    if h % 2 ** config.blocks or w % 2 ** config.blocks:
        raise ValueError(f"spatial dims {h}x{w} not divisible by "
                         f"2^{config.blocks}")
    for k in range(1, config.blocks + 1):
        x = _conv_block(x, p, f"blk{k}", 1)
        x = ad.avg_pool2x(x)
    b = x.data.shape[0]
    x = ad.reshape(x, (b, -1))
    x = ad.leaky_relu(ad.dense(x, p["dense1_w"], p["dense1_b"]), LEAKY_SLOPE)
    out = ad.dense(x, p["dense2_w"], p["dense2_b"])
    return ad.reshape(out, (b,))
