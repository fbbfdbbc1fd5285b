"""Toy-scale adversarial training of the reconstruction networks.

One dataset item is ``(sequence, target)``: a list of two-channel input
fields (real, imaginary) and the two-channel ground-truth field. The
generator minimizes ``alpha * MAE + beta * (1 - MSSSIM) + gamma *
(D(y_hat) - 1)^2``; when gamma > 0 the discriminator alternates with the
least-squares objective. Everything is deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import NumericsError, Rng
from ..metrics import LossWeights, MsssimParams
from . import autodiff as ad
from .autodiff import Tensor
from .losses import (adversarial_generator_loss, lsgan_discriminator_loss,
                     mae_loss, msssim_loss)
from .model import (DiscriminatorConfig, GeneratorConfig,
                    discriminator_forward, generator_forward,
                    init_discriminator, init_generator, pad_sequence)
from .optim import adam_init, adam_step

GENERATOR_LR = 5e-5
DISCRIMINATOR_LR = 1e-6


@dataclass
class TrainResult:
    gen_params: dict
    disc_params: dict | None
    history: dict = field(default_factory=dict)


def _batch(dataset, indices, m_train):
    seqs = [pad_sequence(dataset[i][0], m_train) for i in indices]
    targets = np.stack([np.asarray(dataset[i][1], dtype=np.float64)
                        for i in indices])
    elements = [np.stack([np.asarray(seq[m], dtype=np.float64) for seq in seqs])
                for m in range(m_train)]
    return elements, targets


def _grads(params_t: dict) -> dict:
    return {k: t.grad for k, t in params_t.items() if t.grad is not None}


def train_toy(dataset, gen_config: GeneratorConfig,
              disc_config: DiscriminatorConfig | None,
              weights: LossWeights, epochs: int, rng: Rng,
              batch_size: int = 4, lr_g: float = GENERATOR_LR,
              lr_d: float = DISCRIMINATOR_LR, lr_decay: float = 0.97,
              msssim_scales: int = 3) -> TrainResult:
    """Alternating generator/discriminator updates on a toy dataset.

    Returns the trained parameters and the per-epoch means of every loss
    component (keys: loss_g, mae, msssim, adv, loss_d).
    """
    if not dataset:
        raise ValueError("empty training dataset")
    shapes = {np.asarray(t).shape for _, t in dataset}
    if len(shapes) != 1:
        raise ValueError(f"all samples must share dims, got {shapes}")
    target_hw = next(iter(shapes))[1:]

    gen_params = init_generator(gen_config, rng.child(0))
    use_gan = weights.gamma > 0
    disc_params = None
    if use_gan:
        if disc_config is None:
            raise ValueError("gamma > 0 requires a discriminator config")
        disc_params = init_discriminator(disc_config, rng.child(1), target_hw)

    history = {k: [] for k in ("loss_g", "mae", "msssim", "adv", "loss_d")}
    if epochs == 0:
        return TrainResult(gen_params, disc_params, history)

    msssim_params = MsssimParams.for_scales(msssim_scales)
    opt_g = adam_init(gen_params, lr_g, lr_decay)
    opt_d = adam_init(disc_params, lr_d, lr_decay) if use_gan else None
    shuffler = rng.child(2)

    n = len(dataset)
    for epoch in range(epochs):
        opt_g.set_epoch(epoch)
        if opt_d is not None:
            opt_d.set_epoch(epoch)
        order = shuffler.permutation(n)
        sums = dict.fromkeys(history, 0.0)
        batches = 0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            elements, targets = _batch(dataset, idx, gen_config.m_train)

            gen_t = {k: Tensor(v, requires_grad=True)
                     for k, v in gen_params.items()}
            y_hat = generator_forward(gen_config, gen_t, elements)
            l_mae = mae_loss(y_hat, targets)
            l_ms = msssim_loss(y_hat, targets, msssim_params)
            loss_g = weights.alpha * l_mae + weights.beta * l_ms
            l_adv_val = 0.0
            if use_gan:
                disc_frozen = {k: Tensor(v) for k, v in disc_params.items()}
                d_fake = discriminator_forward(disc_config, disc_frozen, y_hat)
                l_adv = adversarial_generator_loss(d_fake)
                loss_g = loss_g + weights.gamma * l_adv
                l_adv_val = l_adv.item()
            if not np.isfinite(loss_g.item()):
                raise NumericsError(f"generator loss diverged at epoch {epoch}")
            loss_g.backward()
            gen_params = adam_step(opt_g, _grads(gen_t), gen_params)

            l_d_val = 0.0
            if use_gan:
                disc_t = {k: Tensor(v, requires_grad=True)
                          for k, v in disc_params.items()}
                d_fake = discriminator_forward(disc_config, disc_t,
                                               y_hat.data.copy())
                d_real = discriminator_forward(disc_config, disc_t, targets)
                loss_d = lsgan_discriminator_loss(d_fake, d_real)
                if not np.isfinite(loss_d.item()):
                    raise NumericsError(
                        f"discriminator loss diverged at epoch {epoch}")
                loss_d.backward()
                disc_params = adam_step(opt_d, _grads(disc_t), disc_params)
                l_d_val = loss_d.item()

            sums["loss_g"] += loss_g.item()
            sums["mae"] += l_mae.item()
            sums["msssim"] += l_ms.item()
            sums["adv"] += l_adv_val
            sums["loss_d"] += l_d_val
            batches += 1
        for key in history:
            history[key].append(sums[key] / batches)
    return TrainResult(gen_params, disc_params, history)
