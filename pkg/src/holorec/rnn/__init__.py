"""Recurrent reconstruction networks: model, autodiff, training, inference."""

from .autodiff import Tensor
from .model import (DiscriminatorConfig, GeneratorConfig, cgru_step,
                    count_parameters, discriminator_forward,
                    discriminator_param_shapes, generator_forward,
                    generator_param_shapes, init_discriminator,
                    init_generator, pad_sequence)
from .optim import AdamState, adam_init, adam_step
from .train import TrainResult, train_toy
from .infer import (infer_rh_m, infer_rh_md, load_checkpoint,
                    mean_backprop_baseline, save_checkpoint)
