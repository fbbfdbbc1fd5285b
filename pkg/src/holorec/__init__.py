"""Lensfree in-line holography toolkit.

Simulation of multi-height hologram acquisition, classical iterative
multi-height phase retrieval, pixel super-resolution, edge-sparsity
autofocusing, image-quality metrics, and desk-scale recurrent
reconstruction networks trained with adversarial losses.
"""

from .core import (ComplexField, Hologram, HologramStack, NumericsError,
                   OpticalConfig, Rng)
from .propagate import FrequencyGrid, frequency_grid, propagate, transfer_function
from .simulate import (CaptureGeometry, NoiseSpec, SampleObject, capture,
                       capture_multiheight, capture_sr_grid, synth_sample)
from .superres import ShiftSet, estimate_shifts, shift_and_add
from .autofocus import FocusSearch, autofocus, focus_score, tamura
from .mhpr import (MhprOptions, ReconResult, backpropagate_zero_phase,
                   hologram_residual, mhpr)
from .metrics import (LossWeights, MsssimParams, discriminator_loss,
                      field_metrics, generator_loss, mae, msssim, msssim_loss,
                      rmse, ssim)

__version__ = "0.1.0"
