"""Sample-to-sensor distance estimation via the edge-sparsity criterion.

The focus score is the Tamura coefficient sqrt(std/mean) of the gradient
magnitude of the zero-phase back-propagated amplitude; it peaks at the
in-focus plane. A coarse grid scan brackets the peak and golden-section
search refines it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ComplexField, NumericsError, OpticalConfig, as_real_image
from .propagate import propagate

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class FocusSearch:
    """Search interval and resolution for the axial scan."""

    z_min_um: float
    z_max_um: float
    coarse_step_um: float = 5.0
    refine_tol_um: float = 0.1

    def __post_init__(self):
        if not self.z_min_um < self.z_max_um:
            raise ValueError("require z_min < z_max")
        if not 0 < self.coarse_step_um < (self.z_max_um - self.z_min_um):
            raise ValueError("coarse step must be positive and smaller than the interval")
        if not self.refine_tol_um > 0:
            raise ValueError("refine tolerance must be positive")


def tamura(image) -> float:
    """Tamura coefficient sqrt(std/mean); 0 for a zero-mean image."""
    img = as_real_image(image)
    if img.min() < 0:
        raise ValueError("tamura is defined for non-negative images")
    mu = img.mean()
    if mu == 0.0:
        return 0.0
    return float(np.sqrt(img.std() / mu))


def gradient_magnitude(image: np.ndarray) -> np.ndarray:
    gy, gx = np.gradient(image)
    return np.hypot(gx, gy)


def focus_score(hologram, z_um: float, cfg: OpticalConfig) -> float:
    """Edge-sparsity score of the hologram back-propagated by ``z_um``."""
    img = as_real_image(hologram, "hologram")
    field = ComplexField(np.sqrt(np.maximum(img, 0.0)), np.zeros_like(img),
                         cfg.sr_pitch_um)
    amp = propagate(field, -z_um, cfg).amplitude
    return tamura(gradient_magnitude(amp))


def autofocus(hologram, search: FocusSearch, cfg: OpticalConfig) -> float:
    """Locate the z that maximizes the focus score inside the interval.

    Returns the coarse-grid maximizer refined by golden-section search;
    when the true focus lies outside the interval this returns the
    boundary maximizer.
    """
    img = as_real_image(hologram, "hologram")
    zs = np.arange(search.z_min_um, search.z_max_um + 0.5 * search.coarse_step_um,
                   search.coarse_step_um)
    zs = np.clip(zs, search.z_min_um, search.z_max_um)
    scores = np.array([focus_score(img, z, cfg) for z in zs])
    if not np.all(np.isfinite(scores)):
        raise NumericsError("focus score is non-finite inside the search interval")
    best = int(np.argmax(scores))  # argmax takes the first (smallest z) on ties

    lo = zs[max(best - 1, 0)]
    hi = zs[min(best + 1, len(zs) - 1)]
    if hi - lo < search.refine_tol_um:
        return float(zs[best])

    # Golden-section search for the maximum on [lo, hi].
    a, b = float(lo), float(hi)
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1 = focus_score(img, x1, cfg)
    f2 = focus_score(img, x2, cfg)
    while (b - a) > search.refine_tol_um:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = focus_score(img, x2, cfg)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = focus_score(img, x1, cfg)
        if not (np.isfinite(f1) and np.isfinite(f2)):
            raise NumericsError("focus score is non-finite inside the bracket")
    return float(0.5 * (a + b))
