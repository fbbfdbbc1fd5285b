"""Iterative multi-height phase retrieval and zero-phase back-propagation.

The reconstruction starts from the first hologram's amplitude with an
all-zero phase channel, visits every measurement height once per
iteration (propagate, then average the propagated amplitude with the
measured one, keeping the phase), returns to the first height, and
finally back-propagates the converged field onto the sample plane.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .core import (ComplexField, HologramStack, NumericsError, OpticalConfig,
                   as_real_image)
from .autofocus import FocusSearch, autofocus
from .propagate import propagate
from . import htf


@dataclass(frozen=True)
class MhprOptions:
    """Iteration limits, stopping rule, and traversal order."""

    max_iters: int = 30
    min_iters: int = 10
    rel_tol: float = 1e-4
    traversal: str = "ascending"  # or "as-given": visit stack order verbatim

    def __post_init__(self):
        if not 1 <= self.min_iters <= self.max_iters:
            raise ValueError("require 1 <= min_iters <= max_iters")
        if self.traversal not in ("ascending", "as-given"):
            raise ValueError(f"unknown traversal {self.traversal!r}")


@dataclass(frozen=True)
class ReconResult:
    """Converged sample-plane field plus the per-iteration residuals."""

    field: ComplexField
    residual_history: tuple
    iterations_run: int
    z2_used_um: float

    def __post_init__(self):
        object.__setattr__(self, "residual_history",
                           tuple(float(r) for r in self.residual_history))
        if len(self.residual_history) != self.iterations_run:
            raise ValueError("residual history length must equal iterations_run")


def backpropagate_zero_phase(hologram, z_bar_um: float,
                             cfg: OpticalConfig) -> ComplexField:
    """Propagate sqrt(I) with zero phase back toward the sample plane."""
    img = as_real_image(hologram, "hologram")
    if img.min() < -1e-12:
        raise ValueError("hologram intensities must be non-negative")
    field = ComplexField(np.sqrt(np.maximum(img, 0.0)), np.zeros_like(img),
                         cfg.sr_pitch_um)
    return propagate(field, -z_bar_um, cfg)


def mhpr(stack: HologramStack, heights_um, z2_sample_um: float | None,
         opts: MhprOptions = MhprOptions(), cfg: OpticalConfig = OpticalConfig(),
         focus_search: FocusSearch | None = None) -> ReconResult:
    """Multi-height phase retrieval.

    Parameters
    ----------
    stack : HologramStack
        M >= 1 holograms of the same sample.
    heights_um : sequence of float, or None
        Axial position of each hologram. When None, heights are estimated
        per-hologram by autofocus over ``focus_search``.
    z2_sample_um : float, or None
        Back-propagation distance from the first height to the sample
        plane; defaults to the (estimated) first height.
    """
    if len(stack) == 0:
        raise ValueError("empty hologram stack")
    estimated = heights_um is None
    if estimated:
        if focus_search is None:
            raise ValueError("need a FocusSearch to estimate unknown heights")
        heights_um = [autofocus(h.image, focus_search, cfg) for h in stack.holograms]
    heights = [float(z) for z in heights_um]
    if len(heights) != len(stack):
        raise ValueError("one height per hologram required")

    pairs = list(zip(stack.holograms, heights))
    if estimated:
        # autofocus yields heights in acquisition order; traverse ascending
        pairs.sort(key=lambda hz: hz[1])
        heights = [z for _, z in pairs]
    if opts.traversal == "ascending":
        if any(b <= a for a, b in zip(heights, heights[1:])):
            raise ValueError("heights must be strictly increasing "
                             "(use traversal='as-given' for arbitrary order)")
    if z2_sample_um is None:
        z2_sample_um = pairs[0][1]

    amplitudes = [np.sqrt(np.maximum(as_real_image(h.image), 0.0)) for h, _ in pairs]
    hs = [z for _, z in pairs]

    u = amplitudes[0].astype(np.complex128)
    z_current = hs[0]
    residuals = []
    for _ in range(opts.max_iters):
        sq_sum = 0.0
        for amp_meas, z in zip(amplitudes, hs):
            if z != z_current:
                u = propagate(ComplexField.from_complex(u, cfg.sr_pitch_um),
                              z - z_current, cfg).data
                z_current = z
            amp = np.abs(u)
            sq_sum += np.mean((amp - amp_meas) ** 2)
            # Average amplitudes, keep the propagated phase (zero where undefined).
            target = 0.5 * (amp + amp_meas)
            unit = np.where(amp > 0, u / np.where(amp > 0, amp, 1.0), 1.0)
            u = target * unit
        if z_current != hs[0]:
            u = propagate(ComplexField.from_complex(u, cfg.sr_pitch_um),
                          hs[0] - z_current, cfg).data
            z_current = hs[0]
        if not np.all(np.isfinite(u)):
            raise NumericsError("field diverged during phase retrieval")
        residuals.append(float(np.sqrt(sq_sum / len(hs))))
        n = len(residuals)
        if n >= max(2, opts.min_iters):
            prev, cur = residuals[-2], residuals[-1]
            if abs(cur - prev) < opts.rel_tol * max(prev, 1e-300):
                break

    sample_field = propagate(ComplexField.from_complex(u, cfg.sr_pitch_um),
                             -float(z2_sample_um), cfg)
    return ReconResult(sample_field, tuple(residuals), len(residuals),
                       float(z2_sample_um))


def hologram_residual(field_at_h1: ComplexField, stack: HologramStack,
                      heights_um, cfg: OpticalConfig) -> float:
    """RMS mismatch between a candidate field at the first height and the stack."""
    heights = [float(z) for z in heights_um]
    sq_sum = 0.0
    for holo, z in zip(stack.holograms, heights):
        prop = propagate(field_at_h1, z - heights[0], cfg)
        meas = np.sqrt(np.maximum(as_real_image(holo.image), 0.0))
        sq_sum += np.mean((prop.amplitude - meas) ** 2)
    return float(np.sqrt(sq_sum / len(heights)))


def estimate_heights(stack: HologramStack, search: FocusSearch,
                     cfg: OpticalConfig) -> list:
    """Per-hologram autofocus estimates (absolute sample-to-sensor distances)."""
    return [autofocus(h.image, search, cfg) for h in stack.holograms]


def save_result(directory, result: ReconResult, name: str = "recon") -> None:
    """HTF complex64 field plus a UTF-8 sidecar with one residual per line."""
    os.makedirs(directory, exist_ok=True)
    htf.write_tensor(os.path.join(directory, f"{name}.htf"), result.field)
    tmp = os.path.join(directory, f"{name}.residuals.txt.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for r in result.residual_history:
            fh.write(f"{r!r}\n")
    os.replace(tmp, os.path.join(directory, f"{name}.residuals.txt"))
