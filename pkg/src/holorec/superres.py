"""Pixel super-resolution: subpixel shift estimation and shift-and-add.

Shifts between low-resolution frames are estimated from the Fourier-domain
cross-correlation peak refined by a local 3x3 quadratic fit. Fusion
deposits every low-resolution sample at its nearest high-resolution grid
cell, normalizes by deposit counts, and fills empty cells from their
nearest filled neighbour.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class ShiftSet:
    """Per-frame (dx, dy) translations in low-res pixels, relative to frame 0."""

    shifts: tuple

    def __post_init__(self):
        shifts = tuple((float(a), float(b)) for a, b in self.shifts)
        object.__setattr__(self, "shifts", shifts)
        if shifts and shifts[0] != (0.0, 0.0):
            raise ValueError("shift of frame 0 must be (0, 0)")

    def __len__(self) -> int:
        return len(self.shifts)

    def __getitem__(self, i):
        return self.shifts[i]


def _quadratic_peak_1d(ym, y0, yp) -> float:
    denom = ym - 2.0 * y0 + yp
    if denom >= 0:  # flat or degenerate neighbourhood
        return 0.0
    delta = 0.5 * (ym - yp) / denom
    return float(np.clip(delta, -1.0, 1.0))


def _correlation_shift(ref_spec, frame, shape) -> tuple:
    corr = np.fft.ifft2(np.conj(ref_spec) * np.fft.fft2(frame)).real
    h, w = shape
    iy, ix = np.unravel_index(np.argmax(corr), corr.shape)
    # 3x3 quadratic refinement around the wrapped integer peak.
    dy = _quadratic_peak_1d(corr[(iy - 1) % h, ix], corr[iy, ix],
                            corr[(iy + 1) % h, ix])
    dx = _quadratic_peak_1d(corr[iy, (ix - 1) % w], corr[iy, ix],
                            corr[iy, (ix + 1) % w])
    sy = iy - h if iy > h // 2 else iy
    sx = ix - w if ix > w // 2 else ix
    return sx + dx, sy + dy


def estimate_shifts(frames) -> ShiftSet:
    """Estimate each frame's translation relative to frame 0.

    Parameters
    ----------
    frames : sequence of 2D arrays
        At least two frames of identical shape with non-constant content.
    """
    if len(frames) < 2:
        raise ValueError("need at least 2 frames")
    imgs = [np.asarray(f, dtype=np.float64) for f in frames]
    shape = imgs[0].shape
    for f in imgs:
        if f.shape != shape:
            raise ValueError("frames must share dimensions")
    ref = imgs[0] - imgs[0].mean()
    if np.max(np.abs(ref)) == 0:
        raise ValueError("reference frame is constant; correlation degenerate")
    ref_spec = np.fft.fft2(ref)
    half = min(shape) / 2.0
    shifts = [(0.0, 0.0)]
    for f in imgs[1:]:
        g = f - f.mean()
        if np.max(np.abs(g)) == 0:
            raise ValueError("constant frame; correlation degenerate")
        dx, dy = _correlation_shift(ref_spec, g, shape)
        if abs(dx) >= half or abs(dy) >= half:
            raise ValueError(f"estimated shift ({dx:.2f}, {dy:.2f}) exceeds half frame")
        shifts.append((dx, dy))
    return ShiftSet(tuple(shifts))


def shift_and_add(frames, shifts: ShiftSet, L: int) -> np.ndarray:
    """Fuse low-resolution frames into an L-times finer grid.

    Every low-res pixel of frame k with shift (dx, dy) is deposited at the
    nearest high-res cell of position ``(i - dy, j - dx) * L`` (frame
    content shifted by +s samples the scene at -s). Accumulators are
    normalized per cell; cells left empty are filled by nearest neighbour.
    """
    if len(frames) == 0:
        raise ValueError("no frames to fuse")
    L = int(L)
    if L < 1:
        raise ValueError("L must be >= 1")
    if len(shifts) != len(frames):
        raise ValueError("one shift per frame required")
    h, w = np.asarray(frames[0]).shape
    hi_h, hi_w = h * L, w * L
    acc = np.zeros((hi_h, hi_w))
    count = np.zeros((hi_h, hi_w))
    # Half-cell offset keeps LR pixel centers and HR cell centers aligned.
    center = (L - 1) / 2.0
    jj, ii = np.meshgrid(np.arange(w), np.arange(h))
    for frame, (dx, dy) in zip(frames, shifts.shifts):
        frame = np.asarray(frame, dtype=np.float64)
        cy = np.rint((ii - dy) * L + center).astype(np.int64)
        cx = np.rint((jj - dx) * L + center).astype(np.int64)
        ok = (cy >= 0) & (cy < hi_h) & (cx >= 0) & (cx < hi_w)
        np.add.at(acc, (cy[ok], cx[ok]), frame[ok])
        np.add.at(count, (cy[ok], cx[ok]), 1.0)
    filled = count > 0
    if not filled.any():
        raise ValueError("all high-resolution cells are empty")
    out = np.zeros_like(acc)
    out[filled] = acc[filled] / count[filled]
    if not filled.all():
        _, (ny, nx) = ndimage.distance_transform_edt(~filled, return_indices=True)
        out = out[ny, nx]
    return out
