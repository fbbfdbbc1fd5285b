"""Synthetic 2D samples and in-line hologram acquisition.

Stands in for the physical microscope: unit-amplitude plane-wave
illumination, angular-spectrum propagation to the sensor, optional
additive Gaussian noise and quantization, and sub-pixel shifted
low-resolution captures for pixel super-resolution.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .core import ComplexField, Hologram, HologramStack, OpticalConfig, Rng
from . import htf
from .propagate import propagate

SAMPLE_KINDS = ("uniform", "phase_disks", "amplitude_bars", "smooth_random",
                "two_point")


@dataclass(frozen=True)
class SampleObject:
    """A complex transmittance together with the recipe that produced it."""

    transmittance: ComplexField
    description: dict

    def __post_init__(self):
        amp = self.transmittance.amplitude
        if amp.min() < -1e-12 or amp.max() > 1.0 + 1e-9:
            raise ValueError("sample amplitude must lie in [0, 1]")


@dataclass(frozen=True)
class CaptureGeometry:
    """Axial positions and lateral shifts of one acquisition run."""

    z2_list_um: tuple
    lateral_shifts_um: tuple = ()
    z1_um: float = 80_000.0  # source distance; informational only

    def __post_init__(self):
        object.__setattr__(self, "z2_list_um", tuple(float(z) for z in self.z2_list_um))
        object.__setattr__(self, "lateral_shifts_um",
                           tuple((float(a), float(b)) for a, b in self.lateral_shifts_um))
        for z in self.z2_list_um:
            if not 100.0 <= z <= 2000.0:
                raise ValueError(f"z2 = {z} um outside the sane range [100, 2000]")


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian sensor noise plus optional uniform quantization."""

    gaussian_sigma: float = 0.0
    quantization_bits: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gaussian_sigma < 1.0:
            raise ValueError("gaussian_sigma must be in [0, 1)")
        if self.quantization_bits not in (0, 8, 16):
            raise ValueError("quantization_bits must be 0, 8 or 16")


def _grid_um(size: int, pitch: float):
    c = (size - 1) / 2.0
    y = (np.arange(size) - c)[:, None] * pitch
    x = (np.arange(size) - c)[None, :] * pitch
    return x, y


def _disk_mask(x, y, cx, cy, radius, softness):
    d = np.hypot(x - cx, y - cy)
    if softness <= 0:
        return (d < radius).astype(np.float64)
    return 0.5 * (1.0 - erf((d - radius) / (np.sqrt(2.0) * softness)))


def synth_sample(kind: str, size: int, cfg: OpticalConfig, rng: Rng,
                 **params) -> SampleObject:
    """Generate a deterministic synthetic sample.

    Parameters
    ----------
    kind : str
        One of ``uniform``, ``phase_disks``, ``amplitude_bars``,
        ``smooth_random``, ``two_point``.
    size : int
        Side length in super-resolved pixels (>= 32).
    params
        Kind-specific options, see the individual branches.
    """
    if size < 32:
        raise ValueError(f"size must be >= 32, got {size}")
    if kind not in SAMPLE_KINDS:
        raise ValueError(f"unknown sample kind {kind!r}")
    pitch = cfg.sr_pitch_um
    x, y = _grid_um(size, pitch)
    desc = {"kind": kind, "size": size, "pitch_um": pitch, **params}

    if kind == "uniform":
        amp = np.ones((size, size))
        phase = np.zeros((size, size))

    elif kind == "phase_disks":
        # Either an explicit list of (cx_um, cy_um, r_um, phase_rad) or
        # n_disks random ones placed inside the central region. With
        # absorption > 0 the disks also attenuate (mixed-contrast targets).
        softness = float(params.get("softness_um", 0.0))
        absorption = float(params.get("absorption", 0.0))
        disks = params.get("disks")
        if disks is None:
            n = int(params.get("n_disks", 4))
            r_lo, r_hi = params.get("radius_um", (0.04 * size * pitch,
                                                  0.09 * size * pitch))
            p_lo, p_hi = params.get("phase_rad", (0.4, 1.2))
            half = 0.30 * size * pitch
            disks = [(rng.uniform(-half, half), rng.uniform(-half, half),
                      rng.uniform(r_lo, r_hi), rng.uniform(p_lo, p_hi))
                     for _ in range(n)]
        amp = np.ones((size, size))
        phase = np.zeros((size, size))
        for cx, cy, r, ph in disks:
            mask = _disk_mask(x, y, cx, cy, r, softness)
            phase += ph * mask
            if absorption > 0:
                amp -= absorption * mask

    elif kind == "amplitude_bars":
        width = int(params.get("bar_width_px", max(4, size // 16)))
        depth = float(params.get("depth", 0.6))
        cols = (np.arange(size) // width) % 2
        amp = np.where(cols[None, :] == 0, 1.0, 1.0 - depth) * np.ones((size, 1))
        phase = np.zeros((size, size))

    elif kind == "smooth_random":
        target_std = float(params.get("phase_std", 0.8))
        corr = float(params.get("corr_length_um", 8.0 * pitch))
        amp_contrast = float(params.get("amplitude_contrast", 0.0))
        white = rng.normal(size=(size, size))
        f2 = (np.fft.fftfreq(size, d=pitch)[:, None] ** 2
              + np.fft.fftfreq(size, d=pitch)[None, :] ** 2)
        lp = np.exp(-2.0 * (np.pi ** 2) * (corr ** 2) * f2)
        smooth = np.fft.ifft2(np.fft.fft2(white) * lp).real
        smooth -= smooth.mean()
        std = smooth.std()
        if std == 0:
            raise ValueError("degenerate smooth field (zero variance)")
        phase = smooth * (target_std / std)
        amp = np.ones((size, size))
        if amp_contrast > 0:
            white2 = rng.normal(size=(size, size))
            tex = np.fft.ifft2(np.fft.fft2(white2) * lp).real
            tex -= tex.min()
            if tex.max() > 0:
                tex /= tex.max()
            amp = 1.0 - amp_contrast * tex

    elif kind == "two_point":
        sep = float(params.get("separation_um", 3.0 * pitch))
        background = float(params.get("background", 0.15))
        r_pt = float(params.get("point_radius_um", 2.0 * pitch))
        amp = np.full((size, size), background)
        c = size // 2
        off = sep / (2.0 * pitch)
        cols = (int(round(c - off)), int(round(c + off)))
        if r_pt <= 0.5 * pitch:
            amp[c, cols[0]] = 1.0
            amp[c, cols[1]] = 1.0
        else:
            for s in (-sep / 2.0, sep / 2.0):
                mask = _disk_mask(x, y, s, 0.0, r_pt, 0.0)
                amp = np.maximum(amp, background + (1.0 - background) * mask)
        phase = np.zeros((size, size))
        desc["point_cols"] = cols
        desc["point_row"] = c

    field = ComplexField.from_amp_phase(np.clip(amp, 0.0, 1.0), phase, pitch)
    return SampleObject(field, desc)


def _apply_noise(intensity: np.ndarray, noise: NoiseSpec, rng: Rng) -> np.ndarray:
    out = intensity
    if noise.gaussian_sigma > 0:
        out = out + rng.normal(0.0, noise.gaussian_sigma * out.mean(), out.shape)
    if noise.quantization_bits:
        peak = out.max()
        if peak > 0:
            q = peak / (2 ** noise.quantization_bits - 1)
            out = np.round(out / q) * q
    return np.maximum(out, 0.0)


def capture(sample: SampleObject, z2_um: float, cfg: OpticalConfig,
            noise: NoiseSpec = NoiseSpec(), rng: Rng | None = None) -> Hologram:
    """Record one in-line hologram at sample-to-sensor distance ``z2_um``."""
    if noise.gaussian_sigma > 0 and rng is None:
        raise ValueError("noisy capture needs an Rng")
    sensor = propagate(sample.transmittance, z2_um, cfg)
    intensity = sensor.amplitude ** 2
    return Hologram(_apply_noise(intensity, noise, rng), float(z2_um))


def capture_multiheight(sample: SampleObject, geometry: CaptureGeometry,
                        cfg: OpticalConfig, noise: NoiseSpec = NoiseSpec(),
                        rng: Rng | None = None) -> HologramStack:
    """One capture per entry in ``geometry.z2_list_um``."""
    if not geometry.z2_list_um:
        raise ValueError("geometry has no z2 entries")
    return HologramStack([capture(sample, z2, cfg, noise, rng)
                          for z2 in geometry.z2_list_um])


def fourier_shift(image: np.ndarray, dx_px: float, dy_px: float) -> np.ndarray:
    """Shift image content by (+dx, +dy) pixels via a Fourier phase ramp."""
    fy = np.fft.fftfreq(image.shape[0])[:, None]
    fx = np.fft.fftfreq(image.shape[1])[None, :]
    ramp = np.exp(-2j * np.pi * (fx * dx_px + fy * dy_px))
    return np.fft.ifft2(np.fft.fft2(image) * ramp).real


@dataclass(frozen=True)
class SrFrame:
    """One low-resolution capture with its true lateral offset."""

    image: np.ndarray
    dx_um: float
    dy_um: float


@dataclass(frozen=True)
class SrGrid:
    """The full set of shifted low-resolution frames at one height."""

    frames: tuple
    z2_um: float
    lr_pitch_um: float


def capture_sr_grid(sample: SampleObject, z2_um: float, cfg: OpticalConfig,
                    L: int | None = None, noise: NoiseSpec = NoiseSpec(),
                    rng: Rng | None = None, jitter: float = 0.0) -> SrGrid:
    """Capture the L x L grid of sub-pixel-shifted low-resolution frames.

    Each frame is the high-resolution intensity shifted by its lateral
    offset and box-binned L x L (area integration over sensor pixels).
    Offsets follow the regular {0..L-1} x {0..L-1} sub-pixel grid in
    high-resolution pixels; ``jitter`` adds a uniform perturbation of up
    to that many high-res pixels to every frame except the first.
    """
    if L is None:
        L = cfg.sr_factor
    L = int(L)
    ratio = cfg.sensor_pitch_um / cfg.sr_pitch_um
    if L < 1 or abs(ratio - round(ratio)) > 0.02 * ratio:
        raise ValueError(f"super-resolution factor must be integer, got {ratio}")
    if (jitter > 0 or noise.gaussian_sigma > 0) and rng is None:
        raise ValueError("jittered or noisy grid needs an Rng")
    sensor = propagate(sample.transmittance, z2_um, cfg)
    intensity = sensor.amplitude ** 2
    h, w = intensity.shape
    if h % L or w % L:
        raise ValueError(f"field size {intensity.shape} not divisible by L={L}")

    frames = []
    for gy in range(L):
        for gx in range(L):
            dx, dy = float(gx), float(gy)
            if jitter > 0 and (gx, gy) != (0, 0):
                dx += rng.uniform(-jitter, jitter)
                dy += rng.uniform(-jitter, jitter)
            shifted = intensity if dx == dy == 0.0 else fourier_shift(intensity, dx, dy)
            lr = shifted.reshape(h // L, L, w // L, L).mean(axis=(1, 3))
            lr = _apply_noise(lr, noise, rng) if noise.gaussian_sigma or \
                noise.quantization_bits else np.maximum(lr, 0.0)
            frames.append(SrFrame(lr, dx * cfg.sr_pitch_um, dy * cfg.sr_pitch_um))
    return SrGrid(tuple(frames), float(z2_um), cfg.sr_pitch_um * L)


def _fmt(v: float) -> str:
    return repr(float(v))


def save_stack(directory, stack: HologramStack, noise: NoiseSpec = NoiseSpec(),
               seed: int = 0) -> None:
    """Write one HTF file per hologram plus the tab-separated manifest."""
    os.makedirs(directory, exist_ok=True)
    lines = []
    for i, holo in enumerate(stack.holograms):
        htf.write_tensor(os.path.join(directory, f"holo_{i:03d}.htf"), holo.image)
        lines.append("\t".join([str(i), _fmt(holo.z2_um), _fmt(0.0), _fmt(0.0),
                                _fmt(noise.gaussian_sigma), str(seed)]))
    _write_manifest(os.path.join(directory, "manifest.tsv"), lines)


def save_sr_grid(directory, grid: SrGrid, noise: NoiseSpec = NoiseSpec(),
                 seed: int = 0) -> None:
    os.makedirs(directory, exist_ok=True)
    lines = []
    for i, frame in enumerate(grid.frames):
        htf.write_tensor(os.path.join(directory, f"frame_{i:03d}.htf"), frame.image)
        lines.append("\t".join([str(i), _fmt(grid.z2_um), _fmt(frame.dx_um),
                                _fmt(frame.dy_um), _fmt(noise.gaussian_sigma),
                                str(seed)]))
    _write_manifest(os.path.join(directory, "manifest.tsv"), lines)


def _write_manifest(path, lines) -> None:
    tmp = os.fspath(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def load_manifest(path) -> list:
    """Rows of (index, z2_um, dx_um, dy_um, sigma, seed)."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            idx, z2, dx, dy, sigma, seed = line.split("\t")
            rows.append((int(idx), float(z2), float(dx), float(dy),
                         float(sigma), int(seed)))
    return rows


def load_stack(directory) -> HologramStack:
    rows = load_manifest(os.path.join(directory, "manifest.tsv"))
    holos = []
    for idx, z2, _dx, _dy, _sigma, _seed in rows:
        img = htf.read_tensor(os.path.join(directory, f"holo_{idx:03d}.htf"))
        holos.append(Hologram(np.asarray(img, dtype=np.float64), z2))
    return HologramStack(holos)


def load_sr_grid(directory, lr_pitch_um: float | None = None) -> SrGrid:
    rows = load_manifest(os.path.join(directory, "manifest.tsv"))
    frames = []
    z2 = rows[0][1] if rows else 0.0
    for idx, z2, dx, dy, _sigma, _seed in rows:
        img = htf.read_tensor(os.path.join(directory, f"frame_{idx:03d}.htf"))
        frames.append(SrFrame(np.asarray(img, dtype=np.float64), dx, dy))
    return SrGrid(tuple(frames), z2, lr_pitch_um or 0.0)
