"""Core containers shared by the whole toolkit.

Fields are plain float64 numpy arrays wherever possible; the only "rich"
container is :class:`ComplexField`, which keeps the lateral sampling pitch
next to the planar real/imaginary data. All randomness flows through
:class:`Rng`, a thin wrapper over the counter-based Philox generator, so
that every stochastic operation is reproducible from an explicit seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


class NumericsError(ArithmeticError):
    """A numerical operation produced non-finite values."""


def as_real_image(arr, name: str = "image") -> np.ndarray:
    """Validate and return a 2D float64 image (no copy when already valid)."""
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2D, got shape {out.shape}")
    if out.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(out)):
        raise NumericsError(f"{name} contains non-finite values")
    return out


@dataclass(frozen=True)
class ComplexField:
    """A 2D complex optical field sampled on a square grid.

    Real and imaginary parts are stored as separate planes; ``pitch_um`` is
    the lateral sampling interval in micrometers.
    """

    re: np.ndarray
    im: np.ndarray
    pitch_um: float

    def __post_init__(self):
        re = np.asarray(self.re, dtype=np.float64)
        im = np.asarray(self.im, dtype=np.float64)
        if re.ndim != 2 or re.shape != im.shape:
            raise ValueError(f"re/im shapes differ: {re.shape} vs {im.shape}")
        if not (np.all(np.isfinite(re)) and np.all(np.isfinite(im))):
            raise NumericsError("field contains non-finite values")
        if not self.pitch_um > 0:
            raise ValueError(f"pitch_um must be > 0, got {self.pitch_um}")
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    @classmethod
    def from_complex(cls, data, pitch_um: float) -> "ComplexField":
        data = np.asarray(data)
        return cls(np.ascontiguousarray(data.real, dtype=np.float64),
                   np.ascontiguousarray(data.imag, dtype=np.float64),
                   float(pitch_um))

    @classmethod
    def from_amp_phase(cls, amplitude, phase, pitch_um: float) -> "ComplexField":
        amplitude = np.asarray(amplitude, dtype=np.float64)
        phase = np.asarray(phase, dtype=np.float64)
        return cls(amplitude * np.cos(phase), amplitude * np.sin(phase),
                   float(pitch_um))

    @property
    def shape(self) -> tuple:
        return self.re.shape

    @property
    def data(self) -> np.ndarray:
        """The field as a complex128 array (assembled on demand)."""
        return self.re + 1j * self.im

    @property
    def amplitude(self) -> np.ndarray:
        return np.hypot(self.re, self.im)

    @property
    def phase(self) -> np.ndarray:
        return np.arctan2(self.im, self.re)


@dataclass(frozen=True)
class OpticalConfig:
    """Illumination and sampling parameters of the lensfree microscope."""

    wavelength_um: float = 0.530
    medium_index: float = 1.0
    sr_pitch_um: float = 0.37
    sensor_pitch_um: float = 2.24

    def __post_init__(self):
        if not self.wavelength_um > 0:
            raise ValueError("wavelength_um must be > 0")
        if not self.medium_index >= 1.0:
            raise ValueError("medium_index must be >= 1")
        if not 0 < self.sr_pitch_um <= self.sensor_pitch_um:
            raise ValueError("require 0 < sr_pitch_um <= sensor_pitch_um")
        ratio = self.sensor_pitch_um / self.sr_pitch_um
        # The nominal pitches (2.24 um sensor, 0.37 um super-resolved) are
        # rounded values whose ratio is 6.054; accept up to 2% slack around
        # the nearest integer factor.
        if abs(ratio - round(ratio)) > 0.02 * ratio:
            raise ValueError(
                f"sensor/sr pitch ratio {ratio:.4f} is not close to an integer")

    @property
    def sr_factor(self) -> int:
        """Super-resolution factor L (low-res pixels per high-res pixel)."""
        return round(self.sensor_pitch_um / self.sr_pitch_um)

    def with_pitch(self, pitch_um: float) -> "OpticalConfig":
        """Config for propagating a grid sampled at a different pitch."""
        return replace(self, sr_pitch_um=pitch_um, sensor_pitch_um=pitch_um)


@dataclass(frozen=True)
class Hologram:
    """An intensity image together with its sample-to-sensor distance."""

    image: np.ndarray
    z2_um: float

    def __post_init__(self):
        object.__setattr__(self, "image", as_real_image(self.image, "hologram"))


@dataclass
class HologramStack:
    """Holograms of one sample captured at several axial positions."""

    holograms: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.holograms)

    def __getitem__(self, i) -> Hologram:
        return self.holograms[i]

    @property
    def images(self) -> np.ndarray:
        return np.stack([h.image for h in self.holograms])

    @property
    def z2_list_um(self) -> list:
        return [h.z2_um for h in self.holograms]

    def masked(self) -> "HologramStack":
        """Copy with the recorded axial positions hidden (set to nan)."""
        return HologramStack([Hologram(h.image, float("nan"))
                              for h in self.holograms])


class Rng:
    """Deterministic random stream backed by the counter-based Philox engine.

    Identical seeds (and identical call sequences) produce bit-identical
    streams. Independent sub-streams for parallel work come from
    :meth:`child`, which derives a new key instead of sharing state.
    """

    def __init__(self, seed: int, _spawn_key: tuple = ()):
        self.seed = int(seed)
        self._spawn_key = tuple(_spawn_key)
        ss = np.random.SeedSequence(self.seed, spawn_key=self._spawn_key)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "Rng":
        """Independent stream number ``index`` derived from this seed."""
        return Rng(self.seed, self._spawn_key + (int(index),))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def shuffle(self, seq) -> None:
        self._gen.shuffle(seq)
