"""Inference pipelines and parameter checkpoints.

The standard network takes zero-phase back-propagated fields (real and
imaginary channels); the dilated variant consumes raw holograms encoded
as (sqrt(intensity), zeros). Checkpoints are one HTF tensor per named
parameter plus a manifest and a flat config file.
"""

from __future__ import annotations

import os

import numpy as np

from .. import htf
from ..core import ComplexField, OpticalConfig
from ..mhpr import backpropagate_zero_phase
from .model import GeneratorConfig, generator_forward, pad_sequence


def backprop_input(hologram, z_bar_um: float, cfg: OpticalConfig) -> np.ndarray:
    """One hologram to a (2, H, W) field channel pair."""
    field = backpropagate_zero_phase(hologram, z_bar_um, cfg)
    return np.stack([field.re, field.im])


def raw_input(hologram) -> np.ndarray:
    """Raw-intensity encoding: channel 0 sqrt(I), channel 1 zeros."""
    amp = np.sqrt(np.maximum(np.asarray(hologram, dtype=np.float64), 0.0))
    return np.stack([amp, np.zeros_like(amp)])


def _run(config: GeneratorConfig, params: dict, channel_inputs,
         pitch_um: float) -> ComplexField:
    sequence = pad_sequence(list(channel_inputs), config.m_train)
    elements = [np.asarray(c, dtype=np.float64)[None] for c in sequence]
    out = generator_forward(config, params, elements).data[0]
    return ComplexField(out[0], out[1], pitch_um)


def infer_rh_m(config: GeneratorConfig, params: dict, holograms,
               z_bar_um: float = 450.0,
               cfg: OpticalConfig = OpticalConfig()) -> ComplexField:
    """Reconstruct from 1..m_train holograms via zero-phase back-propagation."""
    inputs = [backprop_input(h, z_bar_um, cfg) for h in holograms]
    return _run(config, params, inputs, cfg.sr_pitch_um)


def infer_rh_md(config: GeneratorConfig, params: dict, holograms,
                cfg: OpticalConfig = OpticalConfig()) -> ComplexField:
    """Reconstruct directly from raw holograms (dilated network)."""
    if config.dilation != 2:
        raise ValueError("raw-hologram inference expects the dilated config")
    inputs = [raw_input(h) for h in holograms]
    return _run(config, params, inputs, cfg.sr_pitch_um)


def mean_backprop_baseline(holograms, z_bar_um: float,
                           cfg: OpticalConfig) -> ComplexField:
    """Average of the zero-phase back-propagated inputs (no-network baseline)."""
    fields = [backpropagate_zero_phase(h, z_bar_um, cfg) for h in holograms]
    mean = np.mean([f.data for f in fields], axis=0)
    return ComplexField.from_complex(mean, cfg.sr_pitch_um)


# -------------------------------------------------------------- checkpoints

_CONFIG_FIELDS = ("base", "scales", "dilation", "in_channels", "out_channels",
                  "m_train")


def save_checkpoint(directory, config: GeneratorConfig, params: dict,
                    input_mode: str = "backprop", extra: dict | None = None) -> None:
    os.makedirs(os.path.join(directory, "params"), exist_ok=True)
    lines = []
    for name in sorted(params):
        value = params[name]
        htf.write_tensor(os.path.join(directory, "params", f"{name}.htf"), value)
        dims = "x".join(str(d) for d in value.shape)
        lines.append(f"{name}\t{dims}\t{value.dtype.name}")
    _write(os.path.join(directory, "manifest.tsv"), "\n".join(lines) + "\n")

    cfg_lines = [f"{k} = {getattr(config, k)}" for k in _CONFIG_FIELDS]
    cfg_lines.append(f"input_mode = {input_mode}")
    for k, v in (extra or {}).items():
        cfg_lines.append(f"{k} = {v}")
    _write(os.path.join(directory, "config.txt"), "\n".join(cfg_lines) + "\n")


def load_checkpoint(directory):
    """Returns (GeneratorConfig, params, input_mode)."""
    kv = {}
    with open(os.path.join(directory, "config.txt"), encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            kv[key.strip()] = value.strip()
    config = GeneratorConfig(**{k: int(kv[k]) for k in _CONFIG_FIELDS})
    params = {}
    with open(os.path.join(directory, "manifest.tsv"), encoding="utf-8") as fh:
        for line in fh:
            name = line.split("\t")[0].strip()
            if name:
                params[name] = htf.read_tensor(
                    os.path.join(directory, "params", f"{name}.htf"))
    return config, params, kv.get("input_mode", "backprop")


def _write(path, text: str) -> None:
    tmp = os.fspath(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)
