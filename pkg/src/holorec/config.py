"""Flat key = value run configuration.

One ``key = value`` per line, ``#`` starts a comment, keys are dotted
names validated against the schema below; unknown keys are rejected.
Command-line flags override file values, and every command echoes its
effective configuration into the output directory.
"""

from __future__ import annotations

import os


class ConfigError(ValueError):
    """Bad configuration file, key, or value."""


# key -> (type, default)
SCHEMA = {
    "seed": (int, 0),
    "threads": (int, 1),

    "optics.wavelength_um": (float, 0.530),
    "optics.medium_index": (float, 1.0),
    "optics.sr_pitch_um": (float, 0.37),
    "optics.sensor_pitch_um": (float, 2.24),

    "sim.samples": (int, 10),
    "sim.size": (int, 256),
    "sim.kind": (str, "phase_disks"),
    "sim.heights": (int, 8),
    "sim.height_mode": (str, "spaced"),   # spaced | random
    "sim.spacing_um": (float, 15.0),
    "sim.z2_min_um": (float, 350.0),
    "sim.z2_max_um": (float, 550.0),
    "sim.noise_sigma": (float, 0.0),
    "sim.quant_bits": (int, 0),
    "sim.sr_grid": (int, 0),
    "sim.sr_jitter": (float, 0.0),
    "sim.phase_std": (float, 0.8),
    "sim.corr_length_um": (float, 8.0),
    "sim.amplitude_contrast": (float, 0.0),
    "sim.n_disks": (int, 4),
    "sim.softness_um": (float, 0.0),
    "sim.absorption": (float, 0.0),
    "sim.phase_min": (float, 0.4),
    "sim.phase_max": (float, 1.2),
    "sim.radius_min_um": (float, 0.0),   # 0: size-derived default
    "sim.radius_max_um": (float, 0.0),
    "sim.separation_um": (float, 0.0),
    "sim.background": (float, 0.15),
    "sim.point_radius_um": (float, 0.0),
    "sim.bar_width_px": (int, 0),
    "sim.bar_depth": (float, 0.6),

    "recon.method": (str, "mhpr"),
    "recon.z_bar_um": (float, 450.0),
    "recon.max_iters": (int, 30),
    "recon.min_iters": (int, 10),
    "recon.rel_tol": (float, 1e-4),
    "recon.use_autofocus": (int, 0),
    "recon.m": (int, 0),                  # 0: use every hologram in the stack
    "recon.checkpoint": (str, ""),

    "af.z_min_um": (float, 300.0),
    "af.z_max_um": (float, 600.0),
    "af.step_um": (float, 5.0),
    "af.tol_um": (float, 0.1),

    "train.base": (int, 4),
    "train.dilation": (int, 1),
    "train.m_train": (int, 2),
    "train.epochs": (int, 10),
    "train.batch": (int, 4),
    "train.lr_g": (float, 5e-5),
    "train.lr_d": (float, 1e-6),
    "train.lr_decay": (float, 0.97),
    "train.alpha": (float, 3.0),
    "train.beta": (float, 1.0),
    "train.gamma": (float, 0.5),
    "train.msssim_scales": (int, 3),
    "train.disc_base": (int, 4),
    "train.disc_hidden": (int, 64),
    "train.input": (str, "backprop"),     # backprop | raw
    "train.z_bar_um": (float, 450.0),

    "sweep.z_bar_um": (float, 450.0),
    "sweep.span_um": (float, 100.0),
    "sweep.step_um": (float, 25.0),
    "sweep.samples": (int, 3),
    "sweep.m": (int, 2),
}


class RunConfig:
    """Validated flat configuration with typed access."""

    def __init__(self, values: dict | None = None):
        self.values = dict(values or {})
        for key in self.values:
            if key not in SCHEMA:
                raise ConfigError(f"unknown config key {key!r}")

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        values = {}
        try:
            with open(path, encoding="utf-8") as fh:
                for lineno, raw in enumerate(fh, 1):
                    line = raw.split("#", 1)[0].strip()
                    if not line:
                        continue
                    if "=" not in line:
                        raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                    key, _, value = line.partition("=")
                    values[key.strip()] = value.strip()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        cfg = cls()
        for key, value in values.items():
            cfg.set(key, value)
        return cfg

    def set(self, key: str, value) -> None:
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        typ, _ = SCHEMA[key]
        try:
            self.values[key] = typ(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc

    def get(self, key: str):
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        typ, default = SCHEMA[key]
        return self.values.get(key, default)

    def echo(self, path) -> None:
        """Write the full effective configuration, sorted, atomically."""
        lines = [f"{key} = {self.get(key)}" for key in sorted(SCHEMA)]
        tmp = os.fspath(path) + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)
