"""Command-line interface tying the pipeline together.

Subcommands: simulate, reconstruct, autofocus, superres, train, infer,
sweep-defocus, metrics. Exit codes: 0 success, 2 usage/config error,
3 I/O error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import htf
from .autofocus import FocusSearch, autofocus
from .config import ConfigError, RunConfig
from .core import (ComplexField, Hologram, HologramStack, NumericsError,
                   OpticalConfig, Rng)
from .metrics import field_metrics, write_metrics_csv
from .mhpr import MhprOptions, backpropagate_zero_phase, mhpr, save_result
from .rnn.infer import (backprop_input, infer_rh_m, infer_rh_md,
                        load_checkpoint, raw_input, save_checkpoint)
from .rnn.model import DiscriminatorConfig, GeneratorConfig
from .rnn.train import train_toy
from .metrics import LossWeights
from .simulate import (CaptureGeometry, NoiseSpec, SampleObject, capture,
                       capture_multiheight, capture_sr_grid, load_manifest,
                       load_stack, save_sr_grid, save_stack, synth_sample)
from .superres import estimate_shifts, shift_and_add

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


def _optics(cfg: RunConfig) -> OpticalConfig:
    return OpticalConfig(
        wavelength_um=cfg.get("optics.wavelength_um"),
        medium_index=cfg.get("optics.medium_index"),
        sr_pitch_um=cfg.get("optics.sr_pitch_um"),
        sensor_pitch_um=cfg.get("optics.sensor_pitch_um"))


def _noise(cfg: RunConfig) -> NoiseSpec:
    return NoiseSpec(gaussian_sigma=cfg.get("sim.noise_sigma"),
                     quantization_bits=cfg.get("sim.quant_bits"))


def _sample_params(cfg: RunConfig, optics: OpticalConfig) -> dict:
    kind = cfg.get("sim.kind")
    size = cfg.get("sim.size")
    if kind == "smooth_random":
        return {"phase_std": cfg.get("sim.phase_std"),
                "corr_length_um": cfg.get("sim.corr_length_um"),
                "amplitude_contrast": cfg.get("sim.amplitude_contrast")}
    if kind == "phase_disks":
        r_lo = cfg.get("sim.radius_min_um") or 0.04 * size * optics.sr_pitch_um
        r_hi = cfg.get("sim.radius_max_um") or 0.09 * size * optics.sr_pitch_um
        return {"n_disks": cfg.get("sim.n_disks"),
                "softness_um": cfg.get("sim.softness_um"),
                "absorption": cfg.get("sim.absorption"),
                "radius_um": (r_lo, r_hi),
                "phase_rad": (cfg.get("sim.phase_min"), cfg.get("sim.phase_max"))}
    if kind == "two_point":
        params = {"background": cfg.get("sim.background")}
        if cfg.get("sim.separation_um"):
            params["separation_um"] = cfg.get("sim.separation_um")
        if cfg.get("sim.point_radius_um"):
            params["point_radius_um"] = cfg.get("sim.point_radius_um")
        return params
    if kind == "amplitude_bars":
        params = {"depth": cfg.get("sim.bar_depth")}
        if cfg.get("sim.bar_width_px"):
            params["bar_width_px"] = cfg.get("sim.bar_width_px")
        return params
    return {}


def _sample_dirs(dataset):
    try:
        names = sorted(d for d in os.listdir(dataset) if d.startswith("sample_"))
    except OSError as exc:
        raise FileNotFoundError(f"cannot list dataset {dataset}: {exc}") from exc
    if not names:
        raise FileNotFoundError(f"no sample_* directories under {dataset}")
    return [os.path.join(dataset, n) for n in names]


def _load_truth(sample_dir, pitch_um) -> ComplexField:
    return ComplexField.from_complex(
        htf.read_tensor(os.path.join(sample_dir, "ground_truth.htf")), pitch_um)


def _write_previews(out_dir, name, field: ComplexField) -> None:
    amp = field.amplitude
    htf.write_pgm(os.path.join(out_dir, f"{name}_amplitude.pgm"), amp,
                  0.0, max(float(amp.max()), 1e-12))
    htf.write_pgm(os.path.join(out_dir, f"{name}_phase.pgm"), field.phase,
                  -np.pi, np.pi)


# ----------------------------------------------------------------- simulate

def cmd_simulate(args, cfg: RunConfig) -> int:
    optics = _optics(cfg)
    noise = _noise(cfg)
    seed = cfg.get("seed")
    root = Rng(seed)
    out = args.out
    os.makedirs(out, exist_ok=True)
    n = cfg.get("sim.samples")
    index_lines = []
    for i in range(n):
        rng = root.child(i)
        sample = synth_sample(cfg.get("sim.kind"), cfg.get("sim.size"), optics,
                              rng.child(0), **_sample_params(cfg, optics))
        sdir = os.path.join(out, f"sample_{i:04d}")
        os.makedirs(sdir, exist_ok=True)
        htf.write_tensor(os.path.join(sdir, "ground_truth.htf"),
                         sample.transmittance)
        z_rng = rng.child(1)
        if cfg.get("sim.sr_grid"):
            z2 = float(z_rng.uniform(cfg.get("sim.z2_min_um"),
                                     cfg.get("sim.z2_max_um")))
            grid = capture_sr_grid(sample, z2, optics, noise=noise,
                                   rng=rng.child(2),
                                   jitter=cfg.get("sim.sr_jitter"))
            save_sr_grid(sdir, grid, noise, seed)
        else:
            m = cfg.get("sim.heights")
            if cfg.get("sim.height_mode") == "random":
                # draw order is kept: training data must cover arbitrary
                # height orderings for order-robust inference
                zs = [float(z_rng.uniform(cfg.get("sim.z2_min_um"),
                                          cfg.get("sim.z2_max_um")))
                      for _ in range(m)]
            else:
                zs = [cfg.get("sim.z2_min_um") + cfg.get("sim.spacing_um") * k
                      for k in range(m)]
            stack = capture_multiheight(sample, CaptureGeometry(tuple(zs)),
                                        optics, noise, rng.child(2))
            save_stack(sdir, stack, noise, seed)
        index_lines.append("\t".join([str(i), cfg.get("sim.kind"),
                                      str(cfg.get("sim.size")),
                                      repr(optics.sr_pitch_um)]))
    tmp = os.path.join(out, "dataset.tsv.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(index_lines) + "\n")
    os.replace(tmp, os.path.join(out, "dataset.tsv"))
    cfg.echo(os.path.join(out, "config_used.txt"))
    print(f"simulated {n} samples into {out}")
    return EXIT_OK


# -------------------------------------------------------------- reconstruct

def _select(stack: HologramStack, m: int) -> HologramStack:
    if m <= 0 or m >= len(stack):
        return stack
    return HologramStack(stack.holograms[:m])


def _reconstruct_one(sample_dir, method, cfg, optics, checkpoint):
    stack = load_stack(sample_dir)
    stack = _select(stack, cfg.get("recon.m"))
    heights = stack.z2_list_um
    opts = MhprOptions(max_iters=cfg.get("recon.max_iters"),
                       min_iters=cfg.get("recon.min_iters"),
                       rel_tol=cfg.get("recon.rel_tol"))
    search = FocusSearch(cfg.get("af.z_min_um"), cfg.get("af.z_max_um"),
                         cfg.get("af.step_um"), cfg.get("af.tol_um"))
    if method == "mhpr":
        if cfg.get("recon.use_autofocus"):
            result = mhpr(stack.masked(), None, None, opts, optics,
                          focus_search=search)
        else:
            # stacks may record heights in acquisition order; retrieve ascending
            # (as-given traversal also tolerates duplicate heights)
            order = np.argsort(heights, kind="stable")
            ordered = HologramStack([stack[int(i)] for i in order])
            zs = [heights[int(i)] for i in order]
            from dataclasses import replace
            result = mhpr(ordered, zs, zs[0],
                          replace(opts, traversal="as-given"), optics)
        field = result.field
    elif method == "zero-phase":
        z = autofocus(stack[0].image, search, optics) \
            if cfg.get("recon.use_autofocus") else heights[0]
        field = backpropagate_zero_phase(stack[0].image, z, optics)
        result = None
    elif method in ("rh-m", "rh-md"):
        gen_config, params, _mode = checkpoint
        holos = [h.image for h in stack.holograms[:max(1, gen_config.m_train)]]
        if method == "rh-m":
            field = infer_rh_m(gen_config, params, holos,
                               cfg.get("recon.z_bar_um"), optics)
        else:
            field = infer_rh_md(gen_config, params, holos, optics)
        result = None
    else:
        raise ConfigError(f"unknown reconstruction method {method!r}")
    return field, result


def cmd_reconstruct(args, cfg: RunConfig) -> int:
    method = args.method or cfg.get("recon.method")
    if method not in ("mhpr", "zero-phase", "rh-m", "rh-md"):
        raise ConfigError(f"unknown reconstruction method {method!r}")
    optics = _optics(cfg)
    checkpoint = None
    if method in ("rh-m", "rh-md"):
        path = args.checkpoint or cfg.get("recon.checkpoint")
        if not path or not os.path.isdir(path):
            raise FileNotFoundError(f"method {method} needs --checkpoint "
                                    f"(got {path!r})")
        checkpoint = load_checkpoint(path)
    out = args.out
    os.makedirs(out, exist_ok=True)
    dirs = _sample_dirs(args.dataset)

    def work(item):
        idx, sdir = item
        field, result = _reconstruct_one(sdir, method, cfg, optics, checkpoint)
        rdir = os.path.join(out, os.path.basename(sdir))
        os.makedirs(rdir, exist_ok=True)
        if result is not None:
            save_result(rdir, result, "recon")
        else:
            htf.write_tensor(os.path.join(rdir, "recon.htf"), field)
        _write_previews(rdir, "recon", field)
        truth = _load_truth(sdir, optics.sr_pitch_um)
        return idx, os.path.basename(sdir), field_metrics(field, truth)

    items = list(enumerate(dirs))
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(work, items))
    else:
        rows = [work(it) for it in items]
    rows.sort(key=lambda r: r[0])
    write_metrics_csv(os.path.join(out, "metrics.csv"),
                      [(name, m) for _, name, m in rows])
    cfg.echo(os.path.join(out, "config_used.txt"))
    mean_amp = float(np.mean([m["rmse_amp"] for _, _, m in rows]))
    print(f"reconstructed {len(rows)} samples ({method}); "
          f"mean amplitude RMSE {mean_amp:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------- autofocus

def cmd_autofocus(args, cfg: RunConfig) -> int:
    optics = _optics(cfg)
    search = FocusSearch(cfg.get("af.z_min_um"), cfg.get("af.z_max_um"),
                         cfg.get("af.step_um"), cfg.get("af.tol_um"))
    out = args.out
    os.makedirs(out, exist_ok=True)

    def work(item):
        idx, sdir = item
        rows = load_manifest(os.path.join(sdir, "manifest.tsv"))
        holo = htf.read_tensor(os.path.join(sdir, "holo_000.htf"))
        z_true = rows[0][1]
        z_est = autofocus(np.asarray(holo, dtype=np.float64), search, optics)
        return idx, os.path.basename(sdir), z_true, z_est

    items = list(enumerate(_sample_dirs(args.dataset)))
    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(work, items))
    else:
        rows = [work(it) for it in items]
    rows.sort(key=lambda r: r[0])
    lines = ["name,z_true_um,z_est_um,abs_error_um"]
    for _, name, z_true, z_est in rows:
        lines.append(f"{name},{z_true:.9g},{z_est:.9g},{abs(z_est - z_true):.9g}")
    tmp = os.path.join(out, "autofocus.csv.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, os.path.join(out, "autofocus.csv"))
    cfg.echo(os.path.join(out, "config_used.txt"))
    errs = [abs(z_est - z_true) for _, _, z_true, z_est in rows]
    print(f"autofocused {len(rows)} samples; max |error| {max(errs):.3f} um")
    return EXIT_OK


# ----------------------------------------------------------------- superres

def cmd_superres(args, cfg: RunConfig) -> int:
    optics = _optics(cfg)
    L = optics.sr_factor
    out = args.out
    os.makedirs(out, exist_ok=True)
    count = 0
    for sdir in _sample_dirs(args.dataset):
        rows = load_manifest(os.path.join(sdir, "manifest.tsv"))
        frames, truths = [], []
        for idx, _z2, dx, dy, _sig, _seed in rows:
            img = htf.read_tensor(os.path.join(sdir, f"frame_{idx:03d}.htf"))
            frames.append(np.asarray(img, dtype=np.float64))
            truths.append((dx / (L * optics.sr_pitch_um),
                           dy / (L * optics.sr_pitch_um)))
        shifts = estimate_shifts(frames)
        hr = shift_and_add(frames, shifts, L)
        rdir = os.path.join(out, os.path.basename(sdir))
        os.makedirs(rdir, exist_ok=True)
        htf.write_tensor(os.path.join(rdir, "superres.htf"),
                         hr.astype(np.float64))
        lines = ["frame,dx_true_lr,dy_true_lr,dx_est_lr,dy_est_lr"]
        for i, ((tx, ty), (ex, ey)) in enumerate(zip(truths, shifts.shifts)):
            lines.append(f"{i},{tx:.9g},{ty:.9g},{ex:.9g},{ey:.9g}")
        tmp = os.path.join(rdir, "shifts.csv.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, os.path.join(rdir, "shifts.csv"))
        count += 1
    cfg.echo(os.path.join(out, "config_used.txt"))
    print(f"fused {count} frame grids at factor {L}")
    return EXIT_OK


# -------------------------------------------------------------------- train

def _training_items(dataset, cfg: RunConfig, optics: OpticalConfig):
    m_train = cfg.get("train.m_train")
    mode = cfg.get("train.input")
    if mode not in ("backprop", "raw"):
        raise ConfigError(f"train.input must be backprop or raw, got {mode!r}")
    z_bar = cfg.get("train.z_bar_um")
    picker = Rng(cfg.get("seed")).child(777)
    items = []
    for sdir in _sample_dirs(dataset):
        stack = load_stack(sdir)
        if len(stack) < m_train:
            raise ConfigError(f"{sdir}: stack of {len(stack)} < m_train {m_train}")
        if len(stack) > m_train:
            chosen = sorted(picker.permutation(len(stack))[:m_train].tolist())
        else:
            chosen = list(range(len(stack)))
        holos = [stack[i].image for i in chosen]
        if mode == "backprop":
            inputs = [backprop_input(h, z_bar, optics) for h in holos]
        else:
            inputs = [raw_input(h) for h in holos]
        truth = _load_truth(sdir, optics.sr_pitch_um)
        items.append((inputs, np.stack([truth.re, truth.im])))
    return items


def cmd_train(args, cfg: RunConfig) -> int:
    optics = _optics(cfg)
    items = _training_items(args.dataset, cfg, optics)
    gen_config = GeneratorConfig(base=cfg.get("train.base"),
                                 dilation=cfg.get("train.dilation"),
                                 m_train=cfg.get("train.m_train"))
    weights = LossWeights(cfg.get("train.alpha"), cfg.get("train.beta"),
                          cfg.get("train.gamma"))
    disc_config = DiscriminatorConfig(base=cfg.get("train.disc_base"),
                                      hidden=cfg.get("train.disc_hidden")) \
        if weights.gamma > 0 else None
    result = train_toy(items, gen_config, disc_config, weights,
                       cfg.get("train.epochs"), Rng(cfg.get("seed")),
                       batch_size=cfg.get("train.batch"),
                       lr_g=cfg.get("train.lr_g"), lr_d=cfg.get("train.lr_d"),
                       lr_decay=cfg.get("train.lr_decay"),
                       msssim_scales=cfg.get("train.msssim_scales"))
    out = args.out
    os.makedirs(out, exist_ok=True)
    save_checkpoint(out, gen_config, result.gen_params,
                    input_mode=cfg.get("train.input"))
    keys = sorted(result.history)
    lines = ["epoch," + ",".join(keys)]
    for e in range(len(result.history[keys[0]])):
        lines.append(f"{e}," + ",".join(f"{result.history[k][e]:.9g}"
                                        for k in keys))
    tmp = os.path.join(out, "loss_history.csv.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, os.path.join(out, "loss_history.csv"))
    cfg.echo(os.path.join(out, "config_used.txt"))
    final = result.history["loss_g"][-1] if result.history["loss_g"] else None
    print(f"trained {cfg.get('train.epochs')} epochs on {len(items)} samples"
          + (f"; final generator loss {final:.5f}" if final is not None else ""))
    return EXIT_OK


# -------------------------------------------------------------------- infer

def cmd_infer(args, cfg: RunConfig) -> int:
    _config, _params, mode = load_checkpoint(args.checkpoint)
    args.method = "rh-md" if mode == "raw" else "rh-m"
    return cmd_reconstruct(args, cfg)


# ------------------------------------------------------------ sweep-defocus

def cmd_sweep_defocus(args, cfg: RunConfig) -> int:
    optics = _optics(cfg)
    gen_config, params, mode = load_checkpoint(args.checkpoint)
    z_bar = cfg.get("sweep.z_bar_um")
    span = args.z_span if args.z_span is not None else cfg.get("sweep.span_um")
    step = args.z_step if args.z_step is not None else cfg.get("sweep.step_um")
    if span <= 0 or step <= 0 or step > span:
        raise ConfigError(f"bad sweep grid: span {span}, step {step}")
    if step == span:
        offsets = np.array([0.0])  # degenerate single-cell grid
    else:
        offsets = np.arange(-span / 2.0, span / 2.0 + 0.5 * step, step)
    sample_dirs = _sample_dirs(args.dataset)[:cfg.get("sweep.samples")]
    truths = [_load_truth(sdir, optics.sr_pitch_um) for sdir in sample_dirs]
    if min(z + z_bar for z in offsets) < 100.0:
        raise ConfigError("sweep grid reaches below z2 = 100 um")

    lines = ["dz1_um,dz2_um,rmse_amp,rmse_phase,ssim_amp"]
    for dz1 in offsets:
        for dz2 in offsets:
            amps, phases, ssims = [], [], []
            for truth in truths:
                sample = SampleObject(truth, {"kind": "sweep"})
                h1 = capture(sample, z_bar + dz1, optics).image
                h2 = capture(sample, z_bar + dz2, optics).image
                if mode == "raw":
                    field = infer_rh_md(gen_config, params, [h1, h2], optics)
                else:
                    field = infer_rh_m(gen_config, params, [h1, h2],
                                       z_bar, optics)
                m = field_metrics(field, truth)
                amps.append(m["rmse_amp"])
                phases.append(m["rmse_phase"])
                ssims.append(m["ssim_amp"])
            lines.append(f"{dz1:.9g},{dz2:.9g},{np.mean(amps):.9g},"
                         f"{np.mean(phases):.9g},{np.mean(ssims):.9g}")
    out = args.out
    os.makedirs(out, exist_ok=True)
    tmp = os.path.join(out, "defocus_sweep.csv.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, os.path.join(out, "defocus_sweep.csv"))
    cfg.echo(os.path.join(out, "config_used.txt"))
    print(f"swept {len(offsets)}x{len(offsets)} defocus grid "
          f"over {len(truths)} samples")
    return EXIT_OK


# ------------------------------------------------------------------ metrics

def cmd_metrics(args, cfg: RunConfig) -> int:
    optics = _optics(cfg)
    est = ComplexField.from_complex(htf.read_tensor(args.estimate),
                                    optics.sr_pitch_um)
    ref = ComplexField.from_complex(htf.read_tensor(args.reference),
                                    optics.sr_pitch_um)
    m = field_metrics(est, ref)
    out = args.out
    os.makedirs(out, exist_ok=True)
    write_metrics_csv(os.path.join(out, "metrics.csv"),
                      [(os.path.basename(args.estimate), m)])
    cfg.echo(os.path.join(out, "config_used.txt"))
    print(", ".join(f"{k}={v:.5f}" for k, v in m.items()))
    return EXIT_OK


# -------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="holorec",
        description="Lensfree in-line holography: simulation, phase "
                    "retrieval, super-resolution, and recurrent networks.")
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="parallel workers for per-sample work")
    parser.add_argument("--set", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", help="synthesize samples and hologram stacks")

    p = sub.add_parser("reconstruct", help="reconstruct a simulated dataset")
    p.add_argument("dataset")
    p.add_argument("--method", choices=["mhpr", "zero-phase", "rh-m", "rh-md"])
    p.add_argument("--checkpoint")

    p = sub.add_parser("autofocus", help="estimate sample-to-sensor distances")
    p.add_argument("dataset")

    p = sub.add_parser("superres", help="fuse shifted low-resolution frames")
    p.add_argument("dataset")

    p = sub.add_parser("train", help="train the toy reconstruction network")
    p.add_argument("dataset")

    p = sub.add_parser("infer", help="reconstruct with a trained checkpoint")
    p.add_argument("dataset")
    p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("sweep-defocus", help="defocus-robustness grid")
    p.add_argument("dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--z-span", type=float, dest="z_span")
    p.add_argument("--z-step", type=float, dest="z_step")

    p = sub.add_parser("metrics", help="compare two complex-field tensors")
    p.add_argument("estimate")
    p.add_argument("reference")
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "autofocus": cmd_autofocus,
    "superres": cmd_superres,
    "train": cmd_train,
    "infer": cmd_infer,
    "sweep-defocus": cmd_sweep_defocus,
    "metrics": cmd_metrics,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
        for item in args.set:
            if "=" not in item:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            key, _, value = item.partition("=")
            cfg.set(key.strip(), value.strip())
        if args.seed is not None:
            cfg.set("seed", args.seed)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericsError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
