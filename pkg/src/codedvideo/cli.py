"""Command-line interface.

Every command writes into one run directory (``--out``) with a fixed
layout::

    frames/          reconstructed frames, frame_0000.png ...
    coded.cvt        raw coded image (float64 tensor)
    coded.png        coded image divided by the bump length, 16-bit
    shutter.cvt      shutter mask (uint8 tensor, H x W x T)
    report.csv       per-frame PSNR / MS-SSIM against a reference
    objective.csv    CSC objective history
    meta.txt         full configuration, seeds, version and timings

Parameters come from built-in defaults, then an optional flat
``key = value`` config file (``--config``), then command-line flags.
"""

from __future__ import annotations

import argparse
import csv
import logging
import platform
import sys
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .coded_exposure import Shutter, code_exposure, generate_shutter, sampling_stats
from .csc.operators import check_filters
from .csc.solver import CscParams, reconstruct_csc
from .csc.training import CscTrainConfig, train_filters
from .exceptions import CodedVideoError, IngestError, IoError, ParamError
from .metrics import mean_ms_ssim, report
from .patch.blocks import BlockSelectionConfig, PatchConfig, extract_blocks, select_training_blocks
from .patch.ksvd import train_ksvd
from .patch.reconstruct import reconstruct_patch
from .synthetic import motion_suite, natural_images, video_frames
from .tensor_io import load_frames, read_image, read_tensor, save_frames, write_image, write_tensor

log = logging.getLogger("codedvideo")

SWEEP_BETA_D = (1.0, 10.0, 100.0, 1000.0)
SWEEP_BETA_2 = (0.0, 0.1, 1.0, 10.0)


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    return None if str(text).strip().lower() in ("none", "") else float(text)


def _opt_int(text):
    return None if str(text).strip().lower() in ("none", "") else int(text)


def _floats(text):
    if isinstance(text, (tuple, list)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).split(",") if v.strip())


@dataclass(frozen=True)
class Key:
    default: object
    parse: object
    help: str


KEYS = {
    # shutter
    "frames": Key(20, int, "number of frames T coded into one image"),
    "bump_length": Key(3, int, "exposure length L of every pixel, in frames"),
    "seed": Key(0, _opt_int, "shutter seed"),
    # CSC reconstruction
    "beta_d": Key(100.0, float, "data-term weight"),
    "beta_1": Key(10.0, float, "sparsity weight"),
    "beta_2": Key(1.0, float, "temporal-smoothness weight"),
    "rho": Key(1.0, float, "ADMM penalty"),
    "outer_iters": Key(30, int, "ADMM iterations"),
    "tol": Key(1e-4, float, "early stop on the relative change of the maps"),
    "quad_solver": Key("direct", str, "quadratic step: direct (exact transform solve) or cg"),
    "quad_tol": Key(1e-6, float, "CG relative residual tolerance"),
    "quad_max_iters": Key(50, int, "CG iteration cap"),
    "lowpass_sigma": Key(2.0, _opt_float, "std of the low-pass mean removed before coding (none = off)"),
    "dtype": Key("float32", str, "solver precision: float64 or float32"),
    # CSC training
    "n_filters": Key(100, int, "number of filters K"),
    "filter_size": Key(11, int, "filter side s (odd)"),
    "sparsity": Key(1.0, float, "training sparsity weight"),
    "alternations": Key(15, int, "training alternations"),
    "z_iters": Key(10, int, "ADMM iterations per sparse-coding step"),
    "d_iters": Key(20, int, "CG iterations per filter step"),
    "train_rho": Key(10.0, float, "ADMM penalty used during training"),
    "train_seed": Key(0, _opt_int, "seed of the initial filters / K-SVD"),
    "n_images": Key(10, int, "images taken from a builtin training corpus"),
    # patch baseline
    "patch_x": Key(7, int, "block width"),
    "patch_y": Key(7, int, "block height"),
    "patch_t": Key(20, int, "block length in frames"),
    "stride": Key(2, int, "spatial block step"),
    "n_atoms": Key(None, _opt_int, "dictionary size (none = twice the block length)"),
    "train_sparsity": Key(10, int, "K-SVD sparsity"),
    "ksvd_iters": Key(30, int, "K-SVD iterations"),
    "lasso_lambda": Key(0.1, float, "per-block lasso penalty"),
    "remove_mean": Key(False, _bool, "remove block means during training"),
    "strategy": Key("variance-bins", str, "training-block selection strategy"),
    "count": Key(2000, int, "number of training blocks"),
    "gamma": Key(0.7, float, "gamma of the gamma selection strategies"),
    "n_strata": Key(10, int, "strata of the stratified-gamma strategy"),
    "selection_seed": Key(0, _opt_int, "seed of the block selection"),
    # evaluation / output
    "bit_depth": Key(8, int, "bit depth of written frames"),
    "suite_size": Key(64, int, "side of the builtin synthetic videos"),
    "sweep_beta_d": Key(SWEEP_BETA_D, _floats, "comma-separated beta_d grid"),
    "sweep_beta_2": Key(SWEEP_BETA_2, _floats, "comma-separated beta_2 grid"),
}


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise IngestError(f"cannot read config {path}: {exc}") from exc
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParamError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ParamError(f"{path}:{n}: unknown key {key!r}")
        out[key] = value
    return out


def resolve_config(args) -> dict:
    """Defaults, overridden by the config file, overridden by flags."""
    cfg = {k: spec.default for k, spec in KEYS.items()}
    raw = read_config(args.config) if args.config else {}
    for k, v in vars(args).items():
        if k in KEYS and v is not None:
            raw[k] = v
    for k, v in raw.items():
        try:
            cfg[k] = KEYS[k].parse(v)
        except ValueError as exc:
            raise ParamError(f"bad value for {k}: {v!r} ({exc})") from exc
    return cfg


def csc_params(cfg) -> CscParams:
    names = ("beta_d", "beta_1", "beta_2", "rho", "outer_iters", "tol", "quad_solver", "quad_tol",
             "quad_max_iters", "lowpass_sigma", "dtype")
    return CscParams(**{n: cfg[n] for n in names}).validate()


def patch_config(cfg) -> PatchConfig:
    names = ("patch_x", "patch_y", "patch_t", "stride", "n_atoms", "train_sparsity", "ksvd_iters",
             "lasso_lambda", "remove_mean")
    return PatchConfig(**{n: cfg[n] for n in names}).validate()


def selection_config(cfg) -> BlockSelectionConfig:
    return BlockSelectionConfig(cfg["strategy"], cfg["count"], cfg["gamma"], cfg["n_strata"],
                                cfg["selection_seed"]).validate()


# --------------------------------------------------------------------------
# run directory helpers
# --------------------------------------------------------------------------

def _run_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create run directory {out}: {exc}") from exc
    return out


def write_meta(out: Path, args, cfg: dict, extra: dict) -> None:
    lines = [
        f"command = {args.command}",
        f"version = {__version__}",
        f"python = {platform.python_version()}",
        f"numpy = {np.__version__}",
        f"argv = {' '.join(sys.argv[1:])}",
        f"threads = {args.threads}",
        f"deterministic = {args.deterministic}",
    ]
    for k in ("input", "coded", "shutter", "dictionary", "reference", "estimate", "config"):
        if getattr(args, k, None) is not None:
            v = getattr(args, k)
            lines.append(f"{k} = {','.join(map(str, v)) if isinstance(v, list) else v}")
    for k in KEYS:
        v = cfg[k]
        lines.append(f"{k} = {','.join(map(str, v)) if isinstance(v, tuple) else v}")
    lines += [f"{k} = {v}" for k, v in extra.items()]
    (out / "meta.txt").write_text("\n".join(lines) + "\n")


def write_objective(path: Path, history) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "data", "l1", "temporal", "total"])
        for i, row in enumerate(np.asarray(history)):
            w.writerow([i] + [f"{v:.10g}" for v in row])


def filter_mosaic(filters, pad: int = 1) -> np.ndarray:
    """Tile (K, s, s) filters into one image, each rescaled to [0, 1]."""
    d = np.asarray(filters, dtype=np.float64)
    K, s, _ = d.shape
    cols = int(np.ceil(np.sqrt(K)))
    rows = int(np.ceil(K / cols))
    img = np.ones((rows * (s + pad) + pad, cols * (s + pad) + pad))
    for k in range(K):
        f = d[k]
        span = f.max() - f.min()
        f = (f - f.min()) / span if span > 0 else np.full_like(f, 0.5)
        r, c = divmod(k, cols)
        img[pad + r * (s + pad): pad + r * (s + pad) + s, pad + c * (s + pad): pad + c * (s + pad) + s] = f
    return img


def _load_video(path, n_frames) -> np.ndarray:
    video = load_frames(path)
    if video.shape[2] < n_frames:
        raise IngestError(f"{path}: found {video.shape[2]} frames, expected {n_frames}")
    if video.shape[2] > n_frames:
        warnings.warn(f"{path}: {video.shape[2]} frames given, using the first {n_frames}", stacklevel=2)
        video = video[:, :, :n_frames]
    return video


def _load_videos(inputs, cfg) -> list:
    """Ground-truth videos from directories, or the builtin synthetic motion suite."""
    videos = []
    for item in inputs:
        if item == "builtin:motion":
            videos += list(motion_suite(cfg["suite_size"], cfg["frames"], seed=0).values())
        else:
            videos.append(_load_video(item, cfg["frames"]))
    if not videos:
        raise ParamError("no input videos")
    return videos


def _load_images(inputs, cfg) -> list:
    images = []
    for item in inputs:
        if item == "builtin:natural":
            images += natural_images(cfg["n_images"])
        elif item == "builtin:video":
            images += video_frames(cfg["n_images"])
        else:
            p = Path(item)
            if p.is_dir():
                files = sorted(f for f in p.iterdir() if f.suffix.lower() in (".png", ".pgm"))
                if not files:
                    raise IngestError(f"no .png/.pgm images in {p}")
                images += [read_image(f) for f in files]
            elif p.is_file():
                images.append(read_image(p))
            else:
                raise IngestError(f"{p} does not exist")
    if not images:
        raise ParamError("no training images")
    return images


def _load_shutter(path) -> Shutter:
    return Shutter.from_mask(read_tensor(path))


def _load_filters(path) -> np.ndarray:
    d = read_tensor(path)
    if d.ndim != 3:
        raise ParamError(f"{path} holds a {d.ndim}-D tensor; a CSC filter bank is (s, s, K)")
    return check_filters(np.moveaxis(d, 2, 0))


def _load_patch_dictionary(path) -> np.ndarray:
    D = read_tensor(path)
    if D.ndim != 2:
        raise ParamError(f"{path} holds a {D.ndim}-D tensor; a patch dictionary is (block length, atoms)")
    return D.astype(np.float64)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_simulate(args, cfg):
    out = _run_dir(args.out)
    video = _load_videos([args.input], cfg)[0]
    H, W, T = video.shape
    t0 = time.perf_counter()
    shutter = generate_shutter(H, W, T, cfg["bump_length"], seed=cfg["seed"])
    coded = code_exposure(video, shutter)
    elapsed = time.perf_counter() - t0
    write_tensor(out / "coded.cvt", coded)
    write_tensor(out / "shutter.cvt", shutter.mask)
    write_image(out / "coded.png", coded / shutter.bump_length, bit_depth=16)
    _, overall = sampling_stats(shutter)
    write_meta(out, args, cfg, {"sampling_ratio": f"{overall:.6f}", "seconds": f"{elapsed:.6f}"})
    print(f"coded {T} frames of {H}x{W}; sampling ratio {overall:.4f}")


def _finish_reconstruction(args, cfg, out, frames, extra):
    save_frames(np.clip(frames, 0.0, 1.0), out / "frames", bit_depth=cfg["bit_depth"])
    if args.reference:
        ref = _load_video(args.reference, frames.shape[2])
        rep = report(ref, np.clip(frames, 0.0, 1.0))
        rep.to_csv(out / "report.csv")
        extra.update(mean_psnr=f"{rep.mean_psnr:.6f}", mean_ms_ssim=f"{rep.mean_ms_ssim:.6f}")
        print(f"mean PSNR {rep.mean_psnr:.3f} dB, mean MS-SSIM {rep.mean_ms_ssim:.4f}")
    write_meta(out, args, cfg, extra)


def cmd_reconstruct_csc(args, cfg):
    out = _run_dir(args.out)
    coded = read_tensor(args.coded)
    shutter = _load_shutter(args.shutter)
    filters = _load_filters(args.dictionary)
    res = reconstruct_csc(coded, shutter, filters, csc_params(cfg), return_maps=False)
    write_objective(out / "objective.csv", res.history)
    extra = {
        "seconds": f"{res.info['seconds']:.6f}",
        "iterations": res.info["iterations"],
        "stopped_early": res.info["stopped_early"],
        "quad_solver_used": res.info["quad_solver"],
    }
    _finish_reconstruction(args, cfg, out, res.frames, extra)
    print(f"CSC reconstruction: {res.info['iterations']} iterations in {res.info['seconds']:.2f} s")


def cmd_reconstruct_patch(args, cfg):
    out = _run_dir(args.out)
    coded = read_tensor(args.coded)
    shutter = _load_shutter(args.shutter)
    D = _load_patch_dictionary(args.dictionary)
    pc = patch_config(cfg)
    video, info = reconstruct_patch(coded, shutter, D, pc, return_info=True)
    extra = {"seconds": f"{info['seconds']:.6f}", "blocks": info["blocks"]}
    _finish_reconstruction(args, cfg, out, video, extra)
    print(f"patch reconstruction: {info['blocks']} blocks in {info['seconds']:.2f} s")


def cmd_train_csc(args, cfg):
    out = _run_dir(args.out)
    images = _load_images(args.input, cfg)
    tc = CscTrainConfig(n_filters=cfg["n_filters"], size=cfg["filter_size"], sparsity=cfg["sparsity"],
                        alternations=cfg["alternations"], z_iters=cfg["z_iters"], d_iters=cfg["d_iters"],
                        rho=cfg["train_rho"], seed=cfg["train_seed"])
    t0 = time.perf_counter()
    filters, history = train_filters(images, tc)
    elapsed = time.perf_counter() - t0
    write_tensor(out / "filters.cvt", np.ascontiguousarray(np.moveaxis(filters, 0, 2)))
    write_image(out / "filters.png", filter_mosaic(filters))
    with open(out / "training.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alternation", "objective"])
        w.writerows([i, f"{v:.10g}"] for i, v in enumerate(history))
    write_meta(out, args, cfg, {"seconds": f"{elapsed:.6f}", "images": len(images)})
    print(f"trained {filters.shape[0]} filters on {len(images)} images in {elapsed:.1f} s")


def cmd_train_patch(args, cfg):
    out = _run_dir(args.out)
    pc = patch_config(cfg)
    videos = _load_videos(args.input, dict(cfg, frames=pc.patch_t) if cfg["frames"] < pc.patch_t else cfg)
    blocks = np.concatenate([extract_blocks(v, pc.patch_shape, stride=1)[0] for v in videos])
    t0 = time.perf_counter()
    idx = select_training_blocks(blocks, selection_config(cfg))
    D, history = train_ksvd(blocks[idx], pc.atoms, pc.train_sparsity, pc.ksvd_iters,
                            seed=cfg["train_seed"], remove_mean=pc.remove_mean)
    elapsed = time.perf_counter() - t0
    write_tensor(out / "dictionary.cvt", D)
    with open(out / "training.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "representation_error"])
        w.writerows([i, f"{v:.10g}"] for i, v in enumerate(history))
    write_meta(out, args, cfg, {"seconds": f"{elapsed:.6f}", "candidate_blocks": len(blocks)})
    print(f"trained a {D.shape[0]}x{D.shape[1]} dictionary on {len(idx)} blocks in {elapsed:.1f} s")


def cmd_evaluate(args, cfg):
    out = _run_dir(args.out)
    ref = load_frames(args.reference)
    est = load_frames(args.estimate)
    if ref.shape != est.shape:
        raise ParamError(f"reference {ref.shape} and estimate {est.shape} differ in shape")
    rep = report(ref, est)
    rep.to_csv(out / "report.csv")
    write_meta(out, args, cfg, {"mean_psnr": f"{rep.mean_psnr:.6f}", "mean_ms_ssim": f"{rep.mean_ms_ssim:.6f}"})
    print(f"mean PSNR {rep.mean_psnr:.3f} dB, mean MS-SSIM {rep.mean_ms_ssim:.4f}")


def run_sweep(videos, filters, cfg, grid_d=None, grid_2=None, progress=None):
    """Mean MS-SSIM over ``videos`` for every (beta_d, beta_2) cell.

    Each video is coded with the configured shutter; returns a list of
    ``(beta_d, beta_2, mean_ms_ssim)`` rows in grid order.
    """
    if not videos:
        raise ParamError("empty video set")
    grid_d = grid_d or cfg["sweep_beta_d"]
    grid_2 = grid_2 or cfg["sweep_beta_2"]
    coded = []
    for v in videos:
        H, W, T = v.shape
        s = generate_shutter(H, W, T, cfg["bump_length"], seed=cfg["seed"])
        coded.append((code_exposure(v, s), s))
    base = csc_params(cfg)
    rows = []
    for bd in grid_d:
        for b2 in grid_2:
            p = CscParams(**dict(base.to_dict(), beta_d=bd, beta_2=b2)).validate()
            scores = [
                mean_ms_ssim(v, np.clip(reconstruct_csc(b, s, filters, p, return_maps=False).frames, 0, 1))
                for v, (b, s) in zip(videos, coded)
            ]
            rows.append((bd, b2, float(np.mean(scores))))
            if progress:
                progress(rows[-1])
    return rows


def cmd_sweep(args, cfg):
    out = _run_dir(args.out)
    videos = _load_videos(args.input, cfg)
    filters = _load_filters(args.dictionary)
    t0 = time.perf_counter()
    rows = run_sweep(videos, filters, cfg, progress=lambda r: log.info("beta_d=%g beta_2=%g: %.4f", *r))
    elapsed = time.perf_counter() - t0
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["beta_d", "beta_2", "mean_ms_ssim"])
        w.writerows([bd, b2, f"{m:.6f}"] for bd, b2, m in rows)
    best = max(rows, key=lambda r: r[2])
    write_meta(out, args, cfg, {"seconds": f"{elapsed:.6f}", "best_beta_d": best[0], "best_beta_2": best[1],
                                "best_mean_ms_ssim": f"{best[2]:.6f}"})
    print(f"best cell beta_d={best[0]:g}, beta_2={best[1]:g}: mean MS-SSIM {best[2]:.4f}")


COMMANDS = {
    "simulate": (cmd_simulate, "code a frame directory into one coded image"),
    "reconstruct-csc": (cmd_reconstruct_csc, "reconstruct frames with convolutional sparse coding"),
    "reconstruct-patch": (cmd_reconstruct_patch, "reconstruct frames with the patch dictionary baseline"),
    "train-csc": (cmd_train_csc, "learn a convolutional filter bank from images"),
    "train-patch": (cmd_train_patch, "learn a K-SVD patch dictionary from videos"),
    "evaluate": (cmd_evaluate, "compare two frame directories"),
    "sweep": (cmd_sweep, "grid over beta_d and beta_2"),
}


# short spellings accepted next to the canonical flags
ALIASES = {"bump_length": ("--bump",), "n_filters": ("--filters",), "filter_size": ("--size",)}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="codedvideo", description="Coded-exposure video simulation and reconstruction.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--out", required=True, help="run directory")
        p.add_argument("--config", help="flat key = value parameter file")
        p.add_argument("--threads", type=int, default=None, help="cap on worker threads")
        p.add_argument("--deterministic", action="store_true", help="single-threaded, fixed reduction order")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "simulate":
            p.add_argument("--input", required=True, help="frame directory")
        elif name.startswith("reconstruct"):
            p.add_argument("--coded", required=True, help="coded image tensor (coded.cvt)")
            p.add_argument("--shutter", required=True, help="shutter tensor (shutter.cvt)")
            p.add_argument("--dictionary", "--dict", required=True, help="filter bank or patch dictionary tensor")
            p.add_argument("--reference", help="ground-truth frame directory for a quality report")
        elif name == "train-csc":
            p.add_argument("--input", "--images", nargs="+", required=True,
                           help="image files or directories, or builtin:natural / builtin:video")
        elif name == "train-patch":
            p.add_argument("--input", "--videos", nargs="+", required=True,
                           help="frame directories or builtin:motion")
        elif name == "evaluate":
            p.add_argument("--reference", required=True)
            p.add_argument("--estimate", required=True)
        elif name == "sweep":
            p.add_argument("--input", nargs="+", required=True, help="ground-truth frame directories or builtin:motion")
            p.add_argument("--dictionary", "--dict", required=True, help="filter bank tensor")
        group = p.add_argument_group("parameters (also accepted as config-file keys)")
        for key, spec in KEYS.items():
            flags = [f"--{key.replace('_', '-')}", *ALIASES.get(key, ())]
            group.add_argument(*flags, dest=key, default=None, help=f"{spec.help} [{spec.default}]")
    return parser


def _limit_threads(n):
    from threadpoolctl import threadpool_limits

    threadpool_limits(n)
    import numba

    numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    logging.captureWarnings(True)
    if args.deterministic:
        args.threads = 1
    try:
        cfg = resolve_config(args)
        if args.threads is not None:
            if args.threads < 1:
                raise ParamError("--threads must be >= 1")
            _limit_threads(args.threads)
        COMMANDS[args.command][0](args, cfg)
    except (CodedVideoError, OSError, ValueError) as exc:
        print(f"codedvideo {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
