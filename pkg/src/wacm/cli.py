"""Command-line entry point.

Subcommands: dwt, idwt, make-dataset, train-score, sample, colorize,
metrics.  Every run that produces artifacts writes a manifest.json with
the fully resolved configuration; re-running a command from its manifest
reproduces the outputs byte-for-byte.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 numerical error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict

import numpy as np

from .errors import NumericalError, ValidationError
from . import datasets
from .imaging import gray_op_by_name, load_raster, save_raster, to_gray
from .metrics import psnr, ssim
from .sampler import DcContext, SamplerConfig, anneal_sample, colorize, dc_residual
from .score import MlpScore, ParzenScore, load_model, save_model, train_mlp, DsmConfig
from .tensorio import load_tensor, save_tensor
from .wavelet import WaveletBands, gray_wavelet, idwt2_haar, stack, unstack
from .imaging import clamp

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4

_CONFIG_KEYS = {
    "sigma_begin": float,
    "sigma_end": float,
    "levels": int,
    "steps_per_level": int,
    "epsilon": float,
    "w1": float,
    "w2": float,
    "seed": int,
    "gray_op": str,
    "dc_broadcast": str,
}


def load_config_file(path) -> dict:
    """Flat key = value text; '#' starts a comment."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                key, _, val = line.partition("=")
            else:
                parts = line.split(None, 1)
                if len(parts) != 2:
                    raise ValidationError(f"{path}:{lineno}: cannot parse {raw!r}")
                key, val = parts
            key, val = key.strip(), val.strip()
            if key not in _CONFIG_KEYS:
                raise ValidationError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _CONFIG_KEYS[key](val)
    return values


def resolve_sampler_config(args, overrides=None) -> SamplerConfig:
    """Precedence: command line > config file > built-in defaults."""
    values = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    if overrides:
        values.update(overrides)
    for key in _CONFIG_KEYS:
        cli_val = getattr(args, key, None)
        if cli_val is not None:
            values[key] = cli_val
    if "gray_op" in values and isinstance(values["gray_op"], str):
        values["gray_op"] = gray_op_by_name(values["gray_op"])
    return SamplerConfig(**values)


def _config_dict(cfg: SamplerConfig) -> dict:
    d = asdict(cfg)
    d["gray_op"] = cfg.gray_op.kind
    return d


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _atomic_save_raster(img, path):
    tmp = str(path) + ".tmp"
    save_raster(img, tmp)
    os.replace(tmp, path)


def _write_manifest(outdir, manifest):
    tmp = os.path.join(outdir, "manifest.json.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, os.path.join(outdir, "manifest.json"))


# --- subcommands ------------------------------------------------------------

def cmd_dwt(args) -> int:
    img = load_raster(args.input)
    tensor = stack(img) if img.shape[0] == 3 else gray_wavelet(img).as_array()
    save_tensor(tensor, args.output)
    return EXIT_OK


def cmd_idwt(args) -> int:
    tensor = load_tensor(args.input)
    if tensor.ndim == 3 and tensor.shape[0] == 12:
        img = clamp(unstack(tensor))
    elif tensor.ndim == 3 and tensor.shape[0] == 4:
        img = clamp(idwt2_haar(WaveletBands(*tensor)))[np.newaxis]
    else:
        raise ValidationError(f"tensor shape {tensor.shape} is neither a stack nor bands")
    _atomic_save_raster(img, args.output)
    return EXIT_OK


def cmd_make_dataset(args) -> int:
    op = gray_op_by_name(args.gray_op or "mean")
    rng = np.random.default_rng(args.seed or 0)
    if args.generator == "constant":
        images, colors = datasets.constant_colors(args.count, args.size, rng, op)
        colors = [c.tolist() for c in colors]
    elif args.generator == "two-tone":
        images, colors = datasets.two_tone(args.count, args.size, rng, op)
        colors = [[a.tolist(), b.tolist()] for a, b in colors]
    elif args.generator == "metamer":
        images, colors = datasets.metamer_pair(args.size, op)
        colors = [c.tolist() for c in colors]
    else:
        raise ValidationError(f"unknown generator {args.generator!r}")
    os.makedirs(args.out, exist_ok=True)
    paths = []
    for i, img in enumerate(images):
        path = os.path.join(args.out, f"img_{i:03d}.ppm")
        _atomic_save_raster(img, path)
        paths.append(path)
    _write_manifest(args.out, {
        "command": "make-dataset",
        "generator": args.generator,
        "count": len(images),
        "size": args.size,
        "seed": args.seed or 0,
        "gray_op": op.kind,
        "images": paths,
        "colors": colors,
    })
    return EXIT_OK


def _load_dataset_stacks(dataset_dir):
    names = sorted(
        f for f in os.listdir(dataset_dir)
        if f.lower().endswith((".ppm", ".pgm", ".png"))
    )
    if not names:
        raise ValidationError(f"no raster images found in {dataset_dir}")
    stacks, resolution = [], None
    for name in names:
        img = load_raster(os.path.join(dataset_dir, name))
        if img.shape[0] != 3:
            raise ValidationError(f"{name}: training images must be RGB")
        X = stack(img)
        if resolution is None:
            resolution = (X.shape[1], X.shape[2], 12)
        elif (X.shape[1], X.shape[2], 12) != resolution:
            raise ValidationError(f"{name}: resolution mismatch within the dataset")
        stacks.append(X.ravel())
    return np.stack(stacks), resolution, names


def cmd_train_score(args) -> int:
    t0 = time.perf_counter()
    cfg = resolve_sampler_config(args)
    data, resolution, names = _load_dataset_stacks(args.dataset)
    manifest = {
        "command": "train-score",
        "dataset": args.dataset,
        "images": names,
        "resolution": list(resolution),
        "config": _config_dict(cfg),
        "model_out": args.model_out,
    }
    if args.parzen:
        model = ParzenScore(data, resolution=resolution)
        manifest["model_kind"] = "parzen"
    else:
        rng = np.random.default_rng(cfg.seed)
        model = MlpScore(
            data.shape[1],
            hidden=tuple(args.hidden),
            rng=rng,
            resolution=resolution,
        )
        dsm_cfg = DsmConfig(
            schedule=cfg.schedule(),
            batch_size=args.batch_size,
            iterations=args.iterations,
            learning_rate=args.learning_rate,
        )
        history = []
        train_mlp(model, data, dsm_cfg, rng, history=history)
        manifest["model_kind"] = "mlp"
        manifest["iterations"] = args.iterations
        if history:
            k = max(len(history) // 10, 1)
            manifest["loss_first_window"] = float(np.mean(history[:k]))
            manifest["loss_last_window"] = float(np.mean(history[-k:]))
    tmp = args.model_out + ".tmp"
    save_model(model, tmp)
    os.replace(tmp, args.model_out)
    manifest["model_digest"] = _sha256(args.model_out)
    manifest["wall_clock_s"] = time.perf_counter() - t0
    outdir = os.path.dirname(os.path.abspath(args.model_out))
    _write_manifest(outdir, manifest)
    return EXIT_OK


def cmd_sample(args) -> int:
    t0 = time.perf_counter()
    overrides = None
    if args.from_manifest:
        with open(args.from_manifest, "r", encoding="utf-8") as fh:
            prev = json.load(fh)
        overrides = prev["config"]
        args.model = args.model or prev["model"]
        args.n = args.n or prev["n"]
    cfg = resolve_sampler_config(args, overrides=overrides)
    model = load_model(args.model)
    if getattr(model, "resolution", None) is None:
        raise ValidationError("model file carries no resolution; cannot sample unconditionally")
    os.makedirs(args.out, exist_ok=True)
    n = args.n or 1
    outputs = []
    for k in range(n):
        rng = np.random.default_rng(cfg.seed + k)
        X = anneal_sample(model, cfg, rng=rng)
        img = clamp(unstack(X))
        path = os.path.join(args.out, f"sample_{k:03d}.ppm")
        _atomic_save_raster(img, path)
        outputs.append(path)
    _write_manifest(args.out, {
        "command": "sample",
        "model": args.model,
        "model_digest": _sha256(args.model),
        "config": _config_dict(cfg),
        "n": n,
        "outputs": outputs,
        "wall_clock_s": time.perf_counter() - t0,
    })
    return EXIT_OK


def cmd_colorize(args) -> int:
    t0 = time.perf_counter()
    overrides = None
    if args.from_manifest:
        with open(args.from_manifest, "r", encoding="utf-8") as fh:
            prev = json.load(fh)
        overrides = prev["config"]
        args.input = args.input or prev["input"]
        args.model = args.model or prev["model"]
        args.n = args.n or prev["n"]
    if not args.input or not args.model:
        raise ValidationError("colorize requires an input image and a model")
    cfg = resolve_sampler_config(args, overrides=overrides)
    model = load_model(args.model)
    img = load_raster(args.input)
    manifest = {
        "command": "colorize",
        "input": args.input,
        "model": args.model,
        "model_digest": _sha256(args.model),
        "config": _config_dict(cfg),
    }
    if img.shape[0] == 3:
        # test mode: degrade the color input, keep it as ground truth
        truth = img
        gray = to_gray(img, cfg.gray_op)
        manifest["mode"] = "test"
    else:
        truth = None
        gray = img
        manifest["mode"] = "blind"
    res = getattr(model, "resolution", None)
    expected = (gray.shape[1] // 2, gray.shape[2] // 2, 12)
    if res is not None and tuple(res) != expected:
        raise ValidationError(f"model resolution {tuple(res)} does not match input {expected}")
    n = args.n or 1
    os.makedirs(args.out, exist_ok=True)
    results = colorize(gray, model, cfg, n_samples=n)
    ctx = DcContext.from_gray(gray, op=cfg.gray_op, broadcast=cfg.dc_broadcast)
    outputs, reports = [], []
    for k, result in enumerate(results):
        path = os.path.join(args.out, f"color_{k:03d}.ppm")
        _atomic_save_raster(result, path)
        outputs.append(path)
        regraybands = dc_residual(stack(result), ctx)
        report = {
            "output": path,
            "dc_residual_max": float(
                np.max(np.abs(to_gray(result, cfg.gray_op) - gray))
            ),
            "dc_gradient_max": float(np.max(np.abs(regraybands))),
        }
        if truth is not None:
            report["psnr_db"] = psnr(truth, result)
            if min(truth.shape[1], truth.shape[2]) >= 11:
                report["ssim"] = ssim(truth, result)
        reports.append(report)
    manifest["n"] = n
    manifest["outputs"] = outputs
    manifest["reports"] = reports
    manifest["wall_clock_s"] = time.perf_counter() - t0
    _write_manifest(args.out, manifest)
    return EXIT_OK


def cmd_metrics(args) -> int:
    if len(args.images) % 2:
        raise ValidationError("metrics expects an even number of paths: REF TEST ...")
    rows = []
    for i in range(0, len(args.images), 2):
        ref = load_raster(args.images[i])
        test = load_raster(args.images[i + 1])
        rows.append((args.images[i + 1], psnr(ref, test), ssim(ref, test)))
    for path, p, s in rows:
        print(f"{path}\t{p:.4f}\t{s:.6f}")
    mean_p = float(np.mean([p for _, p, _ in rows]))
    mean_s = float(np.mean([s for _, _, s in rows]))
    print(f"aggregate\t{mean_p:.4f}\t{mean_s:.6f}")
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def _add_config_flags(p):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--sigma-begin", dest="sigma_begin", type=float)
    p.add_argument("--sigma-end", dest="sigma_end", type=float)
    p.add_argument("--levels", type=int)
    p.add_argument("--steps-per-level", dest="steps_per_level", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--w1", type=float)
    p.add_argument("--w2", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--gray-op", dest="gray_op", choices=["mean", "luma", "luma-corrected"])
    p.add_argument("--dc-broadcast", dest="dc_broadcast", choices=["adjoint", "replicate"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wacm",
                                     description="Wavelet-domain score-based colorization")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("dwt", help="image -> wavelet tensor file")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_dwt)

    p = sub.add_parser("idwt", help="wavelet tensor file -> image")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_idwt)

    p = sub.add_parser("make-dataset", help="write a synthetic fixture dataset")
    p.add_argument("generator", choices=["constant", "two-tone", "metamer"])
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--size", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gray-op", dest="gray_op", default="mean",
                   choices=["mean", "luma", "luma-corrected"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_dataset)

    p = sub.add_parser("train-score", help="train or package a score model")
    p.add_argument("dataset", help="directory of RGB training rasters")
    p.add_argument("--model-out", required=True)
    p.add_argument("--parzen", action="store_true",
                   help="package the exact Parzen score instead of training an MLP")
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--hidden", type=int, nargs="+", default=[64, 64])
    p.add_argument("--learning-rate", type=float, default=0.005)
    _add_config_flags(p)
    p.set_defaults(func=cmd_train_score)

    p = sub.add_parser("sample", help="unconditional annealed Langevin samples")
    p.add_argument("--model")
    p.add_argument("-n", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--from-manifest", dest="from_manifest")
    _add_config_flags(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("colorize", help="colorize a grayscale (or degraded color) image")
    p.add_argument("--input")
    p.add_argument("--model")
    p.add_argument("-n", type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--from-manifest", dest="from_manifest")
    _add_config_flags(p)
    p.set_defaults(func=cmd_colorize)

    p = sub.add_parser("metrics", help="PSNR/SSIM for REF TEST path pairs")
    p.add_argument("images", nargs="+")
    p.set_defaults(func=cmd_metrics)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
