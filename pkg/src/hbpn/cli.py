"""Command-line entry point: ``hbpn <subcommand> ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(missing or unreadable files, bad checkpoints), 3 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import NonFiniteError, Tensor
from .checkpoint import CheckpointError, load_checkpoint
from .config import TrainConfig, load_config
from .errors import ConfigError, DataError, TrainingAborted
from .imaging import ImageIOError, ImageRGB, crop_to, load_image, pad_to_multiple, pre_upsample, save_image
from .metrics import psnr_y, self_ensemble_infer, single_infer, ssim_y
from .network import activation_percentage, wr_probabilities
from .training import ABLATION_AXES, ablate, evaluate, format_ablation, prepare_data, train

log = logging.getLogger("hbpn")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _parse_set(items) -> dict[str, str]:
    overrides = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def _resolve_config(args) -> TrainConfig:
    overrides = _parse_set(args.set)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    for key in ("scale", "out_dir", "dataset_root"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = str(value)
    config = load_config(args.config, overrides)
    print("# resolved config")
    print(config.to_text())
    return config


def _save_gray(values: np.ndarray, path: Path) -> None:
    save_image(np.floor(np.clip(values, 0.0, 255.0) + 0.5).astype(np.uint8), path)


def minmax_to_byte_range(values: np.ndarray) -> np.ndarray:
    """Min-max normalise to [0, 255]; an all-equal map becomes all zeros."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    if hi == lo:
        return np.zeros_like(values)
    return (values - lo) * (255.0 / (hi - lo))


# -- subcommands ---------------------------------------------------------------

def cmd_prepare_data(args) -> int:
    stats = prepare_data(args.hr_dir, args.scales, args.out_root)
    print(f"written {stats['written']}, up to date {stats['skipped']}, unreadable {stats['failed']}")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _resolve_config(args)
    result = train(config, resume=args.resume)
    last = result.losses[-1][1] if result.losses else float("nan")
    print(f"steps {len(result.losses)}, final loss {last:.6g}, checkpoint {result.checkpoint}")
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _resolve_config(args)
    expected = None if args.checkpoint is None else config.model_config()
    if args.any_architecture:
        expected = None
    report = evaluate(args.checkpoint, config.dataset_root, config.scale, args.self_ensemble,
                      out_dir=config.out_dir, expected=expected)
    print(report.to_text())
    return EXIT_OK


def _load_model_for_scale(path, scale: int):
    model, _, header = load_checkpoint(path)
    trained = header.get("progress", {}).get("scale")
    if trained is not None and trained != scale:
        raise ConfigError(f"checkpoint was trained for x{trained}, requested x{scale}")
    return model


def cmd_infer(args) -> int:
    model = _load_model_for_scale(args.checkpoint, args.scale)
    lr = load_image(args.input)
    up = pre_upsample(lr, args.scale)
    with ad.deterministic(True):
        sr = self_ensemble_infer(model, up) if args.self_ensemble else single_infer(model, up)
    sr = sr.quantized()
    save_image(sr, args.output)
    print(f"wrote {args.output} ({sr.height}x{sr.width})")
    if args.ground_truth:
        gt = load_image(args.ground_truth)
        if gt.shape != sr.shape:
            raise DataError(f"ground truth is {gt.shape[1]}x{gt.shape[2]}, output {sr.height}x{sr.width}")
        print(f"psnr_y {psnr_y(sr, gt, args.scale):.4f} dB, ssim_y {ssim_y(sr, gt, args.scale):.4f}")
    return EXIT_OK


def cmd_ablate(args) -> int:
    config = _resolve_config(args)
    values = [_ablation_value(args.axis, v) for v in args.values]
    rows = ablate(config, args.axis, values)
    table = format_ablation(rows, config.scale, Path(config.dataset_root).name or "eval")
    print(table)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"ablation_{args.axis}.txt").write_text(table + "\n", encoding="utf-8")
    return EXIT_OK


def _ablation_value(axis: str, text: str):
    if axis == "head_kind":
        return text
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"{axis} values must be integers, got {text!r}") from exc


def cmd_diagnose(args) -> int:
    model = load_checkpoint(args.checkpoint)[0]
    image = load_image(args.image)
    if args.scale:
        image = pre_upsample(image, args.scale)
    padded, dims = pad_to_multiple(image.data, model.config.multiple)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    x = Tensor(padded[None])
    with ad.deterministic(True), ad.no_grad():
        sr, coarse, weights = model(x)
        probs = wr_probabilities(weights).data[:, 0]
        percentages = activation_percentage(model, x)
    total = probs.astype(np.float64).sum(axis=0)
    if not np.allclose(total, 1.0, rtol=0, atol=1e-5):
        raise FloatingPointError(f"probability maps sum to {total.min()}..{total.max()}, not 1")
    save_image(ImageRGB(crop_to(sr.data[0], dims)), out / "sr.png")
    for k, (c_k, w_k) in enumerate(zip(coarse, weights), 1):
        save_image(ImageRGB(crop_to(c_k.data[0], dims)), out / f"coarse_{k}.png")
        w_map = crop_to(w_k.data[0], dims).mean(axis=0)
        _save_gray(minmax_to_byte_range(w_map), out / f"weight_{k}.png")
        p_map = crop_to(probs[k - 1], dims).mean(axis=0)
        _save_gray(255.0 * p_map, out / f"prob_{k}.png")
    lines = ["module  positive_pct"] + [f"{k:>6}  {p:12.2f}" for k, p in enumerate(percentages, 1)]
    (out / "activation.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hbpn", description="Hierarchical back-projection super-resolution.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def config_flags(p, with_scale=True):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
        p.add_argument("--seed", type=int, help="seed for all randomness")
        p.add_argument("--out-dir", dest="out_dir", help="output directory")
        p.add_argument("--dataset-root", dest="dataset_root", help="dataset root holding HR/ and LRx*/")
        if with_scale:
            p.add_argument("--scale", type=int, choices=(2, 4, 8), help="upscaling factor")

    p = sub.add_parser("prepare-data", help="build LRx{s} and LRx{s}_up mirrors of an HR folder")
    p.add_argument("hr_dir")
    p.add_argument("out_root")
    p.add_argument("--scales", type=int, nargs="+", choices=(2, 4, 8), default=[2, 4, 8])
    p.set_defaults(func=cmd_prepare_data)

    p = sub.add_parser("train", help="train a model")
    config_flags(p)
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint (or bicubic when omitted) on a dataset")
    config_flags(p)
    p.add_argument("--checkpoint", help="model checkpoint; omit for the bicubic baseline")
    p.add_argument("--self-ensemble", action="store_true", help="average over the 8 flips/rotations")
    p.add_argument("--any-architecture", action="store_true",
                   help="accept whatever architecture the checkpoint holds")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("infer", help="super-resolve one low-resolution image")
    p.add_argument("checkpoint")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--scale", type=int, choices=(2, 4, 8), required=True)
    p.add_argument("--self-ensemble", action="store_true")
    p.add_argument("--ground-truth", help="HR image; prints Y PSNR/SSIM against it")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("ablate", help="train and compare variants along one axis")
    config_flags(p)
    p.add_argument("axis", choices=sorted(ABLATION_AXES))
    p.add_argument("values", nargs="+")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("diagnose", help="export coarse outputs, weight maps and activation statistics")
    p.add_argument("checkpoint")
    p.add_argument("image", help="network input; a low-resolution image when --scale is given")
    p.add_argument("out_dir")
    p.add_argument("--scale", type=int, choices=(2, 4, 8), help="bicubic pre-upsampling factor")
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DataError, ImageIOError, CheckpointError, OSError) as exc:
        print(f"hbpn: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (TrainingAborted, NonFiniteError, FloatingPointError) as exc:
        print(f"hbpn: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError) as exc:
        print(f"hbpn: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
