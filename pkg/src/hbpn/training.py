"""Training loop, offline evaluation, dataset preparation and ablation drivers."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Adam, NonFiniteError, Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig
from .errors import DataError, TrainingAborted
from .imaging import (
    ImageIOError,
    ImageRGB,
    SamplePair,
    degrade,
    extract_patches,
    load_image,
    modcrop,
    pre_upsample,
    save_image,
    transform,
)
from .metrics import MetricsReport, psnr_y, self_ensemble_infer, single_infer, ssim_y
from .network import HBPNModel, ModelConfig

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".png", ".ppm", ".pgm")


def list_images(directory) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        return []
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS)


# -- data ----------------------------------------------------------------------

def prepare_data(hr_dir, scales: Sequence[int], out_root) -> dict[str, int]:
    """Write ``LRx{s}`` and ``LRx{s}_up`` mirrors of the HR images under ``out_root``.

    HR images are cropped to a multiple of each scale first.  Outputs newer
    than their source are left alone.  Returns counts of written, skipped
    and failed files.
    """
    sources = list_images(hr_dir)
    if not sources:
        raise DataError(f"no PNG/PPM/PGM images in {hr_dir}")
    out_root = Path(out_root)
    hr_out = out_root / "HR"
    hr_out.mkdir(parents=True, exist_ok=True)
    stats = {"written": 0, "skipped": 0, "failed": 0}
    same_dir = Path(hr_dir).resolve() == hr_out.resolve()
    for src in sources:
        stem = src.stem
        targets = [] if same_dir else [hr_out / f"{stem}.png"]
        for s in scales:
            targets += [out_root / f"LRx{s}" / f"{stem}.png", out_root / f"LRx{s}_up" / f"{stem}.png"]
        mtime = src.stat().st_mtime
        if all(t.exists() and t.stat().st_mtime >= mtime for t in targets):
            stats["skipped"] += len(targets)
            continue
        try:
            hr = load_image(src)
        except ImageIOError as exc:
            log.warning("skipping unreadable image: %s", exc)
            stats["failed"] += 1
            continue
        if not same_dir:
            _write_if_stale(hr, hr_out / f"{stem}.png", mtime, stats)
        for s in scales:
            cropped = modcrop(hr, s)
            lr = degrade(cropped, s)
            _write_if_stale(lr, out_root / f"LRx{s}" / f"{stem}.png", mtime, stats)
            _write_if_stale(pre_upsample(lr, s), out_root / f"LRx{s}_up" / f"{stem}.png", mtime, stats)
    return stats


def _write_if_stale(img: ImageRGB, path: Path, src_mtime: float, stats: dict) -> None:
    if path.exists() and path.stat().st_mtime >= src_mtime:
        stats["skipped"] += 1
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    save_image(img, path)
    stats["written"] += 1


def load_training_pairs(config: TrainConfig) -> list[SamplePair]:
    hr_dir = Path(config.dataset_root) / "HR"
    files = list_images(hr_dir)
    if not files:
        raise DataError(f"no training images in {hr_dir}")
    pairs = []
    for i, path in enumerate(files):
        try:
            hr = load_image(path)
        except ImageIOError as exc:
            log.warning("skipping unreadable image: %s", exc)
            continue
        pairs += extract_patches(hr, config.scale, config.patch_size, config.patch_stride,
                                 seed=config.seed + i)
    if not pairs:
        raise DataError(f"no {config.patch_size}px patches could be cut from {hr_dir}")
    return pairs


class BatchSampler:
    """Deterministic batches over (patch, augmentation) items.

    Each epoch is a permutation seeded by ``(seed, epoch)``; batches are
    consumed in order across epoch boundaries, so the batch at a given step
    depends only on the seed, the schedule and the step index.
    """

    def __init__(self, pairs: Sequence[SamplePair], schedule, seed: int, augment: bool):
        self.pairs = pairs
        self.schedule = tuple(schedule)
        self.seed = seed
        self.n_aug = 8 if augment else 1
        self.size = len(pairs) * self.n_aug
        self._cached: tuple[int, np.ndarray | None] = (-1, None)

    def _order(self, epoch: int) -> np.ndarray:
        if self._cached[0] != epoch:
            self._cached = (epoch, np.random.default_rng([self.seed, epoch]).permutation(self.size))
        return self._cached[1]

    def batch_sizes(self) -> Iterator[int]:
        for batch, iters in self.schedule:
            for _ in range(iters):
                yield batch

    def batches(self, start_step: int = 0) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
        cursor = 0
        for step, batch in enumerate(self.batch_sizes()):
            if step < start_step:
                cursor += batch
                continue
            items = [self._order((cursor + j) // self.size)[(cursor + j) % self.size] for j in range(batch)]
            cursor += batch
            yield step, *self._assemble(items)

    def _assemble(self, items) -> tuple[np.ndarray, np.ndarray]:
        xs, ys = [], []
        for item in items:
            pair = self.pairs[item // self.n_aug]
            k = int(item % self.n_aug)
            xs.append(transform(pair.input.data, k))
            ys.append(transform(pair.target.data, k))
        return np.stack(xs), np.stack(ys)


@dataclass
class TrainResult:
    model: HBPNModel
    losses: list[tuple[int, float]] = field(default_factory=list)
    checkpoint: Path | None = None
    optimizer: Adam | None = None


def _loss_fn(name: str):
    return ad.mse_loss if name == "mse" else ad.l1_loss


def train(config: TrainConfig, pairs: Sequence[SamplePair] | None = None, resume=None,
          stop_after: int | None = None) -> TrainResult:
    """Run the batch schedule; write ``loss.log`` and checkpoints to ``config.out_dir``.

    ``pairs`` replaces the on-disk dataset.  ``resume`` is a checkpoint
    path to continue from.  ``stop_after`` ends the run early after that
    many total steps (the schedule, and hence the sample order, is unchanged).
    """
    if pairs is None:
        pairs = load_training_pairs(config)
    elif not pairs:
        raise DataError("empty training set")
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    with ad.deterministic(config.deterministic):
        model, opt, start = _init_run(config, resume)
        sampler = BatchSampler(pairs, config.batch_schedule, config.seed, config.augment)
        loss_fn = _loss_fn(config.loss)
        result = TrainResult(model=model, optimizer=opt)
        log_path = out_dir / "loss.log"
        end = config.total_steps if stop_after is None else min(stop_after, config.total_steps)
        last_ckpt = Path(resume) if resume else None
        with open(log_path, "a" if start else "w", encoding="utf-8") as log_file:
            for step, x, y in sampler.batches(start):
                if step >= end:
                    break
                try:
                    sr, _, _ = model(Tensor(x))
                    loss = loss_fn(sr, Tensor(y))
                except NonFiniteError as exc:
                    raise TrainingAborted(
                        f"step {step + 1}: {exc}; last good checkpoint: {last_ckpt}") from exc
                value = loss.item()
                if not np.isfinite(value):
                    raise TrainingAborted(f"step {step + 1}: loss is {value}; last good checkpoint: {last_ckpt}")
                loss.backward()
                opt.step()
                opt.zero_grad()
                result.losses.append((step + 1, value))
                log_file.write(f"{step + 1},{value!r}\n")
                if (step + 1) % config.log_interval == 0:
                    log_file.flush()
                    log.info("step %d loss %.6g", step + 1, value)
                if (step + 1) % config.checkpoint_interval == 0:
                    last_ckpt = out_dir / f"checkpoint_{step + 1:08d}.ckpt"
                    _save(last_ckpt, model, opt, config, step + 1)
        final = out_dir / "final.ckpt"
        _save(final, model, opt, config, end)
        result.checkpoint = final
    return result


def _init_run(config: TrainConfig, resume):
    if resume is None:
        model = HBPNModel(config.model_config())
        opt = Adam(model.named_parameters(), lr=config.lr, beta1=config.beta1, beta2=config.beta2,
                   eps=config.eps, weight_decay=config.weight_decay)
        return model, opt, 0
    model, adam_state, header = load_checkpoint(resume)
    check_architecture(model.config, config.model_config(), ignore_seed=True)
    opt = Adam(model.named_parameters(), lr=config.lr, beta1=config.beta1, beta2=config.beta2,
               eps=config.eps, weight_decay=config.weight_decay)
    if adam_state is not None:
        opt.state = adam_state
    start = int(header.get("progress", {}).get("step", opt.state.step))
    return model, opt, start


def _save(path: Path, model: HBPNModel, opt: Adam, config: TrainConfig, step: int) -> None:
    save_checkpoint(path, model, opt.state, progress={"step": step, "scale": config.scale})


def check_architecture(found: ModelConfig, expected: ModelConfig, ignore_seed: bool = True) -> None:
    a, b = found.to_dict(), expected.to_dict()
    if ignore_seed:
        a.pop("seed")
        b.pop("seed")
    if a != b:
        raise ValueError(f"architecture mismatch: checkpoint has {a}, requested {b}")


# -- evaluation ----------------------------------------------------------------

@dataclass
class EvalItem:
    name: str
    lr_up: ImageRGB
    hr: ImageRGB


def load_eval_items(dataset_root, scale: int) -> list[EvalItem]:
    root = Path(dataset_root)
    files = list_images(root / "HR")
    if not files:
        raise DataError(f"no HR images in {root / 'HR'}")
    up_dir = root / f"LRx{scale}_up"
    items = []
    for path in files:
        up_path = up_dir / f"{path.stem}.png"
        if not up_path.exists():
            raise DataError(f"{up_path} missing; run prepare-data for scale {scale}")
        hr = modcrop(load_image(path), scale)
        lr_up = load_image(up_path)
        if lr_up.shape != hr.shape:
            raise DataError(f"{up_path}: size {lr_up.shape} does not match cropped HR {hr.shape}")
        items.append(EvalItem(path.stem, lr_up, hr))
    return items


def evaluate_items(model, items: Sequence[EvalItem], scale: int, self_ensemble: bool = False,
                   sr_dir=None) -> MetricsReport:
    """Super-resolve each item (``model=None`` passes the bicubic input through),
    quantise to 8 bits, optionally save, and score on Y with an ``scale``-pixel crop."""
    report = MetricsReport(scale=scale, crop=scale)
    if sr_dir is not None:
        Path(sr_dir).mkdir(parents=True, exist_ok=True)
    for item in items:
        if model is None:
            sr = item.lr_up
        elif self_ensemble:
            sr = self_ensemble_infer(model, item.lr_up)
        else:
            sr = single_infer(model, item.lr_up)
        sr = sr.quantized()
        if sr_dir is not None:
            save_image(sr, Path(sr_dir) / f"{item.name}.png")
        report.add(item.name, psnr_y(sr, item.hr, scale), ssim_y(sr, item.hr, scale))
    return report


def evaluate(checkpoint, dataset_root, scale: int, self_ensemble: bool = False, out_dir=None,
             expected: ModelConfig | None = None) -> MetricsReport:
    """Score a checkpoint (or the bicubic pass-through when ``checkpoint`` is None)."""
    model = None
    tag = "bicubic"
    if checkpoint is not None:
        model, _, header = load_checkpoint(checkpoint)
        if expected is not None:
            check_architecture(model.config, expected)
        trained = header.get("progress", {}).get("scale")
        if trained is not None and trained != scale:
            raise ValueError(f"checkpoint was trained for x{trained}, evaluation requested x{scale}")
        tag = Path(checkpoint).stem
    items = load_eval_items(dataset_root, scale)
    suffix = f"x{scale}" + ("_ens" if self_ensemble else "")
    sr_dir = None
    if out_dir is not None:
        sr_dir = Path(out_dir) / f"SR_{tag}_{suffix}"
    report = evaluate_items(model, items, scale, self_ensemble, sr_dir)
    if out_dir is not None:
        report.write(Path(out_dir) / f"report_{tag}_{suffix}.txt",
                     Path(out_dir) / f"report_{tag}_{suffix}.jsonl")
    return report


# -- ablation ------------------------------------------------------------------

ABLATION_AXES = {"head_kind": "head_kind", "depth": "depth", "module_count": "modules"}


@dataclass
class AblationRow:
    label: str
    params: int
    report: MetricsReport


def ablate(base: TrainConfig, axis: str, values: Sequence, pairs: Sequence[SamplePair] | None = None,
           eval_items: Sequence[EvalItem] | None = None) -> list[AblationRow]:
    """Train one variant per value under the same seed and schedule, then score each."""
    if axis not in ABLATION_AXES:
        raise ValueError(f"unknown ablation axis {axis!r}; choose from {sorted(ABLATION_AXES)}")
    _check_ablation_values(axis, values)
    if pairs is None:
        pairs = load_training_pairs(base)
    if eval_items is None:
        eval_items = load_eval_items(base.dataset_root, base.scale)
    rows = []
    for value in values:
        label = _ablation_label(axis, value)
        variant = base.replace(**{ABLATION_AXES[axis]: value},
                               out_dir=os.path.join(base.out_dir, label.replace(" ", "_")))
        result = train(variant, pairs=pairs)
        report = evaluate_items(result.model, eval_items, base.scale)
        rows.append(AblationRow(label, result.model.num_parameters(), report))
        log.info("%s: %.2f dB / %.4f", label, report.mean_psnr, report.mean_ssim)
    return rows


def _check_ablation_values(axis: str, values) -> None:
    allowed = {"head_kind": {"WR", "Plain"}, "depth": {1, 2, 3, 4}, "module_count": {2, 3, 4}}[axis]
    bad = [v for v in values if v not in allowed]
    if bad or not values:
        raise ValueError(f"invalid values for {axis}: {bad or values}; allowed {sorted(allowed, key=str)}")


def _ablation_label(axis: str, value) -> str:
    if axis == "head_kind":
        return f"{value} model"
    if axis == "depth":
        return f"HG-{value}"
    return {2: "S", 3: "M", 4: "L"}[value] + f" ({value} modules)"


def format_ablation(rows: Sequence[AblationRow], scale: int, dataset: str = "eval") -> str:
    label_w = max(len(r.label) for r in rows) + 2
    head1 = f"{'Algorithm':<{label_w}}| {'Scale':>5} | {dataset:^15} | {'Params':>10}"
    head2 = f"{'':<{label_w}}| {'':>5} | {'PSNR':>6}  {'SSIM':>6} | {'':>10}"
    lines = [head1, head2, "-" * len(head1)]
    for r in rows:
        lines.append(f"{r.label:<{label_w}}| {scale:>5} | {r.report.mean_psnr:6.2f}  "
                     f"{r.report.mean_ssim:6.3f} | {r.params:>10,d}")
    return "\n".join(lines)
