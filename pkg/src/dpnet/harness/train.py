"""Training loop: deterministic shuffling, per-batch scale, two-group SGD."""

from __future__ import annotations

import csv
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import ops
from ..data.augment import augment
from ..data.synthetic import load_dataset
from ..losses import total_loss
from ..metrics import mae
from ..model import DPNet
from ..tensor import backward, no_grad
from .checkpoint import save_checkpoint
from .config import TrainConfig
from .optim import SGD

LOG_FIELDS = ("epoch", "loss", "final_wbce", "final_wiou", "aux_loss", "lr_backbone", "lr_other", "val_mae")


class DatasetError(OSError):
    pass


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainResult:
    out_dir: Path
    epochs: list  # dict rows, LOG_FIELDS keys
    steps: list   # (step, lr_backbone, lr_other)
    best_epoch: int


def _load(root, what: str):
    path = Path(root)
    if not (path / "manifest.csv").is_file():
        raise DatasetError(f"{what} dataset not found: {path / 'manifest.csv'} is missing")
    try:
        return load_dataset(path)
    except (OSError, ValueError) as exc:
        raise DatasetError(f"failed to read {what} dataset at {path}: {exc}") from exc


def _stack(samples):
    return (np.concatenate([s.image for s in samples]), np.concatenate([s.mask for s in samples]))


def _sample_seed(seed: int, epoch: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, epoch, index]).generate_state(1)[0])


def predict_batches(model: DPNet, images: np.ndarray, batch_size: int = 16) -> np.ndarray:
    """Sigmoid of the first final map, batched, without building a graph."""
    out = []
    with no_grad():
        for i in range(0, len(images), batch_size):
            logits = model(images[i:i + batch_size]).final_maps[0]
            out.append(ops.sigmoid(logits).data)
    return np.concatenate(out)


def validation_mae(model: DPNet, samples, batch_size: int = 16) -> float:
    images, masks = _stack(samples)
    return mae(predict_batches(model, images, batch_size), masks)


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _write_csv(path: Path, header, rows) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    tmp.replace(path)


def train(config: TrainConfig, progress=None) -> TrainResult:
    """Train from scratch; writes log.csv, steps.csv, last.ckpt and best.ckpt to ``config.out_dir``."""
    progress = progress or (lambda msg: print(msg, file=sys.stderr))
    train_set = _load(config.train_root, "training")
    val_set = _load(config.val_root, "validation") if config.val_root else None
    for s in train_set + (val_set or []):
        if s.image.shape[-2:] != (config.image_size, config.image_size):
            raise DatasetError(f"sample {s.seed} is {s.image.shape[-2:]}, config expects "
                               f"{config.image_size}x{config.image_size}")
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    model = DPNet(config.model_config())
    backbone, other = model.param_groups()
    opt = SGD([(config.lr_backbone_max * config.lr_scale, backbone),
               (config.lr_other_max * config.lr_scale, other)],
              momentum=config.momentum, weight_decay=config.weight_decay)

    n = len(train_set)
    steps_per_epoch = -(-n // config.batch_size)
    total_steps = steps_per_epoch * config.epochs
    epoch_rows, step_rows = [], []
    best, best_epoch = np.inf, 0
    step = 0
    for epoch in range(1, config.epochs + 1):
        started = time.perf_counter()
        rng = np.random.default_rng([config.seed, epoch])
        order = rng.permutation(n)
        sums = np.zeros(4)
        for b in range(steps_per_epoch):
            idx = order[b * config.batch_size:(b + 1) * config.batch_size]
            scale = config.scales[int(rng.integers(len(config.scales)))]
            batch = [augment(train_set[i], _sample_seed(config.seed, epoch, int(i)), config.flip_prob,
                             config.crop_min, config.scales, scale=scale) for i in idx]
            images, masks = _stack(batch)
            out = model(images)
            parts = total_loss(out.final_maps, out.aux_maps, masks)
            loss = parts.total.item()
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, step {step}")
            model.zero_grad()
            backward(parts.total)
            lrs = opt.rates(step, total_steps, config.warmup_fraction)
            opt.step(lrs)
            step_rows.append((step, lrs[0], lrs[1]))
            step += 1
            final = np.mean(parts.final, axis=0)
            aux = parts.total.item() - final.sum()
            sums += len(idx) * np.array([loss, final[0], final[1], aux])
        means = sums / n
        val = validation_mae(model, val_set) if val_set else float("nan")
        row = dict(zip(LOG_FIELDS, (epoch, *means, *step_rows[-1][1:], val)))
        epoch_rows.append(row)
        # without a validation set the training loss picks the best epoch
        score = val if val_set else means[0]
        save_checkpoint(out_dir / "last.ckpt", config, model, epoch, opt.buffers)
        if score < best:
            best, best_epoch = score, epoch
            save_checkpoint(out_dir / "best.ckpt", config, model, epoch, opt.buffers)
        _write_csv(out_dir / "log.csv", LOG_FIELDS,
                   [[r["epoch"]] + [_fmt(r[k]) for k in LOG_FIELDS[1:]] for r in epoch_rows])
        progress(f"epoch {epoch}/{config.epochs} loss {means[0]:.4f} val_mae {val:.4f} "
                 f"({time.perf_counter() - started:.1f}s)")
    _write_csv(out_dir / "steps.csv", ("step", "lr_backbone", "lr_other"),
               [(s, repr(a), repr(b)) for s, a, b in step_rows])
    (out_dir / "config.txt").write_text(config.to_text())
    return TrainResult(out_dir, epoch_rows, step_rows, best_epoch)
