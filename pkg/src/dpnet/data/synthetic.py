"""Deterministic synthetic saliency data: one coloured shape on a textured background.

Each sample is a pure function of ``(master_seed, index)``.  Size classes
follow the foreground fraction ``S = foreground pixels / all pixels``:
small ``S < 0.1``, middle ``0.1 <= S <= 0.25``, large ``S > 0.25``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..ops import bilinear_matrix
from .netpbm import read_image, write_image

SIZE_CLASSES = ("small", "middle", "large")
# foreground fractions the shape area is drawn from, per class
TARGET_RANGES = {"small": (0.015, 0.09), "middle": (0.11, 0.24), "large": (0.27, 0.5)}
MAX_ATTEMPTS = 200


class GenerationError(RuntimeError):
    pass


@dataclass
class Sample:
    image: np.ndarray  # (1, 3, h, w) in [0, 1]
    mask: np.ndarray   # (1, 1, h, w) binary
    size_class: str
    seed: int
    s: float = 0.0


@dataclass
class DatasetSpec:
    count: int
    image_hw: int = 64
    size_mix: tuple = (0.34, 0.43, 0.23)
    master_seed: int = 0

    def __post_init__(self):
        self.size_mix = tuple(float(f) for f in self.size_mix)
        if len(self.size_mix) != 3 or any(f < 0 for f in self.size_mix):
            raise ValueError(f"size_mix needs three non-negative fractions, got {self.size_mix}")
        if abs(sum(self.size_mix) - 1.0) > 1e-9:
            raise ValueError(f"size_mix fractions must sum to 1, got {sum(self.size_mix)}")
        if self.count < 0 or self.image_hw < 1:
            raise ValueError("count must be >= 0 and image_hw >= 1")


def object_size_class(mask: np.ndarray) -> tuple[str, float]:
    mask = np.asarray(mask)
    s = float(np.count_nonzero(mask > 0.5)) / mask.size if mask.size else 0.0
    if s < 0.1:
        return "small", s
    if s <= 0.25:
        return "middle", s
    return "large", s


def class_quotas(count: int, size_mix) -> list[int]:
    """Largest-remainder apportionment of ``count`` over the class fractions."""
    exact = [count * f for f in size_mix]
    quotas = [int(np.floor(e + 1e-9)) for e in exact]
    remainders = sorted(range(len(exact)), key=lambda i: (-(exact[i] - quotas[i]), i))
    for i in remainders[: count - sum(quotas)]:
        quotas[i] += 1
    return quotas


def assigned_classes(spec: DatasetSpec) -> list[str]:
    quotas = class_quotas(spec.count, spec.size_mix)
    classes = [c for c, q in zip(SIZE_CLASSES, quotas) for _ in range(q)]
    order = np.random.default_rng([spec.master_seed, 0x5EED]).permutation(len(classes))
    return [classes[i] for i in order]


def _smooth_noise(rng: np.random.Generator, hw: int, channels: int, grid: int, amplitude: float) -> np.ndarray:
    coarse = rng.standard_normal((channels, grid, grid)) * amplitude
    r = bilinear_matrix(grid, hw)
    return np.matmul(r, coarse @ r.T)


def _rasterize(rng: np.random.Generator, hw: int, target: float) -> np.ndarray:
    area = target * hw * hw
    aspect = rng.uniform(0.45, 1.0)
    angle = rng.uniform(0.0, np.pi)
    ellipse = rng.random() < 0.5
    if ellipse:
        a = np.sqrt(area / (np.pi * aspect))
        reach = a
    else:
        a = np.sqrt(area / (4.0 * aspect))
        reach = a * np.sqrt(1.0 + aspect ** 2)
    b = a * aspect
    lo, hi = min(reach, hw / 2), max(hw - reach, hw / 2)
    cy, cx = rng.uniform(lo, hi), rng.uniform(lo, hi)
    yy, xx = np.mgrid[0:hw, 0:hw] + 0.5
    u = (xx - cx) * np.cos(angle) + (yy - cy) * np.sin(angle)
    v = -(xx - cx) * np.sin(angle) + (yy - cy) * np.cos(angle)
    if ellipse:
        inside = (u / a) ** 2 + (v / b) ** 2 <= 1.0
    else:
        inside = (np.abs(u) <= a) & (np.abs(v) <= b)
    return inside.astype(np.float64)


def generate_sample(master_seed: int, index: int, size_class: str, hw: int) -> Sample:
    seed = int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])
    rng = np.random.default_rng(seed)
    lo, hi = TARGET_RANGES[size_class]
    for _ in range(MAX_ATTEMPTS):
        mask = _rasterize(rng, hw, rng.uniform(lo, hi))
        cls, s = object_size_class(mask)
        if cls == size_class and s > 0:
            break
    else:
        raise GenerationError(f"could not draw a {size_class} object on a {hw}x{hw} canvas "
                              f"after {MAX_ATTEMPTS} attempts")

    bg = rng.uniform(0.15, 0.85, size=3)
    for _ in range(MAX_ATTEMPTS):
        fg = rng.uniform(0.0, 1.0, size=3)
        if np.linalg.norm(fg - bg) >= 0.45:
            break
    background = bg[:, None, None] + _smooth_noise(rng, hw, 3, 4, 0.12)
    foreground = fg[:, None, None] + _smooth_noise(rng, hw, 3, 3, 0.05)
    image = np.where(mask[None] > 0, foreground, background)
    image = image + rng.normal(0.0, 0.03, size=image.shape)
    image = np.clip(image, 0.0, 1.0)
    return Sample(image[None], mask[None, None], size_class, seed, s)


def generate_synthetic(spec: DatasetSpec) -> list[Sample]:
    classes = assigned_classes(spec)
    return [generate_sample(spec.master_seed, i, c, spec.image_hw) for i, c in enumerate(classes)]


def save_dataset(samples: list[Sample], root) -> None:
    root = Path(root)
    (root / "img").mkdir(parents=True, exist_ok=True)
    (root / "gt").mkdir(parents=True, exist_ok=True)
    with open(root / "manifest.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "size_class", "S"])
        for i, sample in enumerate(samples):
            write_image(root / "img" / f"{i:05d}.ppm", sample.image)
            write_image(root / "gt" / f"{i:05d}.pgm", sample.mask)
            writer.writerow([i, sample.size_class, f"{sample.s:.6f}"])


def read_manifest(root) -> list[dict]:
    with open(Path(root) / "manifest.csv", newline="") as fh:
        return [{"index": int(r["index"]), "size_class": r["size_class"], "S": float(r["S"])}
                for r in csv.DictReader(fh)]


def load_dataset(root) -> list[Sample]:
    root = Path(root)
    samples = []
    for row in read_manifest(root):
        i = row["index"]
        image = read_image(root / "img" / f"{i:05d}.ppm")
        mask = (read_image(root / "gt" / f"{i:05d}.pgm") > 0.5).astype(np.float64)
        samples.append(Sample(image, mask, row["size_class"], i, row["S"]))
    return samples
