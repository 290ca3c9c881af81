"""Binary checkpoint format.

Layout (all integers little-endian uint32 unless noted)::

    magic  b"DPNETCK\\0"
    version
    sha256 of the model config text (32 raw bytes)
    config text length, config text (utf-8)
    epoch
    record count, then per record:
        name length, name (utf-8), rank, dims..., float64 payload (little-endian)

Parameters are stored under their module path; optimiser momentum buffers
under ``momentum/<name>``.  A human-readable manifest is written next to the
file with the suffix ``.txt``.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..model import DPNet
from .config import TrainConfig, config_from_model_text

MAGIC = b"DPNETCK\0"
VERSION = 1
MOMENTUM_PREFIX = "momentum/"


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: TrainConfig
    model: DPNet
    epoch: int = 0
    momentum: dict = field(default_factory=dict)


def _u32(n: int) -> bytes:
    return struct.pack("<I", n)


def encode_checkpoint(config: TrainConfig, model: DPNet, epoch: int = 0, momentum=None) -> bytes:
    text = config.model_text().encode()
    records = [(name, p.data) for name, p in model.named_parameters()]
    records += [(MOMENTUM_PREFIX + name, buf) for name, buf in (momentum or {}).items()]
    parts = [MAGIC, _u32(VERSION), hashlib.sha256(text).digest(), _u32(len(text)), text,
             _u32(epoch), _u32(len(records))]
    for name, arr in records:
        raw = name.encode()
        parts += [_u32(len(raw)), raw, _u32(arr.ndim)] + [_u32(d) for d in arr.shape]
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


def manifest_text(config: TrainConfig, model: DPNet, epoch: int, momentum=None) -> str:
    lines = [f"format_version = {VERSION}", f"config_sha256 = {config.model_hash()}", f"epoch = {epoch}", ""]
    lines += [config.model_text()]
    for name, p in model.named_parameters():
        lines.append(f"{name} {'x'.join(map(str, p.shape))}")
    lines.append(f"momentum_buffers = {len(momentum or {})}")
    return "\n".join(lines) + "\n"


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def save_checkpoint(path, config: TrainConfig, model: DPNet, epoch: int = 0, momentum=None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(path, encode_checkpoint(config, model, epoch, momentum))
    _atomic_write(path.with_name(path.name + ".txt"), manifest_text(config, model, epoch, momentum).encode())


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError(f"truncated checkpoint at byte {self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def decode_checkpoint(buf: bytes, expected: TrainConfig | None = None) -> Checkpoint:
    r = _Reader(buf)
    if r.take(len(MAGIC)) != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    digest = r.take(32)
    text = r.take(r.u32())
    if hashlib.sha256(text).digest() != digest:
        raise CheckpointError("config hash mismatch: stored config text does not match its hash")
    config = config_from_model_text(text.decode())
    if expected is not None and expected.model_hash() != config.model_hash():
        raise CheckpointError("config hash mismatch: checkpoint was written for a different model config")
    epoch = r.u32()
    records = {}
    for _ in range(r.u32()):
        name = r.take(r.u32()).decode()
        shape = tuple(r.u32() for _ in range(r.u32()))
        count = int(np.prod(shape, dtype=np.int64))
        records[name] = np.frombuffer(r.take(8 * count), dtype="<f8").reshape(shape).astype(np.float64)
    if r.pos != len(buf):
        raise CheckpointError(f"{len(buf) - r.pos} trailing bytes after last record")

    model = DPNet(config.model_config())
    for name, p in model.named_parameters():
        if name not in records:
            raise CheckpointError(f"missing parameter {name}")
        if records[name].shape != p.shape:
            raise CheckpointError(f"parameter {name}: stored shape {records[name].shape}, model expects {p.shape}")
        p.data = records.pop(name)
    momentum = {n[len(MOMENTUM_PREFIX):]: a for n, a in records.items() if n.startswith(MOMENTUM_PREFIX)}
    extra = [n for n in records if not n.startswith(MOMENTUM_PREFIX)]
    if extra:
        raise CheckpointError(f"unknown records in checkpoint: {extra[:5]}")
    return Checkpoint(config, model, epoch, momentum)


def load_checkpoint(path, expected: TrainConfig | None = None) -> Checkpoint:
    return decode_checkpoint(Path(path).read_bytes(), expected)
