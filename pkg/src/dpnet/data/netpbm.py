"""Binary PGM (P5) and PPM (P6) reading and writing, 8-bit only."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

MAGIC_CHANNELS = {b"P5": 1, b"P6": 3}


class NetpbmError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


def _header_fields(buf: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping ``#`` comments."""
    fields = []
    pos = 0
    while len(fields) < count:
        while pos < len(buf) and (buf[pos:pos + 1].isspace() or buf[pos:pos + 1] == b"#"):
            if buf[pos:pos + 1] == b"#":
                end = buf.find(b"\n", pos)
                pos = len(buf) if end < 0 else end + 1
            else:
                pos += 1
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise NetpbmError("truncated header", pos)
        fields.append(buf[start:pos])
    return fields, pos


def decode(buf: bytes) -> np.ndarray:
    """Parse P5/P6 bytes into a ``(1, c, h, w)`` float array in [0, 1]."""
    if len(buf) < 2 or buf[:2] not in MAGIC_CHANNELS:
        raise NetpbmError("not a binary PGM/PPM file (expected magic P5 or P6)", 0)
    channels = MAGIC_CHANNELS[buf[:2]]
    fields, pos = _header_fields(buf, 4)
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise NetpbmError(f"non-numeric header field in {fields[1:]}", pos) from None
    if width < 1 or height < 1:
        raise NetpbmError(f"invalid dimensions {width}x{height}", pos)
    if not 0 < maxval <= 255:
        raise NetpbmError(f"unsupported maxval {maxval} (only 8-bit images are handled)", pos)
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise NetpbmError("missing whitespace after maxval", pos)
    pos += 1
    size = width * height * channels
    if len(buf) - pos < size:
        raise NetpbmError(f"truncated payload: need {size} bytes, found {len(buf) - pos}", len(buf))
    raster = np.frombuffer(buf, dtype=np.uint8, count=size, offset=pos)
    img = raster.reshape(height, width, channels).transpose(2, 0, 1).astype(np.float64) / maxval
    return img[None]


def encode(image: np.ndarray) -> bytes:
    """Quantise a ``(1, c, h, w)``, ``(c, h, w)`` or ``(h, w)`` array in [0, 1] to P5/P6 bytes."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 4:
        if arr.shape[0] != 1:
            raise ValueError(f"can only write a single image, got batch of {arr.shape[0]}")
        arr = arr[0]
    if arr.ndim == 2:
        arr = arr[None]
    c, h, w = arr.shape
    if c not in (1, 3):
        raise ValueError(f"images need 1 or 3 channels, got {c}")
    magic = b"P5" if c == 1 else b"P6"
    raster = np.rint(np.clip(arr, 0.0, 1.0) * 255).astype(np.uint8).transpose(1, 2, 0)
    return magic + f"\n{w} {h}\n255\n".encode() + raster.tobytes()


def read_image(path) -> np.ndarray:
    return decode(Path(path).read_bytes())


def write_image(path, image: np.ndarray) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode(image))
    os.replace(tmp, path)
