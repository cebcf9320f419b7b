"""On-disk formats: HFRT tensors, parameter checkpoints, binary PPM frames.

HFRT layout: magic ``HFRT``, version u8, rank u8, axis lengths as u32
little-endian, dtype tag u8 (0 = f32, 1 = f64), then the raw row-major
little-endian payload.

A checkpoint is a container of named HFRT records: magic ``HFRC``, version
u8, count u32, then per entry a u16 name length, the UTF-8 name, and the
embedded HFRT record.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

__all__ = [
    "save_tensor",
    "load_tensor",
    "tensor_bytes",
    "tensor_from_bytes",
    "save_checkpoint",
    "load_checkpoint",
    "write_ppm",
    "read_ppm",
]

_MAGIC = b"HFRT"
_CKPT_MAGIC = b"HFRC"
_VERSION = 1
_DTYPE_TAGS = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_TAG_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def tensor_bytes(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if not arr.flags["C_CONTIGUOUS"]:
        arr = np.ascontiguousarray(arr)  # note: promotes 0-d, but 0-d is always contiguous
    if arr.dtype not in _DTYPE_TAGS:
        raise ValueError(f"unsupported dtype {arr.dtype}; expected float32 or float64")
    if arr.ndim > 255:
        raise ValueError("rank exceeds format limit")
    head = _MAGIC + struct.pack("<BB", _VERSION, arr.ndim)
    head += struct.pack(f"<{arr.ndim}I", *arr.shape)
    head += struct.pack("<B", _DTYPE_TAGS[arr.dtype])
    payload = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes(order="C")
    return head + payload


def tensor_from_bytes(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Decode one HFRT record; returns (array, next offset)."""
    if buf[offset : offset + 4] != _MAGIC:
        raise ValueError("bad magic; not an HFRT tensor")
    version, rank = struct.unpack_from("<BB", buf, offset + 4)
    if version != _VERSION:
        raise ValueError(f"unsupported HFRT version {version}")
    pos = offset + 6
    shape = struct.unpack_from(f"<{rank}I", buf, pos)
    pos += 4 * rank
    (tag,) = struct.unpack_from("<B", buf, pos)
    pos += 1
    if tag not in _TAG_DTYPES:
        raise ValueError(f"unknown dtype tag {tag}")
    dt = _TAG_DTYPES[tag]
    count = int(np.prod(shape)) if shape else 1
    nbytes = count * dt.itemsize
    data = np.frombuffer(buf, dtype=dt, count=count, offset=pos)
    arr = data.reshape(shape).astype(dt.newbyteorder("="))
    return arr, pos + nbytes


def save_tensor(path: str | Path, arr: np.ndarray) -> None:
    Path(path).write_bytes(tensor_bytes(arr))


def load_tensor(path: str | Path) -> np.ndarray:
    arr, _ = tensor_from_bytes(Path(path).read_bytes())
    return arr


def save_checkpoint(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    parts = [_CKPT_MAGIC, struct.pack("<BI", _VERSION, len(tensors))]
    for name, arr in tensors.items():
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(tensor_bytes(arr))
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    buf = Path(path).read_bytes()
    if buf[:4] != _CKPT_MAGIC:
        raise ValueError("bad magic; not a checkpoint")
    version, count = struct.unpack_from("<BI", buf, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    pos = 4 + 5
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = buf[pos : pos + nlen].decode("utf-8")
        pos += nlen
        arr, pos = tensor_from_bytes(buf, pos)
        out[name] = arr
    return out


def write_ppm(path: str | Path, image: np.ndarray) -> None:
    """Write an (H, W, 3) float [0,1] or uint8 image as binary PPM (P6)."""
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError(f"PPM needs (H, W, 3); got {image.shape}")
    if image.dtype != np.uint8:
        image = np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)
    h, w = image.shape[:2]
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + image.tobytes(order="C"))


def read_ppm(path: str | Path) -> np.ndarray:
    """Read a binary PPM (P6) into an (H, W, 3) float32 array in [0,1]."""
    buf = Path(path).read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace():
            pos += 1
        fields.append(buf[start:pos])
    if fields[0] != b"P6":
        raise ValueError("not a binary PPM (P6) file")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise ValueError("only 8-bit PPM supported")
    pos += 1  # single whitespace after maxval
    data = np.frombuffer(buf, dtype=np.uint8, count=w * h * 3, offset=pos)
    return data.reshape(h, w, 3).astype(np.float32) / 255.0
