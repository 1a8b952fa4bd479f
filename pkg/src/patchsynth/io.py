"""PGM (P2/P5) and raw float64 image files.

Raw float64 dump layout, all little-endian::

    bytes 0..7    magic  b"PSYNF64\\n"
    bytes 8..15   uint64 height
    bytes 16..23  uint64 width
    bytes 24..    height*width float64, row-major

PGM reads map samples to ``[0, 1]`` by dividing by maxval; writes store
``round(clip(v, 0, 1) * maxval)``.  maxval > 255 uses 16-bit big-endian
samples in P5, as the format requires.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .image import ImageBuffer

F64_MAGIC = b"PSYNF64\n"
_F64_HEADER = np.dtype([("magic", "S8"), ("height", "<u8"), ("width", "<u8")])


def atomic_write_bytes(path, payload: bytes):
    """Write ``payload`` to a temp file next to ``path`` and rename it over."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _pgm_tokens(data: bytes, count: int, pos: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens = []
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos


def decode_pgm(data: bytes) -> ImageBuffer:
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ValueError(f"not a PGM file (magic {magic!r})")
    (w, h, maxval), pos = _pgm_tokens(data, 3, 2)
    width, height, maxval = int(w), int(h), int(maxval)
    if not 0 < maxval < 65536:
        raise ValueError(f"invalid PGM maxval {maxval}")
    count = width * height
    if magic == b"P5":
        pos += 1  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    else:
        raw = np.array(data[pos:].split()[:count], dtype=np.int64)
        if raw.size != count:
            raise ValueError("truncated PGM pixel data")
    return ImageBuffer(height, width, raw.astype(np.float64) / maxval)


def encode_pgm(img: ImageBuffer, maxval: int = 255, plain: bool = False) -> bytes:
    if not 0 < maxval < 65536:
        raise ValueError(f"invalid PGM maxval {maxval}")
    q = np.round(np.clip(img.data, 0.0, 1.0) * maxval).astype(np.int64)
    header = f"{'P2' if plain else 'P5'}\n{img.width} {img.height}\n{maxval}\n".encode()
    if plain:
        rows = q.reshape(img.height, img.width)
        body = "\n".join(" ".join(str(v) for v in row) for row in rows) + "\n"
        return header + body.encode()
    dtype = ">u2" if maxval > 255 else "u1"
    return header + q.astype(dtype).tobytes()


def read_pgm(path) -> ImageBuffer:
    return decode_pgm(Path(path).read_bytes())


def write_pgm(path, img: ImageBuffer, maxval: int = 255, plain: bool = False):
    atomic_write_bytes(path, encode_pgm(img, maxval=maxval, plain=plain))


def encode_f64(img: ImageBuffer) -> bytes:
    header = np.array([(F64_MAGIC, img.height, img.width)], dtype=_F64_HEADER)
    return header.tobytes() + img.data.astype("<f8").tobytes()


def decode_f64(data: bytes) -> ImageBuffer:
    if data[:8] != F64_MAGIC:
        raise ValueError("not a float64 image dump")
    header = np.frombuffer(data, dtype=_F64_HEADER, count=1)[0]
    height, width = int(header["height"]), int(header["width"])
    values = np.frombuffer(data, dtype="<f8", count=height * width, offset=_F64_HEADER.itemsize)
    return ImageBuffer(height, width, values.astype(np.float64))


def read_f64(path) -> ImageBuffer:
    return decode_f64(Path(path).read_bytes())


def write_f64(path, img: ImageBuffer):
    atomic_write_bytes(path, encode_f64(img))


def read_image(path) -> ImageBuffer:
    """Read either a PGM or a float64 dump, chosen by the file's magic bytes."""
    data = Path(path).read_bytes()
    if data[:8] == F64_MAGIC:
        return decode_f64(data)
    return decode_pgm(data)
