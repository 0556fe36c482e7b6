"""Grayscale image files: PGM (P2/P5) and the lossless ``EPPF`` float raster.

``EPPF`` layout: 4-byte magic ``b"EPPF"``, little-endian uint32 version (1),
little-endian uint64 side length ``m``, then ``m * m`` little-endian float64
values in row-major order.
"""

import os
import struct

import numpy as np

__all__ = ["ImageFormatError", "read_image", "write_image", "read_pgm", "write_pgm",
           "read_eppf", "write_eppf", "EPPF_MAGIC"]

EPPF_MAGIC = b"EPPF"
EPPF_VERSION = 1
_HEADER = struct.Struct("<4sIQ")


class ImageFormatError(ValueError):
    pass


def _pgm_tokens(data, count):
    """First ``count`` header tokens and the offset just past the last one."""
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos


def read_pgm(path):
    """Read a P2 or P5 PGM and map intensities to ``[0, 1]``."""
    with open(path, "rb") as f:
        data = f.read()
    try:
        (magic, w, h, maxval), pos = _pgm_tokens(data, 4)
        w, h, maxval = int(w), int(h), int(maxval)
    except (ValueError, ImageFormatError) as exc:
        raise ImageFormatError(f"{path}: malformed PGM header") from exc
    if magic not in (b"P2", b"P5"):
        raise ImageFormatError(f"{path}: unsupported format {magic!r}")
    if not 0 < maxval <= 65535 or w < 1 or h < 1:
        raise ImageFormatError(f"{path}: invalid PGM dimensions or maxval")
    if magic == b"P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = data[pos + 1:pos + 1 + w * h * dtype.itemsize]
        if len(raw) != w * h * dtype.itemsize:
            raise ImageFormatError(f"{path}: truncated PGM raster")
        pixels = np.frombuffer(raw, dtype=dtype)
    else:
        try:
            pixels = np.array(data[pos:].split()[: w * h], dtype=np.int64)
        except ValueError as exc:
            raise ImageFormatError(f"{path}: non-numeric P2 pixel") from exc
        if pixels.size != w * h:
            raise ImageFormatError(f"{path}: truncated PGM raster")
    return pixels.reshape(h, w).astype(np.float64) / maxval


def write_pgm(image, path, maxval=255, plain=False):
    """Write ``image`` (intensities in ``[0, 1]``, clipped) as PGM."""
    img = np.asarray(image, dtype=np.float64)
    if not 0 < maxval <= 65535:
        raise ValueError("maxval must lie in 1..65535")
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval).astype(np.int64)
    h, w = q.shape
    with open(path, "wb") as f:
        if plain:
            f.write(f"P2\n{w} {h}\n{maxval}\n".encode())
            for row in q:
                f.write((" ".join(map(str, row)) + "\n").encode())
        else:
            f.write(f"P5\n{w} {h}\n{maxval}\n".encode())
            dtype = ">u2" if maxval > 255 else "u1"
            f.write(q.astype(dtype).tobytes())


def read_eppf(path):
    with open(path, "rb") as f:
        header = f.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ImageFormatError(f"{path}: truncated EPPF header")
        magic, version, m = _HEADER.unpack(header)
        if magic != EPPF_MAGIC or version != EPPF_VERSION:
            raise ImageFormatError(f"{path}: not an EPPF v{EPPF_VERSION} raster")
        raw = f.read()
    if m < 1 or len(raw) != 8 * m * m:
        raise ImageFormatError(f"{path}: raster size does not match header (m={m})")
    return np.frombuffer(raw, dtype="<f8").reshape(m, m).astype(np.float64)


def write_eppf(image, path):
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ValueError("EPPF stores square images only")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(EPPF_MAGIC, EPPF_VERSION, img.shape[0]))
        f.write(img.astype("<f8").tobytes(order="C"))


def read_image(path):
    """Read by content: ``EPPF`` magic, else PGM."""
    with open(path, "rb") as f:
        head = f.read(4)
    if head == EPPF_MAGIC:
        return read_eppf(path)
    if head[:2] in (b"P2", b"P5"):
        return read_pgm(path)
    raise ImageFormatError(f"{path}: unsupported image format")


def write_image(image, path):
    """Write by extension: ``.pgm`` as 8-bit P5, anything else as EPPF."""
    if os.path.splitext(str(path))[1].lower() == ".pgm":
        write_pgm(image, path)
    else:
        write_eppf(image, path)
