"""HTF tensor container and 8-bit PGM export.

HTF is a minimal little-endian binary layout::

    magic "HOLO" | u8 version=1 | u8 dtype | u8 ndim | ndim x u32 dims | payload

dtype codes: 1=f32, 2=f64, 3=complex64 (interleaved f32 re,im pairs),
4=u8, 5=u16. The payload is row-major, outermost dimension first.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .core import ComplexField

MAGIC = b"HOLO"
VERSION = 1

_CODE_TO_DTYPE = {
    1: np.dtype("<f4"),
    2: np.dtype("<f8"),
    3: np.dtype("<c8"),
    4: np.dtype("u1"),
    5: np.dtype("<u2"),
}
_DTYPE_TO_CODE = {v: k for k, v in _CODE_TO_DTYPE.items()}


class HtfError(Exception):
    """Malformed or unsupported HTF content."""


class BadMagicError(HtfError):
    pass


class UnsupportedVersionError(HtfError):
    pass


class UnsupportedDtypeError(HtfError):
    pass


class TruncatedFileError(HtfError):
    pass


def tensor_bytes(tensor) -> bytes:
    """Serialize an array (or ComplexField) to HTF bytes."""
    if isinstance(tensor, ComplexField):
        arr = tensor.data.astype("<c8")
    else:
        arr = np.asarray(tensor)
        code = _DTYPE_TO_CODE.get(arr.dtype.newbyteorder("<"))
        if code is None:
            raise UnsupportedDtypeError(
                f"dtype {arr.dtype} has no HTF code; cast explicitly")
        arr = np.ascontiguousarray(arr, dtype=_CODE_TO_DTYPE[code])
    if arr.dtype.kind in "fc" and not np.all(np.isfinite(arr)):
        raise ValueError("refusing to write non-finite data")
    code = _DTYPE_TO_CODE[arr.dtype.newbyteorder("<")]
    header = MAGIC + struct.pack("<BBB", VERSION, code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + arr.tobytes()


def write_tensor(path, tensor) -> None:
    """Write a tensor to ``path`` atomically (temp file then rename)."""
    data = tensor_bytes(tensor)
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def tensor_from_bytes(data: bytes) -> np.ndarray:
    if len(data) < 7:
        raise TruncatedFileError("file shorter than the fixed header")
    if data[:4] != MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r}")
    version, code, ndim = struct.unpack("<BBB", data[4:7])
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    if code not in _CODE_TO_DTYPE:
        raise UnsupportedDtypeError(f"unsupported dtype code {code}")
    if len(data) < 7 + 4 * ndim:
        raise TruncatedFileError("file ends inside the dimension list")
    dims = struct.unpack(f"<{ndim}I", data[7:7 + 4 * ndim])
    dtype = _CODE_TO_DTYPE[code]
    count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    payload = data[7 + 4 * ndim:]
    if len(payload) != count * dtype.itemsize:
        raise TruncatedFileError(
            f"payload is {len(payload)} bytes, expected {count * dtype.itemsize}")
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return tensor_from_bytes(fh.read())


def read_field(path, pitch_um: float) -> ComplexField:
    """Read a complex tensor and attach the given sampling pitch."""
    return ComplexField.from_complex(read_tensor(path), pitch_um)


def export_pgm(image, lo: float, hi: float) -> bytes:
    """Render a real image to binary PGM, mapping [lo, hi] to [0, 255].

    Values are clamped to the range and rounded half-up.
    """
    if not lo < hi:
        raise ValueError(f"require lo < hi, got {lo} >= {hi}")
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PGM export needs a 2D image")
    scaled = np.clip((img - lo) / (hi - lo), 0.0, 1.0)
    pixels = np.floor(255.0 * scaled + 0.5).astype(np.uint8)
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes()


def write_pgm(path, image, lo: float, hi: float) -> None:
    data = export_pgm(image, lo, hi)
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
