"""Binary snapshot format.

Header (little-endian, 31 bytes)::

    magic   4s   b"CHST"
    version u16  1
    N_x     u32
    N_z     u32
    a       f64
    t       f64
    kind    u8

followed by little-endian float64 pairs (real, imag) of the Fourier
coefficients, k-major then z.  Kinds:

    1  velocity            u1 (N_x, N_z) then u2 (N_x, N_z + 1)
    2  velocity + shear    as 1, then the shear datum (N_x)
    3  scalar at centers   (N_x, N_z)
    4  scalar at nodes     (N_x, N_z + 1)
    5  boundary field      (N_x); N_z, a and t are written as 0
"""

from __future__ import annotations

import os
import struct
from typing import Union

import numpy as np

from .fields import BoundaryField, ScalarField, VelocityField
from .grid import Grid

__all__ = ["SnapshotFormatError", "UnsupportedVersionError", "write_snapshot", "read_snapshot", "VERSION"]

MAGIC = b"CHST"
VERSION = 1
_HEADER = struct.Struct("<4sHIIddB")
_C16 = np.dtype("<c16")

Field = Union[VelocityField, ScalarField, BoundaryField]


class SnapshotFormatError(ValueError):
    pass


class UnsupportedVersionError(SnapshotFormatError):
    pass


def _kind(f: Field) -> int:
    if isinstance(f, VelocityField):
        return 2 if f.shear is not None else 1
    if isinstance(f, ScalarField):
        return 3 if f.layout == "center" else 4
    if isinstance(f, BoundaryField):
        return 5
    raise TypeError(f"cannot write {type(f).__name__} as a snapshot")


def encode(f: Field) -> bytes:
    kind = _kind(f)
    if kind == 5:
        head = _HEADER.pack(MAGIC, VERSION, f.n_x, 0, 0.0, 0.0, kind)
        return head + f.values.astype(_C16).tobytes()
    g = f.grid
    head = _HEADER.pack(MAGIC, VERSION, g.n_x, g.n_z, float(g.a), float(f.t), kind)
    if kind in (1, 2):
        parts = [f.u1, f.u2] + ([f.shear] if kind == 2 else [])
    else:
        parts = [f.values]
    return head + b"".join(np.ascontiguousarray(p).astype(_C16).tobytes() for p in parts)


def decode(data: bytes, source: str = "<bytes>") -> Field:
    if len(data) < _HEADER.size:
        raise SnapshotFormatError(f"{source}: truncated header ({len(data)} bytes)")
    magic, version, n_x, n_z, a, t, kind = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotFormatError(f"{source}: bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"{source}: unsupported snapshot version {version} (reader supports {VERSION})")
    shapes = {
        1: [(n_x, n_z), (n_x, n_z + 1)],
        2: [(n_x, n_z), (n_x, n_z + 1), (n_x,)],
        3: [(n_x, n_z)],
        4: [(n_x, n_z + 1)],
        5: [(n_x,)],
    }
    if kind not in shapes:
        raise SnapshotFormatError(f"{source}: unknown field kind {kind}")
    sizes = [int(np.prod(s)) for s in shapes[kind]]
    expected = _HEADER.size + 16 * sum(sizes)
    if len(data) != expected:
        raise SnapshotFormatError(f"{source}: payload has {len(data)} bytes, expected {expected}")
    arrays, off = [], _HEADER.size
    for shape, size in zip(shapes[kind], sizes):
        arrays.append(np.frombuffer(data, _C16, size, off).astype(complex).reshape(shape))
        off += 16 * size
    if kind == 5:
        return BoundaryField(arrays[0])
    try:
        grid = Grid(n_x, n_z, a)
        if kind in (1, 2):
            return VelocityField(arrays[0], arrays[1], grid, t, shear=arrays[2] if kind == 2 else None)
        return ScalarField(arrays[0], "center" if kind == 3 else "node", grid, t)
    except ValueError as exc:
        raise SnapshotFormatError(f"{source}: {exc}") from exc


def write_snapshot(f: Field, path: Union[str, os.PathLike]) -> None:
    data = encode(f)
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write snapshot: {exc.strerror}", str(path)) from exc


def read_snapshot(path: Union[str, os.PathLike]) -> Field:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read snapshot: {exc.strerror}", str(path)) from exc
    return decode(data, str(path))
