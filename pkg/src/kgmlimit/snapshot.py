"""Binary field snapshots.

Layout (little endian)::

    b"MKGM1"
    u32 version, u32 kind
    3 x u32 cell counts, 3 x f64 extents
    f64 time, f64 eps
    u32 name length, UTF-8 name
    payload: f64 values, row-major over cells, components interleaved per cell

Round trips are bit-exact.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fields import Grid

MAGIC = b"MKGM1"
VERSION = 1
_HEAD = struct.Struct("<II3I3dddI")


class SnapshotError(IOError):
    """Malformed, truncated or incompatible snapshot file."""


class Kind(enum.IntEnum):
    SCALAR = 1
    COMPLEX = 2
    VECTOR = 3
    KGM_STATE = 4
    REM_STATE = 5


NCOMP = {Kind.SCALAR: 1, Kind.COMPLEX: 2, Kind.VECTOR: 3, Kind.KGM_STATE: 10, Kind.REM_STATE: 10}


@dataclass(frozen=True)
class Snapshot:
    kind: Kind
    grid: Grid
    time: float
    eps: float
    name: str
    data: np.ndarray  # shape (*grid.shape, ncomp), float64

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Snapshot):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.grid == other.grid
            and self.time == other.time
            and self.eps == other.eps
            and self.name == other.name
            and self.data.tobytes() == other.data.tobytes()
        )


def write_snapshot(path: str | Path, snap: Snapshot) -> None:
    path = Path(path)
    ncomp = NCOMP[snap.kind]
    data = np.ascontiguousarray(snap.data, dtype="<f8")
    if data.shape != (*snap.grid.shape, ncomp):
        raise SnapshotError(f"{path}: payload shape {data.shape} does not fit kind {snap.kind.name}")
    name = snap.name.encode("utf-8")
    head = _HEAD.pack(VERSION, int(snap.kind), *snap.grid.shape, *snap.grid.extents,
                      float(snap.time), float(snap.eps), len(name))
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC + head + name + data.tobytes())
    except OSError as exc:
        raise SnapshotError(f"{path}: cannot write snapshot: {exc}") from exc


def read_snapshot(path: str | Path) -> Snapshot:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise SnapshotError(f"{path}: cannot read snapshot: {exc}") from exc
    if raw[: len(MAGIC)] != MAGIC:
        raise SnapshotError(f"{path}: bad magic bytes")
    pos = len(MAGIC)
    if len(raw) < pos + _HEAD.size:
        raise SnapshotError(f"{path}: truncated header")
    version, kind, nx, ny, nz, lx, ly, lz, t, eps, nlen = _HEAD.unpack_from(raw, pos)
    if version != VERSION:
        raise SnapshotError(f"{path}: unsupported version {version} (expected {VERSION})")
    try:
        kind = Kind(kind)
    except ValueError as exc:
        raise SnapshotError(f"{path}: unknown field kind {kind}") from exc
    pos += _HEAD.size
    if len(raw) < pos + nlen:
        raise SnapshotError(f"{path}: truncated header")
    name = raw[pos : pos + nlen].decode("utf-8")
    pos += nlen
    grid = Grid((nx, ny, nz), (lx, ly, lz))
    ncomp = NCOMP[kind]
    need = grid.size * ncomp * 8
    have = len(raw) - pos
    if have < need:
        raise SnapshotError(f"{path}: truncated payload ({have} of {need} bytes)")
    if have > need:
        raise SnapshotError(f"{path}: {have - need} trailing bytes after payload")
    data = np.frombuffer(raw, dtype="<f8", offset=pos).reshape(*grid.shape, ncomp).copy()
    return Snapshot(kind, grid, t, eps, name, data)


def pack_components(comps: list[np.ndarray]) -> np.ndarray:
    """Interleave real component arrays (each of grid shape) per cell."""
    return np.stack(comps, axis=-1).astype("<f8", copy=False)


def unpack_components(data: np.ndarray) -> list[np.ndarray]:
    return [np.ascontiguousarray(data[..., i]) for i in range(data.shape[-1])]
