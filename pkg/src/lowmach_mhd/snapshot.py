"""Binary field snapshots and trajectory directories.

Snapshot layout (little endian)::

    magic      4 bytes   b"MLFD"
    version    u32       1
    dim_mode   u8        0 = slab, 1 = full3d
    n          u32       points per axis
    ncomp      u8        number of scalar components
    payload    f64[...]  ncomp blocks, each the row-major physical samples

A trajectory directory holds ``snap_XXXX.mlfd`` files plus ``manifest.txt``
(``key = value`` lines, then one ``time file`` line per snapshot).
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import FormatError
from .grid import DimMode, Grid

MAGIC = b"MLFD"
VERSION = 1
_HEADER = struct.Struct("<4sIBIB")


def write_snapshot(path: str | Path, grid: Grid, data: np.ndarray) -> None:
    """Write ``data`` of shape ``(ncomp, *grid.shape)`` (or ``grid.shape``)."""
    arr = np.asarray(data, dtype="<f8")
    if arr.shape == grid.shape:
        arr = arr[None]
    if arr.shape[1:] != grid.shape:
        raise FormatError(f"snapshot data shape {arr.shape} does not match grid {grid.shape}")
    if not 0 < arr.shape[0] < 256:
        raise FormatError("component count must fit in one byte")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, grid.dim_mode.code, grid.n, arr.shape[0]))
        fh.write(np.ascontiguousarray(arr).tobytes(order="C"))


def read_snapshot(path: str | Path) -> tuple[Grid, np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, mode, n, ncomp = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    grid = Grid(n, DimMode.from_code(mode))
    count = ncomp * grid.size
    payload = raw[_HEADER.size:]
    if len(payload) != 8 * count:
        raise FormatError(f"{path}: payload has {len(payload)} bytes, expected {8 * count}")
    arr = np.frombuffer(payload, dtype="<f8").reshape((ncomp,) + grid.shape).astype(float)
    return grid, arr


def save_trajectory_dir(outdir: str | Path, grid: Grid, times: Sequence[float],
                        snapshots: Iterable[np.ndarray], components: Sequence[str],
                        meta: Mapping[str, object]) -> Path:
    """Persist snapshots and a plain-text manifest; returns the manifest path."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    lines = [f"{k} = {v}" for k, v in meta.items()]
    lines.append(f"grid = {grid.dim_mode.value} {grid.n}")
    lines.append(f"components = {','.join(components)}")
    lines.append(f"snapshots = {len(times)}")
    for i, (t, data) in enumerate(zip(times, snapshots)):
        name = f"snap_{i:04d}.mlfd"
        write_snapshot(outdir / name, grid, data)
        lines.append(f"{t!r} {name}")
    manifest = outdir / "manifest.txt"
    manifest.write_text("\n".join(lines) + "\n")
    return manifest


def load_trajectory_dir(outdir: str | Path) -> tuple[dict[str, str], list[float], list[np.ndarray]]:
    """Inverse of :func:`save_trajectory_dir`: ``(meta, times, arrays)``."""
    outdir = Path(outdir)
    meta: dict[str, str] = {}
    times, arrays = [], []
    for line in (outdir / "manifest.txt").read_text().splitlines():
        if not line.strip():
            continue
        if " = " in line:
            k, v = line.split(" = ", 1)
            meta[k.strip()] = v.strip()
            continue
        t, name = line.split()
        times.append(float(t))
        arrays.append(read_snapshot(outdir / name)[1])
    return meta, times, arrays
