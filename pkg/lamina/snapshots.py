"""Field snapshots on disk.

Layout, all little-endian:

    magic    4 bytes  b"LAMF"
    header   5 x u4   version, components, n1, n2, n3
             2 x f8   time, period
    z        n3 x f8  the y3 nodes
    data     components * n1 * n2 * n3 x f8, C order

Each snapshot gets a plain-text sidecar ``<name>.txt`` with the same metadata.
"""
from pathlib import Path

import numpy as np

from lamina.errors import ValidationError
from lamina.fields import Field, Grid

MAGIC = b"LAMF"
VERSION = 1
_U4 = np.dtype("<u4")
_F8 = np.dtype("<f8")


def snapshot_name(step: int, kind: str = "u") -> str:
    return f"{kind}_{step:06d}.lamf"


def write_field(path, f: Field, note: str = ""):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = f.grid
    with open(path, "wb") as out:
        out.write(MAGIC)
        out.write(np.array([VERSION, f.components, grid.n1, grid.n2, grid.n3], _U4).tobytes())
        out.write(np.array([f.time, grid.period], _F8).tobytes())
        out.write(grid.z.astype(_F8).tobytes())
        out.write(np.ascontiguousarray(f.data, dtype=_F8).tobytes())

    with open(path.with_suffix(".txt"), "w") as side:
        side.write(f"time {f.time!r}\n")
        side.write(f"components {f.components}\n")
        side.write(f"shape {grid.n1} {grid.n2} {grid.n3}\n")
        side.write(f"period {grid.period!r}\n")
        side.write(f"h1 {grid.h1!r}\nh2 {grid.h2!r}\nh3_min {grid.h3!r}\n")
        side.write("byte_order little\nfloat float64\n")
        if note:
            side.write(f"note {note}\n")
    return path


def read_field(path) -> Field:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != MAGIC:
        raise ValidationError(f"{path} is not a lamina snapshot")
    head = np.frombuffer(raw, _U4, count=5, offset=4)
    version, components, n1, n2, n3 = (int(v) for v in head)
    if version != VERSION:
        raise ValidationError(f"{path} has snapshot version {version}, expected {VERSION}")
    offset = 4 + 5 * _U4.itemsize
    time, period = np.frombuffer(raw, _F8, count=2, offset=offset)
    offset += 2 * _F8.itemsize
    expected = offset + (n3 + components * n1 * n2 * n3) * _F8.itemsize
    if len(raw) != expected:
        raise ValidationError(f"{path} is truncated: {len(raw)} bytes, expected {expected}")
    z = np.frombuffer(raw, _F8, count=n3, offset=offset).copy()
    offset += n3 * _F8.itemsize
    data = np.frombuffer(raw, _F8, offset=offset).reshape(components, n1, n2, n3).copy()
    return Field(Grid(n1, n2, z, float(period)), data, float(time))
