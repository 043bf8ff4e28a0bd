"""Field files, CSV twins and atomic writes.

Binary layout (little endian):

    8 bytes   magic b"H5DFIELD"
    uint32    format version
    uint32    n_points
    float64   r_max
    uint8     1 if complex else 0
    7 bytes   zero padding
    float64[n_points]             real parts
    float64[n_points]             imaginary parts (complex files only)

The CSV twin has a header line and columns r,value or r,real,imag written
with 17 significant digits, enough to round-trip float64.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .grid import RadialGrid

MAGIC = b"H5DFIELD"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIIdB7x")


class FieldFileError(ValueError):
    pass


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> Path:
    """Write to a temporary file in the target directory, then rename over path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path: str | os.PathLike, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: str | os.PathLike, obj) -> Path:
    return atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def write_csv(path: str | os.PathLike, header: list[str], rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return atomic_write_text(path, buf.getvalue())


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def sha256_file(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def encode_field(grid: RadialGrid, values: np.ndarray) -> bytes:
    values = np.asarray(values)
    if values.shape != (grid.n_points,):
        raise FieldFileError(f"field has shape {values.shape}, grid has {grid.n_points} nodes")
    is_complex = np.iscomplexobj(values)
    head = _HEADER.pack(MAGIC, FORMAT_VERSION, grid.n_points, grid.r_max, int(is_complex))
    body = values.real.astype("<f8").tobytes()
    if is_complex:
        body += values.imag.astype("<f8").tobytes()
    return head + body


def decode_field(data: bytes, grid: RadialGrid | None = None) -> tuple[RadialGrid, np.ndarray]:
    if len(data) < _HEADER.size:
        raise FieldFileError("truncated field file: incomplete header")
    magic, version, n, r_max, flag = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FieldFileError("not a field file (bad magic)")
    if version != FORMAT_VERSION:
        raise FieldFileError(f"unsupported field format version {version}, expected {FORMAT_VERSION}")
    if flag not in (0, 1):
        raise FieldFileError(f"corrupt real/complex flag {flag}")
    n_values = n * (2 if flag else 1)
    expected = _HEADER.size + 8 * n_values
    if len(data) != expected:
        kind = "truncated" if len(data) < expected else "oversized"
        raise FieldFileError(f"{kind} field file: {len(data)} bytes, expected {expected}")
    stored = RadialGrid(n, r_max)
    if grid is not None and not grid.same_as(stored):
        raise FieldFileError(
            f"grid mismatch: file has (n_points={n}, r_max={r_max}), "
            f"run uses (n_points={grid.n_points}, r_max={grid.r_max}); no interpolation is done"
        )
    raw = np.frombuffer(data, dtype="<f8", count=n_values, offset=_HEADER.size).astype(float)
    values = raw[:n] + 1j * raw[n:] if flag else raw.copy()
    return stored, values


def save_field(grid: RadialGrid, values: np.ndarray, path: str | os.PathLike, csv_twin: bool = True) -> Path:
    """Write the binary field file and, by default, a .csv twin beside it."""
    path = Path(path)
    atomic_write_bytes(path, encode_field(grid, values))
    if csv_twin:
        values = np.asarray(values)
        if np.iscomplexobj(values):
            rows = zip(grid.nodes, values.real, values.imag)
            write_csv(path.with_suffix(".csv"), ["r", "real", "imag"], rows)
        else:
            write_csv(path.with_suffix(".csv"), ["r", "value"], zip(grid.nodes, values))
    return path


def load_field(path: str | os.PathLike, grid: RadialGrid | None = None) -> tuple[RadialGrid, np.ndarray]:
    """Read a field file; with grid given, refuse files written on another grid."""
    return decode_field(Path(path).read_bytes(), grid)


def load_field_csv(path: str | os.PathLike) -> tuple[np.ndarray, np.ndarray]:
    """(nodes, values) from a CSV twin."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    if header == ["r", "real", "imag"]:
        return body[:, 0], body[:, 1] + 1j * body[:, 2]
    if header == ["r", "value"]:
        return body[:, 0], body[:, 1]
    raise FieldFileError(f"unrecognized CSV header {header}")
