"""GridFunction text files and 16-bit PGM heatmaps.

Text format: line 1 is ``nx ny hx hy``; then nx*ny whitespace-separated
values in row-major order (rows run along y). Nodes outside the mask are
written as ``nan``. Values use ``repr`` so a round trip is bit-exact.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from symmin.errors import FieldIOError, FieldParseError
from symmin.field import Grid, GridFunction


def format_field(u: GridFunction) -> str:
    g = u.grid
    lines = [f"{g.nx} {g.ny} {g.hx!r} {g.hy!r}"]
    for j in range(g.ny):
        row = [repr(float(v)) if m else "nan" for v, m in zip(u.values[j], g.mask[j])]
        lines.append(" ".join(row))
    return "\n".join(lines) + "\n"


def parse_field(text: str) -> GridFunction:
    lines = text.splitlines()
    header_no = next((i for i, line in enumerate(lines) if line.strip()), None)
    if header_no is None:
        raise FieldParseError("empty file, expected header 'nx ny hx hy'", line=1)
    parts = lines[header_no].split()
    if len(parts) != 4:
        raise FieldParseError(f"header needs 4 fields 'nx ny hx hy', got {len(parts)}", header_no + 1)
    try:
        nx, ny = int(parts[0]), int(parts[1])
        hx, hy = float(parts[2]), float(parts[3])
    except ValueError:
        raise FieldParseError(f"malformed header {lines[header_no]!r}", header_no + 1) from None
    if nx < 1 or ny < 1 or not (hx > 0 and hy > 0):
        raise FieldParseError("header needs positive counts and spacings", header_no + 1)
    expected = nx * ny
    values = []
    for lineno, line in enumerate(lines[header_no + 1 :], start=header_no + 2):
        for tok in line.split():
            try:
                values.append(float(tok))
            except ValueError:
                raise FieldParseError(f"bad value {tok!r}", lineno) from None
            if len(values) > expected:
                raise FieldParseError(f"too many values, expected {expected}", lineno)
    if len(values) != expected:
        raise FieldParseError(
            f"expected {expected} values ({nx} x {ny}), found {len(values)}", len(lines)
        )
    arr = np.array(values).reshape(ny, nx)
    mask = ~np.isnan(arr)
    if not mask.any():
        raise FieldParseError("every node is outside the mask", header_no + 1)
    if np.any(np.isinf(arr)):
        raise FieldParseError("infinite values are not allowed", header_no + 1)
    grid = Grid(nx, ny, hx, hy, mask)
    return GridFunction(grid, np.where(mask, arr, 0.0))


def export_field(u: GridFunction, path, format: str = "text") -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if format == "text":
            path.write_text(format_field(u))
        elif format == "pgm":
            path.write_bytes(pgm_bytes(u))
        else:
            raise ValueError(f"unknown export format {format!r}")
    except OSError as exc:
        raise FieldIOError(f"cannot write {path}: {exc}") from exc
    return path


def import_field(path) -> GridFunction:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FieldIOError(f"cannot read {path}: {exc}") from exc
    return parse_field(text)


def pgm_bytes(u: GridFunction) -> bytes:
    """Binary 16-bit PGM, values rescaled linearly over the mask.

    Constant fields map to mid gray; nodes outside the mask are black. The
    top image row is the largest y.
    """
    g = u.grid
    inside = u.values[g.mask]
    lo, hi = float(inside.min()), float(inside.max())
    if hi > lo:
        scaled = np.rint((u.values - lo) / (hi - lo) * 65535)
    else:
        scaled = np.full(g.shape, 32768.0)
    img = np.where(g.mask, scaled, 0).astype(">u2")[::-1]
    header = f"P5\n{g.nx} {g.ny}\n65535\n".encode("ascii")
    return header + img.tobytes()


def read_pgm(data: bytes) -> np.ndarray:
    """Decode pgm_bytes output (top row first)."""
    magic, dims, maxval, rest = data.split(b"\n", 3)
    if magic != b"P5" or maxval != b"65535":
        raise ValueError("not a 16-bit binary PGM")
    nx, ny = (int(t) for t in dims.split())
    return np.frombuffer(rest, dtype=">u2").reshape(ny, nx)


def finite_or_none(x):
    """JSON-safe float: NaN/inf become None."""
    x = float(x)
    return x if math.isfinite(x) else None
