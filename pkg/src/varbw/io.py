"""CSV / JSON readers and writers for densities, grid functions, magnitudes and kernels.

Floats are written with ``repr`` (shortest round-trip form), so a write/read
cycle is exact and repeated runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import InputError
from .spectral import GridFunction, SpectralDensityPair

DENSITY_COLUMNS = ("zeta", "re_gminus", "im_gminus", "re_gplus", "im_gplus")


class MalformedFile(InputError):
    """A data file could not be parsed; the message carries ``path:line``."""


def _fmt(v: float) -> str:
    return repr(float(v))


def read_table(path, columns_options) -> tuple[tuple, np.ndarray]:
    """Read a headed numeric CSV whose header must equal one of ``columns_options``."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"{path}: cannot open ({exc.strerror})") from None
    with fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise MalformedFile(f"{path}:1: empty file, expected a header")
    header = tuple(h.strip() for h in rows[0])
    if header not in [tuple(c) for c in columns_options]:
        want = " or ".join(",".join(c) for c in columns_options)
        raise MalformedFile(f"{path}:1: header {','.join(header)!r}, expected {want}")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise MalformedFile(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise MalformedFile(f"{path}:{lineno}: non-numeric field in {row!r}") from None
        if not all(math.isfinite(v) for v in vals):
            raise MalformedFile(f"{path}:{lineno}: non-finite value")
        data.append(vals)
    if not data:
        raise MalformedFile(f"{path}:2: no data rows")
    return header, np.array(data, dtype=float)


def write_table(path, header, columns) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = [np.asarray(c, dtype=float).reshape(-1) for c in columns]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([_fmt(v) for v in row])


def read_density(path) -> SpectralDensityPair:
    _, a = read_table(path, [DENSITY_COLUMNS])
    try:
        return SpectralDensityPair(a[:, 0], a[:, 1] + 1j * a[:, 2], a[:, 3] + 1j * a[:, 4])
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_density(path, d: SpectralDensityPair) -> None:
    write_table(path, DENSITY_COLUMNS, [d.zeta, d.g_minus.real, d.g_minus.imag, d.g_plus.real, d.g_plus.imag])


def read_grid_function(path) -> GridFunction:
    """``x,value`` (real) or ``x,re,im`` (complex)."""
    header, a = read_table(path, [("x", "value"), ("x", "re", "im"), ("x", "f")])
    vals = a[:, 1] + 1j * a[:, 2] if len(header) == 3 else a[:, 1]
    return _grid(path, a[:, 0], vals)


def write_grid_function(path, f: GridFunction, value_name: str = "value") -> None:
    if f.is_real:
        write_table(path, ("x", value_name), [f.x, np.real(f.values)])
    else:
        write_table(path, ("x", "re", "im"), [f.x, f.values.real, f.values.imag])


def read_magnitude(path) -> GridFunction:
    _, a = read_table(path, [("x", "m")])
    return _grid(path, a[:, 0], a[:, 1])


def _grid(path, x, v) -> GridFunction:
    try:
        return GridFunction(x, v)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_kernel(path, x, y, k) -> None:
    xx, yy = np.meshgrid(x, y, indexing="ij")
    write_table(path, ("x", "y", "k"), [xx, yy, k])


def parse_axis(spec: str) -> np.ndarray:
    """``lo:hi:n`` -> ``n`` equispaced points, or a comma list of values."""
    try:
        if ":" in spec:
            lo, hi, n = spec.split(":")
            n = int(n)
            if n < 1:
                raise ValueError
            return np.linspace(float(lo), float(hi), n)
        return np.array([float(v) for v in spec.split(",")])
    except ValueError:
        raise InputError(f"bad grid {spec!r}: use lo:hi:n or a comma-separated list") from None


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
