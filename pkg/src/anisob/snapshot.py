"""Self-describing binary container for one spectral field.

Layout: a magic line, one JSON header line (n1, n2, l1, l2, name, time,
dtype), then the raw little-endian complex coefficients in C order.  The
round-trip is bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .spectral import Grid, SpectralField

MAGIC = b"ANISOB-FIELD-1\n"
_DTYPE = "<c16"


def save_field(field: SpectralField, path: str | Path, name: str = "field", time: float = 0.0) -> None:
    g = field.grid
    header = {
        "n1": g.n1,
        "n2": g.n2,
        "l1": g.l1,
        "l2": g.l2,
        "name": name,
        "time": time,
        "dtype": _DTYPE,
    }
    coeffs = np.ascontiguousarray(field.coeffs.astype(_DTYPE, copy=False))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(coeffs.tobytes(order="C"))


def load_field(path: str | Path) -> tuple[SpectralField, str, float]:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a field snapshot")
        header = json.loads(fh.readline().decode("utf-8"))
        grid = Grid(header["n1"], header["n2"], header["l1"], header["l2"])
        raw = fh.read(grid.n1 * grid.n2 * np.dtype(header["dtype"]).itemsize)
    coeffs = np.frombuffer(raw, dtype=header["dtype"]).reshape(grid.n1, grid.n2)
    field = SpectralField(grid, coeffs.astype(np.complex128))
    return field, header["name"], header["time"]
