"""Shared JSON layout for complex matrices and file round-trips.

A complex matrix is stored as {"shape": [rows, cols], "data": [[re, im],
...]} with entries in row-major order. All package file formats build on
this layout.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = ["matrix_to_json", "matrix_from_json", "dump_json", "load_json"]


def matrix_to_json(a: np.ndarray) -> dict:
    a = np.atleast_2d(np.asarray(a))
    flat = a.ravel()
    return {"shape": list(a.shape),
            "data": [[float(z.real), float(z.imag)] for z in flat]}


def matrix_from_json(obj: dict) -> np.ndarray:
    shape = tuple(obj["shape"])
    data = np.asarray(obj["data"], dtype=float)
    if data.size == 0:
        return np.zeros(shape, dtype=complex)
    flat = data[:, 0] + 1j * data[:, 1]
    return flat.reshape(shape)


def dump_json(path: str | Path, obj: dict) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def load_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
