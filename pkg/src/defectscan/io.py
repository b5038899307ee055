"""File formats: far-field matrices, retained fields, indicator artifacts.

All writers go through an atomic temp-file + rename so error paths never leave
partially written outputs behind.  JSON numbers use Python's repr (17
significant digits), so write-then-read round-trips are bit exact.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from . import solver
from .errors import SchemaError
from .farfield import FarFieldMatrix, FieldSet


def _atomic_write(path: str, payload: bytes):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# far-field matrices (schema ffm/1)


def write_ffm(path: str, f: FarFieldMatrix):
    doc = {
        "schema": "ffm/1",
        "k": f.k,
        "N": f.n,
        "angles": f.angles.tolist(),
        "re": f.entries.real.tolist(),
        "im": f.entries.imag.tolist(),
    }
    _atomic_write(path, json.dumps(doc).encode())


def read_ffm(path: str) -> FarFieldMatrix:
    try:
        with open(path, "rb") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"{path}: not readable as JSON ({exc})") from exc
    if doc.get("schema") != "ffm/1":
        raise SchemaError(f"{path}: expected schema ffm/1")
    try:
        n = int(doc["N"])
        angles = np.asarray(doc["angles"], dtype=float)
        entries = np.asarray(doc["re"], dtype=float) + 1j * np.asarray(doc["im"], dtype=float)
        k = float(doc["k"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed ffm document ({exc})") from exc
    if angles.shape != (n,) or entries.shape != (n, n):
        raise SchemaError(f"{path}: array shapes inconsistent with N={n}")
    return FarFieldMatrix(k, angles, entries)


# ---------------------------------------------------------------------------
# retained background fields (JSON header line + raw complex128)


def write_fields(path: str, fields: FieldSet):
    spec = fields.spec
    header = {
        "schema": "fields/1",
        "k": fields.k,
        "N": len(fields.angles),
        "angles": fields.angles.tolist(),
        "grid": {
            "half_extent": spec.half_extent,
            "h": spec.h,
            "pml_cells": spec.pml_cells,
            "pml_strength": spec.pml_strength,
        },
        "nodes": spec.n_nodes,
        "dtype": "<c16",
    }
    data = np.ascontiguousarray(fields.data, dtype="<c16")
    _atomic_write(path, json.dumps(header).encode() + b"\n" + data.tobytes())


def read_fields(path: str) -> FieldSet:
    try:
        with open(path, "rb") as fh:
            line = fh.readline()
            raw = fh.read()
        header = json.loads(line)
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"{path}: unreadable fields file ({exc})") from exc
    if header.get("schema") != "fields/1":
        raise SchemaError(f"{path}: expected schema fields/1")
    try:
        g = header["grid"]
        spec = solver.GridSpec(
            float(g["half_extent"]), float(g["h"]),
            int(g["pml_cells"]), float(g["pml_strength"]),
        )
        n = int(header["N"])
        nn = int(header["nodes"])
        angles = np.asarray(header["angles"], dtype=float)
        k = float(header["k"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed fields header ({exc})") from exc
    if nn != spec.n_nodes or angles.shape != (n,):
        raise SchemaError(f"{path}: header inconsistent")
    expect = n * nn * nn * 16
    if len(raw) != expect:
        raise SchemaError(f"{path}: payload is {len(raw)} bytes, expected {expect}")
    data = np.frombuffer(raw, dtype="<c16").reshape(n, nn, nn).copy()
    return FieldSet(spec, k, angles, data)


# ---------------------------------------------------------------------------
# reconstruction artifacts


def write_indicator_csv(path: str, grid):
    lines = ["x,y,value,inside_D"]
    for iy, y in enumerate(grid.ys):
        for ix, x in enumerate(grid.xs):
            lines.append(
                f"{float(x)!r},{float(y)!r},{float(grid.values[iy, ix])!r},"
                f"{int(grid.mask[iy, ix])}"
            )
    _atomic_write(path, ("\n".join(lines) + "\n").encode())


def write_indicator_pgm(path: str, grid):
    """8-bit grayscale; masked values mapped linearly onto [0, 255]."""
    vals = grid.values[grid.mask]
    lo = float(vals.min()) if vals.size else 0.0
    hi = float(vals.max()) if vals.size else 1.0
    span = hi - lo if hi > lo else 1.0
    img = np.zeros(grid.values.shape, dtype=np.uint8)
    img[grid.mask] = np.clip(
        np.rint(255 * (grid.values[grid.mask] - lo) / span), 0, 255
    ).astype(np.uint8)
    ny, nx = img.shape
    header = f"P5\n{nx} {ny}\n255\n".encode()
    _atomic_write(path, header + img[::-1].tobytes())  # top row = largest y


def write_spectrum_csv(path: str, eigenvalues: np.ndarray):
    lines = ["index,lambda"]
    lines += [f"{i},{float(v)!r}" for i, v in enumerate(np.asarray(eigenvalues, float))]
    _atomic_write(path, ("\n".join(lines) + "\n").encode())


def write_report(path: str, report: dict):
    _atomic_write(path, json.dumps(report, indent=2).encode() + b"\n")
