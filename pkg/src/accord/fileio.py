"""Readers and writers for the on-disk formats.

* data matrices: CSV (optional header row) or raw binary with a 16-byte
  header ``b"ACRD"``, ``u32 n``, ``u32 p``, 4 reserved bytes, followed by
  row-major little-endian float64 values;
* sparse matrices: MatrixMarket coordinate, general, 1-based;
* partial correlations: tab-separated ``i j rho`` with 0-based indices;
* objective traces: CSV ``iteration,objective,step``.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .linalg import as_sparse_square

MAGIC = b"ACRD"
_HEADER = struct.Struct("<4sII4x")


def write_binary(path, values: np.ndarray) -> None:
    values = np.asarray(values, dtype="<f8")
    n, p = values.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, n, p))
        fh.write(np.ascontiguousarray(values).tobytes())


def read_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, n, p = _HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        body = fh.read()
    if len(body) != 8 * n * p:
        raise ValueError(f"{path}: expected {8 * n * p} data bytes, got {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape(n, p).astype(np.float64)


def write_csv(path, values: np.ndarray, header: bool = False) -> None:
    values = np.asarray(values)
    hdr = ",".join(f"x{j}" for j in range(values.shape[1])) if header else ""
    np.savetxt(path, values, delimiter=",", header=hdr, comments="", fmt="%.17g")


def read_csv(path) -> np.ndarray:
    with open(path) as fh:
        first = fh.readline()
    skip = 0
    try:
        [float(tok) for tok in first.strip().split(",")]
    except ValueError:
        skip = 1
    return np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)


def read_data(path) -> np.ndarray:
    """Read a data matrix, dispatching on the binary magic."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == MAGIC:
        return read_binary(path)
    return read_csv(path)


def write_data(path, values: np.ndarray, fmt: str = "bin") -> None:
    if fmt == "bin":
        write_binary(path, values)
    elif fmt == "csv":
        write_csv(path, values)
    else:
        raise ValueError(f"unknown data format {fmt!r}")


def write_matrix_market(path, matrix) -> None:
    scipy.io.mmwrite(str(path), sp.coo_array(matrix), field="real",
                     symmetry="general", precision=17)


def read_matrix_market(path) -> sp.csr_array:
    return as_sparse_square(scipy.io.mmread(str(path)))


def write_edge_list(path, rho) -> None:
    """Write the upper triangle of a symmetric sparse matrix as ``i j rho``."""
    coo = sp.coo_array(sp.triu(rho, k=1))
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["i", "j", "rho"])
        for k in order:
            w.writerow([int(coo.row[k]), int(coo.col[k]), repr(float(coo.data[k]))])


def read_edge_list(path) -> list[tuple[int, int, float]]:
    with open(path) as fh:
        r = csv.reader(fh, delimiter="\t")
        next(r)
        return [(int(i), int(j), float(v)) for i, j, v in r]


def write_trace(path, objective, steps) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "objective", "step"])
        for t, (f, tau) in enumerate(zip(objective, steps)):
            w.writerow([t, repr(float(f)), repr(float(tau))])


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
