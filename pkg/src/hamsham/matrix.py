"""Dense weight matrices, file ingestion and order statistics.

A weight matrix is a plain 2-D ``float64`` numpy array in C order; the
helpers here validate and normalise inputs rather than wrapping them in a
custom class.
"""
from __future__ import annotations

import os
from typing import NamedTuple

import numpy as np

from .errors import DtypeError, MalformedHeaderError, NonFiniteError, ShapeError

__all__ = [
    "as_matrix",
    "SparsityStats",
    "sparsity",
    "percentile",
    "quantiles",
    "load_matrix",
    "save_matrix",
]

FORMATS = ("npy", "csv", "raw-f64")


def as_matrix(values, copy: bool = False) -> np.ndarray:
    """Validate ``values`` as a weight matrix and return it as read-only float64.

    Negative zeros are normalised to ``+0.0`` so that every downstream
    representation sees a single zero symbol.
    """
    W = np.array(values, dtype=np.float64, copy=True, order="C") if copy else \
        np.ascontiguousarray(values, dtype=np.float64)
    if W.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {W.shape}")
    if W.shape[0] < 1 or W.shape[1] < 1:
        raise ShapeError(f"matrix dimensions must be >= 1, got {W.shape}")
    if not np.all(np.isfinite(W)):
        raise NonFiniteError("matrix contains NaN or Inf entries")
    if np.signbit(W[W == 0]).any():
        W = W + 0.0  # -0.0 + 0.0 == +0.0
    # freeze a view so the caller's array keeps its own flags
    W = W.view()
    W.setflags(write=False)
    return W


class SparsityStats(NamedTuple):
    nonzero_count: int
    sparsity_coefficient: float  # fraction of nonzero entries


def sparsity(W: np.ndarray) -> SparsityStats:
    W = np.asarray(W)
    q = int(np.count_nonzero(W))
    return SparsityStats(q, q / W.size)


def percentile(values, p: float) -> float:
    """Empirical percentile with linear interpolation between order statistics."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("percentile of an empty array")
    if not 0 <= p <= 100:
        raise ValueError(f"percentile level must be in [0, 100], got {p}")
    return float(np.percentile(v, p, method="linear"))


def quantiles(values, b: int) -> np.ndarray:
    """Return the ``b + 1`` quantiles at levels ``0, 1/b, ..., 1``."""
    if b < 2:
        raise ValueError(f"need at least 2 intervals, got b={b}")
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("quantiles of an empty array")
    out = np.quantile(v, np.arange(b + 1) / b, method="linear")
    out[0], out[-1] = v.min(), v.max()
    # interpolation round-off must not break monotonicity
    return np.maximum.accumulate(out)


def _load_npy(path) -> np.ndarray:
    with open(path, "rb") as f:
        try:
            version = np.lib.format.read_magic(f)
            if version == (1, 0):
                shape, fortran, dtype = np.lib.format.read_array_header_1_0(f)
            elif version == (2, 0):
                shape, fortran, dtype = np.lib.format.read_array_header_2_0(f)
            else:
                raise MalformedHeaderError(f"unsupported NPY version {version}")
        except (ValueError, SyntaxError) as exc:
            raise MalformedHeaderError(f"{path}: {exc}") from exc
        if dtype.kind != "f" or dtype.str not in ("<f4", "<f8"):
            raise DtypeError(f"{path}: dtype {dtype.str} is not a little-endian float")
        if len(shape) != 2:
            raise ShapeError(f"{path}: expected 2-D payload, got shape {shape}")
        if fortran:
            raise ShapeError(f"{path}: Fortran-order payloads are not supported")
        count = int(np.prod(shape))
        data = np.fromfile(f, dtype=dtype, count=count)
    if data.size != count:
        raise MalformedHeaderError(f"{path}: payload truncated ({data.size} of {count} values)")
    return data.reshape(shape)


def _load_csv(path) -> np.ndarray:
    rows = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise MalformedHeaderError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise ShapeError(f"{path}: no rows")
    if len({len(r) for r in rows}) != 1:
        raise ShapeError(f"{path}: ragged rows")
    return np.array(rows, dtype=np.float64)


def _load_raw(path, shape) -> np.ndarray:
    if shape is None:
        raise ShapeError("raw-f64 input needs explicit dimensions")
    n, m = (int(d) for d in shape)
    size = os.path.getsize(path)
    if size != n * m * 8:
        raise ShapeError(f"{path}: {size} bytes do not hold a {n}x{m} float64 matrix")
    return np.fromfile(path, dtype="<f8").reshape(n, m)


def load_matrix(path, format: str | None = None, shape=None) -> np.ndarray:
    """Read a weight matrix from ``path``.

    ``format`` is one of ``npy``, ``csv`` or ``raw-f64`` (guessed from the
    suffix when omitted); raw files need ``shape=(n, m)``. Single-precision
    payloads are widened to float64.
    """
    if format is None:
        format = {".npy": "npy", ".csv": "csv"}.get(os.path.splitext(str(path))[1], "raw-f64")
    if format == "npy":
        data = _load_npy(path)
    elif format == "csv":
        data = _load_csv(path)
    elif format == "raw-f64":
        data = _load_raw(path, shape)
    else:
        raise ValueError(f"unknown matrix format {format!r}; expected one of {FORMATS}")
    return as_matrix(data.astype(np.float64))


def save_matrix(W, path, format: str = "raw-f64") -> None:
    W = as_matrix(W)
    if format == "npy":
        with open(path, "wb") as f:
            np.lib.format.write_array(f, W, version=(1, 0), allow_pickle=False)
    elif format == "csv":
        with open(path, "w") as f:
            for row in W:
                f.write(",".join(repr(float(v)) for v in row) + "\n")
    elif format == "raw-f64":
        W.astype("<f8").tofile(path)
    else:
        raise ValueError(f"unknown matrix format {format!r}")
