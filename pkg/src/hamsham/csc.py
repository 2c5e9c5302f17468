"""Compressed sparse column storage and its dot product."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContainerError
from .matrix import as_matrix

__all__ = ["CscMatrix", "csc_encode", "csc_decode", "csc_dot", "dense_dot", "psi_csc"]


@dataclass(frozen=True)
class CscMatrix:
    nz: np.ndarray  # nonzero values, column by column
    ri: np.ndarray  # 0-based row index of each nz entry
    cb: np.ndarray  # column start offsets, length cols + 1
    rows: int
    cols: int

    @property
    def nnz(self) -> int:
        return len(self.nz)

    def validate(self) -> None:
        nz, ri, cb = self.nz, self.ri, self.cb
        if self.rows < 1 or self.cols < 1:
            raise ContainerError(f"bad dimensions {self.rows}x{self.cols}")
        if len(cb) != self.cols + 1 or cb[0] != 0 or cb[-1] != len(nz):
            raise ContainerError("column offsets do not span the nonzero array")
        if np.any(np.diff(cb) < 0):
            raise ContainerError("column offsets are not non-decreasing")
        if len(ri) != len(nz):
            raise ContainerError("row index and value arrays differ in length")
        if len(ri) and (ri.min() < 0 or ri.max() >= self.rows):
            raise ContainerError("row index out of range")
        if np.any(nz == 0):
            raise ContainerError("explicit zero stored in nz")
        step = np.diff(ri.astype(np.int64))
        starts = np.zeros(len(ri), dtype=bool)
        starts[cb[:-1][cb[:-1] < len(ri)]] = True
        if np.any((step <= 0) & ~starts[1:]):
            raise ContainerError("row indices not strictly increasing within a column")


def csc_encode(W) -> CscMatrix:
    W = as_matrix(W)
    n, m = W.shape
    cols, rows = np.nonzero(W.T)  # column-major scan
    nz = W[rows, cols]
    cb = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(np.bincount(cols, minlength=m), out=cb[1:])
    return CscMatrix(nz, rows.astype(np.int64), cb, n, m)


def csc_decode(M: CscMatrix) -> np.ndarray:
    M.validate()
    W = np.zeros((M.rows, M.cols), dtype=np.float64)
    cols = np.repeat(np.arange(M.cols), np.diff(M.cb))
    W[M.ri, cols] = M.nz
    return W


def csc_dot(x, M: CscMatrix) -> np.ndarray:
    """Return ``x^T W`` for ``W`` in CSC form, touching each nonzero once."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (M.rows,):
        raise ValueError(f"vector of length {M.rows} expected, got shape {x.shape}")
    xs = x.tolist()
    nz, ri, cb = M.nz.tolist(), M.ri.tolist(), M.cb.tolist()
    out = [0.0] * M.cols
    for j in range(M.cols):
        acc = 0.0
        for t in range(cb[j], cb[j + 1]):
            acc += xs[ri[t]] * nz[t]
        out[j] = acc
    return np.array(out)


def dense_dot(x, W) -> np.ndarray:
    """Sequential ``x^T W`` over every entry, column by column.

    Same scalar loop structure as the compressed dot procedures, so that
    timing comparisons measure the storage format rather than BLAS.
    """
    W = np.asarray(W, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (W.shape[0],):
        raise ValueError(f"vector of length {W.shape[0]} expected, got shape {x.shape}")
    xs = x.tolist()
    out = []
    for col in W.T.tolist():
        acc = 0.0
        for xi, w in zip(xs, col):
            acc += xi * w
        out.append(acc)
    return np.array(out)


def psi_csc(n: int, m: int, q: int) -> float:
    """Occupancy of CSC relative to dense storage, one word per stored item."""
    if n < 1 or m < 1:
        raise ValueError("dimensions must be positive")
    return (2 * q + m + 1) / (n * m)
