"""Huffman address map (HAM) and sparse HAM (sHAM) containers.

HAM Huffman-codes every entry of the matrix, zeros included, in
column-major order. sHAM keeps the CSC skeleton (row indices and column
offsets) and Huffman-codes only the nonzero values. Both support a dot
product ``x^T W`` that streams the packed words and never rebuilds ``W``.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .csc import CscMatrix, csc_decode, csc_encode
from .entropy import (
    WORD_BITS,
    BitStream,
    HuffmanCode,
    decode_symbols,
    deserialize_code,
    encode_symbols,
    huffman_build,
    next_code_word,
    serialize_code,
)
from .errors import ContainerError, CorruptStreamError
from .matrix import as_matrix

__all__ = [
    "HamContainer",
    "ShamContainer",
    "ham_encode",
    "ham_decode",
    "dot_ham",
    "sham_encode",
    "sham_decode",
    "dot_sham",
    "psi_ham",
    "psi_sham",
    "psi_sham_distinct",
    "Occupancy",
    "measured_occupancy",
    "to_bytes",
    "from_bytes",
    "save_container",
    "load_container",
]

FORMAT_VERSION = 1
COLUMN_MAJOR = 0
DEFAULT_WORD_BITS = 32  # B used for occupancy accounting
INDEX_BITS = 32         # stored width of ri and cb entries


@dataclass(frozen=True, eq=False)
class HamContainer:
    stream: BitStream
    code: HuffmanCode
    rows: int
    cols: int
    word_bits: int = DEFAULT_WORD_BITS

    @property
    def symbol_count(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True, eq=False)
class ShamContainer:
    stream: BitStream
    code: HuffmanCode
    ri: np.ndarray
    cb: np.ndarray
    rows: int
    cols: int
    word_bits: int = DEFAULT_WORD_BITS

    @property
    def nonzero_count(self) -> int:
        return int(self.cb[-1])

    symbol_count = nonzero_count


def _code_for(values):
    symbols, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    code = huffman_build(dict(zip(symbols.tolist(), counts.tolist())))
    return code, inverse.ravel()


def ham_encode(W, word_bits: int = DEFAULT_WORD_BITS) -> HamContainer:
    W = as_matrix(W)
    code, seq = _code_for(W.T.ravel())
    return HamContainer(encode_symbols(code, seq), code, W.shape[0], W.shape[1], word_bits)


def ham_decode(C: HamContainer) -> np.ndarray:
    idx = decode_symbols(C.stream, C.code, C.symbol_count)
    return C.code.symbols[idx].reshape(C.cols, C.rows).T.copy()


def _check_vector(x, n):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise ValueError(f"vector of length {n} expected, got shape {x.shape}")
    return x.tolist()


def dot_ham(x, C: HamContainer, stats: dict | None = None) -> np.ndarray:
    """``x^T W`` for a HAM container, decoding one codeword at a time."""
    n, m = C.rows, C.cols
    xs = _check_vector(x, n)
    weight = C.code.symbols.tolist()
    code = C.code
    total = n * m
    out = [0.0] * m
    row = col = decoded = 0
    acc = 0.0
    rem = None
    for S in C.stream.words.tolist():
        oset = 0
        while True:
            z, rem, oset = next_code_word(S, rem, oset, code, total - decoded)
            if z is None:
                break
            acc += xs[row] * weight[z]
            row += 1
            decoded += 1
            if row == n:
                out[col] = acc
                col += 1
                row = 0
                acc = 0.0
    if decoded != total:
        raise CorruptStreamError(f"stream ended after {decoded} of {total} symbols")
    if stats is not None:
        stats["symbols"] = stats.get("symbols", 0) + decoded
        stats["words"] = stats.get("words", 0) + C.stream.n_words
    return np.array(out)


def sham_encode(W, word_bits: int = DEFAULT_WORD_BITS) -> ShamContainer:
    W = as_matrix(W)
    csc = csc_encode(W)
    if csc.nnz:
        code, seq = _code_for(csc.nz)
        stream = encode_symbols(code, seq)
    else:
        code = HuffmanCode(np.zeros(0), (), ())
        stream = BitStream(np.zeros(0, dtype=np.uint64), 0)
    return ShamContainer(stream, code, csc.ri, csc.cb, csc.rows, csc.cols, word_bits)


def sham_decode(C: ShamContainer) -> np.ndarray:
    idx = decode_symbols(C.stream, C.code, C.nonzero_count)
    nz = C.code.symbols[idx] if len(idx) else np.zeros(0)
    return csc_decode(CscMatrix(nz, C.ri, C.cb, C.rows, C.cols))


def dot_sham(x, C: ShamContainer, stats: dict | None = None) -> np.ndarray:
    """``x^T W`` for an sHAM container.

    Walks the nonzero stream once; empty columns are skipped using ``cb``
    and keep their initial zero output.
    """
    xs = _check_vector(x, C.rows)
    weight = C.code.symbols.tolist()
    code = C.code
    ri, cb = C.ri.tolist(), C.cb.tolist()
    q = cb[-1]
    out = [0.0] * C.cols
    pos = col = 0
    acc = 0.0
    rem = None
    for S in C.stream.words.tolist():
        oset = 0
        while True:
            z, rem, oset = next_code_word(S, rem, oset, code, q - pos)
            if z is None:
                break
            while cb[col + 1] == pos:
                col += 1
            acc += xs[ri[pos]] * weight[z]
            pos += 1
            if cb[col + 1] == pos:
                out[col] = acc
                acc = 0.0
                col += 1
    # columns after the last nonzero are empty: their output stays 0
    if pos != q:
        raise CorruptStreamError(f"stream ended after {pos} of {q} nonzeros")
    if stats is not None:
        stats["symbols"] = stats.get("symbols", 0) + pos
        stats["words"] = stats.get("words", 0) + C.stream.n_words
    return np.array(out)


def psi_ham(k: int, n: int, m: int, B: int = DEFAULT_WORD_BITS) -> float:
    """Worst-case HAM occupancy for ``k`` equiprobable distinct values."""
    if k < 1:
        raise ValueError("need at least one symbol")
    return (1 + math.log2(k)) / B + 6 * k / (n * m)


def psi_sham(s: float, k: int, n: int, m: int, B: int = DEFAULT_WORD_BITS) -> float:
    """Worst-case sHAM occupancy for density ``s`` and ``k`` distinct nonzero values."""
    if not 0 <= s <= 1:
        raise ValueError(f"density must be in [0, 1], got {s}")
    if k < 1:
        raise ValueError("need at least one symbol")
    nm = n * m
    return s * (1 + math.log2(k)) / B + 6 * k / nm + (n + m + 1) / nm


def psi_sham_distinct(s: float, n: int, m: int, B: int = DEFAULT_WORD_BITS) -> float:
    """sHAM occupancy when all ``s*n*m`` nonzeros are distinct values."""
    if not 0 <= s <= 1:
        raise ValueError(f"density must be in [0, 1], got {s}")
    nm = n * m
    code_bits = s * (1 + math.log2(s * nm)) / B if s > 0 else 0.0
    return code_bits + 6 * s + (n + m + 1) / nm


class Occupancy(NamedTuple):
    payload_bits: int
    dict_bits_model: int   # two B-tree dictionaries, 3(k+1) words each
    dict_bits_actual: int  # serialized canonical code table
    total_ratio: float     # (payload + actual dictionary) / (n m B)
    total_ratio_model: float


def measured_occupancy(C, B: int | None = None) -> Occupancy:
    B = C.word_bits if B is None else B
    payload = C.stream.bit_length
    if isinstance(C, ShamContainer):
        payload += INDEX_BITS * (len(C.ri) + len(C.cb))
    k = len(C.code)
    model = 2 * 3 * (k + 1) * B
    actual = 8 * len(serialize_code(C.code))
    dense = C.rows * C.cols * B
    return Occupancy(payload, model, actual, (payload + actual) / dense, (payload + model) / dense)


_HEADER = struct.Struct("<4sBBBIIQ")
_MAGIC = {HamContainer: b"HAMC", ShamContainer: b"SHAM"}


def to_bytes(C) -> bytes:
    """Serialize a container (little-endian, see README for the layout)."""
    magic = _MAGIC[type(C)]
    if not 1 <= C.word_bits <= 255:
        raise ContainerError(f"word size {C.word_bits} does not fit the header")
    parts = [
        _HEADER.pack(magic, FORMAT_VERSION, COLUMN_MAJOR, C.word_bits, C.rows, C.cols, C.symbol_count),
        serialize_code(C.code),
    ]
    if isinstance(C, ShamContainer):
        parts.append(np.asarray(C.ri, dtype="<u4").tobytes())
        parts.append(np.asarray(C.cb, dtype="<u4").tobytes())
    parts.append(struct.pack("<Q", C.stream.bit_length))
    parts.append(np.asarray(C.stream.words, dtype="<u8").tobytes())
    return b"".join(parts)


def from_bytes(buf: bytes):
    buf = memoryview(bytes(buf))
    try:
        magic, version, order, B, rows, cols, count = _HEADER.unpack_from(buf, 0)
    except struct.error as exc:
        raise ContainerError(f"truncated header: {exc}") from exc
    if magic not in (b"HAMC", b"SHAM"):
        raise ContainerError(f"unknown magic {bytes(magic)!r}")
    if version != FORMAT_VERSION:
        raise ContainerError(f"unsupported format version {version}")
    if order != COLUMN_MAJOR:
        raise ContainerError(f"unsupported symbol order {order}")
    if rows < 1 or cols < 1:
        raise ContainerError(f"bad dimensions {rows}x{cols}")
    code, off = deserialize_code(buf, _HEADER.size)

    def take(nbytes):
        nonlocal off
        if off + nbytes > len(buf):
            raise ContainerError("container truncated")
        chunk = buf[off: off + nbytes]
        off += nbytes
        return chunk

    ri = cb = None
    if magic == b"SHAM":
        ri = np.frombuffer(take(4 * count), dtype="<u4").astype(np.int64)
        cb = np.frombuffer(take(4 * (cols + 1)), dtype="<u4").astype(np.int64)
    (bit_length,) = struct.unpack("<Q", take(8))
    n_words = -(-bit_length // WORD_BITS)
    words = np.frombuffer(take(8 * n_words), dtype="<u8").astype(np.uint64)
    if off != len(buf):
        raise ContainerError(f"{len(buf) - off} trailing bytes after payload")
    stream = BitStream(words, bit_length)
    if magic == b"HAMC":
        if count != rows * cols:
            raise ContainerError(f"symbol count {count} != {rows}x{cols}")
        return HamContainer(stream, code, rows, cols, B)
    CscMatrix(np.ones(count), ri, cb, rows, cols).validate()
    if 0 in code.symbols.tolist():
        raise ContainerError("zero symbol in an sHAM code table")
    return ShamContainer(stream, code, ri, cb, rows, cols, B)


def save_container(C, path) -> None:
    with open(path, "wb") as f:
        f.write(to_bytes(C))


def load_container(path):
    with open(path, "rb") as f:
        return from_bytes(f.read())
