"""Canonical Huffman codes over real-valued symbols and 64-bit word bitstreams.

Codewords are packed MSB-first into unsigned 64-bit words; the last word
is zero-padded. Decoding is driven by :func:`next_code_word`, which scans
one word at a time and carries a partial codeword across word boundaries.
"""
from __future__ import annotations

import heapq
import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ContainerError, CorruptStreamError

__all__ = [
    "WORD_BITS",
    "HuffmanCode",
    "huffman_build",
    "code_stats",
    "BitStream",
    "BitWriter",
    "pack_codes",
    "next_code_word",
    "encode_symbols",
    "decode_symbols",
    "serialize_code",
    "deserialize_code",
]

WORD_BITS = 64
_WORD_MASK = (1 << WORD_BITS) - 1


def _canonical_codes(lengths):
    """Assign canonical codewords: ordered by (length, symbol index)."""
    order = sorted(range(len(lengths)), key=lambda i: (lengths[i], i))
    codes = [0] * len(lengths)
    code, prev = 0, lengths[order[0]] if order else 0
    for i in order:
        code <<= lengths[i] - prev
        codes[i] = code
        code += 1
        prev = lengths[i]
    return codes, order


@dataclass(frozen=True, eq=False)
class HuffmanCode:
    symbols: np.ndarray  # distinct values, ascending
    lengths: tuple       # codeword length per symbol
    codes: tuple         # canonical codeword per symbol, as integers

    def __post_init__(self):
        _, order = _canonical_codes(list(self.lengths))
        max_len = max(self.lengths) if self.lengths else 0
        count = [0] * (max_len + 2)
        for n in self.lengths:
            count[n] += 1
        # canonical decoding: at length l, codes in [first[l], first[l] + count[l])
        limit, base = [0] * (max_len + 2), [0] * (max_len + 2)
        code = index = 0
        for n in range(1, max_len + 1):
            code <<= 1
            limit[n] = code + count[n]
            base[n] = index - code
            code += count[n]
            index += count[n]
        object.__setattr__(self, "max_len", max_len)
        object.__setattr__(self, "_limit", limit)
        object.__setattr__(self, "_base", base)
        object.__setattr__(self, "_by_code", order)

    def __len__(self):
        return len(self.symbols)

    def __eq__(self, other):
        return (isinstance(other, HuffmanCode) and self.lengths == other.lengths
                and np.array_equal(self.symbols, other.symbols))

    def codeword(self, i: int) -> str:
        """Codeword of symbol index ``i`` as a bit string."""
        return format(self.codes[i], f"0{self.lengths[i]}b")

    def index_of(self, values) -> np.ndarray:
        """Map symbol values to their indices in ``symbols``."""
        values = np.asarray(values, dtype=np.float64)
        idx = np.searchsorted(self.symbols, values)
        if values.size and (np.any(idx >= len(self.symbols))
                            or np.any(self.symbols[np.minimum(idx, len(self.symbols) - 1)] != values)):
            raise KeyError("value outside the code alphabet")
        return idx

    def decode_table(self):
        """Flat lookup over ``max_len``-bit windows: (symbol index, length) per window."""
        size = 1 << self.max_len
        sym = np.zeros(size, dtype=np.int64)
        ln = np.zeros(size, dtype=np.int64)
        for i, (c, n) in enumerate(zip(self.codes, self.lengths)):
            lo = c << (self.max_len - n)
            hi = (c + 1) << (self.max_len - n)
            sym[lo:hi] = i
            ln[lo:hi] = n
        return sym, ln


def huffman_build(freqs) -> HuffmanCode:
    """Build a canonical Huffman code from a ``{symbol: count}`` mapping.

    Merge ties are broken by total count, then by smallest contained symbol,
    so the result depends only on the (symbol, count) multiset. A lone symbol
    gets the one-bit codeword ``0``.
    """
    if not freqs:
        raise ValueError("cannot build a code over an empty alphabet")
    items = sorted((float(s), int(c)) for s, c in dict(freqs).items())
    symbols = np.array([s for s, _ in items], dtype=np.float64)
    counts = [c for _, c in items]
    if any(c < 1 for c in counts):
        raise ValueError("symbol counts must be positive")
    if len(symbols) != len(set(symbols.tolist())):
        raise ValueError("duplicate symbols")
    k = len(symbols)
    lengths = [0] * k
    if k == 1:
        lengths[0] = 1
    else:
        # heap entries: (count, smallest symbol index, members)
        heap = [(c, i, [i]) for i, c in enumerate(counts)]
        heapq.heapify(heap)
        while len(heap) > 1:
            c1, s1, m1 = heapq.heappop(heap)
            c2, s2, m2 = heapq.heappop(heap)
            for i in m1:
                lengths[i] += 1
            for i in m2:
                lengths[i] += 1
            m1.extend(m2)
            heapq.heappush(heap, (c1 + c2, min(s1, s2), m1))
    codes, _ = _canonical_codes(lengths)
    symbols.setflags(write=False)
    return HuffmanCode(symbols, tuple(lengths), tuple(codes))


def code_stats(code: HuffmanCode, freqs):
    """Return ``(average codeword length, source entropy)`` in bits per symbol."""
    freqs = {float(s): int(c) for s, c in dict(freqs).items()}
    total = sum(freqs.values())
    avg = entropy = 0.0
    for s, c in freqs.items():
        p = c / total
        avg += p * code.lengths[int(code.index_of([s])[0])]
        entropy -= p * math.log2(p)
    return avg, entropy


@dataclass(frozen=True, eq=False)
class BitStream:
    words: np.ndarray  # uint64
    bit_length: int

    def __post_init__(self):
        if len(self.words) != -(-self.bit_length // WORD_BITS):
            raise ContainerError(f"{len(self.words)} words cannot hold exactly {self.bit_length} bits")

    def __eq__(self, other):
        return (isinstance(other, BitStream) and self.bit_length == other.bit_length
                and np.array_equal(self.words, other.words))

    @property
    def n_words(self) -> int:
        return len(self.words)

    def bits(self) -> str:
        """Payload as a '0'/'1' string (padding excluded); for debugging and tests."""
        s = "".join(format(int(w), "064b") for w in self.words)
        return s[: self.bit_length]


class BitWriter:
    """Append codewords MSB-first into 64-bit words."""

    def __init__(self):
        self._words = []
        self._acc = 0
        self._fill = 0
        self._bits = 0

    def write(self, code: int, length: int) -> None:
        self._bits += length
        self._acc = (self._acc << length) | code
        self._fill += length
        while self._fill >= WORD_BITS:
            self._fill -= WORD_BITS
            self._words.append(self._acc >> self._fill)
            self._acc &= (1 << self._fill) - 1

    def write_bits(self, bits: str) -> None:
        if bits:
            self.write(int(bits, 2), len(bits))

    def flush(self) -> BitStream:
        words = list(self._words)
        if self._fill:
            words.append(self._acc << (WORD_BITS - self._fill))
        return BitStream(np.array(words, dtype=np.uint64), self._bits)


def pack_codes(codes, lengths) -> BitStream:
    """Concatenate many codewords at once (vectorised :class:`BitWriter`)."""
    lengths = np.asarray(lengths, dtype=np.int64)
    total = int(lengths.sum())
    if total == 0:
        return BitStream(np.zeros(0, dtype=np.uint64), 0)
    if lengths.max() > WORD_BITS:
        writer = BitWriter()
        for c, n in zip(list(codes), lengths.tolist()):
            writer.write(int(c), n)
        return writer.flush()
    codes = np.asarray(codes, dtype=np.uint64)
    owner = np.repeat(np.arange(len(lengths)), lengths)
    starts = np.cumsum(lengths) - lengths
    shift = (lengths[owner] - 1 - (np.arange(total) - starts[owner])).astype(np.uint64)
    bits = ((codes[owner] >> shift) & np.uint64(1)).astype(np.uint8)
    packed = np.packbits(bits)
    pad = (-len(packed)) % 8
    packed = np.concatenate([packed, np.zeros(pad, dtype=np.uint8)])
    return BitStream(packed.view(">u8").astype(np.uint64), total)


def next_code_word(S: int, rem, oset: int, code: HuffmanCode, remaining: int):
    """Decode the next codeword from the 64-bit word ``S``.

    ``rem`` is ``None`` or a ``(bits, nbits)`` prefix left over from the
    previous word; ``oset`` is the bit offset into ``S`` (0 = MSB). Returns
    ``(symbol_index, rem, oset)``. The symbol index is ``None`` when
    ``remaining`` is 0 or when ``S`` runs out mid-codeword; in the latter
    case the partial codeword is returned as ``rem`` and ``oset`` is reset
    to 0 for the next word.
    """
    if remaining <= 0:
        return None, rem, oset
    acc, n = rem if rem is not None else (0, 0)
    limit, base, max_len = code._limit, code._base, code.max_len
    while oset < WORD_BITS:
        acc = (acc << 1) | ((S >> (WORD_BITS - 1 - oset)) & 1)
        oset += 1
        n += 1
        if n > max_len:
            raise CorruptStreamError(f"no codeword matches the {n}-bit prefix {acc:0{n}b}")
        if acc < limit[n]:
            return code._by_code[base[n] + acc], None, oset
    return None, ((acc, n) if n else None), 0


def encode_symbols(code: HuffmanCode, indices) -> BitStream:
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        return BitStream(np.zeros(0, dtype=np.uint64), 0)
    if code.max_len <= WORD_BITS:
        codes = np.asarray(code.codes, dtype=np.uint64)
    else:
        codes = np.asarray(code.codes, dtype=object)
    return pack_codes(codes[indices], np.asarray(code.lengths, dtype=np.int64)[indices])


#: widest codeword for which :func:`decode_symbols` uses a flat lookup table
TABLE_BITS = 20


def decode_symbols(stream: BitStream, code: HuffmanCode, count: int) -> np.ndarray:
    """Decode exactly ``count`` symbol indices from ``stream``."""
    if count == 0:
        if stream.bit_length:
            raise CorruptStreamError("payload bits present but no symbols declared")
        return np.zeros(0, dtype=np.int64)
    if code.max_len <= TABLE_BITS:
        return _decode_table(stream, code, count)
    out = []
    rem, decoded = None, 0
    for S in stream.words.tolist():
        oset = 0
        while True:
            z, rem, oset = next_code_word(S, rem, oset, code, count - decoded)
            if z is None:
                break
            out.append(z)
            decoded += 1
    if decoded != count:
        raise CorruptStreamError(f"stream ended after {decoded} of {count} symbols")
    return np.array(out, dtype=np.int64)


def _decode_table(stream, code, count):
    L = code.max_len
    total = stream.bit_length
    bits = np.unpackbits(stream.words.astype(">u8").view(np.uint8))[:total].astype(np.int64)
    padded = np.concatenate([bits, np.zeros(L, dtype=np.int64)])
    window = np.zeros(total, dtype=np.int64)
    for j in range(L):
        window = (window << 1) | padded[j: j + total]
    table_sym, table_len = code.decode_table()
    syms = table_sym[window].tolist()
    lens = table_len[window].tolist()
    out = [0] * count
    pos = 0
    for t in range(count):
        if pos >= total:
            raise CorruptStreamError(f"stream ended after {t} of {count} symbols")
        n = lens[pos]
        if n == 0:
            raise CorruptStreamError(f"no codeword matches the bits at offset {pos}")
        out[t] = syms[pos]
        pos += n
    if pos > total:
        raise CorruptStreamError("last codeword runs past the payload")
    return np.array(out, dtype=np.int64)


def serialize_code(code: HuffmanCode) -> bytes:
    """``u32`` symbol count, then per symbol ``f64`` value and ``u8`` length."""
    parts = [struct.pack("<I", len(code))]
    for value, n in zip(code.symbols.tolist(), code.lengths):
        if n > 255:
            raise ValueError(f"codeword length {n} does not fit the table format")
        parts.append(struct.pack("<dB", value, n))
    return b"".join(parts)


def deserialize_code(buf, offset: int = 0):
    """Parse a code table; returns ``(code, next_offset)``."""
    try:
        (k,) = struct.unpack_from("<I", buf, offset)
        offset += 4
        symbols, lengths = [], []
        for _ in range(k):
            value, n = struct.unpack_from("<dB", buf, offset)
            offset += 9
            symbols.append(value)
            lengths.append(n)
    except struct.error as exc:
        raise ContainerError(f"truncated code table: {exc}") from exc
    if k == 0:
        return HuffmanCode(np.zeros(0), (), ()), offset
    if any(b <= a for a, b in zip(symbols, symbols[1:])):
        raise ContainerError("code table symbols are not strictly ascending")
    if any(n < 1 for n in lengths):
        raise ContainerError("zero-length codeword")
    kraft = sum(2.0 ** -n for n in lengths)
    if kraft > 1 + 1e-12:
        raise ContainerError("code table lengths violate the Kraft inequality")
    sym = np.array(symbols, dtype=np.float64)
    sym.setflags(write=False)
    codes, _ = _canonical_codes(lengths)
    return HuffmanCode(sym, tuple(lengths), tuple(codes)), offset
