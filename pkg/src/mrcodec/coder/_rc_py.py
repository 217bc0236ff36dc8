"""Pure-Python range coder, bit-identical twin of the compiled kernel.

Carry-propagating 32-bit range coder with 16-bit probability precision.
Every CDF row must start at 0, end at 65536, and be strictly increasing,
so each symbol carries at least one unit of probability mass.
"""

import numpy as np

_TOTAL_BITS = 16
_TOP = 1 << 24
_MASK32 = 0xFFFFFFFF


class PyRangeEncoder:
    def __init__(self):
        self.low = 0
        self.range_ = _MASK32
        self.cache = 0
        self.cache_size = 1
        self.out = bytearray()
        self._finished = False

    def _shift_low(self):
        low = self.low
        if low < 0xFF000000 or low > _MASK32:
            carry = low >> 32
            self.out.append((self.cache + carry) & 0xFF)
            for _ in range(self.cache_size - 1):
                self.out.append((0xFF + carry) & 0xFF)
            self.cache = (low >> 24) & 0xFF
            self.cache_size = 0
        self.cache_size += 1
        self.low = (low << 8) & _MASK32

    def encode(self, symbols, cdf_rows):
        if self._finished:
            raise RuntimeError("encoder already finished")
        symbols = np.ascontiguousarray(symbols, dtype=np.int64)
        cdf_rows = np.ascontiguousarray(cdf_rows, dtype=np.uint32)
        if symbols.ndim != 1 or cdf_rows.ndim != 2 or len(symbols) != len(cdf_rows):
            raise ValueError("need one CDF row per symbol")
        n, k = cdf_rows.shape
        low, range_ = self.low, self.range_
        for i in range(n):
            s = symbols[i]
            if s < 0 or s >= k - 1:
                raise ValueError(f"symbol {s} outside alphabet of size {k - 1}")
            row = cdf_rows[i]
            cum = int(row[s])
            freq = int(row[s + 1]) - cum
            r = range_ >> _TOTAL_BITS
            low += r * cum
            range_ = r * freq
            while range_ < _TOP:
                range_ <<= 8
                self.low = low
                self._shift_low()
                low = self.low
        self.low, self.range_ = low, range_

    def finish(self):
        if not self._finished:
            for _ in range(5):
                self._shift_low()
            self._finished = True
        return bytes(self.out)


class PyRangeDecoder:
    def __init__(self, data):
        self.data = bytes(data)
        if len(self.data) < 5:
            raise ValueError("truncated stream: missing coder state flush")
        # Skip the leading cache byte, then load the 32-bit state.
        self.pos = 5
        self.code = int.from_bytes(self.data[1:5], "big")
        self.range_ = _MASK32

    def _next_byte(self):
        if self.pos >= len(self.data):
            raise ValueError("truncated stream")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def decode(self, cdf_rows):
        cdf_rows = np.ascontiguousarray(cdf_rows, dtype=np.uint32)
        if cdf_rows.ndim != 2:
            raise ValueError("cdf_rows must be 2-D")
        n, k = cdf_rows.shape
        out = np.empty(n, dtype=np.int64)
        code, range_ = self.code, self.range_
        for i in range(n):
            row = cdf_rows[i]
            r = range_ >> _TOTAL_BITS
            v = code // r
            if v > 0xFFFF:
                v = 0xFFFF
            s = int(np.searchsorted(row, v, side="right")) - 1
            if s >= k - 1:
                s = k - 2
            out[i] = s
            cum = int(row[s])
            freq = int(row[s + 1]) - cum
            code -= r * cum
            range_ = r * freq
            while range_ < _TOP:
                code = ((code << 8) | self._next_byte()) & _MASK32
                range_ <<= 8
        self.code, self.range_ = code, range_
        return out
