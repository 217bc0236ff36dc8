# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled range coder kernel. Must stay bit-identical to _rc_py."""

from libc.stdint cimport uint8_t, uint32_t, uint64_t, int64_t

import numpy as np

DEF TOTAL_BITS = 16
DEF TOP = 1 << 24
DEF MASK32 = 0xFFFFFFFF


cdef class CRangeEncoder:
    cdef uint64_t low
    cdef uint64_t range_
    cdef uint64_t cache
    cdef uint64_t cache_size
    cdef bytearray out
    cdef bint _finished

    def __cinit__(self):
        self.low = 0
        self.range_ = MASK32
        self.cache = 0
        self.cache_size = 1
        self.out = bytearray()
        self._finished = False

    cdef void _shift_low(self):
        cdef uint64_t low = self.low
        cdef uint64_t carry
        cdef uint64_t i
        if low < 0xFF000000UL or low > MASK32:
            carry = low >> 32
            self.out.append(<uint8_t> ((self.cache + carry) & 0xFF))
            for i in range(self.cache_size - 1):
                self.out.append(<uint8_t> ((0xFF + carry) & 0xFF))
            self.cache = (low >> 24) & 0xFF
            self.cache_size = 0
        self.cache_size += 1
        self.low = (low << 8) & MASK32

    def encode(self, symbols, cdf_rows):
        if self._finished:
            raise RuntimeError("encoder already finished")
        cdef int64_t[::1] sym = np.ascontiguousarray(symbols, dtype=np.int64)
        cdef uint32_t[:, ::1] rows = np.ascontiguousarray(cdf_rows, dtype=np.uint32)
        if sym.shape[0] != rows.shape[0]:
            raise ValueError("need one CDF row per symbol")
        cdef Py_ssize_t n = rows.shape[0]
        cdef Py_ssize_t k = rows.shape[1]
        cdef uint64_t low = self.low
        cdef uint64_t range_ = self.range_
        cdef uint64_t r, cum, freq
        cdef int64_t s
        cdef Py_ssize_t i
        for i in range(n):
            s = sym[i]
            if s < 0 or s >= k - 1:
                raise ValueError(
                    f"symbol {s} outside alphabet of size {k - 1}")
            cum = rows[i, s]
            freq = rows[i, s + 1] - cum
            r = range_ >> TOTAL_BITS
            low += r * cum
            range_ = r * freq
            while range_ < TOP:
                range_ <<= 8
                self.low = low
                self._shift_low()
                low = self.low
        self.low = low
        self.range_ = range_

    def finish(self):
        if not self._finished:
            for _ in range(5):
                self._shift_low()
            self._finished = True
        return bytes(self.out)


cdef class CRangeDecoder:
    cdef const uint8_t[::1] data
    cdef bytes _keep
    cdef Py_ssize_t pos
    cdef uint64_t code
    cdef uint64_t range_

    def __cinit__(self, data):
        self._keep = bytes(data)
        self.data = self._keep
        if self.data.shape[0] < 5:
            raise ValueError("truncated stream: missing coder state flush")
        self.pos = 5
        self.code = (
            (<uint64_t> self.data[1] << 24)
            | (<uint64_t> self.data[2] << 16)
            | (<uint64_t> self.data[3] << 8)
            | <uint64_t> self.data[4]
        )
        self.range_ = MASK32

    def decode(self, cdf_rows):
        cdef uint32_t[:, ::1] rows = np.ascontiguousarray(cdf_rows, dtype=np.uint32)
        cdef Py_ssize_t n = rows.shape[0]
        cdef Py_ssize_t k = rows.shape[1]
        out_arr = np.empty(n, dtype=np.int64)
        cdef int64_t[::1] out = out_arr
        cdef uint64_t code = self.code
        cdef uint64_t range_ = self.range_
        cdef Py_ssize_t pos = self.pos
        cdef Py_ssize_t nbytes = self.data.shape[0]
        cdef uint64_t r, v, cum, freq
        cdef Py_ssize_t s, lo, hi, mid
        cdef Py_ssize_t i
        for i in range(n):
            r = range_ >> TOTAL_BITS
            v = code / r
            if v > 0xFFFF:
                v = 0xFFFF
            # rightmost s with rows[i, s] <= v
            lo = 0
            hi = k
            while lo < hi:
                mid = (lo + hi) >> 1
                if rows[i, mid] <= v:
                    lo = mid + 1
                else:
                    hi = mid
            s = lo - 1
            if s >= k - 1:
                s = k - 2
            out[i] = s
            cum = rows[i, s]
            freq = rows[i, s + 1] - cum
            code -= r * cum
            range_ = r * freq
            while range_ < TOP:
                if pos >= nbytes:
                    raise ValueError("truncated stream")
                code = ((code << 8) | self.data[pos]) & MASK32
                pos += 1
                range_ <<= 8
        self.code = code
        self.range_ = range_
        self.pos = pos
        return out_arr
