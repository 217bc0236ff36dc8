"""Bit-exact entropy coding of integer symbol streams.

A compiled Cython kernel is preferred; a pure-Python twin with identical
byte output is selected automatically when the extension is unavailable.
Set ``MRC_CODER=py`` or ``MRC_CODER=c`` to force a backend.
"""

import os
from dataclasses import dataclass

import numpy as np

from . import _rc_py

try:
    from . import _rc_c
except ImportError:  # pragma: no cover - depends on build environment
    _rc_c = None

CDF_TOTAL = 1 << 16


class CoderError(ValueError):
    """Raised on malformed coder inputs or truncated streams."""


def _pick_backend():
    forced = os.environ.get("MRC_CODER", "").lower()
    if forced == "py":
        return "py"
    if forced == "c":
        if _rc_c is None:
            raise ImportError("MRC_CODER=c but the compiled coder is not built")
        return "c"
    return "c" if _rc_c is not None else "py"


_BACKEND = _pick_backend()


def backend():
    """Name of the active kernel: 'c' (compiled) or 'py' (fallback)."""
    return _BACKEND


def available_backends():
    return ("c", "py") if _rc_c is not None else ("py",)


def _encoder_cls(which=None):
    which = which or _BACKEND
    return _rc_c.CRangeEncoder if which == "c" else _rc_py.PyRangeEncoder


def _decoder_cls(which=None):
    which = which or _BACKEND
    return _rc_c.CRangeDecoder if which == "c" else _rc_py.PyRangeDecoder


def _check_rows(cdf_rows):
    rows = np.ascontiguousarray(cdf_rows, dtype=np.uint32)
    if rows.ndim != 2 or rows.shape[1] < 2:
        raise CoderError("CDF rows must be 2-D with at least one symbol")
    if rows.size:
        if np.any(rows[:, 0] != 0) or np.any(rows[:, -1] != CDF_TOTAL):
            raise CoderError("CDF rows must span [0, 65536]")
        if np.any(np.diff(rows.astype(np.int64), axis=1) <= 0):
            raise CoderError("CDF rows must be strictly increasing")
    return rows


@dataclass(frozen=True)
class CodedStream:
    """Opaque coder payload plus the number of symbols it contains."""

    data: bytes
    symbol_count: int


class RangeEncoder:
    """Streaming encoder; ``encode`` may be called repeatedly before ``finish``."""

    def __init__(self, backend=None):
        self._impl = _encoder_cls(backend)()
        self.symbol_count = 0

    def encode(self, symbols, cdf_rows):
        rows = _check_rows(cdf_rows)
        symbols = np.ascontiguousarray(symbols, dtype=np.int64)
        if symbols.shape != (rows.shape[0],):
            raise CoderError("CDF/symbol count mismatch")
        try:
            self._impl.encode(symbols, rows)
        except ValueError as e:
            raise CoderError(str(e)) from e
        self.symbol_count += len(symbols)

    def finish(self):
        return self._impl.finish()


class RangeDecoder:
    """Streaming decoder; each ``decode`` call consumes one symbol per CDF row."""

    def __init__(self, data, backend=None):
        try:
            self._impl = _decoder_cls(backend)(bytes(data))
        except ValueError as e:
            raise CoderError(str(e)) from e

    def decode(self, cdf_rows):
        rows = _check_rows(cdf_rows)
        try:
            return self._impl.decode(rows)
        except ValueError as e:
            raise CoderError(str(e)) from e


def rc_encode(symbols, cdf_rows, backend=None):
    """Encode a symbol sequence against per-symbol CDF rows."""
    enc = RangeEncoder(backend)
    enc.encode(symbols, cdf_rows)
    return CodedStream(enc.finish(), enc.symbol_count)


def rc_decode(stream, cdf_rows, backend=None):
    """Decode ``stream`` back to symbols; rows must match the encoder's exactly."""
    data = stream.data if isinstance(stream, CodedStream) else stream
    rows = _check_rows(cdf_rows)
    if isinstance(stream, CodedStream) and stream.symbol_count != rows.shape[0]:
        raise CoderError("CDF/symbol count mismatch")
    dec = RangeDecoder(data, backend)
    return dec.decode(rows)
