"""File formats: PGM images (P5/P2, maxval 255) and CLF1 tensor files.

CLF1 is the lossless grid format: 4 ASCII magic bytes ``CLF1``, height and
width as unsigned 32-bit little-endian, then height*width IEEE-754 doubles,
little-endian, row-major. No padding, no trailing bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grid import FormatError, Grid, validate_grid

_WHITESPACE = b" \t\n\r\x0b\x0c"
_CLF1_MAGIC = b"CLF1"


def _read_tokens(data: bytes, path, count: int, start: int):
    """Read `count` whitespace-separated tokens starting at byte `start`.

    Skips PGM comments (# to end of line). Returns (tokens, end) where each
    token is (bytes, byte_offset) and `end` points just past the single
    whitespace byte terminating the last token.
    """
    tokens = []
    pos = start
    n = len(data)
    while len(tokens) < count:
        while pos < n:
            c = data[pos]
            if c in _WHITESPACE:
                pos += 1
            elif c == ord("#"):
                while pos < n and data[pos] != ord("\n"):
                    pos += 1
            else:
                break
        if pos >= n:
            raise FormatError(f"{path}: truncated header at byte {pos}")
        tok_start = pos
        while pos < n and data[pos] not in _WHITESPACE and data[pos] != ord("#"):
            pos += 1
        tokens.append((data[tok_start:pos], tok_start))
    if pos < n and data[pos] in _WHITESPACE:
        pos += 1
    return tokens, pos


def _parse_int(token: bytes, offset: int, path, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise FormatError(
            f"{path}: bad {what} {token!r} at byte {offset}") from None


def read_pgm(path) -> Grid:
    """Read a P5 (binary) or P2 (ASCII) PGM with maxval 255.

    Pixel value v maps to v / 255.0 exactly.
    """
    data = Path(path).read_bytes()
    if len(data) < 2:
        raise FormatError(f"{path}: missing magic at byte 0")
    magic = data[:2]
    if magic not in (b"P5", b"P2"):
        raise FormatError(
            f"{path}: unsupported magic {magic!r} at byte 0 (want P5 or P2)")
    tokens, payload_start = _read_tokens(data, path, 3, 2)
    (w_tok, w_off), (h_tok, h_off), (m_tok, m_off) = tokens
    width = _parse_int(w_tok, w_off, path, "width")
    height = _parse_int(h_tok, h_off, path, "height")
    maxval = _parse_int(m_tok, m_off, path, "maxval")
    if width < 1 or height < 1:
        raise FormatError(f"{path}: bad dimensions {width}x{height} at byte {w_off}")
    if maxval != 255:
        raise FormatError(f"{path}: maxval must be 255, got {maxval} at byte {m_off}")
    count = height * width

    if magic == b"P5":
        payload = data[payload_start:payload_start + count]
        if len(payload) < count:
            raise FormatError(
                f"{path}: truncated payload at byte {payload_start + len(payload)}, "
                f"expected {count} bytes")
        values = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    else:
        tokens, _ = _read_tokens(data, path, count, payload_start)
        values = np.empty(count, dtype=np.float64)
        for i, (tok, off) in enumerate(tokens):
            v = _parse_int(tok, off, path, "pixel")
            if not 0 <= v <= 255:
                raise FormatError(f"{path}: pixel value {v} out of range at byte {off}")
            values[i] = v
    return values.reshape(height, width) / 255.0


def write_pgm(grid, path) -> None:
    """Write a grid as binary P5 PGM: values clamped to [0, 1], then
    quantized with round(v * 255)."""
    arr = validate_grid(grid)
    quantized = np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    height, width = arr.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + quantized.tobytes())


def write_tensor(grid, path) -> None:
    """Write a grid in the lossless CLF1 format."""
    arr = validate_grid(grid)
    height, width = arr.shape
    payload = _CLF1_MAGIC + struct.pack("<II", height, width)
    Path(path).write_bytes(payload + arr.astype("<f8").tobytes())


def read_tensor(path) -> Grid:
    """Read a CLF1 file; round-trips through write_tensor bit-exactly."""
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise FormatError(f"{path}: missing magic at byte 0")
    if data[:4] != _CLF1_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r} at byte 0")
    if len(data) < 12:
        raise FormatError(f"{path}: truncated dimension header at byte {len(data)}")
    height, width = struct.unpack_from("<II", data, 4)
    if height < 1 or width < 1:
        raise FormatError(f"{path}: invalid dimensions {height}x{width} at byte 4")
    if height * width > (1 << 31):
        raise FormatError(f"{path}: dimension overflow {height}x{width} at byte 4")
    expected = height * width * 8
    payload = data[12:]
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload length mismatch at byte 12, "
            f"expected {expected} bytes, got {len(payload)}")
    arr = np.frombuffer(payload, dtype="<f8").reshape(height, width)
    arr = arr.astype(np.float64)
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise FormatError(f"{path}: non-finite value at byte {12 + 8 * bad}")
    return arr
