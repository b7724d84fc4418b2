"""Binary (P5) PGM reader/writer, 8- and 16-bit.

16-bit samples are big-endian per the Netpbm convention. Chosen for image
I/O because round-trips are trivially bit-exact with no codec dependency.
"""

import numpy as np

from pnp_online.errors import ConfigurationError


class PgmParseError(ConfigurationError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def _read_token(data, pos):
    # Skip whitespace and '#' comments, then read one token.
    while pos < len(data):
        ch = data[pos:pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
        else:
            break
    start = pos
    while pos < len(data) and not data[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise PgmParseError("unexpected end of header", start)
    return data[start:pos], pos


def read_pgm(path):
    """Read a P5 PGM file; returns a uint8 or uint16 2D array."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic, pos = _read_token(data, 0)
    if magic != b"P5":
        raise PgmParseError(f"not a P5 PGM file (magic {magic!r})", 0)
    fields = []
    for _ in range(3):
        token, pos = _read_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError:
            raise PgmParseError(f"non-integer header token {token!r}",
                                pos - len(token)) from None
    width, height, maxval = fields
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise PgmParseError("invalid dimensions or maxval", pos)
    pos += 1  # single whitespace byte after maxval
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    count = width * height
    raster = data[pos:pos + count * dtype.itemsize]
    if len(raster) != count * dtype.itemsize:
        raise PgmParseError("truncated raster", pos + len(raster))
    pixels = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return pixels.astype(np.uint16 if maxval > 255 else np.uint8)


def write_pgm(path, pixels, maxval=65535):
    """Write a 2D integer array as P5 PGM."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise ConfigurationError("PGM data must be 2D")
    if pixels.min() < 0 or pixels.max() > maxval:
        raise ConfigurationError("pixel values out of range for maxval")
    height, width = pixels.shape
    header = f"P5\n{width} {height}\n{maxval}\n".encode("ascii")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(pixels.astype(dtype).tobytes())


def image_to_pgm16(pixels):
    """Linear rescale of a float image to uint16; returns (data, lo, hi)."""
    pixels = np.asarray(pixels, dtype=float)
    lo = float(pixels.min())
    hi = float(pixels.max())
    if hi == lo:
        return np.zeros(pixels.shape, dtype=np.uint16), lo, hi
    scaled = np.round((pixels - lo) / (hi - lo) * 65535.0)
    return scaled.astype(np.uint16), lo, hi
