"""Gray images, inclusive integral images and exact box sums."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

MAX_SIDE = 4096
COORD_BITS = 10
COORD_LIMIT = 1 << COORD_BITS


@dataclass(frozen=True)
class GrayImage:
    """8-bit single-channel raster, row-major, origin top-left."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ValueError(f"GrayImage needs a 2D array, got shape {data.shape}")
        h, w = data.shape
        if not (1 <= w <= MAX_SIDE and 1 <= h <= MAX_SIDE):
            raise ValueError(f"image size {w}x{h} outside 1..{MAX_SIDE}")
        if data.dtype != np.uint8:
            if data.size and (data.min() < 0 or data.max() > 255):
                raise ValueError("pixel values must lie in 0..255")
            data = data.astype(np.uint8)
        data = np.ascontiguousarray(data)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class IntegralImage:
    """Inclusive prefix sums: ``data[y, x]`` is the sum of ``I[0..y, 0..x]``."""

    data: np.ndarray

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def padded(self) -> np.ndarray:
        """int64 copy with a leading zero row and column, for vectorised lookups."""
        h, w = self.data.shape
        out = np.zeros((h + 1, w + 1), dtype=np.int64)
        out[1:, 1:] = self.data
        return out


@dataclass(frozen=True)
class Rect:
    """Inclusive pixel bounds ``[x0, x1] x [y0, y1]``."""

    x0: int
    y0: int
    x1: int
    y1: int

    def check(self, width: int, height: int) -> None:
        if not (0 <= self.x0 <= self.x1 < width and 0 <= self.y0 <= self.y1 < height):
            raise IndexError(f"{self} outside a {width}x{height} image")


def compute_integral(img: GrayImage) -> IntegralImage:
    # 4096*4096*255 < 2**32, so uint32 never wraps
    acc = img.data.astype(np.uint64).cumsum(axis=0).cumsum(axis=1)
    out = acc.astype(np.uint32)
    out.setflags(write=False)
    return IntegralImage(out)


def box_sum(ii: IntegralImage, r: Rect) -> int:
    """Exact sum of the source pixels inside ``r`` using at most four lookups."""
    r.check(ii.width, ii.height)
    d = ii.data
    total = int(d[r.y1, r.x1])
    if r.x0 > 0:
        total -= int(d[r.y1, r.x0 - 1])
    if r.y0 > 0:
        total -= int(d[r.y0 - 1, r.x1])
    if r.x0 > 0 and r.y0 > 0:
        total += int(d[r.y0 - 1, r.x0 - 1])
    return total


def pack_coord(x: int, y: int) -> int:
    """Pack a pixel coordinate into 20 bits, x in the low 10."""
    if not (0 <= x < COORD_LIMIT and 0 <= y < COORD_LIMIT):
        raise ValueError(f"coordinate ({x}, {y}) does not fit in 10+10 bits")
    return (y << COORD_BITS) | x


def unpack_coord(code: int) -> tuple[int, int]:
    if not 0 <= code < COORD_LIMIT * COORD_LIMIT:
        raise ValueError(f"packed coordinate {code} exceeds 20 bits")
    return code & (COORD_LIMIT - 1), code >> COORD_BITS


# --- PGM (binary P5, maxval 255) ---


def _pgm_tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    tokens: list[bytes] = []
    pos = 0
    n = len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos : pos + 1] == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(buf[start:pos])
    # exactly one whitespace byte separates header from raster
    return tokens, pos + 1


def read_pgm(path: str | os.PathLike) -> GrayImage:
    with open(path, "rb") as fh:
        buf = fh.read()
    try:
        tokens, offset = _pgm_tokens(buf, 4)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ValueError(f"{path}: malformed PGM header") from None
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 is supported, got {maxval}")
    raster = buf[offset : offset + width * height]
    if len(raster) != width * height:
        raise ValueError(f"{path}: raster truncated ({len(raster)} of {width * height} bytes)")
    data = np.frombuffer(raster, dtype=np.uint8).reshape(height, width)
    return GrayImage(data)


def write_pgm(path: str | os.PathLike, img: GrayImage) -> None:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.data.tobytes())
