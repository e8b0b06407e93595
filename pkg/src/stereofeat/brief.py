"""BRIEF descriptors on a 9x9 box-mean image, plus their file formats."""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .image import GrayImage, IntegralImage, Rect, box_sum, compute_integral, pack_coord, unpack_coord
from .surf import DEFAULT_TABLE, DEFAULT_THRESHOLD, Keypoint, ScaleTable, build_response_stack, nms

WINDOW = 49
BITS = 128
HALF_WINDOW = WINDOW // 2
MEAN_RADIUS = 4
BORDER = HALF_WINDOW + MEAN_RADIUS
DEFAULT_SEED = 0x5EED_B21E
RECORD_SIZE = 20
PATTERN_MAGIC = "brief-pattern"


class FormatError(ValueError):
    """Malformed pattern or descriptor file."""


@dataclass(frozen=True)
class SamplePattern:
    pairs: tuple[tuple[tuple[int, int], tuple[int, int]], ...]
    seed: int
    window: int = WINDOW

    def __post_init__(self):
        if len(self.pairs) != BITS:
            raise ValueError(f"pattern needs {BITS} pairs, got {len(self.pairs)}")
        lim = self.window // 2
        for (a, b), (c, d) in self.pairs:
            if max(abs(a), abs(b), abs(c), abs(d)) > lim:
                raise ValueError(f"pair offset outside [-{lim}, {lim}]")

    def offsets(self) -> np.ndarray:
        """(128, 4) int array of ``dx1, dy1, dx2, dy2``."""
        return np.array([[a, b, c, d] for (a, b), (c, d) in self.pairs], dtype=np.int64)


def gen_pattern(seed: int = DEFAULT_SEED) -> SamplePattern:
    """Isotropic Gaussian pair placement, sigma = window / 5, rounded and clamped."""
    rng = np.random.default_rng(seed)
    sigma = WINDOW / 5
    pairs = []
    while len(pairs) < BITS:
        p = np.clip(np.rint(rng.normal(0.0, sigma, size=4)), -HALF_WINDOW, HALF_WINDOW).astype(int)
        first, second = (int(p[0]), int(p[1])), (int(p[2]), int(p[3]))
        if first == second:
            continue
        pairs.append((first, second))
    return SamplePattern(tuple(pairs), seed)


def write_pattern(path: str | os.PathLike, pat: SamplePattern) -> None:
    lines = [f"{PATTERN_MAGIC} v1 seed={pat.seed} n={pat.window} m={BITS}"]
    lines += [f"{a} {b} {c} {d}" for (a, b), (c, d) in pat.pairs]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_pattern(text: str) -> SamplePattern:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty pattern file")
    head = lines[0].split()
    if len(head) != 5 or head[0] != PATTERN_MAGIC or head[1] != "v1":
        raise FormatError(f"bad pattern header: {lines[0]!r}")
    fields = dict(tok.split("=", 1) for tok in head[2:])
    if fields.get("n") != str(WINDOW) or fields.get("m") != str(BITS):
        raise FormatError(f"unsupported pattern geometry n={fields.get('n')} m={fields.get('m')}")
    body = lines[1:]
    if len(body) != BITS:
        raise FormatError(f"expected {BITS} pair lines, got {len(body)}")
    pairs = []
    for i, ln in enumerate(body, start=2):
        try:
            a, b, c, d = (int(t) for t in ln.split())
        except ValueError:
            raise FormatError(f"line {i}: expected four integers, got {ln!r}") from None
        pairs.append(((a, b), (c, d)))
    try:
        return SamplePattern(tuple(pairs), int(fields["seed"]))
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def read_pattern(path: str | os.PathLike) -> SamplePattern:
    with open(path) as fh:
        return parse_pattern(fh.read())


def default_pattern() -> SamplePattern:
    """The pattern file shipped with the package (seed ``DEFAULT_SEED``)."""
    text = resources.files("stereofeat").joinpath("data/brief_pattern.txt").read_text()
    return parse_pattern(text)


def mean9(ii: IntegralImage, x: int, y: int) -> int:
    if not (MEAN_RADIUS <= x < ii.width - MEAN_RADIUS and MEAN_RADIUS <= y < ii.height - MEAN_RADIUS):
        raise IndexError(f"9x9 mean at ({x}, {y}) leaves the image")
    r = MEAN_RADIUS
    return box_sum(ii, Rect(x - r, y - r, x + r, y + r)) // 81


def mean9_plane(ii: IntegralImage) -> np.ndarray:
    """``mean9`` at every pixel; border pixels without full support are -1."""
    h, w = ii.height, ii.width
    out = np.full((h, w), -1, dtype=np.int64)
    r = MEAN_RADIUS
    if w <= 2 * r or h <= 2 * r:
        return out
    p = ii.padded()
    s = (
        p[2 * r + 1 : h + 1, 2 * r + 1 : w + 1]
        - p[: h - 2 * r, 2 * r + 1 : w + 1]
        - p[2 * r + 1 : h + 1, : w - 2 * r]
        + p[: h - 2 * r, : w - 2 * r]
    )
    out[r : h - r, r : w - r] = s // 81
    return out


@dataclass(frozen=True)
class Descriptor:
    bits: int  # bit i is the comparison of pair i
    coord: int  # packed 20-bit coordinate

    @property
    def xy(self) -> tuple[int, int]:
        return unpack_coord(self.coord)

    def to_bytes(self) -> bytes:
        return self.bits.to_bytes(16, "little") + self.coord.to_bytes(4, "little")


class DescriptorSet:
    """Descriptors as two little-endian uint64 words each, plus packed coordinates."""

    def __init__(self, words: np.ndarray, coords: np.ndarray):
        words = np.asarray(words, dtype=np.uint64).reshape(-1, 2)
        coords = np.asarray(coords, dtype=np.int64).reshape(-1)
        if len(words) != len(coords):
            raise ValueError("descriptor and coordinate counts differ")
        self.words = words
        self.coords = coords

    @classmethod
    def empty(cls) -> DescriptorSet:
        return cls(np.zeros((0, 2), np.uint64), np.zeros(0, np.int64))

    @classmethod
    def from_descriptors(cls, descs) -> DescriptorSet:
        descs = list(descs)
        mask = (1 << 64) - 1
        words = np.array([[d.bits & mask, d.bits >> 64] for d in descs], dtype=np.uint64).reshape(-1, 2)
        return cls(words, np.array([d.coord for d in descs], dtype=np.int64))

    def __len__(self) -> int:
        return len(self.coords)

    def __getitem__(self, i: int) -> Descriptor:
        lo, hi = (int(v) for v in self.words[i])
        return Descriptor(lo | (hi << 64), int(self.coords[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def __eq__(self, other) -> bool:
        if not isinstance(other, DescriptorSet):
            return NotImplemented
        return np.array_equal(self.words, other.words) and np.array_equal(self.coords, other.coords)

    def xy(self) -> np.ndarray:
        """(n, 2) array of pixel coordinates."""
        return np.stack([self.coords & 1023, self.coords >> 10], axis=1)

    def to_bytes(self) -> bytes:
        out = bytearray(struct.pack("<Q", len(self)))
        rec = np.zeros((len(self), RECORD_SIZE), dtype=np.uint8)
        rec[:, :16] = self.words.astype("<u8").view(np.uint8).reshape(-1, 16)
        rec[:, 16:] = self.coords.astype("<u4").view(np.uint8).reshape(-1, 4)
        out += rec.tobytes()
        return bytes(out)

    @classmethod
    def from_bytes(cls, buf: bytes) -> DescriptorSet:
        if len(buf) < 8:
            raise FormatError(f"byte offset {len(buf)}: missing 8-byte record count")
        (count,) = struct.unpack_from("<Q", buf, 0)
        body = len(buf) - 8
        if body != count * RECORD_SIZE:
            offset = 8 + min(body // RECORD_SIZE, count) * RECORD_SIZE
            raise FormatError(
                f"byte offset {offset}: header declares {count} records, body holds {body} bytes"
            )
        rec = np.frombuffer(buf, dtype=np.uint8, offset=8).reshape(count, RECORD_SIZE)
        words = rec[:, :16].copy().view("<u8").reshape(count, 2).astype(np.uint64)
        coords = rec[:, 16:].copy().view("<u4").reshape(count).astype(np.int64)
        bad = np.nonzero(coords >= 1 << 20)[0]
        if len(bad):
            raise FormatError(f"byte offset {8 + int(bad[0]) * RECORD_SIZE + 16}: coordinate exceeds 20 bits")
        return cls(words, coords)


def write_descriptors(path: str | os.PathLike, ds: DescriptorSet) -> None:
    with open(path, "wb") as fh:
        fh.write(ds.to_bytes())


def read_descriptors(path: str | os.PathLike) -> DescriptorSet:
    with open(path, "rb") as fh:
        buf = fh.read()
    try:
        return DescriptorSet.from_bytes(buf)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from None


def _has_support(kp: Keypoint, width: int, height: int) -> bool:
    return BORDER <= kp.x < width - BORDER and BORDER <= kp.y < height - BORDER


def describe(ii: IntegralImage, kp: Keypoint, pat: SamplePattern) -> Descriptor:
    if not _has_support(kp, ii.width, ii.height):
        raise IndexError(f"keypoint ({kp.x}, {kp.y}) within {BORDER}px of the border")
    bits = 0
    for i, ((dx1, dy1), (dx2, dy2)) in enumerate(pat.pairs):
        if mean9(ii, kp.x + dx1, kp.y + dy1) > mean9(ii, kp.x + dx2, kp.y + dy2):
            bits |= 1 << i
    return Descriptor(bits, pack_coord(kp.x, kp.y))


def describe_all(ii: IntegralImage, keypoints: list[Keypoint], pat: SamplePattern) -> tuple[DescriptorSet, list[Keypoint], int]:
    """Vectorised ``describe`` over a keypoint list.

    Returns the descriptor set, the keypoints that kept full support, and the
    number dropped at the border.
    """
    kept = [k for k in keypoints if _has_support(k, ii.width, ii.height)]
    dropped = len(keypoints) - len(kept)
    if not kept:
        return DescriptorSet.empty(), kept, dropped
    means = mean9_plane(ii)
    xs = np.array([k.x for k in kept], dtype=np.int64)[:, None]
    ys = np.array([k.y for k in kept], dtype=np.int64)[:, None]
    off = pat.offsets()
    p1 = means[ys + off[:, 1], xs + off[:, 0]]
    p2 = means[ys + off[:, 3], xs + off[:, 2]]
    bits = p1 > p2  # (n, 128), column i is bit i
    packed = np.packbits(bits, axis=1, bitorder="little")
    words = packed.view("<u8").astype(np.uint64)
    coords = (ys[:, 0] << 10) | xs[:, 0]
    return DescriptorSet(words, coords), kept, dropped


@dataclass
class Extraction:
    keypoints: list[Keypoint]
    descriptors: DescriptorSet
    detected: int
    dropped: int


def extract(img: GrayImage, pattern: SamplePattern, threshold: int = DEFAULT_THRESHOLD, table: ScaleTable = DEFAULT_TABLE) -> Extraction:
    """Detect, then describe every keypoint with full window support."""
    if img.width > 1024 or img.height > 1024:
        raise ValueError("packed coordinates limit images to 1024x1024")
    ii = compute_integral(img)
    kps = nms(build_response_stack(ii, table), threshold)
    descs, kept, dropped = describe_all(ii, kps, pattern)
    return Extraction(kept, descs, len(kps), dropped)
