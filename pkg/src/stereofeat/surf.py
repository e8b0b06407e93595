"""Single-octave SURF detection on integer box filters.

Scores are exact int64 values:

    score = (100 * Dxx * Dyy - 81 * Dxy**2) * weight[s]

``Dxx``, ``Dyy`` and ``Dxy`` are raw box-filter sums, the 81/100 factor is
omega**2 with omega = 0.9, and ``weight[s]`` is an integer approximation of
``2**16 * (L_max / L_s)**4`` that puts every scale on the footing of the
largest filter. A multiplicative weight keeps the score homogeneous of degree
two in intensity gain; a truncating division would not.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .image import GrayImage, IntegralImage, Rect, box_sum, compute_integral

SCALES = (1.2, 2.0, 2.8, 3.6, 4.4, 5.2, 6.0, 6.4)
FILTER_SIZES = (9, 15, 21, 27, 33, 39, 45, 47)
WEIGHT_BITS = 16
INT64_MIN = np.iinfo(np.int64).min
INT64_MAX = np.iinfo(np.int64).max

# Calibrated on the 40x40 white square; see README.
DEFAULT_THRESHOLD = 10**14

# (dx0, dy0, dx1, dy1, weight), inclusive offsets from the filter centre
Lobe = tuple[int, int, int, int, int]


def hessian_det(dxx: int, dyy: int, dxy: int) -> int:
    """100 * det(H) with the 0.9 correction on the mixed term."""
    return 100 * dxx * dyy - 81 * dxy * dxy


def box_lobes(size: int) -> dict[str, list[Lobe]]:
    """Lobe layout of the Dxx, Dyy and Dxy box filters with side ``size``.

    Dxx has three ``l`` x ``h`` lobes weighted +1, -2, +1 with ``l = size // 3``
    and ``h`` the odd number nearest ``2 * size / 3 - 1``. Dxy has four
    ``q`` x ``q`` quadrants, ``q = (size + 1) // 3``, around a one-pixel cross.
    For sizes divisible by 3 this is the standard 9, 15, 21... layout.
    """
    lobe = size // 3
    if size % 2 == 0 or size < 9 or lobe % 2 == 0:
        raise ValueError(f"unsupported filter size {size}")
    h = 2 * size // 3 - 1
    if h % 2 == 0:
        h += 1
    a = lobe // 2
    b = h // 2
    q = (size + 1) // 3
    dxx = [
        (-a - lobe, -b, -a - 1, b, 1),
        (-a, -b, a, b, -2),
        (a + 1, -b, a + lobe, b, 1),
    ]
    dyy = [(y0, x0, y1, x1, w) for x0, y0, x1, y1, w in dxx]
    dxy = [
        (-q, -q, -1, -1, 1),
        (1, -q, q, -1, -1),
        (-q, 1, -1, q, -1),
        (1, 1, q, q, 1),
    ]
    return {"xx": dxx, "yy": dyy, "xy": dxy}


@dataclass(frozen=True)
class ScaleTable:
    scales: tuple[float, ...] = SCALES
    filter_sizes: tuple[int, ...] = FILTER_SIZES
    weights: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        scales = tuple(float(s) for s in self.scales)
        sizes = tuple(int(L) for L in self.filter_sizes)
        if len(scales) != 8 or len(sizes) != 8:
            raise ValueError("scale table must have exactly 8 entries")
        if any(b <= a for a, b in zip(scales, scales[1:])):
            raise ValueError("scales must be strictly increasing")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("filter sizes must be strictly increasing")
        for L in sizes:
            box_lobes(L)
        big = sizes[-1] ** 4 << WEIGHT_BITS
        weights = tuple((big + L**4 // 2) // L**4 for L in sizes)
        for L, w in zip(sizes, weights):
            if _score_bound(L) * w > INT64_MAX:
                raise ValueError(f"filter size {L} can overflow int64 scores")
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "filter_sizes", sizes)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return len(self.filter_sizes)

    def margin(self, s: int) -> int:
        return self.filter_sizes[s] // 2

    @property
    def max_size(self) -> int:
        return self.filter_sizes[-1]


def _score_bound(size: int) -> int:
    lobes = box_lobes(size)
    bound = {}
    for name, rects in lobes.items():
        pos = sum(w * (x1 - x0 + 1) * (y1 - y0 + 1) for x0, y0, x1, y1, w in rects if w > 0)
        bound[name] = pos * 255
    return 100 * bound["xx"] * bound["yy"] + 81 * bound["xy"] ** 2


DEFAULT_TABLE = ScaleTable()


@dataclass(frozen=True)
class Keypoint:
    x: int
    y: int
    scale_index: int
    score: int


@dataclass
class ResponseStack:
    width: int
    height: int
    responses: np.ndarray  # (8, H, W) int64, zero outside the valid margin
    margins: tuple[int, ...]

    def valid(self, s: int) -> np.ndarray:
        m = self.margins[s]
        mask = np.zeros((self.height, self.width), dtype=bool)
        if self.width > 2 * m and self.height > 2 * m:
            mask[m : self.height - m, m : self.width - m] = True
        return mask

    def is_valid(self, x: int, y: int, s: int) -> bool:
        m = self.margins[s]
        return m <= x < self.width - m and m <= y < self.height - m


def _filter_at(ii: IntegralImage, x: int, y: int, lobes: list[Lobe]) -> int:
    return sum(w * box_sum(ii, Rect(x + x0, y + y0, x + x1, y + y1)) for x0, y0, x1, y1, w in lobes)


def hessian_response(ii: IntegralImage, x: int, y: int, scale_index: int, table: ScaleTable = DEFAULT_TABLE) -> int:
    """Score of one pixel at one scale, evaluated lobe by lobe via ``box_sum``."""
    m = table.margin(scale_index)
    if not (m <= x < ii.width - m and m <= y < ii.height - m):
        raise IndexError(f"({x}, {y}) inside the {m}px border of scale {scale_index}")
    lobes = box_lobes(table.filter_sizes[scale_index])
    dxx = _filter_at(ii, x, y, lobes["xx"])
    dyy = _filter_at(ii, x, y, lobes["yy"])
    dxy = _filter_at(ii, x, y, lobes["xy"])
    return hessian_det(dxx, dyy, dxy) * table.weights[scale_index]


def _filter_plane(padded: np.ndarray, lobes: list[Lobe], m: int, h: int, w: int) -> np.ndarray:
    # padded has a zero first row/column, so the sum over [y0..y1] x [x0..x1]
    # is P[y1+1, x1+1] - P[y0, x1+1] - P[y1+1, x0] + P[y0, x0]
    out = np.zeros((h - 2 * m, w - 2 * m), dtype=np.int64)
    for x0, y0, x1, y1, wt in lobes:
        def at(dy, dx):
            return padded[m + dy : h - m + dy, m + dx : w - m + dx]

        s = at(y1 + 1, x1 + 1) - at(y0, x1 + 1) - at(y1 + 1, x0) + at(y0, x0)
        out += wt * s
    return out


def build_response_stack(ii: IntegralImage, table: ScaleTable = DEFAULT_TABLE) -> ResponseStack:
    h, w = ii.height, ii.width
    # every plane needs at least one valid cell
    need = table.max_size
    if w < need or h < need:
        raise ValueError(f"image {w}x{h} smaller than {need}x{need} required by filter size {need}")
    padded = ii.padded()
    responses = np.zeros((len(table), h, w), dtype=np.int64)
    for s, size in enumerate(table.filter_sizes):
        m = table.margin(s)
        lobes = box_lobes(size)
        dxx = _filter_plane(padded, lobes["xx"], m, h, w)
        dyy = _filter_plane(padded, lobes["yy"], m, h, w)
        dxy = _filter_plane(padded, lobes["xy"], m, h, w)
        responses[s, m : h - m, m : w - m] = (100 * dxx * dyy - 81 * dxy * dxy) * table.weights[s]
    margins = tuple(table.margin(s) for s in range(len(table)))
    return ResponseStack(w, h, responses, margins)


def nms(stack: ResponseStack, threshold: int) -> list[Keypoint]:
    """Keep cells strictly above all 26 valid neighbours and above ``threshold``.

    Only scales with a neighbour on both sides are eligible, and the cell must
    lie inside the valid margin of all three scales involved.
    """
    n = stack.responses.shape[0]
    masked = []
    for s in range(n):
        plane = np.where(stack.valid(s), stack.responses[s], INT64_MIN)
        masked.append(np.pad(plane, 1, constant_values=INT64_MIN))
    h, w = stack.height, stack.width
    found = []
    for s in range(1, n - 1):
        centre = stack.responses[s]
        best = np.full((h, w), INT64_MIN, dtype=np.int64)
        for t in (s - 1, s, s + 1):
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    if t == s and dy == 0 and dx == 0:
                        continue
                    np.maximum(best, masked[t][1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w], out=best)
        hit = stack.valid(s + 1) & (centre > best) & (centre > threshold)
        ys, xs = np.nonzero(hit)
        for y, x in zip(ys.tolist(), xs.tolist()):
            found.append(Keypoint(x, y, s, int(centre[y, x])))
    found.sort(key=lambda k: (k.y, k.x, k.scale_index))
    return found


def detect(img: GrayImage, threshold: int = DEFAULT_THRESHOLD, table: ScaleTable = DEFAULT_TABLE) -> list[Keypoint]:
    ii = compute_integral(img)
    return nms(build_response_stack(ii, table), threshold)


def write_keypoints_csv(path: str | os.PathLike, keypoints: list[Keypoint]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["x", "y", "scale_index", "score"])
        for k in keypoints:
            out.writerow([k.x, k.y, k.scale_index, k.score])


def read_keypoints_csv(path: str | os.PathLike) -> list[Keypoint]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [Keypoint(int(r["x"]), int(r["y"]), int(r["scale_index"]), int(r["score"])) for r in rows]
