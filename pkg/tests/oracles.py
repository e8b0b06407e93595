"""Brute-force reference implementations.

Deliberately naive and independent of the library's fast paths: explicit
loops, dense kernels painted pixel by pixel, exhaustive searches.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

SIZES = (9, 15, 21, 27, 33, 39, 45, 47)


def integral(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    out = np.zeros((h, w), dtype=np.int64)
    for y in range(h):
        for x in range(w):
            out[y, x] = int(img[: y + 1, : x + 1].astype(np.int64).sum())
    return out


def rect_sum(img: np.ndarray, x0, y0, x1, y1) -> int:
    total = 0
    for y in range(y0, y1 + 1):
        for x in range(x0, x1 + 1):
            total += int(img[y, x])
    return total


def dense_kernels(size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dxx, Dyy, Dxy as dense size x size integer kernels, centre at size // 2.

    Dxx: three side-by-side lobes of width size // 3, weights +1 -2 +1, all
    with odd height nearest 2 * size / 3 - 1. Dxy: four (size + 1) // 3
    squares off a one-pixel cross, +1 on the main diagonal quadrants.
    """
    c = size // 2
    lobe = size // 3
    height = round(2 * size / 3 - 1)
    if height % 2 == 0:
        height = height + 1 if (2 * size / 3 - 1) > height else height - 1
    q = (size + 1) // 3
    dxx = np.zeros((size, size), dtype=np.int64)
    left = c - lobe // 2 - lobe
    for col in range(3 * lobe):
        weight = -2 if lobe <= col < 2 * lobe else 1
        for row in range(c - height // 2, c + height // 2 + 1):
            dxx[row, left + col] = weight
    dyy = dxx.T.copy()
    dxy = np.zeros((size, size), dtype=np.int64)
    for dy in range(1, q + 1):
        for dx in range(1, q + 1):
            dxy[c - dy, c - dx] = 1
            dxy[c + dy, c + dx] = 1
            dxy[c - dy, c + dx] = -1
            dxy[c + dy, c - dx] = -1
    return dxx, dyy, dxy


def scale_weight(size: int, largest: int = 47) -> int:
    return round(Fraction(largest, size) ** 4 * 2**16)


def correlate_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    win = sliding_window_view(img.astype(np.int64), kernel.shape)
    return np.einsum("ijkl,kl->ij", win, kernel)


def hessian_plane(img: np.ndarray, size: int) -> np.ndarray:
    """Score at every pixel, zero where the kernel does not fit."""
    dxx, dyy, dxy = (correlate_valid(img, k) for k in dense_kernels(size))
    det = 100 * dxx * dyy - 81 * dxy * dxy
    out = np.zeros(img.shape, dtype=np.int64)
    m = size // 2
    out[m : img.shape[0] - m, m : img.shape[1] - m] = det * scale_weight(size)
    return out


def nms_scan(responses: np.ndarray, margins, threshold: int) -> list[tuple[int, int, int, int]]:
    n, h, w = responses.shape

    def valid(x, y, s):
        m = margins[s]
        return m <= x < w - m and m <= y < h - m

    found = []
    for s in range(1, n - 1):
        for y in range(h):
            for x in range(w):
                if not (valid(x, y, s - 1) and valid(x, y, s) and valid(x, y, s + 1)):
                    continue
                v = responses[s, y, x]
                if v <= threshold:
                    continue
                is_max = True
                for t in (s - 1, s, s + 1):
                    for dy in (-1, 0, 1):
                        for dx in (-1, 0, 1):
                            if (t, dy, dx) == (s, 0, 0):
                                continue
                            if valid(x + dx, y + dy, t) and responses[t, y + dy, x + dx] >= v:
                                is_max = False
                if is_max:
                    found.append((x, y, s, int(v)))
    found.sort(key=lambda k: (k[1], k[0], k[2]))
    return found


def window_mean(img: np.ndarray, x: int, y: int) -> int:
    total = 0
    for yy in range(y - 4, y + 5):
        for xx in range(x - 4, x + 5):
            total += int(img[yy, xx])
    return total // 81


def descriptor_bits(img: np.ndarray, x: int, y: int, pairs) -> int:
    bits = 0
    for i, ((dx1, dy1), (dx2, dy2)) in enumerate(pairs):
        if window_mean(img, x + dx1, y + dy1) > window_mean(img, x + dx2, y + dy2):
            bits |= 1 << i
    return bits


def popcount_loop(a: int, b: int) -> int:
    return sum(((a >> i) & 1) != ((b >> i) & 1) for i in range(128))


def argmin_first(refs: list[int], cands: list[int]) -> list[tuple[int, int]]:
    out = []
    for r in refs:
        best_j, best_d = -1, 10**9
        for j, c in enumerate(cands):
            d = popcount_loop(r, c)
            if d < best_d:
                best_j, best_d = j, d
        out.append((best_j, best_d))
    return out


def brute_pairs(refs, cands, threshold, stereo=False, epsilon=1, max_disparity=128):
    """(a, b, distance, disparity) per surviving reference, reference order."""
    out = []
    ref_bits = [d.bits for d in refs]
    cand_bits = [d.bits for d in cands]
    if not ref_bits or not cand_bits:
        return out
    for i, (j, d) in enumerate(argmin_first(ref_bits, cand_bits)):
        if d > threshold:
            continue
        a, b = refs[i].xy, cands[j].xy
        if stereo:
            disp = a[0] - b[0]
            if abs(a[1] - b[1]) > epsilon or not 0 <= disp <= max_disparity:
                continue
            out.append((a, b, d, disp))
        else:
            out.append((a, b, d, None))
    return out
