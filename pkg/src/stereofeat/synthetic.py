"""Offline test imagery: textured scenes and degraded copies with known geometry."""

from __future__ import annotations

import numpy as np
from scipy import fft, ndimage

from .image import GrayImage


def textured_scene(width: int = 640, height: int = 480, seed: int = 0, blobs: int = 400, grain: float = 6.0) -> GrayImage:
    """Random Gaussian blobs on a gradient plus smoothed noise grain, kept inside 20..235."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    img = 40.0 * xx / width + 30.0 * yy / height
    # grain keeps flat regions from producing identical descriptors
    noise = ndimage.gaussian_filter(rng.normal(0.0, 1.0, (height, width)), 2.0)
    img += grain * noise / max(noise.std(), 1e-12)
    for _ in range(blobs):
        cx, cy = rng.uniform(0, width), rng.uniform(0, height)
        sigma = rng.uniform(1.5, 7.0)
        amp = rng.uniform(-70.0, 90.0)
        r = int(4 * sigma) + 1
        x0, x1 = max(int(cx) - r, 0), min(int(cx) + r + 1, width)
        y0, y1 = max(int(cy) - r, 0), min(int(cy) + r + 1, height)
        if x0 >= x1 or y0 >= y1:
            continue
        d2 = (xx[y0:y1, x0:x1] - cx) ** 2 + (yy[y0:y1, x0:x1] - cy) ** 2
        img[y0:y1, x0:x1] += amp * np.exp(-d2 / (2 * sigma**2))
    img = 128.0 + (img - img.mean())
    return GrayImage(np.clip(np.rint(img), 20, 235).astype(np.uint8))


def shift_left(img: GrayImage, dx: int, fill: int = 128) -> GrayImage:
    """``out[y, x] = img[y, x + dx]``: content moves ``dx`` pixels to the left."""
    out = np.full_like(img.data, fill)
    out[:, : img.width - dx] = img.data[:, dx:]
    return GrayImage(out)


def translate(img: GrayImage, dx: int, dy: int, fill: int = 128) -> GrayImage:
    """``out[y + dy, x + dx] = img[y, x]``; matches the homography ``[[1,0,dx],[0,1,dy],[0,0,1]]``."""
    h, w = img.shape
    out = np.full_like(img.data, fill)
    sx0, sx1 = max(0, -dx), min(w, w - dx)
    sy0, sy1 = max(0, -dy), min(h, h - dy)
    if sx0 < sx1 and sy0 < sy1:
        out[sy0 + dy : sy1 + dy, sx0 + dx : sx1 + dx] = img.data[sy0:sy1, sx0:sx1]
    return GrayImage(out)


def blur(img: GrayImage, sigma: float) -> GrayImage:
    out = ndimage.gaussian_filter(img.data.astype(np.float64), sigma, mode="nearest")
    return GrayImage(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def brighten(img: GrayImage, offset: int) -> GrayImage:
    return GrayImage(np.clip(img.data.astype(np.int64) + offset, 0, 255).astype(np.uint8))


def jpeg_quantize(img: GrayImage, step: float = 24.0) -> GrayImage:
    """Blockwise 8x8 DCT with uniform coefficient quantisation (JPEG-like loss)."""
    h, w = img.shape
    hp, wp = -(-h // 8) * 8, -(-w // 8) * 8
    buf = np.pad(img.data.astype(np.float64) - 128.0, ((0, hp - h), (0, wp - w)), mode="edge")
    blocks = buf.reshape(hp // 8, 8, wp // 8, 8).transpose(0, 2, 1, 3)
    coef = fft.dctn(blocks, axes=(2, 3), norm="ortho")
    # coarser steps for higher frequencies
    ramp = 1.0 + np.add.outer(np.arange(8), np.arange(8)) / 4.0
    coef = np.rint(coef / (step * ramp)) * (step * ramp)
    rec = fft.idctn(coef, axes=(2, 3), norm="ortho").transpose(0, 2, 1, 3).reshape(hp, wp)[:h, :w] + 128.0
    return GrayImage(np.clip(np.rint(rec), 0, 255).astype(np.uint8))
