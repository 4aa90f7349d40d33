"""Photometric adjustments, elastic warping, pixelation and JPEG artifacts."""

from __future__ import annotations

import math

import numpy as np

from ..image_core import (
    LUMA,
    Rng64,
    clamp,
    decode_image,
    encode_image,
    reflect_index,
    sample_bilinear,
)


def photometric(img: np.ndarray, mode: str, amount: float) -> np.ndarray:
    """Brightness shift, contrast scaling about the image mean, or chroma scaling.

    ``saturate`` splits each pixel into Rec.601 luma and the chroma residual
    ``rgb - Y`` and rescales only the residual.
    """
    if mode == "brightness":
        if not -1.0 < amount < 1.0:
            raise ValueError("brightness amount must lie in (-1, 1)")
        return clamp(img + amount)
    if mode == "contrast":
        if amount < 0:
            raise ValueError("contrast amount must be non-negative")
        m = img.mean()
        return clamp((img - m) * amount + m)
    if mode == "saturate":
        if amount < 0:
            raise ValueError("saturation amount must be non-negative")
        y = (img @ LUMA)[..., None]
        return clamp(y + (img - y) * amount)
    raise ValueError(f"unknown photometric mode {mode!r}")


def smooth_field(field: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian smoothing (radius ``ceil(3 sigma)``) with reflect borders.

    Unlike ``convolve`` this accepts kernels wider than the field; indices
    reflect repeatedly.
    """
    r = int(math.ceil(3.0 * sigma))
    ax = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    g /= g.sum()
    h, w = field.shape
    rows = reflect_index(np.arange(h)[:, None] + ax.astype(np.int64)[None, :], h)
    tmp = np.einsum("hkw,k->hw", field[rows], g)
    cols = reflect_index(np.arange(w)[:, None] + ax.astype(np.int64)[None, :], w)
    return np.einsum("hwk,k->hw", tmp[:, cols], g)


def elastic_field(shape: tuple[int, int], displacement: float, smoothing: float,
                  rng: Rng64) -> tuple[np.ndarray, np.ndarray]:
    """``(dy, dx)`` displacement maps: smoothed ``U[-1, 1]`` noise times ``displacement``.

    ``dx`` is drawn before ``dy``.
    """
    if smoothing <= 0:
        raise ValueError("smoothing must be positive")
    dx = rng.gen.uniform(-1.0, 1.0, size=shape)
    dy = rng.gen.uniform(-1.0, 1.0, size=shape)
    return (smooth_field(dy, smoothing) * displacement,
            smooth_field(dx, smoothing) * displacement)


def warp(img: np.ndarray, dy: np.ndarray, dx: np.ndarray) -> np.ndarray:
    """Gather ``img`` at ``(y + dy, x + dx)`` with bilinear interpolation."""
    h, w = img.shape[:2]
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    return clamp(sample_bilinear(img, yy + dy, xx + dx))


def elastic(img: np.ndarray, displacement: float, smoothing: float, seed: int) -> np.ndarray:
    if displacement < 0:
        raise ValueError("displacement must be non-negative")
    if displacement == 0:
        return np.array(img, dtype=np.float64, copy=True)
    dy, dx = elastic_field(img.shape[:2], displacement, smoothing, Rng64(seed).split("elastic"))
    return warp(img, dy, dx)


def pixelate(img: np.ndarray, factor: int) -> np.ndarray:
    """Box-average ``factor``-square blocks, then expand by nearest neighbour.

    Blocks are anchored at the top-left corner; partial blocks on the right
    and bottom edges average the pixels they contain.
    """
    f = int(factor)
    if f != factor or f < 1:
        raise ValueError("pixelate factor must be a positive integer")
    h, w = img.shape[:2]
    if h // f < 1 or w // f < 1:
        raise ValueError(f"pixelate factor {f} leaves a downscaled image below 1 px")
    if f == 1:
        return np.array(img, dtype=np.float64, copy=True)
    ys, xs = np.arange(0, h, f), np.arange(0, w, f)
    sums = np.add.reduceat(np.add.reduceat(img, ys, axis=0), xs, axis=1)
    cy = np.diff(np.append(ys, h))
    cx = np.diff(np.append(xs, w))
    means = sums / (cy[:, None, None] * cx[None, :, None])
    return clamp(np.repeat(np.repeat(means, cy, axis=0), cx, axis=1))


def jpeg_bytes(img: np.ndarray, quality: int) -> bytes:
    if not 1 <= quality <= 100:
        raise ValueError("JPEG quality must lie in [1, 100]")
    return encode_image(img, "JPEG", quality)


def jpeg_recompress(img: np.ndarray, quality: int) -> np.ndarray:
    """Round-trip through baseline JFIF at ``quality`` with 4:2:0 chroma."""
    return decode_image(jpeg_bytes(img, quality))
