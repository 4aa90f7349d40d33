"""Defocus, Gaussian, motion, zoom and frosted-glass blur."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..image_core import (
    ImageError,
    Rng64,
    clamp,
    convolve,
    disk_kernel,
    gaussian_kernel,
    motion_kernel,
    reflect_index,
)


def defocus_blur(img: np.ndarray, radius: float) -> np.ndarray:
    return convolve(img, disk_kernel(radius))


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    return convolve(img, gaussian_kernel(sigma))


def motion_blur(img: np.ndarray, length: float, angle: float) -> np.ndarray:
    return convolve(img, motion_kernel(length, angle))


def glass_shuffle(img: np.ndarray, max_shift: int, iterations: int, rng: Rng64) -> np.ndarray:
    """Sequentially swap every interior pixel with a random neighbour.

    Interior pixels are visited in row-major order, ``iterations`` times; the
    partner is offset by integers drawn uniformly from ``[-max_shift,
    max_shift]`` on each axis.  Swaps are sequential, so a pixel moved early
    can move again later in the same pass.  The result is a permutation of
    the input pixels.
    """
    h, w = img.shape[:2]
    d = int(max_shift)
    flat = img.reshape(-1, img.shape[2]) if img.ndim == 3 else img.reshape(-1)
    if d <= 0 or iterations <= 0 or h <= 2 * d or w <= 2 * d:
        return img.copy()
    ys, xs = np.mgrid[d:h - d, d:w - d]
    base = (ys * w + xs).ravel()
    perm = list(range(h * w))
    for _ in range(int(iterations)):
        off = rng.gen.integers(-d, d + 1, size=(base.size, 2))
        partner = base + off[:, 0] * w + off[:, 1]
        for a, b in zip(base.tolist(), partner.tolist()):
            perm[a], perm[b] = perm[b], perm[a]
    return flat[np.asarray(perm)].reshape(img.shape)


def glass_blur(img: np.ndarray, sigma: float, max_shift: int, iterations: int, seed: int) -> np.ndarray:
    """Gaussian blur, local pixel shuffling, then a second Gaussian blur."""
    if max_shift < 0 or iterations < 0:
        raise ValueError("max_shift and iterations must be non-negative")
    k = gaussian_kernel(sigma)
    x = convolve(img, k)
    x = glass_shuffle(x, max_shift, iterations, Rng64(seed).split("glass_blur"))
    return convolve(x, k)


def _zoom_axis(n: int, z: float):
    c = (n - 1) / 2.0
    pos = c + (np.arange(n) - c) / z
    i0 = np.floor(pos)
    f = pos - i0
    i0 = i0.astype(np.int64)
    return reflect_index(i0, n), reflect_index(i0 + 1, n), f


def zoom_image(img: np.ndarray, z: float) -> np.ndarray:
    """Centre-crop by ``1/z`` and rescale back to full size (bilinear)."""
    h, w = img.shape[:2]
    ya, yb, fy = _zoom_axis(h, z)
    xa, xb, fx = _zoom_axis(w, z)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    rows = img[ya] * (1.0 - fy) + img[yb] * fy
    return rows[:, xa] * (1.0 - fx) + rows[:, xb] * fx


def zoom_ladder(z_max: float, step: float) -> list[float]:
    n = int(np.floor((z_max - 1.0) / step + 1e-9))
    return [round(1.0 + i * step, 10) for i in range(n + 1)]


def zoom_blur(img: np.ndarray, factors: Sequence[float]) -> np.ndarray:
    """Average of the image zoomed by each factor; the first factor must be 1."""
    factors = [float(z) for z in factors]
    if not factors or abs(factors[0] - 1.0) > 1e-12:
        raise ValueError("zoom factors must start at 1")
    if any(b <= a for a, b in zip(factors, factors[1:])):
        raise ValueError("zoom factors must be strictly increasing")
    h, w = img.shape[:2]
    if min(h, w) / factors[-1] < 2:
        raise ImageError(f"zoom factor {factors[-1]} leaves a crop below 2 px")
    acc = np.array(img, dtype=np.float64, copy=True)
    for z in factors[1:]:
        acc += zoom_image(img, z)
    return clamp(acc / len(factors))
