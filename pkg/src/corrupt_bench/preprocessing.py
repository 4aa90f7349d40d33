"""Input standardisation: CLAHE and noise-gated non-local means."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .image_core import LUMA, ImageError, as_image, clamp

# Rec.601 luma of i.i.d. per-channel noise has std sqrt(sum(LUMA**2)) times the channel std
LUMA_NOISE_GAIN = float(np.sqrt(np.sum(LUMA**2)))
MAD_TO_SIGMA = 0.6745
_HP = np.array([[1.0, -2.0, 1.0], [-2.0, 4.0, -2.0], [1.0, -2.0, 1.0]])
_HP_GAIN = float(np.sqrt(np.sum(_HP**2)))    # = 6
DEFAULT_GATE = 0.01


@dataclass(frozen=True)
class ClaheParams:
    tiles: tuple[int, int] = (8, 8)
    clip_limit: float = 2.0        # multiple of the uniform bin height; inf disables clipping
    bins: int = 256

    def __post_init__(self):
        if len(self.tiles) != 2 or min(self.tiles) < 2:
            raise ValueError("CLAHE needs at least a 2x2 tile grid")
        if not self.clip_limit >= 1:
            raise ValueError("clip limit must be >= 1")
        if self.bins < 2:
            raise ValueError("need at least 2 histogram bins")


@dataclass(frozen=True)
class NlMeansParams:
    patch_radius: int = 2
    search_radius: int = 5
    h_factor: float = 0.8

    def __post_init__(self):
        if not self.search_radius >= self.patch_radius >= 1:
            raise ValueError("need search_radius >= patch_radius >= 1")
        if self.h_factor <= 0:
            raise ValueError("h_factor must be positive")


def _tile_edges(n: int, parts: int) -> np.ndarray:
    return np.round(np.linspace(0, n, parts + 1)).astype(int)


def _tile_lut(bins_tile: np.ndarray, nbins: int, clip: float) -> np.ndarray | None:
    """Equalisation lookup for one tile, or None for a uniform tile."""
    hist = np.bincount(bins_tile.ravel(), minlength=nbins).astype(np.float64)
    if np.count_nonzero(hist) <= 1:
        return None
    n = hist.sum()
    if math.isfinite(clip):
        limit = clip * n / nbins
        excess = np.maximum(hist - limit, 0.0).sum()
        hist = np.minimum(hist, limit) + excess / nbins
    return np.cumsum(hist) / n


def clahe(img, params: ClaheParams = ClaheParams()) -> np.ndarray:
    """Tile-wise clipped histogram equalisation of Rec.601 luma.

    Each tile gets a lookup ``bin -> cumulative fraction`` from its clipped
    histogram (excess spread evenly over all bins).  Pixel values blend the
    lookups of the four nearest tile centres bilinearly; pixels outside the
    outermost centres use the nearest tiles only.  Chroma is kept by adding
    the luma change to every channel.
    """
    img = as_image(img, min_size=1)
    h, w = img.shape[:2]
    rows, cols = params.tiles
    if h < rows or w < cols:
        raise ImageError(f"image {w}x{h} smaller than the {rows}x{cols} tile grid")
    y = img @ LUMA
    nb = params.bins
    b = np.minimum((y * nb).astype(np.int64), nb - 1)
    ey, ex = _tile_edges(h, rows), _tile_edges(w, cols)
    luts = np.zeros((rows * cols, nb))
    ident = np.zeros(rows * cols, dtype=bool)
    for i in range(rows):
        for j in range(cols):
            lut = _tile_lut(b[ey[i]:ey[i + 1], ex[j]:ex[j + 1]], nb, params.clip_limit)
            if lut is None:
                ident[i * cols + j] = True
            else:
                luts[i * cols + j] = lut

    def axis(n, edges, parts):
        centres = (edges[:-1] + edges[1:] - 1) / 2.0
        g = np.interp(np.arange(n), centres, np.arange(parts))
        i0 = np.floor(g).astype(int)
        i1 = np.minimum(i0 + 1, parts - 1)
        return i0, i1, g - i0

    y0, y1, fy = axis(h, ey, rows)
    x0, x1, fx = axis(w, ex, cols)

    def mapped(ti, tj):
        t = ti[:, None] * cols + tj[None, :]
        return np.where(ident[t], y, luts[t, b])

    out = ((1 - fy)[:, None] * ((1 - fx)[None, :] * mapped(y0, x0) + fx[None, :] * mapped(y0, x1))
           + fy[:, None] * ((1 - fx)[None, :] * mapped(y1, x0) + fx[None, :] * mapped(y1, x1)))
    return clamp(img + (out - y)[..., None])


def estimate_noise_sigma(img) -> float:
    """Per-channel additive Gaussian sigma from the MAD of a 3x3 high-pass of luma.

    The filter annihilates locally linear intensity, so smooth image content
    barely contributes; the median makes edges count little.
    """
    img = as_image(img, min_size=1)
    if min(img.shape[:2]) < 16:
        raise ImageError("noise estimation needs at least 16x16 pixels")
    y = img @ LUMA
    hp = np.zeros((y.shape[0] - 2, y.shape[1] - 2))
    for dy in range(3):
        for dx in range(3):
            hp += _HP[dy, dx] * y[dy:dy + hp.shape[0], dx:dx + hp.shape[1]]
    mad = float(np.median(np.abs(hp)))
    return mad / MAD_TO_SIGMA / _HP_GAIN / LUMA_NOISE_GAIN


def nl_means(img, sigma: float, params: NlMeansParams = NlMeansParams()) -> np.ndarray:
    """Non-local means with weights ``exp(-max(d2 - 2 sigma^2, 0) / h^2)``.

    ``d2`` is the mean squared difference over a ``(2p+1)^2`` patch and all
    channels; ``h = h_factor * sigma``.  Weights are normalised over the
    search window, so every output sample is a convex combination of input
    samples from that window.
    """
    img = as_image(img, min_size=1)
    if sigma <= 0:
        return img.copy()
    p, r = params.patch_radius, params.search_radius
    hh = (params.h_factor * sigma) ** 2
    h, w = img.shape[:2]
    pad = np.pad(img, ((r + p, r + p), (r + p, r + p), (0, 0)), mode="symmetric")
    core = pad[r:r + h + 2 * p, r:r + w + 2 * p]
    acc = np.zeros_like(img)
    norm = np.zeros((h, w))
    size = 2 * p + 1
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            shifted = pad[r + dy:r + dy + h + 2 * p, r + dx:r + dx + w + 2 * p]
            d2 = ((shifted - core) ** 2).mean(axis=2)
            d2 = uniform_filter(d2, size=size, mode="nearest")[p:p + h, p:p + w]
            wt = np.exp(-np.maximum(d2 - 2.0 * sigma**2, 0.0) / hh)
            acc += wt[..., None] * shifted[p:p + h, p:p + w]
            norm += wt
    return acc / norm[..., None]


def denoise_gated(img, params: NlMeansParams = NlMeansParams(),
                  gate: float = DEFAULT_GATE) -> np.ndarray:
    """NL-means driven by the estimated noise level; identity below ``gate``."""
    img = as_image(img, min_size=1)
    sigma = estimate_noise_sigma(img)
    if sigma < gate:
        return img.copy()
    return nl_means(img, sigma, params)
