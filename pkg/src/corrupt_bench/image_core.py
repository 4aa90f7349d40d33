"""Pixel containers, deterministic randomness and shared filtering machinery.

Images are ``numpy.ndarray`` values of shape ``(H, W, 3)`` and dtype float64
with samples in ``[0, 1]``.  Every public function returns a fresh array and
clamps at exit, so callers can chain operations without re-validating.

Border handling everywhere is half-sample symmetric reflection
(``d c b a | a b c d | d c b a``), the same convention as ``numpy.pad`` with
``mode="symmetric"``.
"""

from __future__ import annotations

import hashlib
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import signal

MIN_SIZE = 8
MASK64 = (1 << 64) - 1
LUMA = np.array([0.299, 0.587, 0.114])


class ImageError(ValueError):
    """Raised for malformed or undersized images."""


# --------------------------------------------------------------------------
# ImageBuf helpers


def as_image(arr, *, min_size: int = MIN_SIZE) -> np.ndarray:
    """Validate and normalize ``arr`` into a float64 ``(H, W, 3)`` image.

    uint8 input is decoded by ``/255``; float input is clamped to ``[0, 1]``.
    Grayscale ``(H, W)`` input is broadcast to three channels.
    """
    a = np.asarray(arr)
    if a.ndim == 2:
        a = np.repeat(a[..., None], 3, axis=2)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ImageError(f"expected an (H, W, 3) image, got shape {a.shape}")
    h, w = a.shape[:2]
    if h < min_size or w < min_size:
        raise ImageError(f"image {w}x{h} below minimum size {min_size}x{min_size}")
    if a.dtype == np.uint8:
        return a.astype(np.float64) / 255.0
    a = a.astype(np.float64, copy=True)
    if not np.all(np.isfinite(a)):
        raise ImageError("image contains non-finite samples")
    return np.clip(a, 0.0, 1.0, out=a)


def clamp(img: np.ndarray) -> np.ndarray:
    return np.clip(img, 0.0, 1.0)


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(clamp(img) * 255.0).astype(np.uint8)


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """Rec.601 luma, ``Y = 0.299 R + 0.587 G + 0.114 B``."""
    return clamp(np.asarray(img, dtype=np.float64) @ LUMA)


def load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        im.load()
        return as_image(np.asarray(im.convert("RGB")))


def decode_image(data: bytes) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as im:
            im.load()
            return as_image(np.asarray(im.convert("RGB")))
    except (UnidentifiedImageError, OSError) as e:
        raise ImageError(f"cannot decode image data ({len(data)} bytes)") from e


def encode_image(img: np.ndarray, fmt: str = "PNG", quality: int = 85) -> bytes:
    """Encode to PNG, or to baseline JPEG with 4:2:0 chroma subsampling."""
    pil = Image.fromarray(to_uint8(img))
    buf = io.BytesIO()
    fmt = fmt.upper()
    if fmt in ("JPEG", "JPG"):
        pil.save(buf, format="JPEG", quality=int(quality), subsampling=2,
                 optimize=False, progressive=False)
    elif fmt == "PNG":
        pil.save(buf, format="PNG")
    else:
        raise ValueError(f"unsupported format {fmt!r}")
    return buf.getvalue()


def save_image(img: np.ndarray, path, quality: int = 85) -> None:
    path = Path(path)
    fmt = "JPEG" if path.suffix.lower() in (".jpg", ".jpeg") else "PNG"
    path.write_bytes(encode_image(img, fmt, quality))


def pixel_hash(img: np.ndarray) -> str:
    """sha256 over the 8-bit encoding of ``img`` (the decoded-pixel identity)."""
    return hashlib.sha256(to_uint8(img).tobytes()).hexdigest()


def center_crop_resize(img: np.ndarray, size: int) -> np.ndarray:
    """Center-crop to a square and resize to ``size``x``size`` (bicubic)."""
    h, w = img.shape[:2]
    s = min(h, w)
    top, left = (h - s) // 2, (w - s) // 2
    crop = to_uint8(img[top:top + s, left:left + s])
    pil = Image.fromarray(crop, mode="RGB")
    if s != size:
        pil = pil.resize((size, size), Image.BICUBIC)
    return as_image(np.asarray(pil))


# --------------------------------------------------------------------------
# Randomness


def hash64(*parts: bytes | str | int) -> int:
    """Stable 64-bit BLAKE2b digest of a tuple of byte strings, strings and ints.

    Each part is length-prefixed so ``("ab", "c")`` and ``("a", "bc")`` differ.
    """
    h = hashlib.blake2b(digest_size=8, person=b"corruptbench")
    for p in parts:
        if isinstance(p, int):
            b = (p & MASK64).to_bytes(8, "little")
        elif isinstance(p, str):
            b = p.encode("utf-8")
        else:
            b = bytes(p)
        h.update(len(b).to_bytes(4, "little"))
        h.update(b)
    return int.from_bytes(h.digest(), "little")


class Rng64:
    """Seeded generator with labelled substreams.

    The stream is numpy's PCG64 bit generator initialised from the 64-bit
    seed through ``SeedSequence``.  ``split(label)`` returns a child whose seed
    is ``hash64(seed, label)``, so children are independent of how much the
    parent has already been consumed.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self.gen = np.random.Generator(np.random.PCG64(self.seed))

    def split(self, label: str) -> "Rng64":
        return Rng64(hash64(self.seed, label))

    def __repr__(self) -> str:
        return f"Rng64(0x{self.seed:016x})"


# --------------------------------------------------------------------------
# Kernels and convolution


@dataclass(frozen=True, eq=False)
class Kernel2D:
    """Square, odd-sized, normalized point-spread function."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] % 2 == 0:
            raise ValueError(f"kernel must be square with odd side, got {w.shape}")
        if abs(w.sum() - 1.0) > 1e-6:
            raise ValueError(f"kernel weights sum to {w.sum():.8f}, expected 1")
        object.__setattr__(self, "weights", w)

    @property
    def radius(self) -> int:
        return self.weights.shape[0] // 2

    @classmethod
    def normalized(cls, w: np.ndarray) -> "Kernel2D":
        w = np.asarray(w, dtype=np.float64)
        return cls(w / w.sum())


IDENTITY = Kernel2D(np.ones((1, 1)))


def _trim(w: np.ndarray) -> np.ndarray:
    # drop all-zero outer rings, keeping the kernel centred
    while w.shape[0] > 1 and not (w[0].any() or w[-1].any() or w[:, 0].any() or w[:, -1].any()):
        w = w[1:-1, 1:-1]
    return w


def disk_kernel(radius: float) -> Kernel2D:
    """Filled disk indicator ``x^2 + y^2 <= radius^2``."""
    if radius <= 0:
        raise ValueError("disk radius must be positive")
    r = int(math.floor(radius))
    ax = np.arange(-r, r + 1)
    yy, xx = np.meshgrid(ax, ax, indexing="ij")
    return Kernel2D.normalized((xx**2 + yy**2 <= radius**2).astype(np.float64))


def gaussian_kernel(sigma: float) -> Kernel2D:
    """2-D Gaussian truncated at ``ceil(3 sigma)``."""
    if sigma <= 0:
        raise ValueError("gaussian sigma must be positive")
    r = int(math.ceil(3.0 * sigma))
    ax = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    return Kernel2D.normalized(np.outer(g, g))


def motion_kernel(length: float, angle: float) -> Kernel2D:
    """Antialiased line segment of ``length`` pixels centred on the origin.

    Each tap gets weight ``max(0, 1 - d)`` where ``d`` is the distance from
    the tap centre to the segment, which rasterizes axis-aligned segments
    exactly and spreads oblique ones over neighbouring taps.
    """
    if length <= 0:
        raise ValueError("motion length must be positive")
    half = (length - 1.0) / 2.0
    r = int(math.ceil(half)) + 1
    ax = np.arange(-r, r + 1, dtype=np.float64)
    yy, xx = np.meshgrid(ax, ax, indexing="ij")
    ux, uy = math.cos(angle), -math.sin(angle)  # image rows grow downward
    t = np.clip(xx * ux + yy * uy, -half, half)
    d = np.hypot(xx - t * ux, yy - t * uy)
    w = np.clip(1.0 - d, 0.0, None)
    w[np.abs(w) < 1e-12] = 0.0
    return Kernel2D.normalized(_trim(w))


def reflect_index(i: np.ndarray, n: int) -> np.ndarray:
    """Map integer indices onto ``[0, n)`` by half-sample symmetric reflection."""
    m = np.mod(i, 2 * n)
    return np.where(m >= n, 2 * n - 1 - m, m)


def convolve(img: np.ndarray, k: Kernel2D, *, clamp_output: bool = True) -> np.ndarray:
    """Per-channel 2-D convolution with symmetric-reflect borders."""
    k = k if isinstance(k, Kernel2D) else Kernel2D(k)
    img = np.asarray(img, dtype=np.float64)
    r = k.radius
    if r == 0:
        out = img * k.weights[0, 0]
        return clamp(out) if clamp_output else out
    h, w = img.shape[:2]
    if 2 * r + 1 > min(h, w):
        raise ImageError("kernel exceeds image extent")
    planes = img[..., None] if img.ndim == 2 else img
    padded = np.pad(planes, ((r, r), (r, r), (0, 0)), mode="symmetric")
    out = np.empty(planes.shape, dtype=np.float64)
    for c in range(planes.shape[2]):
        out[..., c] = signal.convolve(padded[..., c], k.weights, mode="valid")
    if img.ndim == 2:
        out = out[..., 0]
    return clamp(out) if clamp_output else out


def sample_bilinear(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Bilinear lookup of ``img`` at fractional ``(ys, xs)`` with reflect borders.

    ``ys`` and ``xs`` broadcast to the output grid; the channel axis is kept.
    """
    h, w = img.shape[:2]
    y0 = np.floor(ys)
    x0 = np.floor(xs)
    fy = (ys - y0)[..., None] if img.ndim == 3 else ys - y0
    fx = (xs - x0)[..., None] if img.ndim == 3 else xs - x0
    y0 = y0.astype(np.int64)
    x0 = x0.astype(np.int64)
    ya, yb = reflect_index(y0, h), reflect_index(y0 + 1, h)
    xa, xb = reflect_index(x0, w), reflect_index(x0 + 1, w)
    top = img[ya, xa] * (1.0 - fx) + img[ya, xb] * fx
    bot = img[yb, xa] * (1.0 - fx) + img[yb, xb] * fx
    return top * (1.0 - fy) + bot * fy
