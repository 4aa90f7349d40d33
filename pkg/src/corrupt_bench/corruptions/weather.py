"""Fog (diamond-square plasma), snow, frost and spatter."""

from __future__ import annotations

import math
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from ..image_core import (
    ImageError,
    Rng64,
    clamp,
    convolve,
    gaussian_kernel,
    load_image,
    motion_kernel,
    sample_bilinear,
    to_grayscale,
)

# ---------------------------------------------------------------- fog


def diamond_square(k: int, roughness: float, rng: Rng64, *, normalize: bool = True) -> np.ndarray:
    """Plasma fractal on a ``(2**k + 1)``-square grid.

    Corners are seeded with ``U[0, 1)`` draws in the order top-left,
    top-right, bottom-left, bottom-right.  Each level runs a square step
    (cell centres) then a diamond step (edge midpoints); a new point is the
    mean of its available axis/diagonal neighbours plus ``roughness**level *
    U[-1, 1)``.  Within a step, displacements are drawn in row-major order.
    Diamond points on the border average their three in-grid neighbours.
    """
    if k < 1:
        raise ValueError("grid exponent must be >= 1")
    n = 2**k + 1
    gen = rng.gen
    g = np.zeros((n, n))
    g[0, 0], g[0, -1], g[-1, 0], g[-1, -1] = gen.random(4)
    step, level = n - 1, 0
    idx = np.arange(n)
    while step > 1:
        half = step // 2
        scale = roughness**level
        c = g[0:n:step, 0:n:step]
        centres = (c[:-1, :-1] + c[:-1, 1:] + c[1:, :-1] + c[1:, 1:]) / 4.0
        g[half:n:step, half:n:step] = centres + scale * gen.uniform(-1.0, 1.0, centres.shape)

        on = idx % half == 0
        odd = (idx // half) % 2 == 1
        mask = np.outer(on, on) & (np.add.outer(odd.astype(int), odd.astype(int)) == 1)
        ys, xs = np.nonzero(mask)
        total = np.zeros(ys.size)
        count = np.zeros(ys.size)
        for dy, dx in ((-half, 0), (half, 0), (0, -half), (0, half)):
            yy, xx = ys + dy, xs + dx
            ok = (yy >= 0) & (yy < n) & (xx >= 0) & (xx < n)
            total[ok] += g[yy[ok], xx[ok]]
            count[ok] += 1
        g[ys, xs] = total / count + scale * gen.uniform(-1.0, 1.0, ys.size)
        step, level = half, level + 1
    if normalize:
        lo, hi = g.min(), g.max()
        g = (g - lo) / (hi - lo) if hi > lo else np.zeros_like(g)
    return g


def plasma_exponent(h: int, w: int) -> int:
    return max(1, math.ceil(math.log2(max(h, w) - 1))) if max(h, w) > 2 else 1


def fog(img: np.ndarray, plasma_weight: float, roughness: float, seed: int) -> np.ndarray:
    """Blend a normalized plasma cloud into the image, scaled by peak luminance."""
    if not 0.0 <= plasma_weight < 1.0:
        raise ValueError("plasma weight must lie in [0, 1)")
    h, w = img.shape[:2]
    field = diamond_square(plasma_exponent(h, w), roughness, Rng64(seed).split("fog"))[:h, :w]
    peak = to_grayscale(img).max()
    out = (img + plasma_weight * peak * field[..., None]) / (1.0 + plasma_weight)
    return clamp(out)


# ---------------------------------------------------------------- snow


def snow_layer(shape: tuple[int, int], density: float, flake_size: float,
               motion_length: float, angle: float, rng: Rng64) -> np.ndarray:
    """Motion-streaked flake intensity map in ``[0, 1]``."""
    h, w = shape
    if density <= 0:
        return np.zeros((h, w))
    ch, cw = math.ceil(h / flake_size), math.ceil(w / flake_size)
    g = rng.gen.normal(size=(ch, cw))
    flakes = (g > ndtri(1.0 - min(density, 1.0))).astype(np.float64)
    ys = (np.arange(h) + 0.5) / flake_size - 0.5
    xs = (np.arange(w) + 0.5) / flake_size - 0.5
    layer = sample_bilinear(flakes, ys[:, None], xs[None, :])
    if motion_length > 1:
        layer = convolve(layer, motion_kernel(motion_length, angle), clamp_output=False)
        layer *= max(1.0, motion_length / flake_size)
    return np.clip(layer, 0.0, 1.0)


def snow(img: np.ndarray, density: float, flake_size: float, motion_length: float,
         angle: float, blend: float, seed: int) -> np.ndarray:
    """Streaked flakes added over a base lifted toward brightened grayscale.

    ``base = (1 - blend) * img + blend * max(img, 1.5 * Y + 0.5)`` never drops
    below ``img``, so snow only ever brightens a pixel.
    """
    if not 0.0 < blend <= 1.0:
        raise ValueError("blend must lie in (0, 1]")
    lifted = np.maximum(img, (1.5 * to_grayscale(img) + 0.5)[..., None])
    base = (1.0 - blend) * img + blend * lifted
    layer = snow_layer(img.shape[:2], density, flake_size, motion_length, angle,
                       Rng64(seed).split("snow"))
    return clamp(base + layer[..., None])


# ---------------------------------------------------------------- frost

FROST_TEXTURE_COUNT = 6
FROST_TEXTURE_SIZE = 512
_FROST_TINT = np.array([0.86, 0.93, 1.0])


def _splat(canvas: np.ndarray, ys: np.ndarray, xs: np.ndarray, val: np.ndarray) -> None:
    n = canvas.shape[0]
    y0, x0 = np.floor(ys).astype(np.int64), np.floor(xs).astype(np.int64)
    fy, fx = ys - y0, xs - x0
    for dy, dx, wt in ((0, 0, (1 - fy) * (1 - fx)), (0, 1, (1 - fy) * fx),
                       (1, 0, fy * (1 - fx)), (1, 1, fy * fx)):
        yy, xx = (y0 + dy) % n, (x0 + dx) % n
        np.add.at(canvas, (yy, xx), wt * val)


def _frost_crystals(size: int, rng: Rng64) -> np.ndarray:
    gen = rng.gen
    seg_y, seg_x, seg_v = [], [], []
    stack = []
    for _ in range(max(1, int(size * size / 6000))):
        y, x = gen.uniform(0, size, 2)
        for _ in range(gen.integers(4, 8)):
            stack.append((y, x, gen.uniform(0, 2 * np.pi), gen.uniform(15, 60), 1.0, 0))
    while stack:
        y, x, theta, length, inten, depth = stack.pop()
        steps = max(2, int(length))
        t = np.arange(steps, dtype=np.float64)
        wobble = np.cumsum(gen.normal(0.0, 0.04, steps))
        ang = theta + wobble
        ys = y + np.cumsum(np.sin(ang))
        xs = x + np.cumsum(np.cos(ang))
        seg_y.append(ys)
        seg_x.append(xs)
        seg_v.append(inten * (1.0 - 0.5 * t / steps))
        if depth < 3:
            for j in range(int(gen.integers(2, 5))):
                p = int(gen.integers(steps // 4, steps))
                side = 1 if j % 2 == 0 else -1
                stack.append((ys[p], xs[p], ang[p] + side * np.pi / 3 + gen.normal(0, 0.1),
                              length * gen.uniform(0.3, 0.6), inten * 0.75, depth + 1))
    canvas = np.zeros((size, size))
    _splat(canvas, np.concatenate(seg_y) % size, np.concatenate(seg_x) % size,
           np.concatenate(seg_v))
    return canvas


@lru_cache(maxsize=8)
def procedural_frost_texture(index: int, size: int = FROST_TEXTURE_SIZE) -> np.ndarray:
    """One of the built-in seeded ice-crystal textures, RGB in ``[0, 1]``."""
    if not 0 <= index < FROST_TEXTURE_COUNT:
        raise ValueError(f"frost texture index must be < {FROST_TEXTURE_COUNT}")
    rng = Rng64(0x46524F5354 + index)
    crystals = _frost_crystals(size, rng.split("crystals"))
    crystals = convolve(crystals, gaussian_kernel(0.8), clamp_output=False)
    crystals /= np.quantile(crystals, 0.995) + 1e-12
    haze = diamond_square(plasma_exponent(size, size), 0.55, rng.split("haze"))[:size, :size]
    grain = convolve(rng.split("grain").gen.random((size, size)), gaussian_kernel(1.2),
                     clamp_output=False)
    tex = np.clip(0.75 * crystals, 0, 1) + 0.35 * haze + 0.25 * (grain - grain.mean())
    tex = np.clip(tex, 0.0, 1.0)
    out = tex[..., None] * _FROST_TINT
    out.setflags(write=False)
    return out


def load_frost_textures(directory) -> list[tuple[str, np.ndarray]]:
    paths = sorted(Path(directory).glob("*.png"))
    if not paths:
        raise FileNotFoundError(f"no PNG textures in {directory}")
    return [(p.name, load_image(p)) for p in paths]


def builtin_frost_textures() -> list[tuple[str, np.ndarray]]:
    return [(f"procedural:{i}", procedural_frost_texture(i)) for i in range(FROST_TEXTURE_COUNT)]


def choose_frost_texture(seed: int, count: int) -> int:
    return int(Rng64(seed).split("frost_texture").gen.integers(count))


def frost(img: np.ndarray, texture: np.ndarray, blend: float, seed: int) -> np.ndarray:
    """``clamp((1 - blend/2) * img + blend * crop)`` with a seeded crop of ``texture``."""
    if not 0.0 <= blend <= 1.0:
        raise ValueError("blend must lie in [0, 1]")
    h, w = img.shape[:2]
    th, tw = texture.shape[:2]
    if th < h or tw < w:
        raise ImageError("texture too small")
    gen = Rng64(seed).split("frost_crop").gen
    top = int(gen.integers(0, th - h + 1))
    left = int(gen.integers(0, tw - w + 1))
    crop = texture[top:top + h, left:left + w]
    return clamp((1.0 - blend / 2.0) * img + blend * crop)


# ---------------------------------------------------------------- spatter

_MUD = np.array([0.40, 0.29, 0.18])
_RAIN_TINT = np.array([0.18, 0.22, 0.32])


def spatter_mask(shape: tuple[int, int], coverage: float, blur_sigma: float, rng: Rng64) -> np.ndarray:
    """Boolean blob mask: blurred white noise above its analytic quantile.

    The threshold is ``ndtri(1 - coverage) * sqrt(sum(k**2))`` for the blur
    kernel ``k``, the exact standard deviation of blurred unit noise away
    from the border, so the expected covered fraction is ``coverage``.
    """
    if not 0.0 <= coverage <= 1.0:
        raise ValueError("coverage must lie in [0, 1]")
    k = gaussian_kernel(blur_sigma)
    field = convolve(rng.gen.normal(size=shape), k, clamp_output=False)
    thr = ndtri(1.0 - coverage) * math.sqrt(float((k.weights**2).sum()))
    return field > thr


def spatter(img: np.ndarray, coverage: float, blur_sigma: float, mode: str,
            opacity: float, seed: int) -> np.ndarray:
    """Rain droplets (translucent, blurred and tinted) or opaque mud blobs."""
    rng = Rng64(seed).split("spatter")
    mask = spatter_mask(img.shape[:2], coverage, blur_sigma, rng)
    soft = convolve(mask.astype(np.float64), gaussian_kernel(1.0), clamp_output=False)
    soft = np.clip(soft, 0.0, 1.0)[..., None]
    if mode == "rain":
        drops = clamp(convolve(img, gaussian_kernel(2.0)) * 0.85 + _RAIN_TINT)
        a = opacity * soft
        return clamp(img * (1.0 - a) + a * drops)
    if mode == "mud":
        shade = 0.85 + 0.3 * rng.split("mud").gen.random(img.shape[:2])[..., None]
        shade = convolve(shade, gaussian_kernel(1.5), clamp_output=False)
        a = opacity * soft
        return clamp(img * (1.0 - a) + a * _MUD * shade)
    raise ValueError(f"unknown spatter mode {mode!r}")
