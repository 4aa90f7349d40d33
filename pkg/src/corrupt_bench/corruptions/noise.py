"""Additive, Poisson, impulse and multiplicative noise."""

from __future__ import annotations

import numpy as np

from ..image_core import Rng64, clamp


def add_gaussian_noise(img: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    gen = Rng64(seed).split("gaussian_noise").gen
    return clamp(img + gen.normal(0.0, sigma, size=img.shape))


def add_shot_noise(img: np.ndarray, photon_scale: float, seed: int) -> np.ndarray:
    """``Poisson(img * lam) / lam`` per sample."""
    if photon_scale <= 0:
        raise ValueError("photon scale must be positive")
    gen = Rng64(seed).split("shot_noise").gen
    return clamp(gen.poisson(img * photon_scale) / photon_scale)


def add_impulse_noise(img: np.ndarray, fraction: float, seed: int) -> np.ndarray:
    """Replace ``round(fraction * H * W)`` pixels, chosen without replacement.

    Each channel of a chosen pixel independently becomes 0 or 1 with equal
    probability (per-channel salt and pepper).
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("impulse fraction must lie in [0, 1]")
    h, w = img.shape[:2]
    n = int(round(fraction * h * w))
    out = np.array(img, dtype=np.float64, copy=True)
    if n == 0:
        return out
    gen = Rng64(seed).split("impulse_noise").gen
    idx = gen.choice(h * w, size=n, replace=False)
    salt = gen.integers(0, 2, size=(n, 3)).astype(np.float64)
    out.reshape(-1, 3)[idx] = salt
    return out


def add_speckle_noise(img: np.ndarray, sigma: float, seed: int) -> np.ndarray:
    """Multiplicative noise ``img + img * N(0, sigma^2)``; vanishes on black."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    gen = Rng64(seed).split("speckle_noise").gen
    return clamp(img + img * gen.normal(0.0, sigma, size=img.shape))
