"""Severity-indexed image corruptions.

``apply_corruption`` is the single entry point used by the dataset pipeline
and calibration; the kernel functions are exported for direct use.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..image_core import as_image
from .blur import defocus_blur, gaussian_blur, glass_blur, motion_blur, zoom_blur, zoom_ladder
from .digital import elastic, jpeg_recompress, photometric, pixelate
from .kinds import (
    ALL_KINDS,
    CORE_KINDS,
    EXTRA_KINDS,
    STOCHASTIC_KINDS,
    Category,
    CorruptionKind,
    kinds_for,
)
from .noise import add_gaussian_noise, add_impulse_noise, add_shot_noise, add_speckle_noise
from .table import SEVERITIES, SeverityTable, SeverityTableError, load_table
from .weather import builtin_frost_textures, choose_frost_texture, fog, frost, snow, spatter

__all__ = [
    "ALL_KINDS", "CORE_KINDS", "EXTRA_KINDS", "STOCHASTIC_KINDS", "SEVERITIES",
    "Category", "CorruptionKind", "SeverityTable", "SeverityTableError",
    "apply_corruption", "frost_texture_for", "kinds_for", "load_table",
]

Textures = Sequence[tuple[str, np.ndarray]]


def frost_texture_for(seed: int, textures: Textures | None = None) -> tuple[str, np.ndarray]:
    """The ``(texture id, texture)`` pair the frost kernel uses for ``seed``."""
    textures = textures or builtin_frost_textures()
    return textures[choose_frost_texture(seed, len(textures))]


def apply_corruption(img, kind, severity: int, seed: int = 0, *,
                     table: SeverityTable | None = None,
                     textures: Textures | None = None) -> np.ndarray:
    """Corrupt ``img`` with ``kind`` at ``severity`` using parameters from ``table``.

    Severity 0 returns a copy of the input.  Deterministic kinds ignore
    ``seed``.  ``textures`` overrides the built-in frost textures.
    """
    img = as_image(img)
    kind = CorruptionKind(kind) if not isinstance(kind, CorruptionKind) else kind
    if severity == 0:
        return img.copy()
    table = table or load_table()
    p = table.params(kind, severity)
    K = CorruptionKind
    if kind is K.GAUSSIAN_NOISE:
        return add_gaussian_noise(img, p["sigma"], seed)
    if kind is K.SHOT_NOISE:
        return add_shot_noise(img, p["photon_scale"], seed)
    if kind is K.IMPULSE_NOISE:
        return add_impulse_noise(img, p["fraction"], seed)
    if kind is K.SPECKLE_NOISE:
        return add_speckle_noise(img, p["sigma"], seed)
    if kind is K.DEFOCUS_BLUR:
        return defocus_blur(img, p["radius"])
    if kind is K.GAUSSIAN_BLUR:
        return gaussian_blur(img, p["sigma"])
    if kind is K.GLASS_BLUR:
        return glass_blur(img, p["sigma"], p["max_shift"], p["iterations"], seed)
    if kind is K.MOTION_BLUR:
        return motion_blur(img, p["length"], p["angle"])
    if kind is K.ZOOM_BLUR:
        return zoom_blur(img, zoom_ladder(p["z_max"], p["step"]))
    if kind is K.SNOW:
        return snow(img, p["density"], p["flake_size"], p["motion_length"], p["angle"],
                    p["blend"], seed)
    if kind is K.FROST:
        _, tex = frost_texture_for(seed, textures)
        return frost(img, tex, p["blend"], seed)
    if kind is K.FOG:
        return fog(img, p["plasma_weight"], p["roughness"], seed)
    if kind is K.SPATTER:
        return spatter(img, p["coverage"], p["blur_sigma"], p["mode"], p["opacity"], seed)
    if kind in (K.BRIGHTNESS, K.CONTRAST, K.SATURATE):
        mode = {K.BRIGHTNESS: "brightness", K.CONTRAST: "contrast", K.SATURATE: "saturate"}[kind]
        return photometric(img, mode, p["amount"])
    if kind is K.ELASTIC:
        return elastic(img, p["displacement"], p["smoothing"], seed)
    if kind is K.PIXELATE:
        return pixelate(img, p["factor"])
    if kind is K.JPEG:
        return jpeg_recompress(img, p["quality"])
    raise SeverityTableError(f"no kernel for {kind!r}")
