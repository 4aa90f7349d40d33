from __future__ import annotations

from enum import Enum


class Category(str, Enum):
    NOISE = "noise"
    BLUR = "blur"
    WEATHER = "weather"
    DIGITAL = "digital"


class CorruptionKind(str, Enum):
    """The 19 corruptions; the first 15 form the benchmark, the last 4 are extras."""

    GAUSSIAN_NOISE = "gaussian_noise"
    SHOT_NOISE = "shot_noise"
    IMPULSE_NOISE = "impulse_noise"
    DEFOCUS_BLUR = "defocus_blur"
    GLASS_BLUR = "glass_blur"
    MOTION_BLUR = "motion_blur"
    ZOOM_BLUR = "zoom_blur"
    SNOW = "snow"
    FROST = "frost"
    FOG = "fog"
    BRIGHTNESS = "brightness"
    CONTRAST = "contrast"
    ELASTIC = "elastic_transform"
    PIXELATE = "pixelate"
    JPEG = "jpeg_compression"
    SPECKLE_NOISE = "speckle_noise"
    GAUSSIAN_BLUR = "gaussian_blur"
    SPATTER = "spatter"
    SATURATE = "saturate"

    @property
    def category(self) -> Category:
        return _CATEGORY[self]

    @property
    def is_core(self) -> bool:
        return self not in EXTRA_KINDS

    @property
    def benchmark(self) -> str:
        return "core" if self.is_core else "extra"

    @property
    def stochastic(self) -> bool:
        """Whether the output depends on the seed."""
        return self in STOCHASTIC_KINDS

    @classmethod
    def parse(cls, name: str) -> "CorruptionKind":
        key = name.strip().lower().replace("-", "_").replace(" ", "_")
        for k in cls:
            if key in (k.value, k.name.lower()):
                return k
        if key == "elastic":
            return cls.ELASTIC
        if key == "jpeg":
            return cls.JPEG
        raise ValueError(f"unknown corruption kind {name!r}")


K = CorruptionKind

_CATEGORY = {
    K.GAUSSIAN_NOISE: Category.NOISE,
    K.SHOT_NOISE: Category.NOISE,
    K.IMPULSE_NOISE: Category.NOISE,
    K.DEFOCUS_BLUR: Category.BLUR,
    K.GLASS_BLUR: Category.BLUR,
    K.MOTION_BLUR: Category.BLUR,
    K.ZOOM_BLUR: Category.BLUR,
    K.SNOW: Category.WEATHER,
    K.FROST: Category.WEATHER,
    K.FOG: Category.WEATHER,
    K.BRIGHTNESS: Category.WEATHER,
    K.CONTRAST: Category.DIGITAL,
    K.ELASTIC: Category.DIGITAL,
    K.PIXELATE: Category.DIGITAL,
    K.JPEG: Category.DIGITAL,
    K.SPECKLE_NOISE: Category.NOISE,
    K.GAUSSIAN_BLUR: Category.BLUR,
    K.SPATTER: Category.WEATHER,
    K.SATURATE: Category.DIGITAL,
}

# Benchmark column order (noise, blur, weather, digital).
CORE_KINDS: tuple[CorruptionKind, ...] = tuple(K)[:15]
EXTRA_KINDS: tuple[CorruptionKind, ...] = (K.SPECKLE_NOISE, K.GAUSSIAN_BLUR, K.SPATTER, K.SATURATE)
ALL_KINDS: tuple[CorruptionKind, ...] = tuple(K)

STOCHASTIC_KINDS = frozenset({
    K.GAUSSIAN_NOISE, K.SHOT_NOISE, K.IMPULSE_NOISE, K.SPECKLE_NOISE,
    K.GLASS_BLUR, K.SNOW, K.FROST, K.FOG, K.SPATTER, K.ELASTIC,
})


def kinds_for(selector: str) -> tuple[CorruptionKind, ...]:
    """Resolve ``core``, ``extra``, ``all`` or a comma-separated list of names."""
    sel = selector.strip().lower()
    if sel == "core":
        return CORE_KINDS
    if sel == "extra":
        return EXTRA_KINDS
    if sel == "all":
        return ALL_KINDS
    return tuple(CorruptionKind.parse(s) for s in sel.split(",") if s.strip())
