"""Severity calibration against 1 - SSIM and the golden regression corpus.

The reference corpus is rendered procedurally from a fixed seed (smooth
plasma backgrounds with shaded, textured shapes, lightly blurred and
quantized to 8 bits) so it ships as code plus a fingerprint rather than as
image files.  A directory of real images can be used instead.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .corruptions import SEVERITIES, CorruptionKind, SeverityTable, apply_corruption, load_table
from .corruptions.weather import diamond_square
from .image_core import (
    Rng64,
    as_image,
    center_crop_resize,
    convolve,
    gaussian_kernel,
    hash64,
    load_image,
    to_grayscale,
    to_uint8,
)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2

REFERENCE_SEED = 0x1C0FFEE
REFERENCE_COUNT = 100
MIN_CORPUS = 50
CALIBRATION_SALT = 0xCA11B


class CalibrationError(ValueError):
    pass


# ------------------------------------------------------------------ SSIM


@lru_cache(maxsize=None)
def _ssim_window() -> np.ndarray:
    ax = np.arange(SSIM_WINDOW, dtype=np.float64) - (SSIM_WINDOW - 1) / 2
    g = np.exp(-(ax**2) / (2 * SSIM_SIGMA**2))
    return g / g.sum()


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    x = sliding_window_view(x, g.size, axis=0) @ g
    return sliding_window_view(x, g.size, axis=1) @ g


def ssim_map(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Local SSIM of two single-channel images over fully-contained windows."""
    g = _ssim_window()
    mu_a, mu_b = _filter_valid(a, g), _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a**2
    var_b = _filter_valid(b * b, g) - mu_b**2
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_a**2 + mu_b**2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return num / den


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity of the Rec.601 luminance of two images.

    11x11 Gaussian window (sigma 1.5), ``C1 = 0.01**2``, ``C2 = 0.03**2`` for
    unit-range data; only windows fully inside the image are averaged.
    """
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 3:
        a, b = to_grayscale(a), to_grayscale(b)
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW} px on each side")
    return float(ssim_map(a, b).mean())


# ------------------------------------------------------------------ corpus


def _smoothstep(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3 - 2 * x)


def render_reference_image(index: int, size: int = 224, seed: int = REFERENCE_SEED) -> np.ndarray:
    """One procedurally rendered 8-bit RGB test scene."""
    rng = Rng64(hash64(seed, index))
    gen = rng.gen
    k = max(1, math.ceil(math.log2(size - 1)))
    fields = [diamond_square(k, gen.uniform(0.45, 0.6), rng.split(f"bg{c}"))[:size, :size]
              for c in range(3)]
    palette = gen.random((3, 3)) * 0.8 + 0.1
    bg = np.stack(fields, axis=-1) @ (palette / palette.sum(axis=0, keepdims=True))
    bg = 0.15 + 0.7 * (bg - bg.min()) / (np.ptp(bg) + 1e-12)
    img = bg
    yy, xx = np.mgrid[0:size, 0:size] / size
    for j in range(int(gen.integers(4, 10))):
        cy, cx = gen.uniform(0.05, 0.95, 2)
        ry, rx = gen.uniform(0.06, 0.3, 2)
        th = gen.uniform(0, np.pi)
        u = ((xx - cx) * np.cos(th) + (yy - cy) * np.sin(th)) / rx
        v = (-(xx - cx) * np.sin(th) + (yy - cy) * np.cos(th)) / ry
        if gen.random() < 0.5:
            dist = np.sqrt(u * u + v * v)
        else:
            dist = np.maximum(np.abs(u), np.abs(v))
        edge = _smoothstep((1.0 - dist) * min(rx, ry) * size / 1.5)
        base = gen.uniform(0.05, 0.95, 3)
        shade = 1.0 + gen.uniform(-0.35, 0.35) * u + gen.uniform(-0.35, 0.35) * v
        stripes = 1.0 + gen.uniform(0, 0.15) * np.sin(2 * np.pi * gen.uniform(4, 20) * (u * np.cos(j) + v))
        colour = np.clip(base * (shade * stripes)[..., None], 0, 1)
        img = img * (1 - edge[..., None]) + colour * edge[..., None]
    texture = convolve(rng.split("tex").gen.normal(0, 0.03, (size, size, 3)), gaussian_kernel(1.2),
                       clamp_output=False)
    img = convolve(np.clip(img + texture, 0, 1), gaussian_kernel(0.6))
    return as_image(to_uint8(img))


def reference_corpus(count: int = REFERENCE_COUNT, size: int = 224, seed: int = REFERENCE_SEED) -> list[np.ndarray]:
    return [render_reference_image(i, size, seed) for i in range(count)]


def load_corpus(directory, size: int | None = 224) -> list[np.ndarray]:
    paths = sorted(p for p in Path(directory).rglob("*")
                   if p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp"))
    imgs = [load_image(p) for p in paths]
    return [center_crop_resize(im, size) for im in imgs] if size else imgs


def corpus_fingerprint(images: Sequence[np.ndarray]) -> str:
    h = hashlib.sha256()
    for im in images:
        u8 = to_uint8(im)
        h.update(np.asarray(u8.shape, dtype=np.int64).tobytes())
        h.update(u8.tobytes())
    return h.hexdigest()


# ------------------------------------------------------------------ distortion measurement


def _seed_for(index: int, kind: CorruptionKind, severity: int, salt: int = CALIBRATION_SALT) -> int:
    return hash64(salt, f"corpus/{index:05d}", kind.value, severity)


def _measure_one(args) -> np.ndarray:
    index, img, table_doc, kinds = args
    table = SeverityTable.from_dict(table_doc)
    out = np.empty((len(kinds), len(SEVERITIES)))
    for i, kind in enumerate(kinds):
        for j, s in enumerate(SEVERITIES):
            corrupted = apply_corruption(img, kind, s, _seed_for(index, kind, s), table=table)
            out[i, j] = 1.0 - ssim(img, corrupted)
    return out


def measure_distortion(table: SeverityTable, corpus: Sequence[np.ndarray],
                       kinds: Sequence[CorruptionKind] | None = None,
                       jobs: int | None = None) -> dict[CorruptionKind, list[float]]:
    """Mean ``1 - SSIM(clean, corrupted)`` per kind and severity over ``corpus``."""
    kinds = tuple(kinds or table.kinds)
    doc = table.to_dict()
    work = [(i, img, doc, kinds) for i, img in enumerate(corpus)]
    jobs = jobs or os.cpu_count() or 1
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_measure_one, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        rows = [_measure_one(w) for w in work]
    mean = np.mean(rows, axis=0)
    return {k: [float(v) for v in mean[i]] for i, k in enumerate(kinds)}


# ------------------------------------------------------------------ bands


def table_digest(table: SeverityTable) -> str:
    return table.digest()


@dataclass(frozen=True)
class CalibrationBands:
    """Per (kind, severity) target interval of mean 1 - SSIM on one corpus."""

    table_version: str
    table_digest: str
    corpus_fingerprint: str
    bands: dict  # CorruptionKind -> list of (lo, hi)
    measured: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "table_version": self.table_version,
            "table_digest": self.table_digest,
            "corpus_fingerprint": self.corpus_fingerprint,
            "bands": {k.value: [list(b) for b in v] for k, v in self.bands.items()},
            "measured": {k.value: list(v) for k, v in self.measured.items()},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "CalibrationBands":
        return cls(
            doc["table_version"], doc["table_digest"], doc["corpus_fingerprint"],
            {CorruptionKind(k): [tuple(b) for b in v] for k, v in doc["bands"].items()},
            {CorruptionKind(k): list(v) for k, v in doc.get("measured", {}).items()},
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "CalibrationBands":
        return cls.from_dict(json.loads(Path(path).read_text()))


def bands_from_means(means: Sequence[float]) -> list[tuple[float, float]]:
    """Disjoint increasing intervals split at midpoints between adjacent means."""
    m = list(means)
    if any(b <= a for a, b in zip(m, m[1:])):
        raise CalibrationError(f"means not strictly increasing: {m}")
    cuts = [(a + b) / 2 for a, b in zip(m, m[1:])]
    lo = [max(0.0, m[0] - (m[1] - m[0]) / 2)] + cuts
    hi = cuts + [m[-1] + (m[-1] - m[-2]) / 2]
    return list(zip(lo, hi))


def publish_bands(table: SeverityTable, corpus: Sequence[np.ndarray], jobs: int | None = None) -> CalibrationBands:
    means = measure_distortion(table, corpus, jobs=jobs)
    return CalibrationBands(table.version, table_digest(table), corpus_fingerprint(corpus),
                            {k: bands_from_means(v) for k, v in means.items()}, means)


def load_bands(version: str = "v1") -> CalibrationBands:
    ref = resources.files("corrupt_bench") / "data" / f"bands_{version}.json"
    if not ref.is_file():
        raise CalibrationError(f"no published calibration bands for table {version!r}")
    return CalibrationBands.from_dict(json.loads(ref.read_text()))


@dataclass
class CalibrationReport:
    table_version: str
    corpus_fingerprint: str
    means: dict
    failures: list[str]

    @property
    def passed(self) -> bool:
        return not self.failures

    def failing_kinds(self) -> set[CorruptionKind]:
        return {CorruptionKind(f.split(":", 1)[0]) for f in self.failures if ":" in f
                and f.split(":", 1)[0] in {k.value for k in CorruptionKind}}

    def to_dict(self) -> dict:
        return {
            "table_version": self.table_version,
            "corpus_fingerprint": self.corpus_fingerprint,
            "passed": self.passed,
            "means": {k.value: v for k, v in self.means.items()},
            "failures": list(self.failures),
        }


def check_calibration(table: SeverityTable, corpus: Sequence[np.ndarray],
                      bands: CalibrationBands | str | None = "published",
                      kinds: Iterable[CorruptionKind] | None = None,
                      jobs: int | None = None) -> CalibrationReport:
    """Verify strict severity monotonicity and band membership of mean 1 - SSIM.

    ``bands="published"`` loads the bands shipped for ``table.version``;
    ``None`` checks monotonicity only.  A corpus that differs from the one
    the bands were published on raises ``CalibrationError``.
    """
    if len(corpus) == 0:
        raise CalibrationError("empty corpus")
    if len(corpus) < MIN_CORPUS:
        raise CalibrationError(f"corpus has {len(corpus)} images; at least {MIN_CORPUS} required")
    if isinstance(bands, str):
        bands = load_bands(table.version)
    fp = corpus_fingerprint(corpus)
    failures: list[str] = []
    if bands is not None:
        if bands.corpus_fingerprint != fp:
            raise CalibrationError("corpus fingerprint mismatch: bands were published on a different corpus")
        if bands.table_digest != table_digest(table):
            failures.append(f"table: parameters differ from the published {bands.table_version} table")
    kinds = tuple(kinds or table.kinds)
    means = measure_distortion(table, corpus, kinds, jobs=jobs)
    for kind, m in means.items():
        for s, (a, b) in enumerate(zip(m, m[1:]), start=1):
            if not b > a:
                failures.append(f"{kind.value}: mean 1-SSIM not increasing from severity {s} "
                                f"({a:.4f}) to {s + 1} ({b:.4f})")
        if bands is not None and kind in bands.bands:
            for s, (v, (lo, hi)) in enumerate(zip(m, bands.bands[kind]), start=1):
                if not lo <= v < hi:
                    failures.append(f"{kind.value}: severity {s} mean {v:.4f} outside band [{lo:.4f}, {hi:.4f})")
    return CalibrationReport(table.version, fp, means, failures)


# ------------------------------------------------------------------ goldens

GOLDEN_SEED = 0x60D
GOLDEN_SIZE = 64
GOLDEN_IMAGES = 3
_BITWISE = frozenset({
    CorruptionKind.BRIGHTNESS, CorruptionKind.CONTRAST, CorruptionKind.SATURATE,
    CorruptionKind.PIXELATE, CorruptionKind.IMPULSE_NOISE,
})
PROBES = 48


@dataclass(frozen=True)
class GoldenEntry:
    kernel: str  # "<kind>/<severity>"
    image: int
    input_fingerprint: str
    seed: int
    output_hash: str
    mode: str  # bitwise | per-sample-1e-6 | distortion-band
    probe: tuple = ()
    mse: float = 0.0

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["probe"] = list(self.probe)
        return d


def golden_images() -> list[np.ndarray]:
    return [render_reference_image(i, GOLDEN_SIZE, GOLDEN_SEED) for i in range(GOLDEN_IMAGES)]


def _probe_positions(shape) -> np.ndarray:
    return Rng64(GOLDEN_SEED).split("probe").gen.integers(0, int(np.prod(shape)), PROBES)


def _float_hash(x: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(x, dtype="<f8").tobytes()).hexdigest()


def golden_mode(kind: CorruptionKind) -> str:
    if kind is CorruptionKind.JPEG:
        return "distortion-band"
    return "bitwise" if kind in _BITWISE else "per-sample-1e-6"


def build_goldens(table: SeverityTable | None = None) -> list[GoldenEntry]:
    table = table or load_table()
    out = []
    for i, img in enumerate(golden_images()):
        fp = _float_hash(img)
        pos = _probe_positions(img.shape)
        for kind in table.kinds:
            for s in SEVERITIES:
                seed = hash64(GOLDEN_SEED, i, kind.value, s)
                y = apply_corruption(img, kind, s, seed, table=table)
                out.append(GoldenEntry(
                    f"{kind.value}/{s}", i, fp, seed, _float_hash(y), golden_mode(kind),
                    tuple(float(v) for v in y.ravel()[pos]),
                    float(np.mean((y - img) ** 2)),
                ))
    return out


def save_goldens(entries: Sequence[GoldenEntry], path, table: SeverityTable) -> None:
    doc = {"table_version": table.version, "table_digest": table_digest(table),
           "entries": [e.to_dict() for e in entries]}
    Path(path).write_text(json.dumps(doc, indent=0) + "\n")


def load_goldens(version: str = "v1") -> tuple[dict, list[GoldenEntry]]:
    ref = resources.files("corrupt_bench") / "data" / f"goldens_{version}.json"
    doc = json.loads(ref.read_text())
    entries = [GoldenEntry(**{**e, "probe": tuple(e["probe"])}) for e in doc["entries"]]
    return doc, entries


JPEG_MSE_BAND = 0.10


def check_goldens(entries: Sequence[GoldenEntry], table: SeverityTable | None = None) -> list[str]:
    """Re-run each golden kernel and compare under the entry's tolerance mode."""
    table = table or load_table()
    imgs = golden_images()
    failures = []
    for e in entries:
        img = imgs[e.image]
        if _float_hash(img) != e.input_fingerprint:
            failures.append(f"{e.kernel}@{e.image}: reference input changed")
            continue
        kind, s = e.kernel.split("/")
        y = apply_corruption(img, CorruptionKind(kind), int(s), e.seed, table=table)
        if e.mode == "bitwise":
            ok = _float_hash(y) == e.output_hash
        elif e.mode == "per-sample-1e-6":
            probe = y.ravel()[_probe_positions(img.shape)]
            ok = bool(np.all(np.abs(probe - np.asarray(e.probe)) <= 1e-6))
            ok = ok and abs(float(np.mean((y - img) ** 2)) - e.mse) <= 1e-6
        elif e.mode == "distortion-band":
            mse = float(np.mean((y - img) ** 2))
            ok = abs(mse - e.mse) <= JPEG_MSE_BAND * e.mse + 1e-6
        else:
            ok = False
        if not ok:
            failures.append(f"{e.kernel}@{e.image}: output differs from golden ({e.mode})")
    return failures
