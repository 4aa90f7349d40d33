"""Corrupted dataset generation, manifests, prediction logs and 10-crop helpers.

Layout written by :func:`generate_dataset`::

    out_dir/<kind>/<severity>/<class>/<stem>.jpg   (or .png with lossless=True)
    out_dir/manifest.json

Per-image seeds come from :func:`derive_seed`, so any single output file can
be rebuilt from its manifest entry and the source tree alone.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corruptions import (
    CORE_KINDS,
    SEVERITIES,
    CorruptionKind,
    SeverityTable,
    apply_corruption,
    frost_texture_for,
    load_table,
)
from .corruptions.digital import jpeg_bytes
from .corruptions.weather import load_frost_textures
from .image_core import ImageError, center_crop_resize, decode_image, encode_image, hash64

MANIFEST_NAME = "manifest.json"
MANIFEST_FORMAT = 1
OUTPUT_QUALITY = 85
DEFAULT_SIZE = 224
IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png", ".bmp", ".ppm", ".tif", ".tiff", ".webp", ".gif"}


class DatasetError(RuntimeError):
    pass


class ProtocolError(ValueError):
    """Raised when a prediction log violates the test-only benchmark protocol."""


def derive_seed(salt: int, relative_path: str, kind, severity: int) -> int:
    """64-bit seed for one (source image, kind, severity) cell.

    ``relative_path`` is normalised to forward slashes so the value does not
    depend on the host OS.
    """
    rel = str(relative_path).replace(os.sep, "/")
    return hash64(int(salt) & 0xFFFFFFFFFFFFFFFF, rel, CorruptionKind(kind).value, int(severity))


@dataclass(frozen=True)
class ManifestEntry:
    path: str           # relative to out_dir
    source: str         # relative to src_dir, "<class>/<file>"
    label: str
    kind: str
    severity: int
    seed: int
    texture: str | None = None


@dataclass
class DatasetManifest:
    table_version: str
    table_digest: str
    salt: int
    kinds: list[str]
    severities: list[int]
    encoding: dict
    resize: int | None
    textures: str
    sources: dict[str, str]                 # relative source path -> sha256
    labels: list[str]
    entries: list[ManifestEntry] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)

    @property
    def test_only(self) -> bool:
        # fixed: corrupted sets are evaluation data, never training data
        return True

    @property
    def conditions(self) -> list[tuple[str, int]]:
        return [(k, s) for k in self.kinds for s in self.severities]

    def index(self) -> dict[str, ManifestEntry]:
        return {e.path: e for e in self.entries}

    def canonical(self) -> "DatasetManifest":
        """Copy with entries, sources and errors in sorted order."""
        return DatasetManifest(
            self.table_version, self.table_digest, self.salt, list(self.kinds),
            list(self.severities), dict(self.encoding), self.resize, self.textures,
            dict(sorted(self.sources.items())), sorted(self.labels),
            sorted(self.entries, key=lambda e: e.path),
            sorted(self.errors, key=lambda e: e["source"]),
        )

    def to_dict(self) -> dict:
        m = self.canonical()
        return {
            "format": MANIFEST_FORMAT,
            "test_only": True,
            "table_version": m.table_version,
            "table_digest": m.table_digest,
            "salt": f"{m.salt:016x}",
            "seed_rule": "hash64(salt, source, kind, severity)",
            "kinds": m.kinds,
            "severities": m.severities,
            "encoding": m.encoding,
            "resize": m.resize,
            "textures": m.textures,
            "sources": m.sources,
            "labels": m.labels,
            "entries": [asdict(e) for e in m.entries],
            "errors": m.errors,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DatasetManifest":
        if doc.get("test_only") is not True:
            raise ProtocolError("manifest must carry test_only = true")
        return cls(
            doc["table_version"], doc["table_digest"], int(doc["salt"], 16),
            list(doc["kinds"]), [int(s) for s in doc["severities"]], dict(doc["encoding"]),
            doc.get("resize"), doc.get("textures", "builtin"), dict(doc["sources"]),
            list(doc["labels"]), [ManifestEntry(**e) for e in doc["entries"]],
            list(doc.get("errors", [])),
        )

    def save(self, path) -> None:
        _atomic_write(Path(path), (json.dumps(self.to_dict(), indent=1) + "\n").encode())

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def list_sources(src_dir) -> list[str]:
    """Relative ``class/file`` paths of the two-level source tree, sorted."""
    src = Path(src_dir)
    if not src.is_dir():
        raise DatasetError(f"source directory {src} does not exist")
    out = []
    for cdir in src.iterdir():
        if not cdir.is_dir() or cdir.name.startswith("."):
            continue
        for f in cdir.iterdir():
            if f.is_file() and f.suffix.lower() in IMAGE_SUFFIXES:
                out.append(f"{cdir.name}/{f.name}")
    return sorted(out)


def output_path(source: str, kind, severity: int, lossless: bool) -> str:
    kind = CorruptionKind(kind)
    cls, name = source.split("/", 1)
    ext = ".jpg" if kind is CorruptionKind.JPEG or not lossless else ".png"
    return f"{kind.value}/{severity}/{cls}/{Path(name).stem}{ext}"


def _prepare(data: bytes, resize: int | None) -> np.ndarray:
    img = decode_image(data)
    return center_crop_resize(img, resize) if resize else img


def render_condition(img: np.ndarray, kind, severity: int, seed: int, table: SeverityTable,
                     textures, lossless: bool) -> bytes:
    """Encoded output bytes for one prepared source image."""
    kind = CorruptionKind(kind)
    if kind is CorruptionKind.JPEG:
        # the JPEG kind ships its own encoding rather than a second pass at q85
        return jpeg_bytes(img, table.params(kind, severity)["quality"])
    out = apply_corruption(img, kind, severity, seed, table=table, textures=textures)
    return encode_image(out, "PNG") if lossless else encode_image(out, "JPEG", OUTPUT_QUALITY)


def _work(job: dict) -> dict:
    """Process every condition for one source file (runs in worker processes)."""
    src = Path(job["src_dir"]) / job["source"]
    out_dir = Path(job["out_dir"])
    table = SeverityTable.from_dict(job["table"])
    textures = load_frost_textures(job["textures_dir"]) if job["textures_dir"] else None
    try:
        data = src.read_bytes()
        digest = hashlib.sha256(data).hexdigest()
        img = _prepare(data, job["resize"])
    except (OSError, ImageError, ValueError) as e:
        return {"source": job["source"], "error": f"{type(e).__name__}: {e}"}
    entries = []
    label = job["source"].split("/", 1)[0]
    for kind, sev in job["conditions"]:
        seed = derive_seed(job["salt"], job["source"], kind, sev)
        rel = output_path(job["source"], kind, sev, job["lossless"])
        tex = None
        if CorruptionKind(kind) is CorruptionKind.FROST:
            tex = frost_texture_for(seed, textures)[0]
        target = out_dir / rel
        if not (job["resume"] and target.is_file()):
            _atomic_write(target, render_condition(img, kind, sev, seed, table, textures,
                                                   job["lossless"]))
        entries.append(asdict(ManifestEntry(rel, job["source"], label, kind, sev, seed, tex)))
    return {"source": job["source"], "sha256": digest, "entries": entries}


def generate_dataset(src_dir, out_dir, kinds: Iterable = CORE_KINDS,
                     severities: Sequence[int] = SEVERITIES, salt: int = 0, *,
                     table: SeverityTable | str = "v1", lossless: bool = False,
                     resume: bool = False, jobs: int = 1, resize: int | None = DEFAULT_SIZE,
                     textures_dir=None) -> DatasetManifest:
    """Corrupt every image under ``src_dir`` for each (kind, severity) pair.

    Undecodable sources are recorded in ``manifest.errors`` and skipped.  The
    manifest is written last, atomically; with ``resume=True`` files already
    present are kept, so an interrupted run can be continued.
    """
    table = load_table(table) if isinstance(table, str) else table
    kinds = [CorruptionKind(k).value for k in kinds]
    severities = [int(s) for s in severities]
    for s in severities:
        if s not in SEVERITIES:
            raise DatasetError(f"severity {s} outside 1..5")
    out = Path(out_dir)
    if out.exists() and any(out.iterdir()) and not resume:
        raise DatasetError(f"output directory {out} is not empty (use resume to continue)")
    out.mkdir(parents=True, exist_ok=True)
    sources = list_sources(src_dir)
    tdir = str(textures_dir) if textures_dir else None
    base = {
        "src_dir": str(src_dir), "out_dir": str(out), "table": table.to_dict(),
        "conditions": [(k, s) for k in kinds for s in severities], "salt": int(salt),
        "resize": resize, "lossless": lossless, "resume": resume, "textures_dir": tdir,
    }
    work = [dict(base, source=s) for s in sources]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_work, work))
    else:
        results = [_work(w) for w in work]

    manifest = DatasetManifest(
        table_version=table.version, table_digest=table.digest(), salt=int(salt),
        kinds=kinds, severities=severities,
        encoding={"format": "png"} if lossless else {"format": "jpeg", "quality": OUTPUT_QUALITY},
        resize=resize, textures=tdir or "builtin", sources={}, labels=[],
    )
    labels = set()
    for r in results:
        if "error" in r:
            manifest.errors.append({"source": r["source"], "error": r["error"]})
            continue
        manifest.sources[r["source"]] = r["sha256"]
        labels.add(r["source"].split("/", 1)[0])
        manifest.entries.extend(ManifestEntry(**e) for e in r["entries"])
    manifest.labels = sorted(labels)
    manifest = manifest.canonical()
    manifest.save(out / MANIFEST_NAME)
    return manifest


def regenerate_entry(manifest: DatasetManifest, entry: ManifestEntry, src_dir,
                     table: SeverityTable | None = None) -> bytes:
    """Rebuild one output file from its manifest entry and the source tree."""
    table = table or load_table(manifest.table_version)
    if table.digest() != manifest.table_digest:
        raise DatasetError("severity table does not match the manifest digest")
    data = (Path(src_dir) / entry.source).read_bytes()
    if hashlib.sha256(data).hexdigest() != manifest.sources.get(entry.source):
        raise DatasetError(f"source {entry.source} changed since generation")
    if entry.seed != derive_seed(manifest.salt, entry.source, entry.kind, entry.severity):
        raise DatasetError(f"seed for {entry.path} does not follow the derivation rule")
    textures = None if manifest.textures == "builtin" else load_frost_textures(manifest.textures)
    img = _prepare(data, manifest.resize)
    lossless = manifest.encoding.get("format") == "png"
    return render_condition(img, entry.kind, entry.severity, entry.seed, table, textures, lossless)


# -- prediction logs -------------------------------------------------------

@dataclass(frozen=True)
class PredictionRecord:
    image_id: str
    pred: str
    label: str
    split: str      # "clean", "corrupted", "corrupted/<kind>/<severity>" or "train"

    @classmethod
    def from_dict(cls, d: dict) -> "PredictionRecord":
        try:
            return cls(str(d["image_id"]), str(d["pred"]), str(d["label"]), str(d["split"]))
        except KeyError as e:
            raise ValueError(f"prediction record missing field {e}") from None


def read_prediction_log(path) -> list[PredictionRecord]:
    out = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(PredictionRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, ValueError) as e:
                raise ValueError(f"{path}:{n}: {e}") from None
    return out


def write_prediction_log(records: Iterable[PredictionRecord], path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(asdict(r)) + "\n")


# -- 10-crop evaluation ----------------------------------------------------

def ten_crop(img: np.ndarray, crop_size: int) -> list[np.ndarray]:
    """Corner and center crops followed by their horizontal mirrors.

    Order: top-left, top-right, bottom-left, bottom-right, center, then the
    same five mirrored.  The center crop starts at ``((H-c)//2, (W-c)//2)``.
    """
    h, w = img.shape[:2]
    c = int(crop_size)
    if c < 1 or c > min(h, w):
        raise ValueError(f"crop size {crop_size} does not fit a {w}x{h} image")
    ty, tx = (h - c) // 2, (w - c) // 2
    origins = [(0, 0), (0, w - c), (h - c, 0), (h - c, w - c), (ty, tx)]
    crops = [img[y:y + c, x:x + c].copy() for y, x in origins]
    return crops + [cr[:, ::-1].copy() for cr in crops]


def average_distributions(dists: Sequence[Sequence[float]]) -> np.ndarray:
    if len(dists) == 0:
        raise ValueError("no distributions to average")
    arrs = [np.asarray(d, dtype=np.float64) for d in dists]
    n = arrs[0].shape
    for a in arrs:
        if a.ndim != 1 or a.shape != n:
            raise ValueError("distributions must be 1-D vectors of equal length")
        if abs(a.sum() - 1.0) > 1e-6 or (a < 0).any():
            raise ValueError("each distribution must be non-negative and sum to 1")
    return np.mean(arrs, axis=0)
