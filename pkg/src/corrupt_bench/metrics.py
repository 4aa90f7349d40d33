"""Corruption Error metrics normalised by the AlexNet baseline.

All CE values are returned in percent at full precision; rounding to one
decimal happens only in :meth:`RobustnessReport.display`.

Relative CE subtracts the clean error once per severity::

    rCE = sum_s (E_s - E_clean) / sum_s (A_s - A_clean)

where ``A`` are the baseline errors.  A network whose corrupted errors all
equal its clean error scores 0.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .corruptions import CORE_KINDS, EXTRA_KINDS, SEVERITIES, CorruptionKind
from .pipeline import DatasetManifest, PredictionRecord, ProtocolError

K = CorruptionKind

# per-kind average top-1 error (percent) of the baseline network over 5 severities
_ALEXNET_AVG = {
    K.GAUSSIAN_NOISE: 88.6, K.SHOT_NOISE: 89.4, K.IMPULSE_NOISE: 92.3,
    K.DEFOCUS_BLUR: 82.0, K.GLASS_BLUR: 82.6, K.MOTION_BLUR: 78.6, K.ZOOM_BLUR: 79.8,
    K.SNOW: 86.7, K.FROST: 82.7, K.FOG: 81.9, K.BRIGHTNESS: 56.5,
    K.CONTRAST: 85.3, K.ELASTIC: 64.6, K.PIXELATE: 71.8, K.JPEG: 60.7,
    K.SPECKLE_NOISE: 84.5, K.GAUSSIAN_BLUR: 78.7, K.SPATTER: 71.8, K.SATURATE: 65.8,
}
ALEXNET_CLEAN_ERROR = 0.435


class MetricsError(ValueError):
    pass


class MissingCellError(MetricsError):
    pass


class UnknownImageError(MetricsError):
    pass


class DuplicateRecordError(MetricsError):
    pass


class EmptyCellError(MetricsError):
    pass


@dataclass(frozen=True)
class BaselineTable:
    """Per-kind severity sums of the normalising network's error (fractions)."""

    version: str
    sums: Mapping[CorruptionKind, float]
    clean_error: float

    def sum(self, kind) -> float:
        kind = CorruptionKind(kind)
        try:
            return self.sums[kind]
        except KeyError:
            raise MetricsError(f"baseline {self.version} has no entry for {kind.value}") from None

    def scaled(self, k: float) -> "BaselineTable":
        return BaselineTable(f"{self.version}*{k:g}",
                             MappingProxyType({c: v * k for c, v in self.sums.items()}),
                             self.clean_error)


ALEXNET = BaselineTable(
    "alexnet",
    MappingProxyType({k: 5 * v / 100.0 for k, v in _ALEXNET_AVG.items()}),
    ALEXNET_CLEAN_ERROR,
)


@dataclass
class ErrorProfile:
    network_name: str
    errors: dict[tuple[CorruptionKind, int], float]
    clean_error: float | None = None
    counts: dict[tuple[CorruptionKind, int], int] = field(default_factory=dict)
    clean_count: int = 0

    def __post_init__(self):
        errs = {}
        for (kind, s), v in self.errors.items():
            v = float(v)
            if not 0.0 <= v <= 1.0:
                raise MetricsError(f"error rate {v} for {CorruptionKind(kind).value}/{s} outside [0, 1]")
            errs[(CorruptionKind(kind), int(s))] = v
        self.errors = errs
        if self.clean_error is not None and not 0.0 <= self.clean_error <= 1.0:
            raise MetricsError(f"clean error {self.clean_error} outside [0, 1]")

    @classmethod
    def from_rows(cls, name: str, rows: Mapping, clean_error: float | None = None) -> "ErrorProfile":
        """Build from ``{kind: [E_1, ..., E_5]}``."""
        errs = {(CorruptionKind(k), s): v for k, row in rows.items()
                for s, v in zip(SEVERITIES, row)}
        return cls(name, errs, clean_error)

    def severities(self, kind) -> list[float]:
        kind = CorruptionKind(kind)
        out = []
        for s in SEVERITIES:
            if (kind, s) not in self.errors:
                raise MissingCellError(f"{self.network_name}: no error for cell {kind.value}/{s}")
            out.append(self.errors[(kind, s)])
        return out

    @property
    def kinds(self) -> list[CorruptionKind]:
        present = {k for k, _ in self.errors}
        return [k for k in (*CORE_KINDS, *EXTRA_KINDS) if k in present]


def corruption_error(profile: ErrorProfile, kind, baseline: BaselineTable = ALEXNET) -> float:
    """CE in percent: summed severity errors over the baseline's sum."""
    return 100.0 * float(np.sum(profile.severities(kind))) / baseline.sum(kind)


def relative_ce(profile: ErrorProfile, kind, baseline: BaselineTable = ALEXNET) -> float:
    if profile.clean_error is None:
        raise MetricsError(f"{profile.network_name}: Relative CE needs a clean error")
    n = len(SEVERITIES)
    denom = baseline.sum(kind) - n * baseline.clean_error
    if denom <= 0:
        raise MetricsError(f"nonpositive Relative CE denominator for {CorruptionKind(kind).value}")
    num = float(np.sum(profile.severities(kind))) - n * profile.clean_error
    return 100.0 * num / denom


def _core_mean(values: Mapping, what: str) -> float:
    keys = {CorruptionKind(k): float(v) for k, v in values.items()}
    extra = [k.value for k in keys if not k.is_core]
    if extra:
        raise MetricsError(f"extra kinds not in {what}: {', '.join(extra)}")
    missing = [k.value for k in CORE_KINDS if k not in keys]
    if missing:
        raise MetricsError(f"{what} needs all 15 core kinds; missing {', '.join(missing)}")
    return float(np.mean([keys[k] for k in CORE_KINDS]))


def mean_ce(ce_values: Mapping) -> float:
    """Arithmetic mean of the 15 core CE values (extras are rejected)."""
    return _core_mean(ce_values, "mCE")


def relative_mce(rce_values: Mapping) -> float:
    return _core_mean(rce_values, "Relative mCE")


@dataclass
class RobustnessReport:
    network_name: str
    table_version: str
    baseline_version: str
    clean_error: float | None
    ce: dict[CorruptionKind, float]
    relative_ce: dict[CorruptionKind, float]
    mce: float
    relative_mce: float | None
    counts: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "network": self.network_name,
            "table_version": self.table_version,
            "baseline_version": self.baseline_version,
            "clean_error": self.clean_error,
            "ce": {k.value: v for k, v in self.ce.items()},
            "relative_ce": {k.value: v for k, v in self.relative_ce.items()},
            "mce": self.mce,
            "relative_mce": self.relative_mce,
            "counts": self.counts,
        }

    def display(self) -> str:
        lines = [f"{self.network_name}  mCE {self.mce:.1f}"
                 + (f"  Relative mCE {self.relative_mce:.1f}" if self.relative_mce is not None else "")]
        for k, v in self.ce.items():
            r = self.relative_ce.get(k)
            tag = "" if k.is_core else "  (extra)"
            lines.append(f"  {k.value:18s} CE {v:6.1f}" + (f"  rCE {r:6.1f}" if r is not None else "") + tag)
        return "\n".join(lines)


def build_report(profile: ErrorProfile, baseline: BaselineTable = ALEXNET,
                 table_version: str = "v1") -> RobustnessReport:
    kinds = profile.kinds
    ce = {k: corruption_error(profile, k, baseline) for k in kinds}
    rce = {}
    if profile.clean_error is not None:
        rce = {k: relative_ce(profile, k, baseline) for k in kinds}
    core_ce = {k: v for k, v in ce.items() if k.is_core}
    counts = {f"{k.value}/{s}": n for (k, s), n in sorted(profile.counts.items(),
                                                           key=lambda t: (t[0][0].value, t[0][1]))}
    counts["clean"] = profile.clean_count
    return RobustnessReport(
        profile.network_name, table_version, baseline.version, profile.clean_error,
        ce, rce, mean_ce(core_ce),
        relative_mce({k: v for k, v in rce.items() if k.is_core}) if rce else None,
        counts,
    )


def _parse_split(split: str) -> tuple[str, str | None, int | None]:
    parts = split.split("/")
    if parts[0] == "corrupted" and len(parts) == 3:
        return "corrupted", CorruptionKind.parse(parts[1]).value, int(parts[2])
    if len(parts) == 1 and parts[0] in ("clean", "corrupted", "train"):
        return parts[0], None, None
    raise MetricsError(f"unrecognised split tag {split!r}")


def build_error_profile(log: Iterable[PredictionRecord], manifest: DatasetManifest,
                        network_name: str = "model") -> ErrorProfile:
    """Per-cell top-1 error from a prediction log over a generated dataset.

    Corrupted records are keyed by output path; clean records by source
    path.  Record order does not matter.
    """
    index = manifest.index()
    labels = set(manifest.labels)
    wrong, total = Counter(), Counter()
    seen = set()
    clean_wrong = clean_total = 0
    for r in log:
        split, kind, sev = _parse_split(r.split)
        if split == "train":
            if manifest.test_only:
                raise ProtocolError(
                    f"record {r.image_id} claims a training split; the dataset is test-only")
            continue
        if r.label not in labels:
            raise MetricsError(f"label {r.label!r} of {r.image_id} not in the manifest label set")
        if split == "clean":
            if r.image_id not in manifest.sources:
                raise UnknownImageError(f"unknown clean image id {r.image_id!r}")
            key = ("clean", r.image_id)
            if key in seen:
                raise DuplicateRecordError(f"duplicate clean record for {r.image_id}")
            seen.add(key)
            clean_total += 1
            clean_wrong += r.pred != r.label
            continue
        entry = index.get(r.image_id)
        if entry is None:
            raise UnknownImageError(f"unknown image id {r.image_id!r}")
        if kind is not None and (kind, sev) != (entry.kind, entry.severity):
            raise MetricsError(f"{r.image_id}: split tag {r.split} disagrees with manifest "
                               f"({entry.kind}/{entry.severity})")
        if r.label != entry.label:
            raise MetricsError(f"{r.image_id}: label {r.label!r} differs from manifest {entry.label!r}")
        cell = (CorruptionKind(entry.kind), entry.severity)
        key = (r.image_id, cell)
        if key in seen:
            raise DuplicateRecordError(f"duplicate record for {r.image_id} ({entry.kind}/{entry.severity})")
        seen.add(key)
        total[cell] += 1
        wrong[cell] += r.pred != r.label
    cells = [(CorruptionKind(k), s) for k, s in manifest.conditions]
    empty = [f"{k.value}/{s}" for k, s in cells if total[(k, s)] == 0]
    if empty:
        raise EmptyCellError(f"no predictions for cells: {', '.join(empty)}")
    errors = {c: wrong[c] / total[c] for c in cells}
    clean = clean_wrong / clean_total if clean_total else None
    return ErrorProfile(network_name, errors, clean, dict(total), clean_total)
