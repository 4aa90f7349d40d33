"""Versioned per-severity parameter tables."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Any, Mapping

from .kinds import ALL_KINDS, CorruptionKind

SEVERITIES = (1, 2, 3, 4, 5)
DEFAULT_VERSION = "v1"


class SeverityTableError(ValueError):
    pass


@dataclass(frozen=True)
class SeverityTable:
    """Immutable ``kind -> param -> [value for severity 1..5]`` table.

    ``directions`` records, per parameter, which way distortion grows:
    ``"increasing"``, ``"decreasing"``, ``"constant"``, or an ordered list of
    categorical values (e.g. ``["rain", "mud"]``).
    """

    version: str
    calibration_size: int
    columns: Mapping[CorruptionKind, Mapping[str, tuple]]
    directions: Mapping[CorruptionKind, Mapping[str, Any]]

    def params(self, kind: CorruptionKind, severity: int) -> dict[str, Any]:
        kind = CorruptionKind(kind)
        if severity not in SEVERITIES:
            raise SeverityTableError(f"severity must be one of {SEVERITIES}, got {severity!r}")
        if kind not in self.columns:
            raise SeverityTableError(f"table {self.version} has no parameters for {kind.value}")
        return {name: vals[severity - 1] for name, vals in self.columns[kind].items()}

    @property
    def kinds(self) -> tuple[CorruptionKind, ...]:
        return tuple(k for k in ALL_KINDS if k in self.columns)

    def monotonicity_violations(self) -> list[str]:
        out = []
        for kind, cols in self.columns.items():
            for name, vals in cols.items():
                rule = self.directions.get(kind, {}).get(name, "increasing")
                if isinstance(rule, (list, tuple)):
                    try:
                        seq = [list(rule).index(v) for v in vals]
                    except ValueError:
                        out.append(f"{kind.value}.{name}: value outside {list(rule)}")
                        continue
                    ok = all(a <= b for a, b in zip(seq, seq[1:]))
                elif rule == "increasing":
                    ok = all(a <= b for a, b in zip(vals, vals[1:])) and vals[0] != vals[-1]
                elif rule == "decreasing":
                    ok = all(a >= b for a, b in zip(vals, vals[1:])) and vals[0] != vals[-1]
                elif rule == "constant":
                    ok = len(set(vals)) == 1
                else:
                    out.append(f"{kind.value}.{name}: unknown direction {rule!r}")
                    continue
                if not ok:
                    out.append(f"{kind.value}.{name}: {list(vals)} not {rule}")
        return out

    def replace(self, kind: CorruptionKind, severity: int, **values) -> "SeverityTable":
        """Copy with some parameters of one cell overwritten (same version label)."""
        cols = {k: {n: list(v) for n, v in c.items()} for k, c in self.columns.items()}
        for name, val in values.items():
            cols[kind][name][severity - 1] = val
        return _build(self.version, self.calibration_size, cols, self.directions)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "calibration_size": self.calibration_size,
            "kinds": {
                k.value: {
                    "params": {n: list(v) for n, v in self.columns[k].items()},
                    "direction": dict(self.directions.get(k, {})),
                }
                for k in self.kinds
            },
        }

    def digest(self) -> str:
        """sha256 of the canonical JSON form; pins exact parameter values."""
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def from_dict(cls, doc: Mapping) -> "SeverityTable":
        try:
            version = str(doc["version"])
            kinds = doc["kinds"]
        except KeyError as e:
            raise SeverityTableError(f"severity table missing field {e}") from None
        cols, dirs = {}, {}
        for name, entry in kinds.items():
            kind = CorruptionKind.parse(name)
            params = entry.get("params", {})
            for p, vals in params.items():
                if len(vals) != len(SEVERITIES):
                    raise SeverityTableError(f"{name}.{p}: expected 5 values, got {len(vals)}")
            cols[kind] = params
            dirs[kind] = entry.get("direction", {})
        return _build(version, int(doc.get("calibration_size", 224)), cols, dirs)

    @classmethod
    def load(cls, path) -> "SeverityTable":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _freeze(v):
    return tuple(v) if isinstance(v, list) else v


def _build(version, size, cols, dirs) -> SeverityTable:
    frozen_cols = MappingProxyType({
        CorruptionKind(k): MappingProxyType({n: tuple(_freeze(x) for x in vals) for n, vals in c.items()})
        for k, c in cols.items()
    })
    frozen_dirs = MappingProxyType({
        CorruptionKind(k): MappingProxyType({n: _freeze(r) for n, r in d.items()})
        for k, d in dirs.items()
    })
    return SeverityTable(version, size, frozen_cols, frozen_dirs)


_CACHE: dict[str, SeverityTable] = {}


def load_table(name_or_path: str = DEFAULT_VERSION) -> SeverityTable:
    """Load a shipped table by version label (``"v1"``) or a JSON file path."""
    if name_or_path in _CACHE:
        return _CACHE[name_or_path]
    p = Path(name_or_path)
    if p.suffix == ".json" and p.exists():
        return SeverityTable.load(p)
    ref = resources.files("corrupt_bench") / "data" / f"severity_{name_or_path}.json"
    if not ref.is_file():
        raise SeverityTableError(f"no shipped severity table {name_or_path!r}")
    table = SeverityTable.from_dict(json.loads(ref.read_text()))
    _CACHE[name_or_path] = table
    return table
