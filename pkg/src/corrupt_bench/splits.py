"""Hold-out split protocols for surface-variation robustness.

Records come from a delimited metadata table with columns
``path, class, platform, subtype, version`` (header required, comma or tab).
Every protocol returns a :class:`SplitSpec` whose train and test id lists
are disjoint and, together with ``excluded``, cover the input records.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .image_core import Rng64

log = logging.getLogger(__name__)

PROTOCOLS = ("style_holdout", "subtype_holdout", "version_holdout", "taxonomy_holdout")


class SplitError(ValueError):
    pass


def _data(name: str) -> str:
    return (resources.files("corrupt_bench") / "data" / name).read_text()


@lru_cache(maxsize=None)
def icons50_classes() -> tuple[str, ...]:
    return tuple(ln.strip() for ln in _data("icons50_classes.txt").splitlines() if ln.strip())


@lru_cache(maxsize=None)
def imagenet22k_broad_classes() -> dict[str, str]:
    """Broad class name -> WordNet id."""
    rows = csv.DictReader(_data("imagenet22k_broad.tsv").splitlines(), delimiter="\t")
    return {r["name"]: r["wnid"] for r in rows}


def cifar100_taxonomy() -> dict[str, list[str]]:
    return json.loads(_data("cifar100_taxonomy.json"))


@dataclass(frozen=True)
class IconRecord:
    path: str
    broad_class: str
    platform: str = ""
    subtype: str = ""
    version: str = ""


def load_metadata(path, classes: Sequence[str] | None = None) -> list[IconRecord]:
    """Read a metadata table; ``classes`` restricts the allowed broad classes."""
    text = Path(path).read_text()
    delim = "\t" if "\t" in text.splitlines()[0] else ","
    rows = list(csv.DictReader(text.splitlines(), delimiter=delim))
    if rows and not {"path", "class"} <= rows[0].keys():
        raise SplitError("metadata needs at least 'path' and 'class' columns")
    recs = [IconRecord(r["path"], r["class"], r.get("platform") or "", r.get("subtype") or "",
                       r.get("version") or "") for r in rows]
    validate_records(recs, classes)
    return recs


def validate_records(records: Sequence[IconRecord], classes: Sequence[str] | None = None) -> None:
    seen = set()
    allowed = set(classes) if classes is not None else None
    for r in records:
        if r.path in seen:
            raise SplitError(f"duplicate record path {r.path!r}")
        seen.add(r.path)
        if allowed is not None and r.broad_class not in allowed:
            raise SplitError(f"{r.path}: class {r.broad_class!r} not in the class list")


@dataclass
class SplitSpec:
    protocol: str
    train: tuple[str, ...]
    test: tuple[str, ...]
    held_out: dict
    excluded: tuple[str, ...] = ()
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"protocol": self.protocol, "held_out": self.held_out,
                "train": list(self.train), "test": list(self.test),
                "excluded": list(self.excluded), "warnings": list(self.warnings)}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def from_dict(cls, d: dict) -> "SplitSpec":
        return cls(d["protocol"], tuple(d["train"]), tuple(d["test"]), d["held_out"],
                   tuple(d.get("excluded", ())), list(d.get("warnings", [])))

    @classmethod
    def load(cls, path) -> "SplitSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def check_partition(self, records: Iterable[IconRecord]) -> None:
        ids = {r.path for r in records}
        tr, te, ex = set(self.train), set(self.test), set(self.excluded)
        if tr & te or tr & ex or te & ex:
            raise SplitError("split parts overlap")
        if tr | te | ex != ids:
            raise SplitError("split does not cover the corpus")


def _make(protocol, records, is_test, held, excluded=()) -> SplitSpec:
    ex = set(excluded)
    train = tuple(sorted(r.path for r in records if r.path not in ex and not is_test(r)))
    test = tuple(sorted(r.path for r in records if r.path not in ex and is_test(r)))
    return SplitSpec(protocol, train, test, held, tuple(sorted(ex)))


def style_holdout(records: Sequence[IconRecord], platform: str,
                  classes: Sequence[str] | None = None) -> SplitSpec:
    """Hold out every icon drawn by one platform / vendor."""
    platforms = sorted({r.platform for r in records})
    if platform not in platforms:
        raise SplitError(f"unknown platform {platform!r}; have {', '.join(platforms)}")
    spec = _make("style_holdout", records, lambda r: r.platform == platform, {"platform": platform})
    covered = {r.broad_class for r in records if r.platform == platform}
    universe = classes if classes is not None else sorted({r.broad_class for r in records})
    absent = [c for c in universe if c not in covered]
    if absent:
        msg = f"platform {platform} has no icons in classes: {', '.join(absent)}"
        log.warning(msg)
        spec.warnings.append(msg)
    return spec


def _subtype_key(r: IconRecord) -> str:
    return f"{r.broad_class}/{r.subtype}"


def subtype_holdout(records: Sequence[IconRecord], held_subtypes: Iterable[str]) -> SplitSpec:
    """Hold out whole subtypes while keeping every broad class in training.

    Entries are either bare subtype names or ``class/subtype`` when a name
    is shared between classes.
    """
    held = [h.strip() for h in held_subtypes if h.strip()]
    subs_by_class: dict[str, set[str]] = {}
    for r in records:
        subs_by_class.setdefault(r.broad_class, set()).add(r.subtype)
    known_bare = {r.subtype for r in records}
    known_full = {_subtype_key(r) for r in records}
    for h in held:
        if h not in known_bare and h not in known_full:
            raise SplitError(f"unknown subtype {h!r}")
    hs = set(held)

    def is_test(r):
        return r.subtype in hs or _subtype_key(r) in hs

    for cls, subs in sorted(subs_by_class.items()):
        if all(s in hs or f"{cls}/{s}" in hs for s in subs):
            raise SplitError(f"entire broad class withheld: {cls!r} would lose all its subtypes "
                             "(held-out subtypes must leave each broad class in training)")
    return _make("subtype_holdout", records, is_test, {"subtypes": sorted(hs)})


def natural_key(s: str):
    return [(0, int(t), "") if t.isdigit() else (1, 0, t) for t in re.split(r"(\d+)", s) if t]


def version_holdout(records: Sequence[IconRecord]) -> SplitSpec:
    """In every (class, platform, subtype) group with several versions, test on the highest."""
    groups: dict[tuple, set[str]] = {}
    for r in records:
        groups.setdefault((r.broad_class, r.platform, r.subtype), set()).add(r.version)
    top = {g: max(v, key=natural_key) for g, v in groups.items() if len(v) >= 2}

    def is_test(r):
        g = (r.broad_class, r.platform, r.subtype)
        return g in top and r.version == top[g]

    return _make("version_holdout", records, is_test,
                 {"rule": "highest version per (class, platform, subtype) group", "groups": len(top)})


def taxonomy_holdout(records: Sequence[IconRecord], taxonomy: Mapping[str, Sequence[str]],
                     k: int, seed: int = 0) -> SplitSpec:
    """Seeded choice of ``k`` held-out subtypes per broad class.

    Records whose (class, subtype) pair is not in ``taxonomy`` are excluded.
    """
    if k < 0:
        raise SplitError("k must be non-negative")
    held: dict[str, list[str]] = {}
    for cls in sorted(taxonomy):
        subs = sorted(taxonomy[cls])
        if k >= len(subs):
            raise SplitError(f"class {cls!r} has {len(subs)} subtypes; cannot hold out {k}")
        rng = Rng64(seed).split(f"taxonomy:{cls}")
        pick = rng.gen.choice(len(subs), size=k, replace=False) if k else []
        held[cls] = sorted(subs[i] for i in pick)
    pairs = {(c, s) for c, subs in taxonomy.items() for s in subs}
    excluded = [r.path for r in records if (r.broad_class, r.subtype) not in pairs]
    hs = {(c, s) for c, subs in held.items() for s in subs}
    return _make("taxonomy_holdout", records, lambda r: (r.broad_class, r.subtype) in hs,
                 {"k": k, "seed": f"{seed:x}", "subtypes": held}, excluded)


def score_split(log_records, split: SplitSpec) -> float:
    """Broad-class accuracy over the split's test ids.

    ``log_records`` are objects with ``image_id``, ``pred`` and ``label``.
    """
    seen: dict[str, bool] = {}
    for r in log_records:
        ok = r.pred == r.label
        if r.image_id in seen and seen[r.image_id] != ok:
            raise SplitError(f"conflicting predictions for {r.image_id}")
        seen[r.image_id] = ok
    missing = [i for i in split.test if i not in seen]
    if missing:
        head = ", ".join(missing[:10]) + (" ..." if len(missing) > 10 else "")
        raise SplitError(f"{len(missing)} test ids missing from the log: {head}")
    if not split.test:
        raise SplitError("split has no test ids")
    return sum(seen[i] for i in split.test) / len(split.test)
