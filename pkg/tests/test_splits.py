import random

import pytest

from corrupt_bench.pipeline import PredictionRecord
from corrupt_bench.splits import (
    IconRecord,
    SplitError,
    SplitSpec,
    cifar100_taxonomy,
    icons50_classes,
    imagenet22k_broad_classes,
    load_metadata,
    natural_key,
    score_split,
    style_holdout,
    subtype_holdout,
    taxonomy_holdout,
    version_holdout,
)

from .conftest import synthetic_icons


def test_shipped_class_lists():
    cls = icons50_classes()
    assert len(cls) == 50 and len(set(cls)) == 50
    assert cls[0] == "Airplane" and cls[-1] == "Writing Utensil" and "Bunny Ears" in cls
    wn = imagenet22k_broad_classes()
    assert len(wn) == 25
    assert wn["Amphibian"] == "n01627424" and wn["Vehicle"] == "n04576211"
    assert all(v.startswith("n") and len(v) == 9 for v in wn.values())
    tax = cifar100_taxonomy()
    assert len(tax) == 20 and all(len(v) == 5 for v in tax.values())
    assert len({s for v in tax.values() for s in v}) == 100


def test_style_holdout_partition():
    recs = synthetic_icons(120, platforms=("Apple", "Google", "Microsoft"))
    spec = style_holdout(recs, "Microsoft")
    spec.check_partition(recs)
    by_path = {r.path: r for r in recs}
    assert {by_path[p].platform for p in spec.train} == {"Apple", "Google"}
    assert {by_path[p].platform for p in spec.test} == {"Microsoft"}


def test_style_holdout_covers_all_50_classes():
    recs = synthetic_icons(50 * 4, classes=icons50_classes())
    spec = style_holdout(recs, "Microsoft", icons50_classes())
    by_path = {r.path: r for r in recs}
    assert {by_path[p].broad_class for p in spec.test} == set(icons50_classes())
    assert spec.warnings == []


def test_style_holdout_warns_on_missing_classes():
    recs = synthetic_icons(40) + [IconRecord("x.png", "Kiss", "Rare", "kiss_0", "v1")]
    spec = style_holdout(recs, "Rare")
    assert spec.warnings and "Airplane" in spec.warnings[0]


def test_style_holdout_unknown_platform():
    with pytest.raises(SplitError, match="unknown platform"):
        style_holdout(synthetic_icons(20), "Nokia")


def test_subtype_holdout_duck():
    recs = [IconRecord(f"b{i}.png", "Bird", "Apple", sub, "v1")
            for i, sub in enumerate(["duck", "duck", "eagle", "owl", "parrot"])]
    recs += [IconRecord("c.png", "Clock", "Apple", "alarm", "v1")]
    spec = subtype_holdout(recs, ["duck"])
    assert spec.test == ("b0.png", "b1.png")
    assert set(spec.train) == {"b2.png", "b3.png", "b4.png", "c.png"}
    spec.check_partition(recs)


def test_subtype_holdout_empty_list():
    recs = synthetic_icons(30)
    spec = subtype_holdout(recs, [])
    assert spec.test == () and len(spec.train) == 30


def test_subtype_holdout_rejects_whole_class():
    recs = [IconRecord("a.png", "Bird", "A", "duck", "v1"), IconRecord("b.png", "Bird", "A", "owl", "v1"),
            IconRecord("c.png", "Cloud", "A", "rain", "v1")]
    with pytest.raises(SplitError, match="entire broad class withheld"):
        subtype_holdout(recs, ["duck", "owl"])
    with pytest.raises(SplitError, match="unknown subtype"):
        subtype_holdout(recs, ["penguin"])


def test_subtype_holdout_class_qualified_names():
    recs = [IconRecord("a.png", "Bird", "A", "small", "v1"), IconRecord("b.png", "Bird", "A", "big", "v1"),
            IconRecord("c.png", "Boat", "A", "small", "v1"), IconRecord("d.png", "Boat", "A", "big", "v1")]
    spec = subtype_holdout(recs, ["Bird/small"])
    assert spec.test == ("a.png",)


def test_version_holdout_highest_version():
    recs = [IconRecord(f"{v}.png", "Hat", "A", "cap", v) for v in ("v1", "v2", "v3")]
    recs += [IconRecord("solo.png", "Hat", "B", "cap", "v1")]
    spec = version_holdout(recs)
    assert spec.test == ("v3.png",)
    assert set(spec.train) == {"v1.png", "v2.png", "solo.png"}


def test_version_holdout_natural_order_and_single_versions():
    recs = [IconRecord(f"{v}.png", "Hat", "A", "cap", v) for v in ("v2", "v10", "v9")]
    assert version_holdout(recs).test == ("v10.png",)
    assert natural_key("v10") > natural_key("v9")
    single = [IconRecord(f"{i}.png", "Hat", str(i), "cap", "v1") for i in range(5)]
    assert version_holdout(single).test == ()


def test_version_holdout_deterministic():
    recs = synthetic_icons(200, seed=4)
    assert version_holdout(recs).to_dict() == version_holdout(list(reversed(recs))).to_dict()


def cifar_records():
    return [IconRecord(f"{c}/{s}/{i}.png", c, "cifar", s, "v1")
            for c, subs in cifar100_taxonomy().items() for s in subs for i in range(3)]


def test_taxonomy_holdout_cifar_k4():
    recs = cifar_records()
    spec = taxonomy_holdout(recs, cifar100_taxonomy(), 4, seed=0xAB)
    spec.check_partition(recs)
    by_path = {r.path: r for r in recs}
    train_subs = {}
    for p in spec.train:
        train_subs.setdefault(by_path[p].broad_class, set()).add(by_path[p].subtype)
    assert len(train_subs) == 20 and all(len(s) == 1 for s in train_subs.values())


def test_taxonomy_holdout_k0_and_determinism():
    recs = cifar_records()
    assert taxonomy_holdout(recs, cifar100_taxonomy(), 0).test == ()
    a = taxonomy_holdout(recs, cifar100_taxonomy(), 2, seed=5)
    b = taxonomy_holdout(recs, cifar100_taxonomy(), 2, seed=5)
    c = taxonomy_holdout(recs, cifar100_taxonomy(), 2, seed=6)
    assert a.to_dict() == b.to_dict() and a.to_dict() != c.to_dict()


def test_taxonomy_holdout_errors_and_exclusions():
    with pytest.raises(SplitError):
        taxonomy_holdout(cifar_records(), cifar100_taxonomy(), 5)
    recs = cifar_records() + [IconRecord("other.png", "misc", "x", "thing", "v1")]
    spec = taxonomy_holdout(recs, cifar100_taxonomy(), 1)
    assert spec.excluded == ("other.png",)
    spec.check_partition(recs)


def test_score_split():
    ids = [f"{i}.png" for i in range(10)]
    spec = SplitSpec("style_holdout", (), tuple(ids), {})
    right = [PredictionRecord(i, "a", "a", "clean") for i in ids]
    assert score_split(right, spec) == 1.0
    alt = [PredictionRecord(i, "a" if n % 2 else "b", "a", "clean") for n, i in enumerate(ids)]
    assert score_split(alt, spec) == 0.5
    shuffled = alt[:]
    random.Random(1).shuffle(shuffled)
    assert score_split(shuffled, spec) == 0.5
    with pytest.raises(SplitError, match="missing"):
        score_split(alt[:7], spec)


def test_load_metadata(tmp_path):
    p = tmp_path / "meta.csv"
    p.write_text("path,class,platform,subtype,version\na.png,Bird,Apple,duck,1\nb.png,Bird,Google,owl,2\n")
    recs = load_metadata(p, icons50_classes())
    assert recs[0] == IconRecord("a.png", "Bird", "Apple", "duck", "1")
    p.write_text("path\tclass\tplatform\tsubtype\tversion\na.png\tDragon\tA\tx\t1\n")
    with pytest.raises(SplitError, match="not in the class list"):
        load_metadata(p, icons50_classes())
    p.write_text("path,class\na.png,Bird\na.png,Bird\n")
    with pytest.raises(SplitError, match="duplicate"):
        load_metadata(p)


def test_split_spec_roundtrip(tmp_path):
    recs = synthetic_icons(60)
    spec = version_holdout(recs)
    spec.save(tmp_path / "s.json")
    assert SplitSpec.load(tmp_path / "s.json").to_dict() == spec.to_dict()
