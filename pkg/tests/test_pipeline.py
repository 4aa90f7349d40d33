import json

import numpy as np
import pytest

from corrupt_bench.calibration import render_reference_image
from corrupt_bench.corruptions import CORE_KINDS, SEVERITIES, CorruptionKind
from corrupt_bench.image_core import decode_image, pixel_hash, save_image
from corrupt_bench.pipeline import (
    MANIFEST_NAME,
    DatasetError,
    DatasetManifest,
    PredictionRecord,
    ProtocolError,
    average_distributions,
    derive_seed,
    generate_dataset,
    read_prediction_log,
    regenerate_entry,
    ten_crop,
    write_prediction_log,
)

from .conftest import asymmetric

K = CorruptionKind


def make_tree(root, classes=("cat", "dog"), per_class=2, size=48, order=None):
    names = [(c, i) for c in classes for i in range(per_class)]
    if order == "reversed":
        names = names[::-1]
    for n, (c, i) in enumerate(names):
        d = root / c
        d.mkdir(parents=True, exist_ok=True)
        idx = classes.index(c) * per_class + i
        save_image(render_reference_image(idx, size=size), d / f"img{i}.png")
    return root


def decoded_hashes(out_dir, manifest):
    return {e.path: pixel_hash(decode_image((out_dir / e.path).read_bytes())) for e in manifest.entries}


# -- seeds ---------------------------------------------------------------------

def test_derive_seed_basic():
    a = derive_seed(7, "cat/x.jpg", "fog", 3)
    assert a == derive_seed(7, "cat/x.jpg", "fog", 3)
    assert a != derive_seed(7, "cat/x.jpg", "fog", 4)
    assert a != derive_seed(8, "cat/x.jpg", "fog", 3)
    assert a != derive_seed(7, "cat/y.jpg", "fog", 3)
    assert a == derive_seed(7, "cat/x.jpg", K.FOG, 3)
    assert 0 <= a < 2**64


def test_derive_seed_no_collisions_over_a_million_paths():
    seeds = {derive_seed(1, f"n{i:07d}.JPEG", "fog", 3) for i in range(10**6)}
    # birthday bound for 1e6 draws from 2**64 values: ~2.7e-8 expected collisions
    assert len(seeds) == 10**6


# -- generation ----------------------------------------------------------------

def test_generate_counts_and_layout(tmp_path):
    src = make_tree(tmp_path / "src")
    out = tmp_path / "out"
    m = generate_dataset(src, out, [K.GAUSSIAN_NOISE, K.FROST], SEVERITIES, salt=1, resize=None)
    files = [p for p in out.rglob("*") if p.is_file()]
    assert len(files) == 41 and (out / MANIFEST_NAME).is_file()
    assert len(m.entries) == 40 and len({e.path for e in m.entries}) == 40
    assert (out / "gaussian_noise" / "3" / "dog" / "img1.jpg").is_file()
    assert all(e.texture for e in m.entries if e.kind == "frost")
    assert all(e.texture is None for e in m.entries if e.kind != "frost")
    assert m.test_only
    doc = json.loads((out / MANIFEST_NAME).read_text())
    assert doc["test_only"] is True and doc["table_version"] == "v1"
    for e in m.entries:
        assert e.seed == derive_seed(1, e.source, e.kind, e.severity)


def test_manifest_enumerates_75_conditions(tmp_path):
    src = make_tree(tmp_path / "src", classes=("a",), per_class=1, size=32)
    m = generate_dataset(src, tmp_path / "out", CORE_KINDS, SEVERITIES, resize=None)
    assert len(m.conditions) == 75 and len(m.entries) == 75


def test_rerun_is_bitwise_identical_and_salt_matters(tmp_path):
    src = make_tree(tmp_path / "src")
    kinds = [K.SHOT_NOISE, K.FOG, K.CONTRAST]
    a = generate_dataset(src, tmp_path / "a", kinds, [2, 4], salt=5, resize=None)
    b = generate_dataset(src, tmp_path / "b", kinds, [2, 4], salt=5, resize=None)
    c = generate_dataset(src, tmp_path / "c", kinds, [2, 4], salt=6, resize=None)
    ha, hb, hc = (decoded_hashes(tmp_path / d, m) for d, m in (("a", a), ("b", b), ("c", c)))
    assert ha == hb
    for path, h in ha.items():
        kind = K(path.split("/")[0])
        assert (h != hc[path]) == kind.stochastic


def test_jpeg_kind_writes_its_own_encoding(tmp_path):
    src = make_tree(tmp_path / "src", classes=("a",), per_class=1)
    m = generate_dataset(src, tmp_path / "out", [K.JPEG], [5], resize=None, lossless=True)
    e = m.entries[0]
    assert e.path.endswith(".jpg")
    data = (tmp_path / "out" / e.path).read_bytes()
    assert data[:2] == b"\xff\xd8"
    assert regenerate_entry(m, e, src) == data


def test_lossless_mode_png(tmp_path):
    src = make_tree(tmp_path / "src", classes=("a",), per_class=1)
    m = generate_dataset(src, tmp_path / "out", [K.BRIGHTNESS], [1], resize=None, lossless=True)
    data = (tmp_path / "out" / m.entries[0].path).read_bytes()
    assert data[:4] == b"\x89PNG" and m.encoding == {"format": "png"}


def test_regenerate_single_file(tmp_path):
    src = make_tree(tmp_path / "src")
    out = tmp_path / "out"
    generate_dataset(src, out, [K.GLASS_BLUR, K.SNOW], [3], salt=9, resize=None)
    m = DatasetManifest.load(out / MANIFEST_NAME)
    for e in m.entries:
        assert regenerate_entry(m, e, src) == (out / e.path).read_bytes()


def test_regenerate_detects_changed_source(tmp_path):
    src = make_tree(tmp_path / "src")
    m = generate_dataset(src, tmp_path / "out", [K.FOG], [1], resize=None)
    e = m.entries[0]
    save_image(np.zeros((48, 48, 3)), src / e.source)
    with pytest.raises(DatasetError, match="changed"):
        regenerate_entry(m, e, src)


def test_nonempty_output_requires_resume(tmp_path):
    src = make_tree(tmp_path / "src")
    out = tmp_path / "out"
    out.mkdir()
    (out / "stray.txt").write_text("x")
    with pytest.raises(DatasetError, match="not empty"):
        generate_dataset(src, out, [K.FOG], [1])


def test_resume_completes_interrupted_run(tmp_path):
    src = make_tree(tmp_path / "src")
    out = tmp_path / "out"
    full = generate_dataset(src, out, [K.FOG, K.PIXELATE], [1, 2], salt=3, resize=None)
    before = decoded_hashes(out, full)
    # simulate a crash: some outputs and the manifest are missing
    (out / MANIFEST_NAME).unlink()
    for e in full.entries[::3]:
        (out / e.path).unlink()
    again = generate_dataset(src, out, [K.FOG, K.PIXELATE], [1, 2], salt=3, resize=None, resume=True)
    assert again.to_dict() == full.to_dict()
    assert decoded_hashes(out, again) == before


def test_bad_source_recorded_and_skipped(tmp_path):
    src = make_tree(tmp_path / "src")
    (src / "cat" / "broken.jpg").write_bytes(b"garbage")
    m = generate_dataset(src, tmp_path / "out", [K.FOG], [1], resize=None)
    assert [e["source"] for e in m.errors] == ["cat/broken.jpg"]
    assert len(m.entries) == 4


def test_enumeration_order_and_workers_do_not_matter(tmp_path):
    a_src = make_tree(tmp_path / "a_src")
    b_src = make_tree(tmp_path / "b_src", order="reversed")
    ma = generate_dataset(a_src, tmp_path / "a", [K.FOG, K.SNOW], [1, 5], salt=2, resize=None)
    mb = generate_dataset(b_src, tmp_path / "b", [K.FOG, K.SNOW], [1, 5], salt=2, resize=None, jobs=2)
    assert ma.to_dict() == mb.to_dict()


def test_default_resize_to_224(tmp_path):
    src = make_tree(tmp_path / "src", classes=("a",), per_class=1, size=64)
    m = generate_dataset(src, tmp_path / "out", [K.BRIGHTNESS], [1])
    img = decode_image((tmp_path / "out" / m.entries[0].path).read_bytes())
    assert img.shape == (224, 224, 3) and m.resize == 224


def test_manifest_protocol_flag_enforced(tmp_path):
    src = make_tree(tmp_path / "src", classes=("a",), per_class=1)
    m = generate_dataset(src, tmp_path / "out", [K.FOG], [1], resize=None)
    doc = m.to_dict()
    doc["test_only"] = False
    with pytest.raises(ProtocolError):
        DatasetManifest.from_dict(doc)


def test_prediction_log_roundtrip(tmp_path):
    recs = [PredictionRecord("fog/1/a/x.jpg", "a", "b", "corrupted"),
            PredictionRecord("a/x.jpg", "a", "a", "clean")]
    p = tmp_path / "log.jsonl"
    write_prediction_log(recs, p)
    assert read_prediction_log(p) == recs
    p.write_text('{"image_id": "x"}\n')
    with pytest.raises(ValueError, match="missing field"):
        read_prediction_log(p)


# -- ten crop / averaging --------------------------------------------------------

def test_ten_crop_full_size():
    img = asymmetric(12, 12)
    crops = ten_crop(img, 12)
    assert len(crops) == 10
    assert all(np.array_equal(c, img) for c in crops[:5])
    assert all(np.array_equal(c, img[:, ::-1]) for c in crops[5:])


def test_ten_crop_matches_index_arithmetic():
    h, w, c = 13, 17, 6
    img = asymmetric(h, w)
    crops = ten_crop(img, c)
    expect = [img[0:c, 0:c], img[0:c, w - c:w], img[h - c:h, 0:c], img[h - c:h, w - c:w],
              img[(h - c) // 2:(h - c) // 2 + c, (w - c) // 2:(w - c) // 2 + c]]
    for got, exp in zip(crops[:5], expect):
        assert np.array_equal(got, exp)
    for plain, mirror in zip(crops[:5], crops[5:]):
        assert np.array_equal(mirror[:, ::-1], plain)
    assert len({c.tobytes() for c in crops}) == 10


def test_ten_crop_oversize():
    with pytest.raises(ValueError):
        ten_crop(asymmetric(8, 10), 9)


def test_average_distributions():
    assert np.allclose(average_distributions([[0.2, 0.8]]), [0.2, 0.8])
    assert np.allclose(average_distributions([[1, 0], [0, 1]]), [0.5, 0.5])
    rng = np.random.default_rng(3)
    d = rng.dirichlet(np.ones(7), size=10)
    got = average_distributions(list(d))
    expect = [sum(d[i][j] for i in range(10)) / 10 for j in range(7)]
    assert np.allclose(got, expect, atol=1e-15) and abs(got.sum() - 1) < 1e-6
    with pytest.raises(ValueError):
        average_distributions([[0.5, 0.5], [1.0]])
    with pytest.raises(ValueError):
        average_distributions([[0.5, 0.6]])
