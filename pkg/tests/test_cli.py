import json

import pytest

from corrupt_bench.cli import main
from corrupt_bench.pipeline import DatasetManifest, PredictionRecord, write_prediction_log

from .conftest import synthetic_icons
from .test_pipeline import make_tree


def test_generate_and_report(tmp_path, capsys):
    src = make_tree(tmp_path / "src", classes=("a", "b"), per_class=1, size=32)
    out = tmp_path / "out"
    assert main(["generate", "--src", str(src), "--out", str(out), "--kinds", "core",
                 "--severities", "1-5", "--salt", "ff", "--no-resize"]) == 0
    m = DatasetManifest.load(out / "manifest.json")
    assert len(m.entries) == 150
    recs = [PredictionRecord(e.path, e.label if e.severity < 3 else "zzz", e.label, "corrupted")
            for e in m.entries]
    recs += [PredictionRecord(s, s.split("/")[0], s.split("/")[0], "clean") for s in m.sources]
    write_prediction_log(recs, tmp_path / "log.jsonl")
    rep = tmp_path / "report.json"
    assert main(["report", "--manifest", str(out / "manifest.json"),
                 "--predictions", str(tmp_path / "log.jsonl"), "--out", str(rep)]) == 0
    d = json.loads(rep.read_text())
    assert d["clean_error"] == 0.0 and d["table_version"] == "v1"
    assert d["ce"]["gaussian_noise"] == pytest.approx(100 * 3 / (5 * 0.886))
    assert "mCE" in capsys.readouterr().out


def test_generate_refuses_nonempty_and_flags_bad_files(tmp_path, capsys):
    src = make_tree(tmp_path / "src", classes=("a",), per_class=1, size=32)
    (src / "a" / "bad.png").write_bytes(b"xx")
    out = tmp_path / "out"
    assert main(["generate", "--src", str(src), "--out", str(out), "--kinds", "fog",
                 "--severities", "1", "--no-resize"]) == 1
    assert "bad.png" in capsys.readouterr().err
    assert main(["generate", "--src", str(src), "--out", str(out), "--kinds", "fog",
                 "--severities", "1", "--no-resize"]) == 2
    assert main(["generate", "--src", str(src), "--out", str(out), "--kinds", "fog",
                 "--severities", "1", "--no-resize", "--resume"]) == 1


def test_split_commands(tmp_path):
    recs = synthetic_icons(80)
    meta = tmp_path / "meta.csv"
    meta.write_text("path,class,platform,subtype,version\n" + "".join(
        f"{r.path},{r.broad_class},{r.platform},{r.subtype},{r.version}\n" for r in recs))
    out = tmp_path / "split.json"
    assert main(["split", "--protocol", "style", "--meta", str(meta), "--holdout", "Google",
                 "--out", str(out), "--icons50"]) == 0
    assert json.loads(out.read_text())["protocol"] == "style_holdout"
    subs = tmp_path / "subs.txt"
    subs.write_text(recs[0].subtype + "\n")
    assert main(["split", "--protocol", "subtype", "--meta", str(meta), "--subtypes", str(subs),
                 "--out", str(out)]) == 0
    assert main(["split", "--protocol", "version", "--meta", str(meta), "--out", str(out)]) == 0
    assert main(["split", "--protocol", "taxonomy", "--meta", str(meta), "--k", "1",
                 "--seed", "2a", "--out", str(out)]) == 0
    assert main(["split", "--protocol", "style", "--meta", str(meta), "--holdout", "Nokia",
                 "--out", str(out)]) == 2


def test_preprocess_command(tmp_path):
    src = make_tree(tmp_path / "src", classes=("a",), per_class=2, size=32)
    for method in ("clahe", "nlmeans"):
        out = tmp_path / method
        assert main(["preprocess", "--method", method, "--in", str(src), "--out", str(out)]) == 0
        assert len(list(out.rglob("*.png"))) == 2


def test_corpus_and_calibrate_commands(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    assert main(["corpus", "--out", str(corpus), "--count", "50"]) == 0
    assert main(["calibrate", "--corpus", str(corpus), "--kinds", "brightness", "--no-bands"]) == 0
    assert "calibration passed" in capsys.readouterr().out
    # bands were published on the full 100-image corpus
    assert main(["calibrate", "--corpus", str(corpus), "--kinds", "brightness"]) == 2
