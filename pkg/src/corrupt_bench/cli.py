"""``corrupt-bench`` command line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import calibration, metrics, pipeline, preprocessing, splits
from .corruptions import SEVERITIES, SeverityTable, kinds_for, load_table
from .image_core import load_image, save_image

log = logging.getLogger("corrupt_bench")


def _severities(text: str) -> list[int]:
    out = set()
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-")
            out.update(range(int(a), int(b) + 1))
        else:
            out.add(int(part))
    bad = sorted(s for s in out if s not in SEVERITIES)
    if bad:
        raise argparse.ArgumentTypeError(f"severities outside 1-5: {bad}")
    return sorted(out)


def _table(name: str) -> SeverityTable:
    return load_table(name)


def cmd_generate(a) -> int:
    m = pipeline.generate_dataset(
        a.src, a.out, kinds_for(a.kinds), a.severities, int(a.salt, 16), table=_table(a.table),
        lossless=a.lossless, resume=a.resume, jobs=a.jobs,
        resize=None if a.no_resize else a.size, textures_dir=a.textures,
    )
    print(f"wrote {len(m.entries)} images for {len(m.sources)} sources "
          f"({len(m.conditions)} conditions) to {a.out}")
    if m.errors:
        for e in m.errors:
            print(f"error: {e['source']}: {e['error']}", file=sys.stderr)
        print(f"{len(m.errors)} source file(s) skipped", file=sys.stderr)
        return 1
    return 0


def cmd_report(a) -> int:
    manifest = pipeline.DatasetManifest.load(a.manifest)
    recs = pipeline.read_prediction_log(a.predictions)
    profile = metrics.build_error_profile(recs, manifest, a.name)
    report = metrics.build_report(profile, table_version=manifest.table_version)
    Path(a.out).write_text(json.dumps(report.to_dict(), indent=1) + "\n")
    print(report.display())
    return 0


def cmd_preprocess(a) -> int:
    src, out = Path(a.inp), Path(a.out)
    files = sorted(p for p in src.rglob("*") if p.suffix.lower() in pipeline.IMAGE_SUFFIXES)
    if a.method == "clahe":
        params = preprocessing.ClaheParams((a.tiles, a.tiles), a.clip, a.bins)
        fn = lambda im: preprocessing.clahe(im, params)  # noqa: E731
    else:
        params = preprocessing.NlMeansParams(a.patch, a.search, a.h)
        fn = lambda im: preprocessing.denoise_gated(im, params, a.gate)  # noqa: E731
    for p in files:
        dest = out / p.relative_to(src)
        dest.parent.mkdir(parents=True, exist_ok=True)
        save_image(fn(load_image(p)), dest)
    print(f"processed {len(files)} images into {out}")
    return 0


def cmd_split(a) -> int:
    classes = splits.icons50_classes() if a.icons50 else None
    recs = splits.load_metadata(a.meta, classes)
    if a.protocol == "style":
        if not a.holdout:
            raise splits.SplitError("--holdout PLATFORM is required")
        spec = splits.style_holdout(recs, a.holdout, classes)
    elif a.protocol == "subtype":
        held = Path(a.subtypes).read_text().splitlines() if a.subtypes else []
        spec = splits.subtype_holdout(recs, held)
    elif a.protocol == "version":
        spec = splits.version_holdout(recs)
    else:
        if a.taxonomy == "cifar100":
            tax = splits.cifar100_taxonomy()
        elif a.taxonomy:
            tax = json.loads(Path(a.taxonomy).read_text())
        else:
            tax = {}
            for r in recs:
                tax.setdefault(r.broad_class, set()).add(r.subtype)
            tax = {c: sorted(s) for c, s in tax.items()}
        spec = splits.taxonomy_holdout(recs, tax, a.k, int(a.seed, 16))
    spec.save(a.out)
    for w in spec.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"{spec.protocol}: {len(spec.train)} train, {len(spec.test)} test, "
          f"{len(spec.excluded)} excluded -> {a.out}")
    return 0


def cmd_calibrate(a) -> int:
    table = _table(a.table)
    if a.corpus:
        corpus = calibration.load_corpus(a.corpus, table.calibration_size)
    else:
        corpus = calibration.reference_corpus(size=table.calibration_size)
    bands = None if a.no_bands else "published"
    kinds = kinds_for(a.kinds) if a.kinds else None
    rep = calibration.check_calibration(table, corpus, bands, kinds, jobs=a.jobs)
    for k, m in rep.means.items():
        print(f"{k.value:18s} " + " ".join(f"{v:.4f}" for v in m))
    if a.out:
        Path(a.out).write_text(json.dumps(rep.to_dict(), indent=1) + "\n")
    for f in rep.failures:
        print(f"FAIL {f}")
    print("calibration passed" if rep.passed else f"{len(rep.failures)} calibration failure(s)")
    return 0 if rep.passed else 1


def cmd_corpus(a) -> int:
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, im in enumerate(calibration.reference_corpus(a.count)):
        save_image(im, out / f"ref_{i:03d}.png")
    print(f"wrote {a.count} reference images to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="corrupt-bench",
                                description="Corrupted benchmark generation and robustness metrics.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a corrupted copy of an image tree")
    g.add_argument("--src", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--kinds", default="core", help="core, extra, all or a comma list")
    g.add_argument("--severities", type=_severities, default=list(SEVERITIES))
    g.add_argument("--salt", default="0", help="hex dataset salt")
    g.add_argument("--table", default="v1")
    g.add_argument("--lossless", action="store_true", help="PNG outputs instead of JPEG q85")
    g.add_argument("--resume", action="store_true")
    g.add_argument("--jobs", type=int, default=1)
    g.add_argument("--size", type=int, default=pipeline.DEFAULT_SIZE)
    g.add_argument("--no-resize", action="store_true")
    g.add_argument("--textures", help="directory of frost texture images")
    g.set_defaults(fn=cmd_generate)

    r = sub.add_parser("report", help="CE / mCE report from a prediction log")
    r.add_argument("--manifest", required=True)
    r.add_argument("--predictions", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--name", default="model")
    r.set_defaults(fn=cmd_report)

    pp = sub.add_parser("preprocess", help="apply CLAHE or gated NL-means to an image tree")
    pp.add_argument("--method", choices=("clahe", "nlmeans"), required=True)
    pp.add_argument("--in", dest="inp", required=True)
    pp.add_argument("--out", required=True)
    pp.add_argument("--tiles", type=int, default=8)
    pp.add_argument("--clip", type=float, default=2.0)
    pp.add_argument("--bins", type=int, default=256)
    pp.add_argument("--patch", type=int, default=2)
    pp.add_argument("--search", type=int, default=5)
    pp.add_argument("--h", type=float, default=0.8, help="NL-means strength as a multiple of sigma")
    pp.add_argument("--gate", type=float, default=preprocessing.DEFAULT_GATE)
    pp.set_defaults(fn=cmd_preprocess)

    s = sub.add_parser("split", help="build a hold-out split from icon metadata")
    s.add_argument("--protocol", choices=("style", "subtype", "version", "taxonomy"), required=True)
    s.add_argument("--meta", required=True, help="CSV/TSV with path,class,platform,subtype,version")
    s.add_argument("--holdout", help="platform to hold out (style)")
    s.add_argument("--subtypes", help="file with one held-out subtype per line (subtype)")
    s.add_argument("--taxonomy", help="JSON class->subtypes map, or 'cifar100' (taxonomy)")
    s.add_argument("--k", type=int, default=1)
    s.add_argument("--seed", default="0", help="hex seed (taxonomy)")
    s.add_argument("--icons50", action="store_true", help="require classes from the Icons-50 list")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_split)

    c = sub.add_parser("calibrate", help="check severity monotonicity and calibration bands")
    c.add_argument("--table", default="v1")
    c.add_argument("--corpus", help="image directory (default: built-in reference corpus)")
    c.add_argument("--kinds", help="core, extra, all or a comma list (default: all in table)")
    c.add_argument("--no-bands", action="store_true", help="check monotonicity only")
    c.add_argument("--jobs", type=int, default=1)
    c.add_argument("--out", help="write the report as JSON")
    c.set_defaults(fn=cmd_calibrate)

    rc = sub.add_parser("corpus", help="export the built-in reference corpus as PNG files")
    rc.add_argument("--out", required=True)
    rc.add_argument("--count", type=int, default=calibration.REFERENCE_COUNT)
    rc.set_defaults(fn=cmd_corpus)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (ValueError, RuntimeError, OSError) as e:
        print(f"corrupt-bench: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
