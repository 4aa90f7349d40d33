import numpy as np
import pytest

from corrupt_bench.calibration import render_reference_image


@pytest.fixture(scope="session")
def photo64():
    """A 64x64 rendered scene with edges, texture and smooth regions."""
    return render_reference_image(3, size=64)


@pytest.fixture(scope="session")
def photo128():
    return render_reference_image(7, size=128)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def asymmetric(h, w):
    """Image whose every pixel differs, so crops and flips are distinguishable."""
    y, x = np.mgrid[0:h, 0:w]
    r = (y * w + x) / (h * w)
    return np.stack([r, (x / w) ** 2, (y / h) ** 0.5], axis=-1)


def synthetic_icons(n=500, seed=0, classes=None, subtypes_per_class=4,
                    platforms=("Apple", "Google", "Microsoft", "Samsung")):
    """Metadata corpus: each class has several subtypes drawn on several platforms,
    some in more than one version."""
    from corrupt_bench.splits import IconRecord, icons50_classes

    classes = list(classes or icons50_classes()[:12])
    r = np.random.default_rng(seed)
    recs = []
    for i in range(n):
        c = classes[i % len(classes)]
        sub = f"{c.lower().replace(' ', '_')}_{r.integers(subtypes_per_class)}"
        plat = platforms[(i // len(classes)) % len(platforms)]
        ver = f"v{r.integers(1, 4)}"
        recs.append(IconRecord(f"{c}/{plat}/{i:04d}.png", c, plat, sub, ver))
    return recs


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
