import numpy as np
import pytest

from occlusynth.compositor import InstanceAnnotation, SceneAnnotation
from occlusynth.ingest import load_catalog
from occlusynth.toy import write_toy_catalog


@pytest.fixture(scope="session")
def catalog_dir(tmp_path_factory):
    return write_toy_catalog(tmp_path_factory.mktemp("catalog"), n_classes=5, n_views=4, size=120, seed=11)


@pytest.fixture(scope="session")
def catalog(catalog_dir):
    return load_catalog(catalog_dir)


def top_of_stack(full_masks):
    """Per-pixel oracle: index of the last mask covering each pixel, -1 if none."""
    h, w = full_masks[0].shape
    top = np.full((h, w), -1)
    for y in range(h):
        for x in range(w):
            for k, m in enumerate(full_masks):
                if m[y, x]:
                    top[y, x] = k
    return top


def oracle_scene(full_masks, classes=None, scene_id=0):
    """Visible/occluded masks derived purely from the per-pixel oracle."""
    top = top_of_stack(full_masks)
    h, w = full_masks[0].shape
    insts = []
    for k, m in enumerate(full_masks):
        vis = m & (top == k)
        occ = m & (top != k)
        name = classes[k] if classes else f"c{k}"
        insts.append(InstanceAnnotation(k, name, vis, occ, 0))
    return SceneAnnotation(scene_id, w, h, insts)


def random_blob(rng, shape, max_rects=3):
    h, w = shape
    m = np.zeros(shape, bool)
    for _ in range(int(rng.integers(1, max_rects + 1))):
        y0, x0 = rng.integers(0, h), rng.integers(0, w)
        m[y0:y0 + rng.integers(1, h // 2 + 2), x0:x0 + rng.integers(1, w // 2 + 2)] = True
    return m


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per acceptance criterion; the line is printed in the summary."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def record(label: str, ok: bool, detail: str, status: str | None = None):
        lines.append(f"[{status or ('PASS' if ok else 'FAIL')}] {label}: {detail}")
        print(lines[-1])
        assert ok, f"{label}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("AC")[1].split()[0])):
            terminalreporter.write_line(line)
