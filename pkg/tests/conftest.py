import numpy as np
import pytest

from patchsynth import plan_grid

ACCEPTANCE_LINES = []


def record(criterion, passed, detail=""):
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def grid_1d():
    """Four pixels, 2-pixel patches, periodic, stride 1."""
    return plan_grid(1, 4, 1, 2, 1, 1, "periodic")


@pytest.fixture
def grid_4x4():
    return plan_grid(4, 4, 2, 2, 1, 1, "clip")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_geometries(count, seed=0, max_size=64):
    """Covering geometries: clip sizes are chosen so the stride lattice reaches the border."""
    r = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        boundary = "clip" if len(out) % 2 == 0 else "periodic"
        ph, pw = r.integers(1, 6, size=2)
        sy, sx = r.integers(1, ph + 1), r.integers(1, pw + 1)
        if boundary == "clip":
            H = ph + sy * r.integers(0, (max_size - ph) // sy + 1)
            W = pw + sx * r.integers(0, (max_size - pw) // sx + 1)
        else:
            H, W = r.integers(ph, max_size + 1), r.integers(pw, max_size + 1)
        out.append(plan_grid(int(H), int(W), int(ph), int(pw), int(sy), int(sx), boundary))
    return out
