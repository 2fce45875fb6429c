import numpy as np
import pytest

from degcraft.corpus import make_corpus
from degcraft.imagecore import Image, crop


@pytest.fixture(scope="session")
def small_corpus():
    return make_corpus(12, seed=101, size=320)


@pytest.fixture(scope="session")
def natural_patch(small_corpus):
    """Fixed 96x96 natural-statistics test patch."""
    return crop(small_corpus[0], 40, 60, 96)


@pytest.fixture
def ramp():
    def make(h, w, c=3):
        return Image(np.arange(h * w * c, dtype=np.float64).reshape(h, w, c) % 256)
    return make


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one acceptance line; printed together at the end of the run."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(criterion: int, ok: bool, detail: str) -> bool:
        lines.append(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
