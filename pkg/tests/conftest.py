import numpy as np
import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion, then assert it."""

    def record(name, ok, detail=""):
        _ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())
        print(_ACCEPTANCE_LINES[-1])
        assert ok, f"{name}: {detail}"

    return record


def random_boxes(rng, n, center=2.0, size=(0.25, 3.0)):
    c = rng.uniform(-center, center, size=(n, 2))
    s = rng.uniform(*size, size=(n, 2))
    return np.concatenate([c, s], axis=1)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
