import numpy as np
import pytest

_LINES: list[str] = []


class Recorder:
    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title

    def __call__(self, ok: bool, detail: str) -> bool:
        line = f"criterion {self.number:2d} {'PASS' if ok else 'FAIL'}  {self.title}: {detail}"
        _LINES.append(line)
        print(line)
        return ok


@pytest.fixture
def criterion():
    return Recorder


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES):
            terminalreporter.write_line(line)
