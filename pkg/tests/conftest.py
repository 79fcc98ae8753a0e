import numpy as np
import pytest

from cqsqueeze import TimeGrid


@pytest.fixture(scope="session")
def grid():
    return TimeGrid(1024, 40.0)


@pytest.fixture(scope="session")
def small_grid():
    return TimeGrid(256, 40.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def smooth_random(rng, grid, count=1, width=4.0, band=6.0):
    """Random complex fields, band-limited to |omega| < band and windowed to |t| <~ 3*width."""
    spec = rng.normal(size=(count, grid.n)) + 1j * rng.normal(size=(count, grid.n))
    spec *= np.exp(-((grid.omega / band) ** 2))
    vals = np.fft.ifft(spec, axis=-1) * np.exp(-((grid.t / width) ** 2))
    vals /= np.sqrt(np.sum(np.abs(vals) ** 2, axis=-1, keepdims=True) * grid.dt)
    return vals


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, name: str, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {name}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
