import numpy as np
import pytest

from divanneal.instance import Instance, generate_2d, generate_quasi_1d


def all_configs(n: int) -> np.ndarray:
    """Every +-1 configuration of n spins, spin 0 as the most significant bit."""
    k = np.arange(2 ** n)[:, None]
    bits = (k >> np.arange(n - 1, -1, -1)) & 1
    return (1 - 2 * bits).astype(np.int8)


def ferro_chain(n: int, J: float = -1.0) -> Instance:
    return Instance.from_edges(n, [(i, i + 1, J) for i in range(n - 1)],
                               coords=np.arange(n, dtype=float)[:, None])


@pytest.fixture
def small_2d():
    return generate_2d(4, 11)


@pytest.fixture
def small_q1d():
    return generate_quasi_1d(14, 3, 5)


ACCEPTANCE_LINES: list[str] = []


def acceptance_line(number: int, ok: bool, detail: str) -> str:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
