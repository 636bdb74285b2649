"""Shared oracles: trapezoid quadrature and central finite differences."""

import numpy as np
import pytest

from fsrdiag import NoiseSchedule

QUAD_NODES = 2000


def quad_grid(center, sd, nodes=QUAD_NODES, width=8.0):
    """Trapezoid nodes and weights on ``center +- width * sd``."""
    x = np.linspace(center - width * sd, center + width * sd, nodes)
    w = np.full(nodes, x[1] - x[0])
    w[[0, -1]] *= 0.5
    return x, w


def central_diff(f, x, h=1e-5):
    """Derivative of a vectorized scalar function at an array of points."""
    x = np.asarray(x, dtype=float)
    return (f(x + h) - f(x - h)) / (2 * h)


def normal_pdf(x, mean, var):
    return np.exp(-0.5 * (x - mean) ** 2 / var) / np.sqrt(2 * np.pi * var)


@pytest.fixture
def schedule():
    return NoiseSchedule()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting ------------------------------------------------------------
ACCEPTANCE_LINES: list[str] = []


class CriterionReport:
    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.checks: list[tuple[bool, str]] = []

    def check(self, ok, detail: str) -> bool:
        self.checks.append((bool(ok), detail))
        return bool(ok)

    def finish(self, runtime: float | None = None):
        ok = all(c for c, _ in self.checks)
        failed = [d for c, d in self.checks if not c]
        tail = f" ({runtime:.1f} s)" if runtime is not None else ""
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {self.number}: {self.title}{tail}"
        if failed:
            line += "\n" + "\n".join(f"         - {d}" for d in failed)
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, "; ".join(failed)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
