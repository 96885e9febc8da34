from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np
import pytest

from ecgshape.engine import solve
from ecgshape.system import build_system

CACHE_DIR = Path(__file__).resolve().parents[1] / ".ecg-cache"


def small_solve(preset, basis_size=12, trials=8, refine_cycles=1, seed=3, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        system = build_system(preset, **kw)
        return solve(system, seed=seed, basis_size=basis_size, trials=trials, refine_cycles=refine_cycles)


@pytest.fixture(scope="session")
def h2_small():
    return small_solve("h2")


@pytest.fixture(scope="session")
def hehp_small():
    return small_solve("hehp")


@pytest.fixture(scope="session")
def ps2_small():
    return small_solve("ps2")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def cache_dir():
    CACHE_DIR.mkdir(exist_ok=True)
    return CACHE_DIR


ACCEPTANCE_LINES: dict[str, str] = {}


@pytest.fixture
def criterion():
    """Record the one-line verdict of an acceptance criterion."""

    def record(number, passed: bool, detail: str) -> bool:
        number = str(number)
        ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(ACCEPTANCE_LINES[number])
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k.rstrip('ab')), k)):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
