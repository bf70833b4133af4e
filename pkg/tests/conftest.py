from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from paracalc.grid import TorusGrid
from paracalc.littlewood_paley import DyadicPartition
from paracalc.symbols import AdmissibleCutoff


@pytest.fixture(autouse=True)
def pc_home(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """Redirect PARACALC_HOME to temp dir and drop any thread cap for all tests."""
    home = tmp_path / ".paracalc"
    monkeypatch.setenv("PARACALC_HOME", str(home))
    monkeypatch.delenv("PARACALC_THREADS", raising=False)
    return home


@pytest.fixture
def grid8() -> TorusGrid:
    return TorusGrid(d=1, J=8)


@pytest.fixture
def grid10() -> TorusGrid:
    return TorusGrid(d=1, J=10)


@pytest.fixture
def part8(grid8: TorusGrid) -> DyadicPartition:
    return DyadicPartition(grid8)


@pytest.fixture
def part10(grid10: TorusGrid) -> DyadicPartition:
    return DyadicPartition(grid10)


@pytest.fixture
def psi8(part8: DyadicPartition) -> AdmissibleCutoff:
    return AdmissibleCutoff.build(part8)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)

