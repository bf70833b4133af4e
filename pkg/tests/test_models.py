from __future__ import annotations

import math
import warnings
from pathlib import Path

import pytest
from pydantic import ValidationError

from paracalc.models import (
    BandOverflow,
    Command,
    DegenerateSpectrum,
    GridConfig,
    GridMismatch,
    IdentityViolation,
    InvalidInput,
    NormKind,
    ParacalcConfig,
    ParacalcError,
    PartitionConfig,
    RunConfig,
    getParacalcHome,
    getThreadCount,
)


def test_normKind_values():
    assert NormKind.ZYGMUND == "zygmund"
    assert NormKind.SOBOLEV == "sobolev"


def test_command_covers_every_subcommand():
    assert {c.value for c in Command} == {
        "gen",
        "decompose",
        "norm",
        "paraproduct",
        "paradiff",
        "paracompose",
        "paralinearize",
        "conjugate",
        "verify",
    }


@pytest.mark.parametrize(
    ("error", "code"),
    [
        (InvalidInput, 2),
        (GridMismatch, 2),
        (BandOverflow, 2),
        (DegenerateSpectrum, 3),
        (IdentityViolation, 4),
    ],
)
def test_error_exitCodes(error: type[ParacalcError], code: int):
    assert issubclass(error, ParacalcError)
    assert error.exit_code == code


def test_paracalcConfig_defaults():
    cfg = ParacalcConfig()
    assert cfg.grid.d == 1
    assert cfg.grid.J == 10
    assert cfg.grid.length == pytest.approx(2 * math.pi)
    assert cfg.partition.inner == 1.1
    assert cfg.partition.outer == 1.9
    assert cfg.partition.cutoff_n0 == 3
    assert cfg.analysis.norm_kind == NormKind.ZYGMUND
    assert (cfg.analysis.fit_min, cfg.analysis.fit_max) == (1, 7)
    assert cfg.paralinearize.residual_tolerance == 1e-9
    assert cfg.verify.cases == 50
    assert cfg.threads is None


def test_paracalcConfig_frozen():
    cfg = ParacalcConfig()
    with pytest.raises(ValidationError):
        cfg.threads = 3  # type: ignore[misc]


def test_gridConfig_rejects_dimension():
    with pytest.raises(ValidationError, match="d must be 1 or 2"):
        GridConfig(d=3)


def test_gridConfig_rejects_small_J():
    with pytest.raises(ValidationError, match="J must be >= 4"):
        GridConfig(J=3)


def test_partitionConfig_radii_ordered():
    with pytest.raises(ValidationError, match="1 < inner < outer < 2"):
        PartitionConfig(inner=1.5, outer=1.2)


def test_partitionConfig_cutoff_minimum():
    with pytest.raises(ValidationError, match="cutoff_n0"):
        PartitionConfig(cutoff_n0=2)


def test_unknown_key_warns_and_is_dropped():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cfg = ParacalcConfig.model_validate({"grid": {"J": 9, "bogus": 1}})
    assert cfg.grid.J == 9
    assert any("bogus" in str(w.message) for w in caught)


def test_runConfig_dump_is_json_ready():
    run = RunConfig(
        command=Command.DECOMPOSE,
        inputs=["u.json"],
        norm_kind=NormKind.SOBOLEV,
        fit_range=(2, 7),
    )
    data = run.model_dump(mode="json")
    assert data["command"] == "decompose"
    assert data["norm_kind"] == "sobolev"
    assert data["fit_range"] == [2, 7]


def test_getParacalcHome_env(pc_home: Path):
    assert getParacalcHome() == pc_home


def test_getParacalcHome_default(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.delenv("PARACALC_HOME")
    assert getParacalcHome() == Path.home() / ".config" / "paracalc"


def test_getThreadCount_env_wins(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.setenv("PARACALC_THREADS", "3")
    assert getThreadCount(ParacalcConfig(threads=2)) == 3


def test_getThreadCount_config():
    assert getThreadCount(ParacalcConfig(threads=2)) == 2


def test_getThreadCount_default_capped():
    assert 1 <= getThreadCount() <= 4


@pytest.mark.parametrize("raw", ["zero", "0", "-2"])
def test_getThreadCount_rejects_bad_env(monkeypatch: pytest.MonkeyPatch, raw: str):
    monkeypatch.setenv("PARACALC_THREADS", raw)
    with pytest.raises(InvalidInput, match="PARACALC_THREADS"):
        getThreadCount()
