from __future__ import annotations

import math
import os
import warnings
from enum import StrEnum
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class NormKind(StrEnum):
    ZYGMUND = "zygmund"
    SOBOLEV = "sobolev"


class GeneratorKind(StrEnum):
    WEIERSTRASS = "weierstrass"
    SOBOLEV_SERIES = "sobolev_series"
    DIFFEO = "diffeo"
    BUMP = "bump"


class QuantizationPath(StrEnum):
    AUTO = "auto"
    DIRECT = "direct"
    LOWRANK = "lowrank"


class Command(StrEnum):
    GEN = "gen"
    DECOMPOSE = "decompose"
    NORM = "norm"
    PARAPRODUCT = "paraproduct"
    PARADIFF = "paradiff"
    PARACOMPOSE = "paracompose"
    PARALINEARIZE = "paralinearize"
    CONJUGATE = "conjugate"
    VERIFY = "verify"


# ─── errors ────────────────────────────────────────────────────────────────────


class ParacalcError(Exception):
    exit_code = 2


class InvalidInput(ParacalcError):
    pass


class GridMismatch(ParacalcError):
    pass


class BandOverflow(ParacalcError):
    pass


class GridTooLarge(ParacalcError):
    pass


class NotDiffeomorphism(ParacalcError):
    pass


class NotContractive(ParacalcError):
    pass


class NoRankDecomposition(ParacalcError):
    pass


class DerivativeUnavailable(ParacalcError):
    pass


class FrequencyEvalUnavailable(ParacalcError):
    pass


class NonlinearOperator(ParacalcError):
    pass


class QuadratureFailure(ParacalcError):
    pass


class DegenerateSpectrum(ParacalcError):
    """Too few blocks carry mass for a slope fit."""

    exit_code = 3


class IdentityViolation(ParacalcError):
    exit_code = 4


# ─── configuration ─────────────────────────────────────────────────────────────


class _StrictConfig(BaseModel):
    """Base that warns on unknown keys and strips them."""

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="before")
    @classmethod
    def warnUnknownKeys(cls, data: object) -> object:
        if isinstance(data, dict):
            known = set(cls.model_fields.keys())
            for key in sorted(set(data.keys()) - known):
                warnings.warn(f"Unknown config key: '{key}'", stacklevel=2)
            return {k: v for k, v in data.items() if k in known}
        return data


class GridConfig(_StrictConfig):
    d: int = Field(1, description="Dimension of the torus (1 or 2)")
    J: int = Field(10, description="Dyadic depth; 2^J points per axis")
    length: float = Field(2 * math.pi, description="Period of each axis")

    @field_validator("d")
    @classmethod
    def dimensionSupported(cls, v: int) -> int:
        if v not in (1, 2):
            raise ValueError("d must be 1 or 2")
        return v

    @field_validator("J")
    @classmethod
    def depthLargeEnough(cls, v: int) -> int:
        if v < 4:
            raise ValueError("J must be >= 4 (at least 16 points per axis)")
        return v

    @field_validator("length")
    @classmethod
    def lengthPositive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("length must be > 0")
        return v


class PartitionConfig(_StrictConfig):
    inner: float = Field(1.1, description="Radius below which the P0 profile equals 1")
    outer: float = Field(1.9, description="Radius above which the P0 profile vanishes")
    cutoff_n0: int = Field(3, description="Band offset N0 of the admissible cut-off")

    @model_validator(mode="after")
    def radiiOrdered(self) -> PartitionConfig:
        if not 1.0 < self.inner < self.outer < 2.0:
            raise ValueError("partition radii must satisfy 1 < inner < outer < 2")
        if self.cutoff_n0 < 3:
            raise ValueError("cutoff_n0 must be >= 3")
        return self


class AnalysisConfig(_StrictConfig):
    norm_kind: NormKind = Field(NormKind.ZYGMUND, description="Default norm for regularity fits")
    fit_min: int = Field(1, description="First block of the regularity fit")
    fit_max: int = Field(7, description="Last block of the regularity fit")
    floor_ratio: float = Field(1e-13, description="Blocks below this share of the max are ignored")

    @model_validator(mode="after")
    def fitRangeOrdered(self) -> AnalysisConfig:
        if not 0 <= self.fit_min < self.fit_max:
            raise ValueError("fit range must satisfy 0 <= fit_min < fit_max")
        return self


class ParalinearizeConfig(_StrictConfig):
    quadrature_nodes: int = Field(8, description="Gauss-Legendre nodes for the R0 integral")
    residual_tolerance: float = Field(1e-9, description="Max relative residual of the identity")


class QuantizationConfig(_StrictConfig):
    direct_max_points: int = Field(4096, description="Largest grid the O(N^2) path accepts")
    probe_seed: int = Field(0, description="Seed for operator-order probes")


class VerifyConfig(_StrictConfig):
    cases: int = Field(50, description="Seeded cases per exact-identity check")
    seed: int = Field(7, description="Base seed of the acceptance suite")


class ParacalcConfig(_StrictConfig):
    grid: GridConfig = Field(default_factory=lambda: GridConfig(), description="Grid defaults")
    partition: PartitionConfig = Field(
        default_factory=lambda: PartitionConfig(), description="Dyadic partition profile"
    )
    analysis: AnalysisConfig = Field(
        default_factory=lambda: AnalysisConfig(), description="Regularity estimation"
    )
    paralinearize: ParalinearizeConfig = Field(
        default_factory=lambda: ParalinearizeConfig(), description="Paralinearization settings"
    )
    quantization: QuantizationConfig = Field(
        default_factory=lambda: QuantizationConfig(), description="Paradifferential quantization"
    )
    verify: VerifyConfig = Field(
        default_factory=lambda: VerifyConfig(), description="Acceptance suite settings"
    )
    threads: int | None = Field(None, description="Worker threads (default: min(4, cpus))")

    @field_validator("threads")
    @classmethod
    def threadsPositive(cls, v: int | None) -> int | None:
        if v is not None and v < 1:
            raise ValueError("threads must be >= 1")
        return v


class RunConfig(_StrictConfig):
    """Effective parameters of one CLI run, recorded in manifest.json."""

    command: Command
    inputs: list[str] = Field(default_factory=list)
    grid: GridConfig | None = None
    n_override: int | None = None
    norm_kind: NormKind | None = None
    fit_range: tuple[int, int] | None = None
    seed: int | None = None
    options: dict[str, str | int | float | bool | None] = Field(default_factory=dict)
    output: str | None = None


# ─── environment ───────────────────────────────────────────────────────────────


def getParacalcHome() -> Path:
    env = os.environ.get("PARACALC_HOME")
    if env:
        return Path(env)
    return Path.home() / ".config" / "paracalc"


def getThreadCount(config: ParacalcConfig | None = None) -> int:
    """Worker cap: PARACALC_THREADS > config.threads > min(4, cpus)."""
    env = os.environ.get("PARACALC_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError as e:
            raise InvalidInput(f"PARACALC_THREADS must be an integer, got '{env}'") from e
        if value < 1:
            raise InvalidInput("PARACALC_THREADS must be >= 1")
        return value
    if config is not None and config.threads is not None:
        return config.threads
    return min(4, os.cpu_count() or 1)
