"""Seeded test functions and maps with prescribed block norms.

Lacunary constructions put one mode per dyadic block at wavenumber 2^k, which
sits where φ_k = 1, so block norms are exact rather than statistical. Block
alignment assumes the default period 2π, where wavenumbers and angular
frequencies coincide.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from paracalc.grid import GridFunction, TorusGrid, mirrorCoeffs
from paracalc.littlewood_paley import DyadicPartition
from paracalc.models import BandOverflow, GeneratorKind, InvalidInput, NotContractive
from paracalc.paracomposition import TorusMap

logger = logging.getLogger(__name__)

MAX_EPS = 0.4
MAX_SLOPE = 0.95
PHASE_POINTS = 16


def _alignedPhases(K: int, rng: np.random.Generator) -> np.ndarray:
    """θ_k = 2^k·2πm/16 for a seeded m; the extremes of each mode hit grid points for any J."""
    m = rng.integers(0, PHASE_POINTS, size=K)
    ks = np.arange(1, K + 1)
    return (2.0**ks) * m * (2 * np.pi / PHASE_POINTS)


def _lacunary(
    grid: TorusGrid, K: int, amplitude: np.ndarray, phases: np.ndarray, axis: int
) -> np.ndarray:
    x = grid.points[..., axis] * (2 * np.pi / grid.length)
    total = np.zeros(grid.shape)
    for k in range(1, K + 1):
        total += amplitude[k - 1] * np.cos(2.0**k * x + phases[k - 1])
    return total


def weierstrass(sigma: float, K: int, grid: TorusGrid, seed: int = 0) -> GridFunction:
    """Σ_{k=1}^{K} 2^{-kσ} cos(2^k x + θ_k); in d=2 an independent y-series is added."""
    if sigma <= 0:
        raise InvalidInput(f"sigma must be > 0, got {sigma}")
    if not 1 <= K <= grid.J - 2:
        raise BandOverflow(f"K must satisfy 1 <= K <= J - 2 = {grid.J - 2}, got {K}")
    rng = np.random.default_rng(seed)
    amplitude = 2.0 ** (-np.arange(1, K + 1) * sigma)
    total = np.zeros(grid.shape)
    for axis in range(grid.d):
        total += _lacunary(grid, K, amplitude, _alignedPhases(K, rng), axis)
    return GridFunction.fromValues(grid, total, real=True)


def _plateau(part: DyadicPartition, q: int) -> np.ndarray:
    """Lattice points of block q where φ_q = 1, Nyquist excluded."""
    r = part.grid.frequencyNorms
    lo = part.outer * 2.0 ** (q - 1)
    mask = r >= lo
    if q < part.q_max:
        mask &= r <= part.inner * 2.0**q
    return mask & ~part.grid.nyquistMask


def sobolevSeries(
    s: float, grid: TorusGrid, seed: int = 0, part: DyadicPartition | None = None
) -> GridFunction:
    """Random-phase series with ‖u_q‖_{L²} = 2^{-qs} for 1 <= q <= q_max."""
    part = part or DyadicPartition(grid)
    rng = np.random.default_rng(seed)
    theta = 2 * np.pi * rng.random(grid.shape)
    theta = (theta - mirrorCoeffs(theta)) / 2.0
    coeffs = np.zeros(grid.shape, dtype=np.complex128)
    volume = grid.length**grid.d
    for q in range(1, part.q_max + 1):
        mask = _plateau(part, q)
        count = int(np.count_nonzero(mask))
        if count == 0:
            continue
        coeffs[mask] = 2.0 ** (-q * s) / math.sqrt(volume * count)
    return GridFunction.fromCoeffs(grid, coeffs * np.exp(1j * theta), real=True)


def torusDiffeo(rho: float, eps: float, K: int, grid: TorusGrid, seed: int = 0) -> TorusMap:
    """χ_i = x_i + eps Σ_{k=1}^{K} 2^{-k(1+ρ)} cos(2^k x_i + θ_{k,i})."""
    if rho < 0:
        raise InvalidInput(f"rho must be >= 0, got {rho}")
    if not 0 <= eps <= MAX_EPS:
        raise InvalidInput(f"eps must lie in [0, {MAX_EPS}], got {eps}")
    if not 1 <= K <= grid.J - 3:
        raise BandOverflow(f"K must satisfy 1 <= K <= J - 3 = {grid.J - 3}, got {K}")
    rng = np.random.default_rng(seed)
    amplitude = eps * 2.0 ** (-np.arange(1, K + 1) * (1 + rho))
    # ∂g_i block k has amplitude eps·2^{-kρ} for any period
    unit = grid.length / (2 * np.pi)
    g = [
        GridFunction.fromValues(
            grid, unit * _lacunary(grid, K, amplitude, _alignedPhases(K, rng), i), real=True
        )
        for i in range(grid.d)
    ]
    chi = TorusMap.fromDisplacement(grid, g)
    slope = max((dgij.supNorm() for row in chi.dg for dgij in row), default=0.0)
    if slope >= MAX_SLOPE:
        raise NotContractive(f"sup |Dg| = {slope:.4f} >= {MAX_SLOPE}")
    logger.debug("torus diffeo rho=%g eps=%g K=%d: sup|Dg|=%.4f", rho, eps, K, slope)
    return chi


def bump(
    grid: TorusGrid,
    width: float = 1.0,
    center: float | None = None,
    amplitude: float = 1.0,
) -> GridFunction:
    """C^∞ periodic bump Π_i exp(1 − 1/(1 − t_i²)) with t_i the scaled periodic distance."""
    if width <= 0 or width > grid.length / 2:
        raise InvalidInput(f"width must lie in (0, {grid.length / 2:g}], got {width}")
    c = grid.length / 2 if center is None else center
    total = np.full(grid.shape, float(amplitude))
    for axis in range(grid.d):
        x = grid.points[..., axis]
        dist = np.abs((x - c + grid.length / 2) % grid.length - grid.length / 2)
        t = dist / width
        inside = t < 1
        with np.errstate(divide="ignore", over="ignore"):
            profile = np.where(inside, np.exp(1.0 - 1.0 / np.where(inside, 1.0 - t**2, 1.0)), 0.0)
        total *= profile
    return GridFunction.fromValues(grid, total, real=True)


# ─── specs ─────────────────────────────────────────────────────────────────────

_PARAMS: dict[GeneratorKind, dict[str, float | None]] = {
    GeneratorKind.WEIERSTRASS: {"sigma": None, "K": None},
    GeneratorKind.SOBOLEV_SERIES: {"s": None},
    GeneratorKind.DIFFEO: {"rho": None, "eps": 0.3, "K": None},
    GeneratorKind.BUMP: {"width": 1.0, "center": None, "amplitude": 1.0},
}
_INTEGER_PARAMS = frozenset({"K"})


@dataclass(frozen=True)
class GeneratorSpec:
    kind: GeneratorKind
    params: dict[str, float] = field(default_factory=dict)
    seed: int = 0

    def resolved(self, grid: TorusGrid) -> dict[str, float | None]:
        known = _PARAMS[self.kind]
        unknown = sorted(set(self.params) - set(known))
        if unknown:
            raise InvalidInput(f"unknown {self.kind} parameter(s): {', '.join(unknown)}")
        values = {**known, **self.params}
        if "K" in values and values["K"] is None:
            top = grid.J - 3 if self.kind == GeneratorKind.DIFFEO else grid.J - 2
            values["K"] = float(top)
        missing = [k for k, v in values.items() if v is None and k != "center"]
        if missing:
            raise InvalidInput(f"{self.kind} needs parameter(s): {', '.join(missing)}")
        for name in _INTEGER_PARAMS & set(values):
            v = values[name]
            if v is not None and float(v) != int(v):
                raise InvalidInput(f"{name} must be an integer, got {v}")
        return values


def generate(spec: GeneratorSpec, grid: TorusGrid) -> GridFunction | TorusMap:
    """Identical spec and grid give bit-identical output."""
    p = spec.resolved(grid)

    def num(name: str) -> float:
        value = p[name]
        assert value is not None
        return float(value)

    match spec.kind:
        case GeneratorKind.WEIERSTRASS:
            return weierstrass(num("sigma"), int(num("K")), grid, spec.seed)
        case GeneratorKind.SOBOLEV_SERIES:
            return sobolevSeries(num("s"), grid, spec.seed)
        case GeneratorKind.DIFFEO:
            return torusDiffeo(num("rho"), num("eps"), int(num("K")), grid, spec.seed)
        case GeneratorKind.BUMP:
            return bump(grid, num("width"), p["center"], num("amplitude"))
