"""Paraproducts, paradifferential quantization and operator-order probing."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from paracalc.grid import GridFunction, TorusGrid, checkSameGrid, fourierMultiplier, requireGrid
from paracalc.littlewood_paley import DyadicPartition, applyTable, decompose, lowPass
from paracalc.models import (
    GridTooLarge,
    InvalidInput,
    NoRankDecomposition,
    NonlinearOperator,
    QuantizationPath,
    getThreadCount,
)
from paracalc.symbols import AdmissibleCutoff, RegularizedSymbol, Symbol

logger = logging.getLogger(__name__)

DIRECT_MAX_POINTS = 4096
LINEARITY_TOL = 1e-8
PROBE_FLOOR = 1e-13
BAND_FLOOR_RATIO = 1e-10
MIN_PROBE_BANDS = 4
_ETA_CHUNK = 128

Operator = Callable[[GridFunction], GridFunction]


# ─── paraproducts ──────────────────────────────────────────────────────────────


def paraproduct(a: GridFunction, u: GridFunction, part: DyadicPartition) -> GridFunction:
    """T_a u = Σ_{k>=1} P_{≤k-1}a · u_k."""
    checkSameGrid(a, u)
    requireGrid(part.grid, a)
    dec = decompose(u, part)
    total = np.zeros(part.grid.shape, dtype=np.complex128)
    for k in range(1, part.q_max + 1):
        block = dec.blocks[k]
        if block.isZero():
            continue
        total += lowPass(a, k - 1, part).values * block.values
    real = a.real and u.real
    return GridFunction.fromValues(part.grid, total.real if real else total, real=real)


def bonyProductRemainder(a: GridFunction, b: GridFunction, part: DyadicPartition) -> GridFunction:
    """ab − T_a b − T_b a."""
    checkSameGrid(a, b)
    return a * b - paraproduct(a, b, part) - paraproduct(b, a, part)


@dataclass(frozen=True)
class ScalarFunction:
    name: str
    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]


BUILTIN_FUNCTIONS: dict[str, ScalarFunction] = {
    "identity": ScalarFunction("identity", lambda t: t, np.ones_like),
    "square": ScalarFunction("square", lambda t: t**2, lambda t: 2 * t),
    "cube": ScalarFunction("cube", lambda t: t**3, lambda t: 3 * t**2),
    "sin": ScalarFunction("sin", np.sin, np.cos),
    "exp": ScalarFunction("exp", np.exp, np.exp),
}


def getScalarFunction(name: str) -> ScalarFunction:
    try:
        return BUILTIN_FUNCTIONS[name]
    except KeyError as e:
        known = ", ".join(BUILTIN_FUNCTIONS)
        raise InvalidInput(f"unknown function '{name}' (known: {known})") from e


def bonyCompositionRemainder(
    F: ScalarFunction, a: GridFunction, part: DyadicPartition
) -> GridFunction:
    """F(a) − F(0) − T_{F'(a)} a."""
    f0 = complex(F.f(np.zeros(1))[0])
    fa = GridFunction.fromValues(a.grid, F.f(a.values))
    dfa = GridFunction.fromValues(a.grid, F.df(a.values))
    return fa - (f0.real if f0.imag == 0 else f0) - paraproduct(dfa, a, part)


# ─── quantization ──────────────────────────────────────────────────────────────


def _guardDirect(grid: TorusGrid, max_points: int) -> None:
    if grid.size > max_points:
        raise GridTooLarge(
            f"direct quantization is limited to {max_points} lattice points, grid has {grid.size}"
        )


def paradiffApplyDirect(
    a: Symbol,
    u: GridFunction,
    psi: AdmissibleCutoff,
    *,
    max_points: int = DIRECT_MAX_POINTS,
) -> GridFunction:
    """T_a u(x) = Σ_η σ^ψ_a(x, η) û(η) e^{ix·η}, the reference O(N²) path."""
    grid = u.grid
    if a.grid != grid:
        raise InvalidInput("symbol and function live on different grids")
    _guardDirect(grid, max_points)
    sigma = RegularizedSymbol(a, psi)
    flat = u.coeffs.reshape(-1)
    support = np.flatnonzero(flat)
    out = np.zeros(grid.size, dtype=np.complex128)
    for start in range(0, len(support), _ETA_CHUNK):
        idx = support[start : start + _ETA_CHUNK]
        eta = grid.flatFrequencies[idx]
        cols = sigma.table(eta)
        waves = np.exp(1j * (grid.flatPoints @ eta.T))
        out += (cols * waves) @ flat[idx]
    return GridFunction.fromValues(grid, out.reshape(grid.shape))


def _functionParaproduct(b: GridFunction, v: GridFunction, psi: AdmissibleCutoff) -> GridFunction:
    """ψ-quantization of the x-only symbol b: Σ_k P_{≤k-N0}(D)b · φ_k(D)v."""
    part = psi.part
    r = part.grid.frequencyNorms
    total = np.zeros(part.grid.shape, dtype=np.complex128)
    for k, table in enumerate(part.blockTables):
        vk = applyTable(table, v)
        if vk.isZero():
            continue
        low = part.lowPassProfile(k - psi.n0, r)
        total += applyTable(low, b).values * vk.values
    return GridFunction.fromValues(part.grid, total)


def paradiffApplyLowrank(a: Symbol, u: GridFunction, psi: AdmissibleCutoff) -> GridFunction:
    """Σ_r T_{b_r}(m_r(D)u); algebraically the direct sum for Σ_r b_r(x) m_r(ξ)."""
    terms = a.rank_decomposition
    if terms is None:
        raise NoRankDecomposition(f"{a.describe()} has no rank decomposition")
    requireGrid(u.grid, *(t.b for t in terms))
    total = np.zeros(u.grid.shape, dtype=np.complex128)
    for t in terms:
        v = fourierMultiplier(t.m.values(u.grid.frequencies), u)
        total += _functionParaproduct(t.b, v, psi).values
    return GridFunction.fromValues(u.grid, total)


def quantize(
    a: Symbol,
    u: GridFunction,
    psi: AdmissibleCutoff,
    path: QuantizationPath = QuantizationPath.AUTO,
    *,
    max_points: int = DIRECT_MAX_POINTS,
) -> GridFunction:
    if path == QuantizationPath.LOWRANK or (
        path == QuantizationPath.AUTO and a.rank_decomposition is not None
    ):
        return paradiffApplyLowrank(a, u, psi)
    return paradiffApplyDirect(a, u, psi, max_points=max_points)


# ─── operator matrices ─────────────────────────────────────────────────────────


def assembleMatrix(T: Operator, grid: TorusGrid) -> np.ndarray:
    """Matrix of T acting on row-major samples."""
    cols = []
    for j in range(grid.size):
        e = np.zeros(grid.size)
        e[j] = 1.0
        cols.append(T(GridFunction.fromValues(grid, e.reshape(grid.shape))).values.reshape(-1))
    return np.stack(cols, axis=1).astype(np.complex128)


def directMatrix(
    a: Symbol, psi: AdmissibleCutoff, *, max_points: int = DIRECT_MAX_POINTS
) -> np.ndarray:
    """Matrix of paradiffApplyDirect on row-major samples, from one pass over η."""
    grid = a.grid
    _guardDirect(grid, max_points)
    sigma = RegularizedSymbol(a, psi)
    synthesis = np.empty((grid.size, grid.size), dtype=np.complex128)
    for start in range(0, grid.size, _ETA_CHUNK):
        idx = np.arange(start, min(start + _ETA_CHUNK, grid.size))
        eta = grid.flatFrequencies[idx]
        synthesis[:, idx] = sigma.table(eta) * np.exp(1j * (grid.flatPoints @ eta.T))
    analysis = np.stack(
        [
            GridFunction.fromValues(grid, e.reshape(grid.shape)).coeffs.reshape(-1)
            for e in np.eye(grid.size)
        ],
        axis=1,
    )
    return synthesis @ analysis


def matrixOperator(M: np.ndarray, grid: TorusGrid) -> Operator:
    def apply(u: GridFunction) -> GridFunction:
        return GridFunction.fromValues(grid, (M @ u.values.reshape(-1)).reshape(grid.shape))

    return apply


def matrixAdjoint(M: np.ndarray) -> np.ndarray:
    """L² adjoint on the grid; uniform weights make it the conjugate transpose."""
    return M.conj().T


def adjointOperator(T: Operator, grid: TorusGrid) -> Operator:
    return matrixOperator(matrixAdjoint(assembleMatrix(T, grid)), grid)


# ─── order probing ─────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class OrderProbeResult:
    fitted_order: float
    per_band_gains: tuple[tuple[int, float], ...]
    fit_residual: float
    seed: int
    degenerate: bool = False


def _randomFunction(grid: TorusGrid, rng: np.random.Generator) -> GridFunction:
    return GridFunction.fromValues(grid, rng.standard_normal(grid.shape))


def checkLinear(T: Operator, grid: TorusGrid, rng: np.random.Generator, pairs: int = 3) -> None:
    for _ in range(pairs):
        f, g = _randomFunction(grid, rng), _randomFunction(grid, rng)
        alpha, beta = rng.standard_normal(2)
        lhs = T(f * alpha + g * beta).values
        rhs = (T(f) * alpha + T(g) * beta).values
        scale = max(float(np.max(np.abs(rhs))), 1e-300)
        defect = float(np.max(np.abs(lhs - rhs))) / scale
        if defect > LINEARITY_TOL:
            raise NonlinearOperator(f"operator is not linear (relative defect {defect:.2e})")


def bandProbe(part: DyadicPartition, j: int, rng: np.random.Generator) -> GridFunction:
    """Real unit-L² function with random phases across the whole block j."""
    grid = part.grid
    phases = np.exp(2j * np.pi * rng.random(grid.shape))
    raw = GridFunction.fromCoeffs(grid, part.blockTables[j] * phases, real=False).realPart()
    return raw * (1.0 / raw.l2Norm())


def probeOperatorOrder(
    T: Operator,
    part: DyadicPartition,
    seed: int,
    *,
    threads: int | None = None,
) -> OrderProbeResult:
    """Slope of log2‖T e_j‖ over bands j in [2, q_max − 1].

    Bands whose output is below PROBE_FLOOR, or below BAND_FLOOR_RATIO times
    the largest output, are left out of the fit.
    """
    rng = np.random.default_rng(seed)
    checkLinear(T, part.grid, rng)
    bands = list(range(2, part.q_max))
    probes = [bandProbe(part, j, rng) for j in bands]
    workers = threads or getThreadCount()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        norms = list(pool.map(lambda e: T(e).l2Norm(), probes))

    floor = max(PROBE_FLOOR, BAND_FLOOR_RATIO * max(norms, default=0.0))
    gains = tuple(
        (j, math.log2(n) if n > floor else -math.inf)
        for j, n in zip(bands, norms, strict=True)
    )
    usable = [(j, g) for j, g in gains if math.isfinite(g)]
    if len(usable) < MIN_PROBE_BANDS:
        logger.debug("order probe degenerate: %d usable bands", len(usable))
        return OrderProbeResult(math.nan, gains, math.inf, seed, degenerate=True)

    js = np.array([j for j, _ in usable], dtype=np.float64)
    gs = np.array([g for _, g in usable])
    slope, intercept = np.polyfit(js, gs, 1)
    residual = float(np.sqrt(np.mean((slope * js + intercept - gs) ** 2)))
    logger.debug("probe order %.4f over bands %s", slope, js.astype(int).tolist())
    return OrderProbeResult(float(slope), gains, residual, seed)
