"""Paracomposition on the torus.

Maps are periodic perturbations of the identity, χ(x) = x + g(x). Every
χ-block, low-pass and smoothing acts on g; the identity part never enters a
multiplier. Compositions u∘χ are evaluated exactly at the moved grid points by
direct trigonometric summation.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import TypeVar

import numpy as np

from paracalc.grid import (
    GridFunction,
    TorusGrid,
    checkSameGrid,
    evaluateTrig,
    requireGrid,
    spectralDerivative,
)
from paracalc.littlewood_paley import (
    DyadicPartition,
    RegularityReport,
    applyTable,
    decompose,
    fitRegularity,
    lowPass,
)
from paracalc.models import (
    IdentityViolation,
    InvalidInput,
    NormKind,
    NotDiffeomorphism,
    QuadratureFailure,
    QuantizationPath,
    getThreadCount,
)
from paracalc.paradiff import paraproduct, quantize
from paracalc.symbols import MIN_JACOBIAN, AdmissibleCutoff, Symbol, pullbackSymbol

logger = logging.getLogger(__name__)

MIN_N = 2
QUADRATURE_NODES = 8
QUADRATURE_JUMP = 1e3
RESIDUAL_TOLERANCE = 1e-9

ItemT = TypeVar("ItemT")
ResultT = TypeVar("ResultT")


def _ordered(
    fn: Callable[[ItemT], ResultT], items: Iterable[ItemT], threads: int | None
) -> list[ResultT]:
    """Map fn over items on a thread pool, results in input order."""
    with ThreadPoolExecutor(max_workers=threads or getThreadCount()) as pool:
        return list(pool.map(fn, items))


# ─── maps ──────────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class TorusMap:
    """χ = id + g with g periodic; dg[i][j] = ∂_j g_i."""

    grid: TorusGrid
    g: tuple[GridFunction, ...]
    dg: tuple[tuple[GridFunction, ...], ...]
    min_jac: float
    is_diffeo: bool

    @classmethod
    def fromDisplacement(cls, grid: TorusGrid, g: Sequence[GridFunction]) -> TorusMap:
        if len(g) != grid.d:
            raise InvalidInput(f"map needs {grid.d} displacement components, got {len(g)}")
        requireGrid(grid, *g)
        if not all(gi.real for gi in g):
            raise InvalidInput("map displacement must be real")
        dg = tuple(tuple(spectralDerivative(gi, j) for j in range(grid.d)) for gi in g)
        jac = _jacobianFrom(grid, dg)
        min_jac = float(np.min(np.linalg.det(jac)))
        return cls(grid, tuple(g), dg, min_jac, min_jac > MIN_JACOBIAN)

    @classmethod
    def identity(cls, grid: TorusGrid) -> TorusMap:
        return cls.fromDisplacement(grid, [GridFunction.zeros(grid)] * grid.d)

    @classmethod
    def shift(cls, grid: TorusGrid, c: float | Sequence[float]) -> TorusMap:
        offsets = [float(c)] * grid.d if isinstance(c, int | float) else [float(v) for v in c]
        return cls.fromDisplacement(grid, [GridFunction.constant(grid, v) for v in offsets])

    @cached_property
    def jacobian(self) -> np.ndarray:
        """Dχ at the grid points, shape (size, d, d)."""
        return _jacobianFrom(self.grid, self.dg)

    @cached_property
    def imagePoints(self) -> np.ndarray:
        """χ(x_j) for the row-major grid points, shape (size, d)."""
        moved = np.stack([gi.values.reshape(-1) for gi in self.g], axis=1)
        return self.grid.flatPoints + moved

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, self.grid.d)
        return pts + np.stack([evaluateTrig(gi, pts).real for gi in self.g], axis=1)

    def compose(self, inner: TorusMap) -> TorusMap:
        """self∘inner: x + g̃(x) + g(x + g̃(x)), re-projected to the grid."""
        if inner.grid != self.grid:
            raise InvalidInput("maps live on different grids")
        moved = inner.imagePoints
        comp = [
            GridFunction.fromValues(
                self.grid, gt.values + evaluateTrig(gi, moved).real.reshape(self.grid.shape)
            )
            for gi, gt in zip(self.g, inner.g, strict=True)
        ]
        return TorusMap.fromDisplacement(self.grid, comp)

    @property
    def isIdentity(self) -> bool:
        return all(gi.isZero() for gi in self.g)

    def describe(self) -> str:
        kind = "diffeomorphism" if self.is_diffeo else "map"
        return f"{kind} on {self.grid.describe()} (min det Dχ = {self.min_jac:.4g})"


def _jacobianFrom(grid: TorusGrid, dg: tuple[tuple[GridFunction, ...], ...]) -> np.ndarray:
    d = grid.d
    jac = np.empty((grid.size, d, d))
    for i in range(d):
        for j in range(d):
            jac[:, i, j] = dg[i][j].values.reshape(-1)
    return jac + np.eye(d)


def composeExact(u: GridFunction, chi: TorusMap) -> GridFunction:
    """u∘χ sampled on the grid."""
    if u.grid != chi.grid:
        raise InvalidInput("function and map live on different grids")
    values = evaluateTrig(u, chi.imagePoints).reshape(u.grid.shape)
    return GridFunction.fromValues(u.grid, values.real if u.real else values, real=u.real)


def smoothedMap(chi: TorusMap, k: int, part: DyadicPartition) -> TorusMap:
    """x ↦ x + P_{≤k}g; χ itself for k >= q_max."""
    if k < 0:
        raise InvalidInput(f"smoothing index must be >= 0, got {k}")
    if k >= part.q_max:
        return chi
    return TorusMap.fromDisplacement(chi.grid, [lowPass(gi, k, part) for gi in chi.g])


def _operatorNorms(jac: np.ndarray) -> np.ndarray:
    return np.linalg.norm(jac, ord=2, axis=(1, 2))


def _ruleN(s: float) -> int:
    if s <= 1.0:
        return MIN_N
    return max(MIN_N, math.ceil(math.log2(s)) + 1)


def selectN(chi: TorusMap, part: DyadicPartition) -> int:
    """Smallest admissible N with 2^N > sup_{k,x} |D(P_{≤k}χ)|, clamped at 2."""
    s = max(
        float(np.max(_operatorNorms(smoothedMap(chi, k, part).jacobian)))
        for k in range(part.q_max + 1)
    )
    n = _ruleN(s)
    logger.debug("select N: sup |DΦχ| = %.4f -> N = %d", s, n)
    return n


def selectNtilde(chi: TorusMap, part: DyadicPartition) -> int:
    """Two-sided rule using the Jacobians of the smoothed maps and their inverses."""
    if not chi.is_diffeo:
        raise NotDiffeomorphism(f"min det Dχ = {chi.min_jac:.3g}; Ñ needs a diffeomorphism")
    s = 1.0
    for k in range(part.q_max + 1):
        smooth = smoothedMap(chi, k, part)
        if smooth.min_jac <= MIN_JACOBIAN:
            raise NotDiffeomorphism(f"smoothed map at k={k} is not invertible")
        s = max(
            s,
            float(np.max(_operatorNorms(smooth.jacobian))),
            float(np.max(_operatorNorms(np.linalg.inv(smooth.jacobian)))),
        )
    n = _ruleN(s)
    logger.debug("select Ñ: two-sided bound %.4f -> Ñ = %d", s, n)
    return n


@dataclass(frozen=True)
class PhaseBounds:
    """Extremes of |Dχ| and |Dχ^{-1}| over the grid (operator norms)."""

    jac_min: float
    jac_max: float
    inverse_min: float
    inverse_max: float


def phaseGradientBounds(chi: TorusMap) -> PhaseBounds:
    if not chi.is_diffeo:
        raise NotDiffeomorphism(f"min det Dχ = {chi.min_jac:.3g}")
    direct = _operatorNorms(chi.jacobian)
    inverse = _operatorNorms(np.linalg.inv(chi.jacobian))
    return PhaseBounds(
        float(direct.min()), float(direct.max()), float(inverse.min()), float(inverse.max())
    )


# ─── paracomposition operators ─────────────────────────────────────────────────


def _resolveN(chi: TorusMap, part: DyadicPartition, N: int | None) -> int:
    if N is None:
        return selectN(chi, part)
    if N < MIN_N:
        raise InvalidInput(f"N must be >= {MIN_N}, got {N}")
    return N


def _sumValues(grid: TorusGrid, parts: Iterable[GridFunction | None]) -> GridFunction:
    total = np.zeros(grid.shape, dtype=np.complex128)
    for p in parts:
        if p is not None:
            total += p.values
    return GridFunction.fromValues(grid, total)


def paracomposeNew(
    u: GridFunction,
    chi: TorusMap,
    part: DyadicPartition,
    N: int | None = None,
    *,
    threads: int | None = None,
) -> GridFunction:
    """χ^⋆u = Σ_k P_{≤k+N}(D)(u_k∘χ)."""
    requireGrid(part.grid, u)
    n = _resolveN(chi, part, N)
    dec = decompose(u, part)

    def term(k: int) -> GridFunction | None:
        block = dec.blocks[k]
        if block.isZero():
            return None
        return lowPass(composeExact(block, chi), k + n, part)

    out = _sumValues(u.grid, _ordered(term, range(part.q_max + 1), threads))
    return out.realPart() if u.real else out


def paracomposeAlinhac(
    u: GridFunction,
    chi: TorusMap,
    part: DyadicPartition,
    Ntilde: int | None = None,
    *,
    threads: int | None = None,
) -> GridFunction:
    """χ^*u = P_{≤Ñ}(u_0∘χ) + Σ_{k>=1} Σ_{|l-k|<=Ñ} φ_l(D)(u_k∘χ)."""
    requireGrid(part.grid, u)
    if not chi.is_diffeo:
        raise NotDiffeomorphism(f"min det Dχ = {chi.min_jac:.3g}; χ^* needs a diffeomorphism")
    n = selectNtilde(chi, part) if Ntilde is None else Ntilde
    if n < MIN_N:
        raise InvalidInput(f"Ñ must be >= {MIN_N}, got {n}")
    dec = decompose(u, part)

    def term(k: int) -> GridFunction | None:
        block = dec.blocks[k]
        if block.isZero():
            return None
        return applyTable(part.bandTable(k - n, k + n), composeExact(block, chi))

    out = _sumValues(u.grid, _ordered(term, range(part.q_max + 1), threads))
    return out.realPart() if u.real else out


def alinhacDifference(
    u: GridFunction,
    chi: TorusMap,
    part: DyadicPartition,
    N: int | None = None,
    Ntilde: int | None = None,
) -> GridFunction:
    """R₃ = χ^*u − χ^⋆u."""
    return paracomposeAlinhac(u, chi, part, Ntilde) - paracomposeNew(u, chi, part, N)


def nStabilityDefect(
    u: GridFunction, chi: TorusMap, part: DyadicPartition, N: int, N_prime: int
) -> GridFunction:
    """χ^⋆u computed with N minus the same with N′."""
    return paracomposeNew(u, chi, part, N) - paracomposeNew(u, chi, part, N_prime)


# ─── paralinearization ─────────────────────────────────────────────────────────


@dataclass(frozen=True)
class ParalinearizationResult:
    composition: GridFunction
    chi_star_u: GridFunction
    T_term: GridFunction
    R0: GridFunction
    R1: GridFunction
    R2: GridFunction
    bookkeeping: GridFunction
    residual: float
    N_used: int
    quadrature_nodes: int
    reports: dict[str, RegularityReport] = field(default_factory=dict)

    def components(self) -> dict[str, GridFunction]:
        return {
            "chi_star_u": self.chi_star_u,
            "T_term": self.T_term,
            "R0": self.R0,
            "R1": self.R1,
            "R2": self.R2,
            "bookkeeping": self.bookkeeping,
        }


def _gaussLegendre(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    if nodes < 1:
        raise InvalidInput("quadrature needs at least one node")
    t, w = np.polynomial.legendre.leggauss(nodes)
    return (t + 1.0) / 2.0, w / 2.0


def _pathAverage(
    f: GridFunction, start: np.ndarray, step: np.ndarray, taus: np.ndarray, weights: np.ndarray
) -> np.ndarray:
    """∫₀¹ f(start + τ·step) dτ by quadrature, with a jump check between nodes."""
    samples = np.stack([evaluateTrig(f, start + tau * step).real for tau in taus])
    if not np.all(np.isfinite(samples)):
        raise QuadratureFailure("non-finite integrand along the smoothing path")
    if len(taus) > 1:
        jump = float(np.max(np.abs(np.diff(samples, axis=0))))
        if jump > QUADRATURE_JUMP:
            raise QuadratureFailure(f"integrand jumps by {jump:.3g} between adjacent nodes")
    return weights @ samples


def paralinearize(
    u: GridFunction,
    chi: TorusMap,
    part: DyadicPartition,
    N: int | None = None,
    *,
    nodes: int = QUADRATURE_NODES,
    norm_kind: NormKind = NormKind.ZYGMUND,
    fit_range: tuple[int, int] | None = None,
    tolerance: float | None = RESIDUAL_TOLERANCE,
    threads: int | None = None,
) -> ParalinearizationResult:
    """Split u∘χ into χ^⋆u + T_{u'∘χ}g + R₀ + R₁ + R₂ + bookkeeping.

    With χ_k = id + P_{≤k}g (χ_K = χ for K = q_max) the telescoping

        u∘χ = Σ_{k=1}^{K} [Φ_{k-1}u(χ_k) − Φ_{k-1}u(χ_{k-1})] + Σ_j u_j(χ_j)

    is exact. The first sum is split by a τ-quadrature into the paraproduct
    term and R₀; `bookkeeping` holds its quadrature defect against the exact
    increments. The second sum is χ^⋆u + R₁ + R₂. The residual of the whole
    decomposition is therefore pure rounding.
    """
    requireGrid(part.grid, u)
    if not u.real:
        raise InvalidInput("paralinearization needs a real function")
    if u.grid != chi.grid:
        raise InvalidInput("function and map live on different grids")
    grid = u.grid
    n = _resolveN(chi, part, N)
    top = part.q_max
    taus, weights = _gaussLegendre(nodes)
    dec = decompose(u, part)
    smoothed = [smoothedMap(chi, k, part) for k in range(top + 1)]
    grad = [spectralDerivative(u, i) for i in range(grid.d)]
    g_blocks = [decompose(gi, part).blocks for gi in chi.g]
    composition = composeExact(u, chi)
    grad_at_chi = [composeExact(gi, chi) for gi in grad]

    def increments(k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        lo, hi = smoothed[k - 1], smoothed[k]
        low_u = lowPass(u, k - 1, part)
        exact = (
            evaluateTrig(low_u, hi.imagePoints).real - evaluateTrig(low_u, lo.imagePoints).real
        )
        quad = np.zeros(grid.size)
        r0 = np.zeros(grid.size)
        step = hi.imagePoints - lo.imagePoints
        for i in range(grid.d):
            delta = g_blocks[i][k].values.reshape(-1)
            if not np.any(delta):
                continue
            low_grad = lowPass(grad[i], k - 1, part)
            avg = _pathAverage(low_grad, lo.imagePoints, step, taus, weights)
            quad += avg * delta
            anchor = lowPass(grad_at_chi[i], k - 1, part).values.reshape(-1)
            r0 += (avg - anchor) * delta
        return exact, quad, r0

    def blockTerms(j: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        block = dec.blocks[j]
        if block.isZero():
            zero = np.zeros(grid.shape)
            return zero, zero, zero
        along = composeExact(block, smoothed[j])
        at = composeExact(block, chi)
        star = lowPass(at, j + n, part)
        r1 = lowPass(along - at, j + n, part)
        r2 = along - lowPass(along, j + n, part)
        return star.values, r1.values, r2.values

    inc = _ordered(increments, range(1, top + 1), threads)
    blk = _ordered(blockTerms, range(top + 1), threads)

    def gather(arrays: Iterable[np.ndarray]) -> GridFunction:
        total = np.zeros(grid.size)
        for a in arrays:
            total += np.asarray(a, dtype=np.float64).reshape(-1)
        return GridFunction.fromValues(grid, total.reshape(grid.shape), real=True)

    T_term = _sumReal(
        grid, [paraproduct(v, gi, part) for v, gi in zip(grad_at_chi, chi.g, strict=True)]
    )
    R0 = gather(r0 for _, _, r0 in inc)
    bookkeeping = gather(exact - quad for exact, quad, _ in inc)
    chi_star_u = gather(s for s, _, _ in blk)
    R1 = gather(r1 for _, r1, _ in blk)
    R2 = gather(r2 for _, _, r2 in blk)

    total = chi_star_u + T_term + R0 + R1 + R2 + bookkeeping
    scale = max(composition.supNorm(), 1e-300)
    residual = float(np.max(np.abs(composition.values - total.values))) / scale
    logger.debug("paralinearize: N=%d nodes=%d residual=%.3e", n, nodes, residual)
    if tolerance is not None and residual > tolerance:
        raise IdentityViolation(
            f"paralinearization residual {residual:.3e} exceeds tolerance {tolerance:g}"
        )

    lo_fit, hi_fit = fit_range if fit_range is not None else (1, top)
    # remainders are measured against the size of u
    ref = max(dec.sup_norms if norm_kind == NormKind.ZYGMUND else dec.l2_norms)
    result = ParalinearizationResult(
        composition, chi_star_u, T_term, R0, R1, R2, bookkeeping, residual, n, nodes
    )
    reports = {
        name: fitRegularity(
            decompose(f, part), norm_kind, lo_fit, hi_fit, scale=ref, strict=False
        )
        for name, f in result.components().items()
    }
    return replace(result, reports=reports)


def _sumReal(grid: TorusGrid, parts: Sequence[GridFunction]) -> GridFunction:
    total = np.zeros(grid.shape)
    for p in parts:
        total += p.values.real
    return GridFunction.fromValues(grid, total, real=True)


# ─── defects ───────────────────────────────────────────────────────────────────


def functorialDefect(
    u: GridFunction,
    chi: TorusMap,
    chitilde: TorusMap,
    part: DyadicPartition,
    N: int | None = None,
) -> GridFunction:
    """χ̃^⋆(χ^⋆u) − (χ∘χ̃)^⋆u.

    u∘(χ∘χ̃) = (u∘χ)∘χ̃, so the outer map χ̃ acts last on χ^⋆u.
    """
    requireGrid(part.grid, u)
    composite = chi.compose(chitilde)
    twice = paracomposeNew(paracomposeNew(u, chi, part, N), chitilde, part, N)
    return twice - paracomposeNew(u, composite, part, N)


def conjugationDefect(
    a: Symbol,
    u: GridFunction,
    chi: TorusMap,
    part: DyadicPartition,
    psi: AdmissibleCutoff,
    N: int | None = None,
    *,
    path: QuantizationPath = QuantizationPath.AUTO,
) -> GridFunction:
    """χ^⋆(T_a u) − T_{a*}(χ^⋆u) with a* the pulled-back symbol."""
    requireGrid(part.grid, u)
    a_star = pullbackSymbol(a, chi)
    n = _resolveN(chi, part, N)
    left = paracomposeNew(quantize(a, u, psi, path), chi, part, n)
    right = quantize(a_star, paracomposeNew(u, chi, part, n), psi)
    return left - right


def paralinearizationConjugationRemainder(
    a: Symbol,
    u: GridFunction,
    chi: TorusMap,
    part: DyadicPartition,
    psi: AdmissibleCutoff,
    *,
    path: QuantizationPath = QuantizationPath.AUTO,
) -> GridFunction:
    """T_{(T_a u)'∘χ} g − T_{a*} T_{u'∘χ} g on the circle."""
    if part.grid.d != 1:
        raise InvalidInput("the paralinearization conjugation remainder is defined for d = 1")
    checkSameGrid(u, chi.g[0])
    a_star = pullbackSymbol(a, chi)
    g = chi.g[0]
    tau = quantize(a, u, psi, path)
    left = paraproduct(composeExact(spectralDerivative(tau), chi), g, part)
    inner = paraproduct(composeExact(spectralDerivative(u), chi), g, part)
    return left - quantize(a_star, inner, psi)
