"""Dyadic partition of unity, Littlewood-Paley blocks, block norms and decay fits."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from paracalc.grid import (
    GridFunction,
    TorusGrid,
    derivativeMultiplier,
    fourierMultiplier,
    refinedValues,
    requireGrid,
)
from paracalc.models import DegenerateSpectrum, InvalidInput, NormKind

logger = logging.getLogger(__name__)

FLOOR_RATIO = 1e-13
MIN_FIT_BLOCKS = 3


def smoothStep(t: np.ndarray) -> np.ndarray:
    """C^∞ step: 0 for t <= 0, 1 for t >= 1, built from exp(-1/t)."""
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class DyadicPartition:
    """The family P0, φ_k, P_{≤k} tabulated on the frequency lattice of `grid`."""

    grid: TorusGrid
    inner: float = 1.1
    outer: float = 1.9

    def __post_init__(self) -> None:
        if not 1.0 < self.inner < self.outer < 2.0:
            raise InvalidInput("profile radii must satisfy 1 < inner < outer < 2")

    @property
    def q_max(self) -> int:
        return self.grid.J - 2

    def profile(self, r: np.ndarray) -> np.ndarray:
        """P0 as a function of |ξ|."""
        return smoothStep((self.outer - np.asarray(r)) / (self.outer - self.inner))

    def lowPassProfile(self, k: int, r: np.ndarray) -> np.ndarray:
        if k >= self.q_max:
            return np.ones_like(np.asarray(r, dtype=np.float64))
        return self.profile(np.asarray(r) * 2.0**-k)

    def blockProfile(self, q: int, r: np.ndarray) -> np.ndarray:
        if q < 0 or q > self.q_max:
            return np.zeros_like(np.asarray(r, dtype=np.float64))
        if q == 0:
            return self.lowPassProfile(0, r)
        if q == self.q_max:
            return 1.0 - self.lowPassProfile(q - 1, r)
        return self.lowPassProfile(q, r) - self.lowPassProfile(q - 1, r)

    @cached_property
    def blockTables(self) -> tuple[np.ndarray, ...]:
        r = self.grid.frequencyNorms
        return tuple(self.blockProfile(q, r) for q in range(self.q_max + 1))

    def lowPassTable(self, k: int) -> np.ndarray:
        return self.lowPassProfile(k, self.grid.frequencyNorms)

    def bandTable(self, lo: int, hi: int) -> np.ndarray:
        """Σ_{lo <= l <= hi} φ_l on the lattice."""
        lo, hi = max(lo, 0), min(hi, self.q_max)
        if lo > hi:
            return np.zeros(self.grid.shape)
        if lo == 0:
            return self.lowPassTable(hi)
        return self.lowPassTable(hi) - self.lowPassTable(lo - 1)

    def partitionDefect(self) -> float:
        """max |Σ_q φ_q − 1| over the lattice."""
        total = np.sum(np.stack(self.blockTables), axis=0)
        return float(np.max(np.abs(total - 1.0)))


def applyTable(table: np.ndarray, f: GridFunction) -> GridFunction:
    """Real radial multiplier; keeps the realness flag of f."""
    return GridFunction.fromCoeffs(f.grid, table * f.coeffs, real=f.real)


# ─── blocks ────────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class BlockNorm:
    q: int
    sup: float
    l2: float


@dataclass(frozen=True)
class BlockDecomposition:
    source: GridFunction
    blocks: tuple[GridFunction, ...]
    norms: tuple[BlockNorm, ...]

    @property
    def sup_norms(self) -> list[float]:
        return [b.sup for b in self.norms]

    @property
    def l2_norms(self) -> list[float]:
        return [b.l2 for b in self.norms]

    def reconstruct(self) -> GridFunction:
        total = np.sum(np.stack([b.coeffs for b in self.blocks]), axis=0)
        return GridFunction.fromCoeffs(self.source.grid, total, real=self.source.real)


def decompose(f: GridFunction, part: DyadicPartition) -> BlockDecomposition:
    requireGrid(part.grid, f)
    blocks = tuple(applyTable(table, f) for table in part.blockTables)
    norms = tuple(BlockNorm(q, b.supNorm(), b.l2Norm()) for q, b in enumerate(blocks))
    return BlockDecomposition(source=f, blocks=blocks, norms=norms)


def lowPass(f: GridFunction, k: int, part: DyadicPartition) -> GridFunction:
    """P_{≤k}(D)f; the identity for k >= q_max."""
    if k < 0:
        raise InvalidInput(f"low-pass index must be >= 0, got {k}")
    if k >= part.q_max:
        return f
    return applyTable(part.lowPassTable(k), f)


def zygmundNorm(f: GridFunction, r: float, part: DyadicPartition) -> float:
    dec = decompose(f, part)
    return max(2.0 ** (b.q * r) * b.sup for b in dec.norms)


def sobolevNorm(f: GridFunction, s: float, part: DyadicPartition) -> float:
    dec = decompose(f, part)
    return math.sqrt(sum(2.0 ** (2 * b.q * s) * b.l2**2 for b in dec.norms))


# ─── regularity fits ───────────────────────────────────────────────────────────


@dataclass(frozen=True)
class RegularityReport:
    exponent: float
    norm_kind: NormKind
    fit_range: tuple[int, int]
    residual: float
    degenerate: bool
    blocks: tuple[BlockNorm, ...] = field(default_factory=tuple)
    used: tuple[int, ...] = ()

    def _value(self, b: BlockNorm) -> float:
        return b.sup if self.norm_kind == NormKind.ZYGMUND else b.l2

    @property
    def per_block_lognorms(self) -> list[float]:
        """log2 of the fitted norm for each block of the fit range (-inf when zero)."""
        lo, hi = self.fit_range
        out = []
        for b in self.blocks[lo : hi + 1]:
            value = self._value(b)
            out.append(math.log2(value) if value > 0 else -math.inf)
        return out

    def envelopeExcess(self, rate: float) -> float:
        """Largest rise of log2(2^{q·rate}‖f_q‖) over the first used block.

        At most zero when every used block lies on or under the line of slope
        -rate through the first one, i.e. the weighted tail is bounded by its
        first block.
        """
        if len(self.used) < MIN_FIT_BLOCKS:
            return math.inf
        weighted = [math.log2(self._value(self.blocks[q])) + rate * q for q in self.used]
        return max(weighted) - weighted[0]


def fitRegularity(
    dec: BlockDecomposition,
    norm_kind: NormKind = NormKind.ZYGMUND,
    q_min: int = 1,
    q_max_fit: int | None = None,
    *,
    floor_ratio: float = FLOOR_RATIO,
    scale: float = 0.0,
    strict: bool = True,
) -> RegularityReport:
    """Least-squares slope of log2(block norm) against q; exponent = -slope.

    Blocks at or below floor_ratio × max(largest block, scale) are left out;
    `scale` lets a caller measure a small remainder against the size of the
    function it came from, so rounding-level blocks never enter the fit.
    With strict=False a degenerate spectrum yields a report flagged
    `degenerate` (exponent NaN) instead of raising.
    """
    top = len(dec.blocks) - 1
    hi = top if q_max_fit is None else q_max_fit
    if not 0 <= q_min < hi <= top:
        raise InvalidInput(f"fit range must satisfy 0 <= {q_min} < {hi} <= {top}")

    norms = np.array(dec.sup_norms if norm_kind == NormKind.ZYGMUND else dec.l2_norms)
    floor = floor_ratio * max(float(np.max(norms)), scale)
    qs = np.arange(q_min, hi + 1)
    usable = qs[norms[q_min : hi + 1] > floor] if floor > 0 else qs[:0]
    used = tuple(int(q) for q in usable)

    if len(usable) < MIN_FIT_BLOCKS:
        msg = f"only {len(usable)} blocks in [{q_min}, {hi}] carry mass; need {MIN_FIT_BLOCKS}"
        if strict:
            raise DegenerateSpectrum(msg)
        logger.debug("degenerate fit: %s", msg)
        return RegularityReport(
            math.nan, norm_kind, (q_min, hi), math.nan, True, dec.norms, used
        )

    logs = np.log2(norms[usable])
    slope, intercept = np.polyfit(usable.astype(np.float64), logs, 1)
    residual = float(np.sqrt(np.mean((slope * usable + intercept - logs) ** 2)))
    logger.debug(
        "fit %s on %s: slope %.4f residual %.2e", norm_kind, list(used), slope, residual
    )
    return RegularityReport(
        float(-slope), norm_kind, (q_min, hi), residual, False, dec.norms, used
    )


# ─── Bernstein diagnostics ─────────────────────────────────────────────────────


@dataclass(frozen=True)
class BernsteinRatio:
    """Measured side over bound; each inequality holds when its ratio is <= its constant."""

    q: int
    derivative: float
    lattice: float
    reverse: float


def bernsteinRatios(dec: BlockDecomposition, refine: int = 8) -> list[BernsteinRatio]:
    """Ratios for ‖∂u_q‖ <= 2^{q+1}‖u_q‖, the L²→L∞ bound and the reverse inequality.

    Sup norms are taken on a grid `refine` times finer so that they track the
    supremum of the trigonometric sum rather than its coarse samples.
    """
    grid = dec.source.grid
    cell = grid.length ** (grid.d / 2)
    out = []
    for q, block in enumerate(dec.blocks):
        if q == 0 or block.isZero():
            continue
        sup = float(np.max(np.abs(refinedValues(block, refine))))
        deriv = fourierMultiplier(derivativeMultiplier(grid, 0), block)
        dsup = float(np.max(np.abs(refinedValues(deriv, refine))))
        lattice_bound = 2.0 ** ((q + 1) * grid.d / 2) / cell * block.l2Norm()
        out.append(
            BernsteinRatio(
                q=q,
                derivative=dsup / (2.0 ** (q + 1) * sup),
                lattice=sup / lattice_bound,
                reverse=sup / (2.0**-q * (sup + dsup)),
            )
        )
    return out
