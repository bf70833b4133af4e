"""Symbols a(x, ξ) with limited x-regularity and their calculus.

A symbol is sampled on (x, ξ) pairs: x runs over the grid (or arbitrary
points for closed-form symbols) and ξ over angular frequencies, on or off
the lattice. Rank-decomposed symbols Σ_r b_r(x)·m_r(ξ) carry exact
ξ-derivatives up to total order 2 and spectral x-derivatives; everything
else falls back to centered finite differences where a derivative is needed.
"""

from __future__ import annotations

import itertools
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np

from paracalc.grid import (
    GridFunction,
    TorusGrid,
    derivativeMultiplier,
    evaluateTrig,
    fourierMultiplier,
    requireGrid,
)
from paracalc.littlewood_paley import DyadicPartition
from paracalc.models import (
    DerivativeUnavailable,
    FrequencyEvalUnavailable,
    InvalidInput,
    NotDiffeomorphism,
)

if TYPE_CHECKING:
    from paracalc.paracomposition import TorusMap

logger = logging.getLogger(__name__)

MAX_DERIVATIVE = 2
MIN_JACOBIAN = 1e-6
_XI_CHUNK = 256
_RADIAL_SAMPLE_LIMIT = 4096


def multiIndices(d: int, order: int) -> list[tuple[int, ...]]:
    return [a for a in itertools.product(range(order + 1), repeat=d) if sum(a) == order]


def _factorial(alpha: tuple[int, ...]) -> int:
    return math.prod(math.factorial(a) for a in alpha)


# ─── frequency functions ───────────────────────────────────────────────────────


class FrequencyFunction(ABC):
    """m(ξ) with closed-form values at arbitrary real ξ and derivatives to order 2."""

    order: float = 0.0
    available: int = MAX_DERIVATIVE

    @abstractmethod
    def values(self, xi: np.ndarray, alpha: tuple[int, ...] | None = None) -> np.ndarray: ...

    @abstractmethod
    def describe(self) -> str: ...

    def derivative(self, alpha: tuple[int, ...]) -> FrequencyFunction:
        if sum(alpha) == 0:
            return self
        return DerivedFn(self, alpha)

    def _checkOrder(self, alpha: tuple[int, ...] | None) -> int:
        k = 0 if alpha is None else sum(alpha)
        if k > self.available:
            raise DerivativeUnavailable(
                f"{self.describe()} exposes ξ-derivatives up to order {self.available}, asked {k}"
            )
        return k


class ConstantFn(FrequencyFunction):
    def __init__(self, c: complex = 1.0) -> None:
        self.c = c
        self.order = 0.0

    def values(self, xi: np.ndarray, alpha: tuple[int, ...] | None = None) -> np.ndarray:
        k = self._checkOrder(alpha)
        shape = np.shape(xi)[:-1]
        return np.full(shape, self.c if k == 0 else 0.0, dtype=np.complex128)

    def describe(self) -> str:
        return "one" if self.c == 1.0 else f"{self.c}"


class LinearXi(FrequencyFunction):
    """iξ_axis."""

    def __init__(self, axis: int = 0) -> None:
        self.axis = axis
        self.order = 1.0

    def values(self, xi: np.ndarray, alpha: tuple[int, ...] | None = None) -> np.ndarray:
        k = self._checkOrder(alpha)
        xi = np.asarray(xi, dtype=np.float64)
        if k == 0:
            return 1j * xi[..., self.axis]
        if k == 1 and alpha is not None and alpha[self.axis] == 1:
            return np.full(xi.shape[:-1], 1j)
        return np.zeros(xi.shape[:-1], dtype=np.complex128)

    def describe(self) -> str:
        return "ixi" if self.axis == 0 else f"ixi{self.axis}"


class _RadialPower(FrequencyFunction):
    """w(ξ)^p with w = |ξ| or <ξ>; derivatives from ∂_j w^p = p w^{p-2} ξ_j."""

    keyword = ""

    def __init__(self, p: float) -> None:
        self.p = float(p)
        self.order = self.p

    @abstractmethod
    def _base(self, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...

    def values(self, xi: np.ndarray, alpha: tuple[int, ...] | None = None) -> np.ndarray:
        k = self._checkOrder(alpha)
        xi = np.asarray(xi, dtype=np.float64)
        w, ok = self._base(xi)
        safe = np.where(ok, w, 1.0)
        p = self.p
        if k == 0:
            out = safe**p
        else:
            assert alpha is not None
            axes = [j for j, a in enumerate(alpha) for _ in range(a)]
            first = p * safe ** (p - 2)
            if k == 1:
                out = first * xi[..., axes[0]]
            else:
                i, j = axes
                delta = 1.0 if i == j else 0.0
                out = first * delta + p * (p - 2) * safe ** (p - 4) * xi[..., i] * xi[..., j]
        origin = 1.0 if (k == 0 and p == 0) else 0.0
        return np.where(ok, out, origin).astype(np.complex128)

    def describe(self) -> str:
        return f"{self.keyword}^{self.p:g}"


class AbsPower(_RadialPower):
    keyword = "abs"

    def _base(self, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        r = np.linalg.norm(xi, axis=-1)
        return r, r > 0


class JapanesePower(_RadialPower):
    """(1 + |ξ|²)^{p/2}."""

    keyword = "japanese"

    def _base(self, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        w = np.sqrt(1.0 + np.sum(xi**2, axis=-1))
        return w, np.ones(w.shape, dtype=bool)


class DerivedFn(FrequencyFunction):
    def __init__(self, base: FrequencyFunction, gamma: tuple[int, ...]) -> None:
        self.base = base
        self.gamma = gamma
        self.order = base.order - sum(gamma)
        self.available = base.available - sum(gamma)
        if self.available < 0:
            raise DerivativeUnavailable(
                f"{base.describe()} exposes ξ-derivatives up to order {base.available}, "
                f"asked {sum(gamma)}"
            )

    def values(self, xi: np.ndarray, alpha: tuple[int, ...] | None = None) -> np.ndarray:
        self._checkOrder(alpha)
        if alpha is None:
            return self.base.values(xi, self.gamma)
        total = tuple(g + a for g, a in zip(self.gamma, alpha, strict=True))
        return self.base.values(xi, total)

    def describe(self) -> str:
        return f"∂^{self.gamma}({self.base.describe()})"


class ProductFn(FrequencyFunction):
    def __init__(self, left: FrequencyFunction, right: FrequencyFunction) -> None:
        self.left = left
        self.right = right
        self.order = left.order + right.order
        self.available = min(left.available, right.available)

    def values(self, xi: np.ndarray, alpha: tuple[int, ...] | None = None) -> np.ndarray:
        self._checkOrder(alpha)
        if alpha is None or sum(alpha) == 0:
            return self.left.values(xi) * self.right.values(xi)
        total = np.zeros(np.shape(xi)[:-1], dtype=np.complex128)
        for beta in itertools.product(*(range(a + 1) for a in alpha)):
            rest = tuple(a - b for a, b in zip(alpha, beta, strict=True))
            binom = math.prod(math.comb(a, b) for a, b in zip(alpha, beta, strict=True))
            total += binom * self.left.values(xi, beta) * self.right.values(xi, rest)
        return total

    def describe(self) -> str:
        return f"{self.left.describe()}·{self.right.describe()}"


class ConjugateFn(FrequencyFunction):
    def __init__(self, base: FrequencyFunction) -> None:
        self.base = base
        self.order = base.order
        self.available = base.available

    def values(self, xi: np.ndarray, alpha: tuple[int, ...] | None = None) -> np.ndarray:
        return np.conj(self.base.values(xi, alpha))

    def describe(self) -> str:
        return f"conj({self.base.describe()})"


def parseMultiplier(expr: str, d: int = 1) -> FrequencyFunction:
    """one | ixi | abs^p | japanese^p."""
    expr = expr.strip()
    if expr == "one":
        return ConstantFn(1.0)
    if expr == "ixi":
        return LinearXi(0)
    if d == 2 and expr == "ixi2":
        return LinearXi(1)
    name, _, power = expr.partition("^")
    try:
        p = float(power) if power else 1.0
    except ValueError as e:
        raise InvalidInput(f"bad exponent in multiplier '{expr}'") from e
    if name == "abs":
        return AbsPower(p)
    if name == "japanese":
        return JapanesePower(p)
    raise InvalidInput(f"unknown multiplier '{expr}' (expected one, ixi, abs^p, japanese^p)")


# ─── symbols ───────────────────────────────────────────────────────────────────


def _frequencyBlock(xi: np.ndarray, d: int) -> np.ndarray:
    xi = np.asarray(xi, dtype=np.float64)
    if d == 1 and xi.ndim == 1:
        xi = xi[:, None]
    if xi.ndim == 2:
        xi = xi[None]
    if xi.ndim != 3 or xi.shape[-1] != d:
        raise InvalidInput(f"frequencies must have shape (P, {d}) or (S, P, {d})")
    return xi


class Symbol(ABC):
    """a(x, ξ) of order `order` with x-regularity `rho`."""

    grid: TorusGrid
    order: float
    rho: float
    closed_form: bool = True

    @abstractmethod
    def sample(self, points: np.ndarray | None, xi: np.ndarray) -> np.ndarray:
        """Values on (x, ξ) pairs, shape (S, P).

        `points` is None for the grid itself (S = grid.size, row-major) or an
        (S, d) array of coordinates; `xi` is (P, d), shared by every x, or
        (S, P, d) with frequencies per point.
        """

    @abstractmethod
    def describe(self) -> str: ...

    @property
    def rank_decomposition(self) -> tuple[RankTerm, ...] | None:
        return None

    def table(self, xi: np.ndarray) -> np.ndarray:
        return self.sample(None, xi)

    def evaluatePairs(self, x_index: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """a(x_j, ξ_j) for paired grid indices and frequencies."""
        xi3 = _frequencyBlock(xi, self.grid.d)[0]
        cols = self.table(xi3)
        return cols[np.asarray(x_index), np.arange(len(xi3))]

    def xiDerivative(self, alpha: tuple[int, ...]) -> Symbol:
        if sum(alpha) == 0:
            return self
        raise DerivativeUnavailable(f"{self.describe()} has no analytic ξ-derivatives")

    def xDerivative(self, alpha: tuple[int, ...]) -> Symbol:
        if sum(alpha) == 0:
            return self
        raise DerivativeUnavailable(f"{self.describe()} has no analytic x-derivatives")

    def conjugate(self) -> Symbol:
        return ConjugateSymbol(self)

    def times(self, other: Symbol) -> Symbol:
        return ProductSymbol(self, other)

    def scaled(self, c: complex) -> Symbol:
        return SumSymbol(((c, self),))

    def plus(self, other: Symbol) -> Symbol:
        return SumSymbol(((1.0, self), (1.0, other)))

    @cached_property
    def bound(self) -> float:
        """max over the lattice of |a(x, ξ)| / (1 + |ξ|)^m."""
        xi = self.grid.flatFrequencies
        weight = (1.0 + np.linalg.norm(xi, axis=-1)) ** -self.order
        best = 0.0
        for start in range(0, len(xi), _XI_CHUNK):
            cols = np.abs(self.table(xi[start : start + _XI_CHUNK]))
            best = max(best, float(np.max(cols * weight[start : start + _XI_CHUNK])))
        return best


@dataclass(frozen=True)
class RankTerm:
    b: GridFunction
    m: FrequencyFunction


def _xFactor(b: GridFunction, points: np.ndarray | None) -> np.ndarray:
    if points is None:
        return b.values.reshape(-1)
    vals = evaluateTrig(b, points)
    return vals.real if b.real else vals


class LowRankSymbol(Symbol):
    """Σ_r b_r(x)·m_r(ξ)."""

    def __init__(
        self,
        grid: TorusGrid,
        terms: tuple[RankTerm, ...],
        *,
        order: float | None = None,
        rho: float = math.inf,
    ) -> None:
        if not terms:
            raise InvalidInput("a rank decomposition needs at least one term")
        requireGrid(grid, *(t.b for t in terms))
        self.grid = grid
        self.terms = terms
        self.order = max(t.m.order for t in terms) if order is None else float(order)
        self.rho = float(rho)
        self.construction_bound = self._rankBound()

    def _rankBound(self) -> float:
        xi = self.grid.flatFrequencies
        weight = (1.0 + np.linalg.norm(xi, axis=-1)) ** -self.order
        total = 0.0
        for t in self.terms:
            peak = float(np.max(np.abs(t.m.values(xi)) * weight))
            total += t.b.supNorm() * peak
        if not math.isfinite(total):
            raise InvalidInput(f"symbol {self.describe()} is not bounded by (1+|ξ|)^{self.order}")
        return total

    @property
    def rank_decomposition(self) -> tuple[RankTerm, ...]:
        return self.terms

    def sample(self, points: np.ndarray | None, xi: np.ndarray) -> np.ndarray:
        xi3 = _frequencyBlock(xi, self.grid.d)
        count = self.grid.size if points is None else len(points)
        out = np.zeros((count, xi3.shape[1]), dtype=np.complex128)
        for t in self.terms:
            out += _xFactor(t.b, points)[:, None] * t.m.values(xi3)
        return out

    def describe(self) -> str:
        parts = [f"b{r}(x)·{t.m.describe()}" for r, t in enumerate(self.terms)]
        return " + ".join(parts)

    def xiDerivative(self, alpha: tuple[int, ...]) -> LowRankSymbol:
        if sum(alpha) == 0:
            return self
        terms = tuple(RankTerm(t.b, t.m.derivative(alpha)) for t in self.terms)
        return LowRankSymbol(self.grid, terms, order=self.order - sum(alpha), rho=self.rho)

    def xDerivative(self, alpha: tuple[int, ...]) -> LowRankSymbol:
        if sum(alpha) == 0:
            return self
        terms = tuple(RankTerm(_spatialDerivative(t.b, alpha), t.m) for t in self.terms)
        return LowRankSymbol(self.grid, terms, order=self.order, rho=max(self.rho - sum(alpha), 0))

    def conjugate(self) -> LowRankSymbol:
        terms = tuple(RankTerm(t.b.conj(), ConjugateFn(t.m)) for t in self.terms)
        return LowRankSymbol(self.grid, terms, order=self.order, rho=self.rho)

    def times(self, other: Symbol) -> Symbol:
        if not isinstance(other, LowRankSymbol):
            return ProductSymbol(self, other)
        terms = tuple(
            RankTerm(s.b * t.b, ProductFn(s.m, t.m)) for s in self.terms for t in other.terms
        )
        return LowRankSymbol(
            self.grid, terms, order=self.order + other.order, rho=min(self.rho, other.rho)
        )

    def scaled(self, c: complex) -> LowRankSymbol:
        terms = tuple(RankTerm(t.b * c, t.m) for t in self.terms)
        return LowRankSymbol(self.grid, terms, order=self.order, rho=self.rho)

    def plus(self, other: Symbol) -> Symbol:
        if not isinstance(other, LowRankSymbol):
            return SumSymbol(((1.0, self), (1.0, other)))
        return LowRankSymbol(
            self.grid,
            self.terms + other.terms,
            order=max(self.order, other.order),
            rho=min(self.rho, other.rho),
        )


def _spatialDerivative(b: GridFunction, alpha: tuple[int, ...]) -> GridFunction:
    table = np.ones(b.grid.shape, dtype=np.complex128)
    for axis, a in enumerate(alpha):
        table = table * derivativeMultiplier(b.grid, axis) ** a
    result = fourierMultiplier(table, b)
    return result.realPart() if b.real else result


class ProductSymbol(Symbol):
    def __init__(self, a: Symbol, b: Symbol) -> None:
        self.grid, self.a, self.b = a.grid, a, b
        self.order = a.order + b.order
        self.rho = min(a.rho, b.rho)
        self.closed_form = a.closed_form and b.closed_form

    def sample(self, points: np.ndarray | None, xi: np.ndarray) -> np.ndarray:
        return self.a.sample(points, xi) * self.b.sample(points, xi)

    def describe(self) -> str:
        return f"({self.a.describe()})·({self.b.describe()})"


class SumSymbol(Symbol):
    def __init__(self, parts: tuple[tuple[complex, Symbol], ...]) -> None:
        self.parts = parts
        self.grid = parts[0][1].grid
        self.order = max(s.order for _, s in parts)
        self.rho = min(s.rho for _, s in parts)
        self.closed_form = all(s.closed_form for _, s in parts)

    def sample(self, points: np.ndarray | None, xi: np.ndarray) -> np.ndarray:
        return sum(c * s.sample(points, xi) for c, s in self.parts)  # type: ignore[return-value]

    def describe(self) -> str:
        return " + ".join(f"{c}·({s.describe()})" for c, s in self.parts)


class ConjugateSymbol(Symbol):
    def __init__(self, base: Symbol) -> None:
        self.base = base
        self.grid, self.order, self.rho = base.grid, base.order, base.rho
        self.closed_form = base.closed_form

    def sample(self, points: np.ndarray | None, xi: np.ndarray) -> np.ndarray:
        return np.conj(self.base.sample(points, xi))

    def describe(self) -> str:
        return f"conj({self.base.describe()})"


class TabulatedSymbol(Symbol):
    """Samples on grid × lattice only; rows are grid points, columns lattice frequencies."""

    closed_form = False

    def __init__(self, grid: TorusGrid, table: np.ndarray, *, order: float, rho: float) -> None:
        data = np.asarray(table, dtype=np.complex128)
        if data.shape != (grid.size, grid.size):
            raise InvalidInput(f"table must have shape ({grid.size}, {grid.size})")
        self.grid, self.order, self.rho = grid, float(order), float(rho)
        self._table = data

    def sample(self, points: np.ndarray | None, xi: np.ndarray) -> np.ndarray:
        if points is not None:
            raise FrequencyEvalUnavailable("tabulated symbols are only known at grid points")
        xi3 = _frequencyBlock(xi, self.grid.d)
        if xi3.shape[0] != 1:
            raise FrequencyEvalUnavailable("tabulated symbols need lattice frequencies")
        k = xi3[0] / self.grid.scale
        ki = np.round(k).astype(np.int64)
        half = self.grid.n // 2
        if np.any(np.abs(k - ki) > 1e-9) or np.any((ki < -half) | (ki >= half)):
            raise FrequencyEvalUnavailable("frequency off the lattice for a tabulated symbol")
        flat = np.ravel_multi_index(tuple((ki % self.grid.n).T), self.grid.shape)
        return self._table[:, flat]

    def describe(self) -> str:
        return f"tabulated(order={self.order:g})"


class PulledBackSymbol(Symbol):
    """a*(x, ξ) = a(χ(x), Dχ(x)^{-t} ξ)."""

    def __init__(self, base: Symbol, chi: TorusMap) -> None:
        self.base, self.chi = base, chi
        self.grid, self.order, self.rho = base.grid, base.order, base.rho

    def _mapData(self, points: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
        chi = self.chi
        if points is None:
            moved = self.grid.flatPoints + np.stack([g.values.reshape(-1) for g in chi.g], axis=1)
            jac = np.stack(
                [np.stack([dg.values.reshape(-1) for dg in row], axis=1) for row in chi.dg], axis=1
            )
        else:
            moved = points + np.stack([evaluateTrig(g, points).real for g in chi.g], axis=1)
            jac = np.stack(
                [np.stack([evaluateTrig(dg, points).real for dg in row], axis=1) for row in chi.dg],
                axis=1,
            )
        return moved, jac + np.eye(self.grid.d)

    def sample(self, points: np.ndarray | None, xi: np.ndarray) -> np.ndarray:
        xi3 = _frequencyBlock(xi, self.grid.d)
        moved, jac = self._mapData(points)
        inv_t = np.linalg.inv(jac).transpose(0, 2, 1)
        freqs = np.broadcast_to(xi3, (len(moved),) + xi3.shape[1:])
        pulled = np.einsum("sij,spj->spi", inv_t, freqs)
        return self.base.sample(moved, pulled)

    def describe(self) -> str:
        return f"pullback({self.base.describe()})"


class RegularizedSymbol(Symbol):
    """σ^ψ_a: the x-spectrum of a(·, η) cut by ψ(ζ, η)."""

    def __init__(self, base: Symbol, psi: AdmissibleCutoff) -> None:
        if psi.part.grid != base.grid:
            raise InvalidInput("cut-off and symbol live on different grids")
        self.base, self.psi = base, psi
        self.grid, self.order, self.rho = base.grid, base.order, base.rho
        self.closed_form = base.closed_form

    def spectrum(self, xi: np.ndarray) -> np.ndarray:
        """ψ(ζ, η)·𝔉_x a(ζ, η) with ζ over the lattice (grid shape) and η over the columns."""
        xi2 = _frequencyBlock(xi, self.grid.d)[0]
        raw = self.base.sample(None, xi2).reshape(self.grid.shape + (len(xi2),))
        axes = tuple(range(self.grid.d))
        spec = np.fft.fftn(raw, axes=axes) / self.grid.size
        weight = self.psi.evaluate(
            self.grid.frequencyNorms[..., None], np.linalg.norm(xi2, axis=-1)
        )
        return spec * weight

    def sample(self, points: np.ndarray | None, xi: np.ndarray) -> np.ndarray:
        if points is not None:
            raise InvalidInput("regularized symbols are sampled on the grid only")
        xi2 = _frequencyBlock(xi, self.grid.d)
        if xi2.shape[0] != 1:
            raise InvalidInput("regularized symbols need frequencies shared by all x")
        axes = tuple(range(self.grid.d))
        values = np.fft.ifftn(self.spectrum(xi2[0]), axes=axes) * self.grid.size
        return values.reshape(self.grid.size, -1)

    def describe(self) -> str:
        return f"σψ({self.base.describe()})"


# ─── builders ──────────────────────────────────────────────────────────────────


def multiplierSymbol(grid: TorusGrid, m: FrequencyFunction) -> LowRankSymbol:
    return LowRankSymbol(grid, (RankTerm(GridFunction.constant(grid, 1.0), m),))


def functionSymbol(b: GridFunction, rho: float) -> LowRankSymbol:
    return LowRankSymbol(b.grid, (RankTerm(b, ConstantFn(1.0)),), order=0.0, rho=rho)


def productSymbol(b: GridFunction, m: FrequencyFunction, rho: float) -> LowRankSymbol:
    return LowRankSymbol(b.grid, (RankTerm(b, m),), rho=rho)


# ─── admissible cut-off ────────────────────────────────────────────────────────


@dataclass(frozen=True)
class AdmissibleCutoff:
    """ψ(ζ, η) = Σ_k P_{≤k-N0}(ζ) φ_k(η) with its measured (eps1, eps2)."""

    part: DyadicPartition
    n0: int
    eps1: float
    eps2: float

    @classmethod
    def build(cls, part: DyadicPartition, n0: int = 3) -> AdmissibleCutoff:
        if n0 < 3:
            raise InvalidInput("cut-off offset N0 must be >= 3")
        eps1, eps2 = _measureEps(part, n0)
        if not 0 < eps1 < eps2 < 1:
            raise InvalidInput(f"cut-off is not admissible: eps1={eps1}, eps2={eps2}")
        logger.debug("admissible cut-off N0=%d eps1=%.4f eps2=%.4f", n0, eps1, eps2)
        return cls(part, n0, eps1, eps2)

    def evaluate(self, zeta_norm: np.ndarray, eta_norm: np.ndarray) -> np.ndarray:
        return _cutoffValues(self.part, self.n0, np.asarray(zeta_norm), np.asarray(eta_norm))


def _cutoffValues(
    part: DyadicPartition, n0: int, zeta: np.ndarray, eta: np.ndarray
) -> np.ndarray:
    total = np.zeros(np.broadcast_shapes(zeta.shape, eta.shape))
    for k in range(part.q_max + 1):
        phi = part.blockProfile(k, eta)
        if not np.any(phi):
            continue
        total = total + part.lowPassProfile(k - n0, zeta) * phi
    return total


def _radialSample(grid: TorusGrid) -> np.ndarray:
    radii = np.unique(np.round(grid.frequencyNorms.reshape(-1), 12))
    if len(radii) <= _RADIAL_SAMPLE_LIMIT:
        return radii
    step = grid.scale / 16
    return np.arange(0.0, float(radii[-1]) + step, step)


def _measureEps(part: DyadicPartition, n0: int) -> tuple[float, float]:
    radii = _radialSample(part.grid)
    lo, hi = math.inf, 0.0
    for start in range(0, len(radii), _XI_CHUNK):
        eta = radii[start : start + _XI_CHUNK]
        psi = _cutoffValues(part, n0, radii[:, None], eta[None, :])
        ratio = radii[:, None] / (1.0 + eta[None, :])
        below = ratio[psi < 1.0]
        above = ratio[psi > 0.0]
        if below.size:
            lo = min(lo, float(below.min()))
        if above.size:
            hi = max(hi, float(above.max()))
    return float(np.nextafter(lo, 0.0)), float(np.nextafter(hi, math.inf))


def spectralConditionDefect(sigma: RegularizedSymbol, xi: np.ndarray) -> float:
    """max |𝔉_x σ(ζ, η)| over |ζ| >= eps2 (1 + |η|)."""
    xi2 = _frequencyBlock(xi, sigma.grid.d)[0]
    spec = sigma.spectrum(xi2)
    zeta = sigma.grid.frequencyNorms[..., None]
    outside = zeta >= sigma.psi.eps2 * (1.0 + np.linalg.norm(xi2, axis=-1))
    return float(np.max(np.abs(spec[outside]), initial=0.0))


# ─── operations ────────────────────────────────────────────────────────────────


def derivativeCap(d: int, rho: float) -> int:
    if not math.isfinite(rho):
        return MAX_DERIVATIVE
    return min(d // 2 + 1 + math.floor(rho), MAX_DERIVATIVE)


def _finiteDifference(a: Symbol, alpha: tuple[int, ...], xi: np.ndarray) -> np.ndarray:
    h = a.grid.scale
    axes = [j for j, k in enumerate(alpha) for _ in range(k)]

    def shifted(offsets: dict[int, int]) -> np.ndarray:
        moved = xi.copy()
        for axis, o in offsets.items():
            moved[:, axis] += o * h
        return a.table(moved)

    if not axes:
        return a.table(xi)
    if len(axes) == 1:
        (i,) = axes
        return (shifted({i: 1}) - shifted({i: -1})) / (2 * h)
    i, j = axes
    if i == j:
        return (shifted({i: 1}) - 2 * a.table(xi) + shifted({i: -1})) / h**2
    return (
        shifted({i: 1, j: 1})
        - shifted({i: 1, j: -1})
        - shifted({i: -1, j: 1})
        + shifted({i: -1, j: -1})
    ) / (4 * h**2)


def _xiDerivativeTable(a: Symbol, alpha: tuple[int, ...], xi: np.ndarray) -> np.ndarray:
    try:
        return a.xiDerivative(alpha).table(xi)
    except DerivativeUnavailable:
        return _finiteDifference(a, alpha, xi)


def _holderColumns(cols: np.ndarray, grid: TorusGrid, rho: float) -> np.ndarray:
    """max(sup_x, lattice-scale Hölder quotient) for each column."""
    mags = np.max(np.abs(cols), axis=0)
    if rho <= 0:
        return mags
    exponent = min(rho, 1.0)
    shaped = cols.reshape(grid.shape + (cols.shape[1],))
    quotient = np.zeros_like(mags)
    for axis in range(grid.d):
        diff = np.abs(np.roll(shaped, -1, axis=axis) - shaped)
        diff = diff.reshape(grid.size, -1).max(axis=0)
        quotient = np.maximum(quotient, diff / grid.step**exponent)
    return np.maximum(mags, quotient)


def seminorm(a: Symbol, m: float, rho: float) -> float:
    """M^m_ρ(a) over lattice frequencies |ξ| >= 1."""
    grid = a.grid
    xi_all = grid.flatFrequencies
    keep = np.linalg.norm(xi_all, axis=-1) >= 1.0
    if not a.closed_form:
        # finite differences must stay on the lattice
        interior = np.all(np.abs(grid.flatFrequencies / grid.scale) < grid.n // 2 - 1, axis=-1)
        keep &= interior
    xi = xi_all[keep]
    cap = derivativeCap(grid.d, rho)
    best = 0.0
    for k in range(cap + 1):
        for alpha in multiIndices(grid.d, k):
            for start in range(0, len(xi), _XI_CHUNK):
                chunk = xi[start : start + _XI_CHUNK]
                cols = _xiDerivativeTable(a, alpha, chunk)
                weight = (1.0 + np.linalg.norm(chunk, axis=-1)) ** (k - m)
                best = max(best, float(np.max(_holderColumns(cols, grid, rho) * weight)))
    return best


def _truncationOrder(rho: float) -> int:
    if rho <= 0:
        raise InvalidInput(f"truncation order rho must be > 0, got {rho}")
    k = math.ceil(rho) - 1
    if k > MAX_DERIVATIVE:
        raise DerivativeUnavailable(
            f"rho={rho} needs derivatives of order {k}; at most {MAX_DERIVATIVE} are exposed"
        )
    return k


def sharpProduct(a: Symbol, b: Symbol, rho: float) -> Symbol:
    """a#b = Σ_{|α|<ρ} 1/(i^{|α|} α!) ∂^α_ξ a · ∂^α_x b."""
    top = _truncationOrder(rho)
    result = a.times(b)
    for k in range(1, top + 1):
        for alpha in multiIndices(a.grid.d, k):
            coef = 1.0 / (1j**k * _factorial(alpha))
            term = a.xiDerivative(alpha).times(b.xDerivative(alpha)).scaled(coef)
            result = result.plus(term)
    return result


def adjointSymbol(a: Symbol, rho: float) -> Symbol:
    """a^t = Σ_{|α|<ρ} 1/(i^{|α|} α!) ∂^α_ξ ∂^α_x ā."""
    top = _truncationOrder(rho)
    bar = a.conjugate()
    result = bar
    for k in range(1, top + 1):
        for alpha in multiIndices(a.grid.d, k):
            coef = 1.0 / (1j**k * _factorial(alpha))
            result = result.plus(bar.xDerivative(alpha).xiDerivative(alpha).scaled(coef))
    return result


def pullbackSymbol(a: Symbol, chi: TorusMap) -> Symbol:
    if chi.grid != a.grid:
        raise InvalidInput("map and symbol live on different grids")
    if chi.min_jac <= MIN_JACOBIAN:
        raise NotDiffeomorphism(f"min det Dχ = {chi.min_jac:.3g} <= {MIN_JACOBIAN}")
    if not a.closed_form:
        raise FrequencyEvalUnavailable(f"{a.describe()} cannot be evaluated off the lattice")
    return PulledBackSymbol(a, chi)


def regularizedSymbol(a: Symbol, psi: AdmissibleCutoff) -> RegularizedSymbol:
    return RegularizedSymbol(a, psi)
