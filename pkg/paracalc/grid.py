"""Uniform periodic grids, the DFT contract and Fourier multipliers.

Coefficients are normalized so that

    coeffs(ξ) = (1/2^{dJ}) Σ_j values(x_j) e^{-i x_j·ξ}

which makes a single mode cos(kx) carry ±1/2 at ξ = ±k, and values are
recovered exactly by the trigonometric sum Σ_ξ coeffs(ξ) e^{i x·ξ}.
"""

from __future__ import annotations

import math
import threading
from collections.abc import Callable
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from paracalc.models import GridMismatch, InvalidInput

HERMITIAN_TOL = 1e-12
_EVAL_CHUNK = 2048

Multiplier = np.ndarray | Callable[[np.ndarray], np.ndarray]


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TorusGrid:
    d: int = 1
    J: int = 10
    length: float = 2 * math.pi

    def __post_init__(self) -> None:
        if self.d not in (1, 2):
            raise InvalidInput(f"dimension must be 1 or 2, got {self.d}")
        if self.J < 4:
            raise InvalidInput(f"need at least 16 points per axis, got 2^{self.J}")
        if self.length <= 0:
            raise InvalidInput("grid length must be positive")

    @property
    def n(self) -> int:
        return 2**self.J

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def step(self) -> float:
        return self.length / self.n

    @property
    def scale(self) -> float:
        """Angular frequency of integer wavenumber 1."""
        return 2 * math.pi / self.length

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer lattice in FFT order, shape (*shape, d)."""
        axis = np.fft.fftfreq(self.n, d=1.0 / self.n).round().astype(np.int64)
        mesh = np.meshgrid(*([axis] * self.d), indexing="ij")
        return _readonly(np.stack(mesh, axis=-1))

    @cached_property
    def frequencies(self) -> np.ndarray:
        return _readonly(self.wavenumbers * self.scale)

    @cached_property
    def frequencyNorms(self) -> np.ndarray:
        return _readonly(np.linalg.norm(self.frequencies, axis=-1))

    @cached_property
    def points(self) -> np.ndarray:
        axis = np.arange(self.n) * self.step
        mesh = np.meshgrid(*([axis] * self.d), indexing="ij")
        return _readonly(np.stack(mesh, axis=-1))

    @cached_property
    def flatPoints(self) -> np.ndarray:
        return _readonly(self.points.reshape(self.size, self.d))

    @cached_property
    def flatFrequencies(self) -> np.ndarray:
        return _readonly(self.frequencies.reshape(self.size, self.d))

    @cached_property
    def nyquistMask(self) -> np.ndarray:
        """True where any axis sits on the unpaired frequency -2^{J-1}."""
        return _readonly(np.any(self.wavenumbers == -(self.n // 2), axis=-1))

    def describe(self) -> str:
        return f"d={self.d}, J={self.J} ({self.n} points/axis), length={self.length:.6g}"


def requireGrid(grid: TorusGrid, *functions: GridFunction) -> None:
    for f in functions:
        if f.grid != grid:
            raise GridMismatch(f"grid mismatch: {grid.describe()} vs {f.grid.describe()}")


def checkSameGrid(*functions: GridFunction) -> TorusGrid:
    grid = functions[0].grid
    for f in functions[1:]:
        if f.grid != grid:
            raise GridMismatch(f"grid mismatch: {grid.describe()} vs {f.grid.describe()}")
    return grid


def mirrorCoeffs(coeffs: np.ndarray) -> np.ndarray:
    """coeffs evaluated at -ξ (FFT order)."""
    axes = tuple(range(coeffs.ndim))
    return np.roll(np.flip(coeffs, axis=axes), 1, axis=axes)


def isHermitian(coeffs: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    scale = float(np.max(np.abs(coeffs), initial=0.0))
    if scale == 0.0:
        return True
    return float(np.max(np.abs(coeffs - np.conj(mirrorCoeffs(coeffs))))) <= tol * scale


class GridFunction:
    """Samples on a TorusGrid together with lazily computed Fourier coefficients.

    Values and coefficients are stored read-only; every operation returns a new
    instance. A `real` function keeps float samples and Hermitian coefficients.
    """

    def __init__(
        self,
        grid: TorusGrid,
        *,
        values: np.ndarray | None = None,
        coeffs: np.ndarray | None = None,
        real: bool | None = None,
    ) -> None:
        if values is None and coeffs is None:
            raise InvalidInput("GridFunction needs values or coefficients")
        self.grid = grid
        self._lock = threading.Lock()
        self._values: np.ndarray | None = None
        self._coeffs: np.ndarray | None = None

        if coeffs is not None:
            c = np.array(coeffs, dtype=np.complex128).reshape(grid.shape)
            if not np.all(np.isfinite(c)):
                raise InvalidInput("coefficients contain non-finite entries")
            self._coeffs = _readonly(c)
        if values is not None:
            v = np.asarray(values)
            if v.size != grid.size:
                raise InvalidInput(f"expected {grid.size} samples, got {v.size}")
            v = v.reshape(grid.shape)
            if not np.all(np.isfinite(v)):
                raise InvalidInput("values contain non-finite entries")
            if real is None:
                real = not np.iscomplexobj(v) or _negligibleImag(v)
            v = v.real.astype(np.float64) if real else v.astype(np.complex128)
            self._values = _readonly(v)
        elif real is None:
            real = isHermitian(self._coeffs)  # type: ignore[arg-type]
        self.real: bool = bool(real)

    # ─── constructors ──────────────────────────────────────────────────────

    @classmethod
    def fromValues(
        cls, grid: TorusGrid, values: np.ndarray, real: bool | None = None
    ) -> GridFunction:
        return cls(grid, values=values, real=real)

    @classmethod
    def fromCoeffs(
        cls, grid: TorusGrid, coeffs: np.ndarray, real: bool | None = None
    ) -> GridFunction:
        return cls(grid, coeffs=coeffs, real=real)

    @classmethod
    def zeros(cls, grid: TorusGrid) -> GridFunction:
        return cls(grid, values=np.zeros(grid.shape), real=True)

    @classmethod
    def constant(cls, grid: TorusGrid, c: float) -> GridFunction:
        return cls(grid, values=np.full(grid.shape, float(c)), real=True)

    @classmethod
    def fromCallable(
        cls, grid: TorusGrid, fn: Callable[..., np.ndarray], real: bool | None = None
    ) -> GridFunction:
        """Sample fn(x) (d=1) or fn(x, y) (d=2) at the grid points."""
        axes = [grid.points[..., i] for i in range(grid.d)]
        return cls(grid, values=np.asarray(fn(*axes)), real=real)

    # ─── synchronized access ───────────────────────────────────────────────

    @property
    def values(self) -> np.ndarray:
        with self._lock:
            if self._values is None:
                assert self._coeffs is not None
                v = np.fft.ifftn(self._coeffs) * self.grid.size
                self._values = _readonly(v.real.copy() if self.real else v)
            return self._values

    @property
    def coeffs(self) -> np.ndarray:
        with self._lock:
            if self._coeffs is None:
                assert self._values is not None
                self._coeffs = _readonly(np.fft.fftn(self._values) / self.grid.size)
            return self._coeffs

    @property
    def hasValues(self) -> bool:
        return self._values is not None

    @property
    def hasCoeffs(self) -> bool:
        return self._coeffs is not None

    # ─── norms ─────────────────────────────────────────────────────────────

    def supNorm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l2Norm(self) -> float:
        cell = self.grid.length**self.grid.d / self.grid.size
        return float(math.sqrt(cell * np.sum(np.abs(self.values) ** 2)))

    def isZero(self) -> bool:
        return not np.any(self.coeffs) if self.hasCoeffs else not np.any(self.values)

    # ─── arithmetic ────────────────────────────────────────────────────────

    def _combine(self, other: GridFunction | complex, op: Callable) -> GridFunction:
        if isinstance(other, GridFunction):
            checkSameGrid(self, other)
            real = self.real and other.real
            return GridFunction(self.grid, values=op(self.values, other.values), real=real)
        scalar_real = isinstance(other, int | float) or complex(other).imag == 0
        real = self.real and scalar_real
        result = op(self.values, other.real if real else other)  # type: ignore[union-attr]
        return GridFunction(self.grid, values=result, real=real)

    def __add__(self, other: GridFunction | complex) -> GridFunction:
        return self._combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other: GridFunction | complex) -> GridFunction:
        return self._combine(other, np.subtract)

    def __rsub__(self, other: complex) -> GridFunction:
        return (-self) + other

    def __mul__(self, other: GridFunction | complex) -> GridFunction:
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self) -> GridFunction:
        return GridFunction(self.grid, values=-self.values, real=self.real)

    def conj(self) -> GridFunction:
        if self.real:
            return self
        return GridFunction(self.grid, values=np.conj(self.values), real=False)

    def realPart(self) -> GridFunction:
        return GridFunction(self.grid, values=self.values.real, real=True)

    def __repr__(self) -> str:
        kind = "real" if self.real else "complex"
        return f"GridFunction({self.grid.describe()}, {kind})"


def _negligibleImag(v: np.ndarray) -> bool:
    scale = max(1.0, float(np.max(np.abs(v), initial=0.0)))
    return float(np.max(np.abs(v.imag), initial=0.0)) <= HERMITIAN_TOL * scale


# ─── transforms ────────────────────────────────────────────────────────────────


def dft(f: GridFunction) -> GridFunction:
    """Return f with coefficients populated."""
    return GridFunction(f.grid, values=f.values, coeffs=f.coeffs, real=f.real)


def idft(f: GridFunction) -> GridFunction:
    """Return f with samples recomputed from its coefficients."""
    return GridFunction(f.grid, coeffs=f.coeffs, real=f.real)


def _tabulate(m: Multiplier, grid: TorusGrid) -> np.ndarray:
    if callable(m):
        table = np.asarray(m(grid.frequencies))
    else:
        table = np.asarray(m)
    if table.shape != grid.shape:
        raise InvalidInput(f"multiplier shape {table.shape} does not match grid {grid.shape}")
    return table


def fourierMultiplier(m: Multiplier, f: GridFunction) -> GridFunction:
    """Apply m(D): coeffs(ξ) ↦ m(ξ)·coeffs(ξ).

    `m` is a table on the lattice (FFT order) or a callable taking the
    angular frequency array of shape (*shape, d).
    """
    table = _tabulate(m, f.grid)
    return GridFunction.fromCoeffs(f.grid, table * f.coeffs)


def derivativeMultiplier(grid: TorusGrid, axis: int = 0) -> np.ndarray:
    """iξ_axis with the unpaired Nyquist frequency zeroed so real stays real."""
    table = 1j * grid.frequencies[..., axis]
    return np.where(grid.wavenumbers[..., axis] == -(grid.n // 2), 0.0, table)


def spectralDerivative(f: GridFunction, axis: int = 0) -> GridFunction:
    result = fourierMultiplier(derivativeMultiplier(f.grid, axis), f)
    return result.realPart() if f.real else result


def gradient(f: GridFunction) -> list[GridFunction]:
    return [spectralDerivative(f, axis) for axis in range(f.grid.d)]


def _asPoints(grid: TorusGrid, points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if grid.d == 1 and pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] != grid.d:
        raise InvalidInput(f"points must have shape (P, {grid.d})")
    return pts


def evaluateTrig(f: GridFunction, points: np.ndarray) -> np.ndarray:
    """Σ_ξ coeffs(ξ) e^{i p·ξ} at each point p, by direct summation over the support."""
    pts = _asPoints(f.grid, points)
    flat = f.coeffs.reshape(-1)
    support = np.flatnonzero(flat)
    out = np.zeros(len(pts), dtype=np.complex128)
    if support.size == 0:
        return out
    c = flat[support]
    xi = f.grid.flatFrequencies[support]
    for start in range(0, len(pts), _EVAL_CHUNK):
        phase = pts[start : start + _EVAL_CHUNK] @ xi.T
        out[start : start + _EVAL_CHUNK] = np.exp(1j * phase) @ c
    return out


def refinedValues(f: GridFunction, factor: int) -> np.ndarray:
    """Samples of the trigonometric sum on a grid `factor` times finer (zero padding)."""
    if factor < 1:
        raise InvalidInput("refinement factor must be >= 1")
    big_n = f.grid.n * factor
    padded = np.zeros((big_n,) * f.grid.d, dtype=np.complex128)
    index = tuple(np.moveaxis(f.grid.wavenumbers % big_n, -1, 0))
    padded[index] = f.coeffs
    values = np.fft.ifftn(padded) * padded.size
    return values.real if f.real else values


def resample(f: GridFunction, points: np.ndarray) -> GridFunction:
    """f evaluated at one point per grid node, as a new grid function."""
    values = evaluateTrig(f, points)
    return GridFunction(f.grid, values=values.real if f.real else values, real=f.real)
