from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paracalc.grid import (
    GridFunction,
    TorusGrid,
    dft,
    evaluateTrig,
    fourierMultiplier,
    gradient,
    idft,
    isHermitian,
    mirrorCoeffs,
    refinedValues,
    resample,
    spectralDerivative,
)
from paracalc.models import GridMismatch, InvalidInput


def _random(grid: TorusGrid, seed: int, real: bool = True) -> GridFunction:
    rng = np.random.default_rng(seed)
    values = rng.standard_normal(grid.shape)
    if not real:
        values = values + 1j * rng.standard_normal(grid.shape)
    return GridFunction.fromValues(grid, values, real=real)


def test_torusGrid_shape():
    grid = TorusGrid(d=2, J=5)
    assert grid.n == 32
    assert grid.shape == (32, 32)
    assert grid.size == 1024
    assert grid.points.shape == (32, 32, 2)
    assert grid.flatFrequencies.shape == (1024, 2)


def test_torusGrid_lattice_range():
    grid = TorusGrid(J=4)
    k = grid.wavenumbers[..., 0]
    assert k.min() == -8
    assert k.max() == 7


@pytest.mark.parametrize(("d", "J", "length"), [(3, 8, 1.0), (1, 3, 1.0), (1, 8, 0.0)])
def test_torusGrid_rejects(d: int, J: int, length: float):
    with pytest.raises(InvalidInput):
        TorusGrid(d=d, J=J, length=length)


def test_torusGrid_scale_follows_length():
    grid = TorusGrid(J=6, length=1.0)
    assert grid.frequencies[1, 0] == pytest.approx(2 * math.pi)


def test_gridFunction_cos_coefficients(grid8: TorusGrid):
    f = GridFunction.fromCallable(grid8, lambda x: np.cos(3 * x))
    c = f.coeffs
    assert c[3] == pytest.approx(0.5)
    assert c[-3] == pytest.approx(0.5)
    mask = np.ones(grid8.n, dtype=bool)
    mask[[3, -3]] = False
    assert np.max(np.abs(c[mask])) < 1e-14


def test_gridFunction_rejects_nonfinite(grid8: TorusGrid):
    values = np.zeros(grid8.shape)
    values[4] = np.nan
    with pytest.raises(InvalidInput, match="non-finite"):
        GridFunction.fromValues(grid8, values)


def test_gridFunction_rejects_wrong_size(grid8: TorusGrid):
    with pytest.raises(InvalidInput, match="samples"):
        GridFunction.fromValues(grid8, np.zeros(7))


def test_gridFunction_needs_data(grid8: TorusGrid):
    with pytest.raises(InvalidInput):
        GridFunction(grid8)


def test_gridFunction_real_detection(grid8: TorusGrid):
    assert GridFunction.fromValues(grid8, np.ones(grid8.shape)).real
    assert not GridFunction.fromValues(grid8, 1j * np.ones(grid8.shape)).real


def test_gridFunction_arithmetic_grid_mismatch(grid8: TorusGrid):
    f = GridFunction.zeros(grid8)
    g = GridFunction.zeros(TorusGrid(J=9))
    with pytest.raises(GridMismatch):
        _ = f + g


def test_gridFunction_scalar_arithmetic(grid8: TorusGrid):
    f = GridFunction.constant(grid8, 2.0)
    assert np.allclose((f * 3.0 + 1.0).values, 7.0)
    assert np.allclose((1.0 - f).values, -1.0)
    assert (f * 3.0).real


def test_dft_roundtrip(grid8: TorusGrid):
    f = _random(grid8, 0, real=False)
    back = idft(dft(f))
    assert np.max(np.abs(back.values - f.values)) < 1e-12 * np.max(np.abs(f.values))


def test_real_function_is_hermitian(grid8: TorusGrid):
    f = _random(grid8, 1)
    assert isHermitian(f.coeffs)
    assert np.allclose(mirrorCoeffs(f.coeffs), np.conj(f.coeffs))


def test_mirrorCoeffs_2d():
    grid = TorusGrid(d=2, J=4)
    c = np.zeros(grid.shape, dtype=np.complex128)
    c[1, 2] = 1.0
    m = mirrorCoeffs(c)
    assert m[-1, -2] == 1.0
    assert np.count_nonzero(m) == 1


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    alpha=st.floats(-10, 10, allow_nan=False),
    beta=st.floats(-10, 10, allow_nan=False),
)
def test_dft_linear(seed: int, alpha: float, beta: float):
    grid = TorusGrid(J=6)
    f, g = _random(grid, seed), _random(grid, seed + 1)
    lhs = (f * alpha + g * beta).coeffs
    rhs = alpha * f.coeffs + beta * g.coeffs
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * (1 + abs(alpha) + abs(beta))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), length=st.floats(0.5, 20.0))
def test_parseval(seed: int, length: float):
    grid = TorusGrid(J=6, length=length)
    f = _random(grid, seed, real=False)
    assert f.l2Norm() ** 2 == pytest.approx(length * np.sum(np.abs(f.coeffs) ** 2), rel=1e-12)


def test_spectralDerivative_sin(grid8: TorusGrid):
    f = GridFunction.fromCallable(grid8, lambda x: np.sin(5 * x))
    df = spectralDerivative(f)
    expected = 5 * np.cos(5 * grid8.points[..., 0])
    assert df.real
    assert np.max(np.abs(df.values - expected)) < 1e-11


def test_gradient_2d():
    grid = TorusGrid(d=2, J=5)
    f = GridFunction.fromCallable(grid, lambda x, y: np.sin(x) * np.cos(2 * y))
    fx, fy = gradient(f)
    x, y = grid.points[..., 0], grid.points[..., 1]
    assert np.max(np.abs(fx.values - np.cos(x) * np.cos(2 * y))) < 1e-11
    assert np.max(np.abs(fy.values + 2 * np.sin(x) * np.sin(2 * y))) < 1e-11


def test_fourierMultiplier_composition(grid8: TorusGrid):
    f = _random(grid8, 2)
    m1 = np.abs(grid8.frequencies[..., 0])
    m2 = 1.0 / (1.0 + grid8.frequencies[..., 0] ** 2)
    twice = fourierMultiplier(m1, fourierMultiplier(m2, f))
    once = fourierMultiplier(m1 * m2, f)
    assert np.max(np.abs(twice.coeffs - once.coeffs)) < 1e-15


def test_fourierMultiplier_callable(grid8: TorusGrid):
    f = _random(grid8, 3)
    out = fourierMultiplier(lambda xi: np.ones(xi.shape[:-1]), f)
    assert np.allclose(out.values.real, f.values)


def test_fourierMultiplier_shape_mismatch(grid8: TorusGrid):
    with pytest.raises(InvalidInput, match="shape"):
        fourierMultiplier(np.ones(3), GridFunction.zeros(grid8))


def test_evaluateTrig_grid_points(grid8: TorusGrid):
    f = _random(grid8, 4)
    vals = evaluateTrig(f, grid8.flatPoints)
    assert np.max(np.abs(vals.real - f.values)) < 1e-12 * np.max(np.abs(f.values)) * grid8.n


def test_evaluateTrig_offgrid_cos(grid8: TorusGrid):
    f = GridFunction.fromCallable(grid8, lambda x: np.cos(7 * x) + 0.5 * np.sin(2 * x))
    pts = np.array([0.123, 1.0, 2.5, 6.0])
    expected = np.cos(7 * pts) + 0.5 * np.sin(2 * pts)
    assert np.max(np.abs(evaluateTrig(f, pts) - expected)) < 1e-13


def test_evaluateTrig_bad_points(grid8: TorusGrid):
    with pytest.raises(InvalidInput, match="points"):
        evaluateTrig(GridFunction.zeros(grid8), np.zeros((3, 2)))


def test_evaluateTrig_zero_function(grid8: TorusGrid):
    assert not np.any(evaluateTrig(GridFunction.zeros(grid8), np.array([0.5])))


def test_refinedValues_contains_coarse_samples(grid8: TorusGrid):
    f = _random(grid8, 5)
    fine = refinedValues(f, 4)
    assert fine.shape == (grid8.n * 4,)
    assert np.max(np.abs(fine[::4] - f.values)) < 1e-12


def test_refinedValues_rejects_factor(grid8: TorusGrid):
    with pytest.raises(InvalidInput):
        refinedValues(GridFunction.zeros(grid8), 0)


def test_resample_shift(grid8: TorusGrid):
    f = GridFunction.fromCallable(grid8, lambda x: np.sin(3 * x))
    shifted = resample(f, grid8.flatPoints + 0.25)
    expected = np.sin(3 * (grid8.points[..., 0] + 0.25))
    assert shifted.real
    assert np.max(np.abs(shifted.values - expected)) < 1e-12
