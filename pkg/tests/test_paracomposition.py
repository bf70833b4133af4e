from __future__ import annotations

import numpy as np
import pytest

from paracalc.generators import torusDiffeo, weierstrass
from paracalc.grid import GridFunction, TorusGrid
from paracalc.littlewood_paley import DyadicPartition
from paracalc.models import IdentityViolation, InvalidInput, NormKind, NotDiffeomorphism
from paracalc.paracomposition import (
    MIN_N,
    TorusMap,
    alinhacDifference,
    composeExact,
    conjugationDefect,
    functorialDefect,
    nStabilityDefect,
    paracomposeAlinhac,
    paracomposeNew,
    paralinearizationConjugationRemainder,
    paralinearize,
    phaseGradientBounds,
    selectN,
    selectNtilde,
    smoothedMap,
)
from paracalc.symbols import AdmissibleCutoff, LinearXi, multiplierSymbol


def _smooth(grid: TorusGrid) -> GridFunction:
    return GridFunction.fromCallable(
        grid, lambda x: np.cos(3 * x) + 0.5 * np.sin(7 * x) + 0.1 * np.cos(40 * x), real=True
    )


def _folded(grid: TorusGrid) -> TorusMap:
    g = GridFunction.fromCallable(grid, lambda x: 1.5 * np.sin(x), real=True)
    return TorusMap.fromDisplacement(grid, [g])


@pytest.fixture
def chi8(grid8: TorusGrid) -> TorusMap:
    return torusDiffeo(1.5, 0.3, grid8.J - 3, grid8, seed=1)


# ─── maps ──────────────────────────────────────────────────────────────────────


def test_identity_map(grid8: TorusGrid):
    chi = TorusMap.identity(grid8)
    assert chi.isIdentity
    assert chi.is_diffeo
    assert chi.min_jac == pytest.approx(1.0)
    assert np.allclose(chi.imagePoints, grid8.flatPoints)


def test_folded_map_is_not_diffeo(grid8: TorusGrid):
    chi = _folded(grid8)
    assert not chi.is_diffeo
    assert chi.min_jac == pytest.approx(-0.5)
    assert "map" in chi.describe()


def test_map_needs_real_displacement(grid8: TorusGrid):
    g = GridFunction.fromValues(grid8, np.full(grid8.shape, 1j))
    with pytest.raises(InvalidInput, match="must be real"):
        TorusMap.fromDisplacement(grid8, [g])


def test_map_component_count(grid8: TorusGrid):
    with pytest.raises(InvalidInput, match="displacement components"):
        TorusMap.fromDisplacement(grid8, [])


def test_compose_shifts(grid8: TorusGrid):
    chi = TorusMap.shift(grid8, 0.2).compose(TorusMap.shift(grid8, 0.5))
    assert np.allclose(chi.g[0].values, 0.7)


def test_compose_grid_mismatch(grid8: TorusGrid, grid10: TorusGrid):
    with pytest.raises(InvalidInput, match="different grids"):
        TorusMap.identity(grid8).compose(TorusMap.identity(grid10))


def test_apply_matches_imagePoints(chi8: TorusMap):
    assert np.allclose(chi8.apply(chi8.grid.flatPoints), chi8.imagePoints, atol=1e-10)


def test_composeExact_shift(grid8: TorusGrid):
    u = _smooth(grid8)
    moved = composeExact(u, TorusMap.shift(grid8, 0.4))
    x = grid8.points[..., 0] + 0.4
    expected = np.cos(3 * x) + 0.5 * np.sin(7 * x) + 0.1 * np.cos(40 * x)
    assert np.allclose(moved.values, expected, atol=1e-10)


def test_smoothedMap(chi8: TorusMap, part8: DyadicPartition):
    assert smoothedMap(chi8, part8.q_max, part8) is chi8
    assert smoothedMap(chi8, 0, part8).g[0].supNorm() < chi8.g[0].supNorm()
    with pytest.raises(InvalidInput):
        smoothedMap(chi8, -1, part8)


def test_phase_bounds_identity(grid8: TorusGrid):
    b = phaseGradientBounds(TorusMap.identity(grid8))
    assert (b.jac_min, b.jac_max, b.inverse_min, b.inverse_max) == pytest.approx((1, 1, 1, 1))


def test_phase_bounds_bracket_one(chi8: TorusMap):
    b = phaseGradientBounds(chi8)
    assert b.jac_min <= 1.0 <= b.jac_max
    assert b.inverse_min <= 1.0 <= b.inverse_max


def test_phase_bounds_need_diffeo(grid8: TorusGrid):
    with pytest.raises(NotDiffeomorphism):
        phaseGradientBounds(_folded(grid8))


def test_selectN(chi8: TorusMap, part8: DyadicPartition, grid8: TorusGrid):
    assert selectN(TorusMap.identity(grid8), part8) == MIN_N
    assert selectN(chi8, part8) >= MIN_N
    assert selectNtilde(chi8, part8) >= MIN_N


def test_selectN_grows_with_stretching(part8: DyadicPartition):
    grid = part8.grid
    g = GridFunction.fromCallable(grid, lambda x: 0.9 * np.sin(x), real=True)
    # |Dχ| reaches 1.9, so N = ceil(log2 1.9) + 1
    assert selectN(TorusMap.fromDisplacement(grid, [g]), part8) == 2
    g = GridFunction.fromCallable(grid, lambda x: 0.5 * np.sin(8 * x), real=True)
    assert selectN(TorusMap.fromDisplacement(grid, [g]), part8) == 4


def test_selectNtilde_needs_diffeo(grid8: TorusGrid, part8: DyadicPartition):
    with pytest.raises(NotDiffeomorphism):
        selectNtilde(_folded(grid8), part8)


# ─── paracomposition ───────────────────────────────────────────────────────────


def test_paracompose_identity_returns_u(
    grid8: TorusGrid, part8: DyadicPartition, rng: np.random.Generator
):
    u = GridFunction.fromValues(grid8, rng.standard_normal(grid8.shape), real=True)
    out = paracomposeNew(u, TorusMap.identity(grid8), part8, threads=2)
    assert out.real
    assert np.allclose(out.values, u.values, atol=1e-12)


def test_paracompose_shift_is_translation(grid8: TorusGrid, part8: DyadicPartition):
    u = _smooth(grid8)
    chi = TorusMap.shift(grid8, 0.4)
    assert np.allclose(
        paracomposeNew(u, chi, part8).values, composeExact(u, chi).values, atol=1e-10
    )


def test_paracompose_rejects_small_N(grid8: TorusGrid, part8: DyadicPartition):
    with pytest.raises(InvalidInput, match="N must be >= 2"):
        paracomposeNew(_smooth(grid8), TorusMap.identity(grid8), part8, N=1)


def test_alinhac_agrees_at_identity(grid8: TorusGrid, part8: DyadicPartition):
    u = weierstrass(0.7, grid8.J - 2, grid8, seed=2)
    chi = TorusMap.identity(grid8)
    assert np.allclose(paracomposeAlinhac(u, chi, part8).values, u.values, atol=1e-12)
    assert alinhacDifference(u, chi, part8).supNorm() < 1e-12


def test_alinhac_needs_diffeo(grid8: TorusGrid, part8: DyadicPartition):
    with pytest.raises(NotDiffeomorphism):
        paracomposeAlinhac(_smooth(grid8), _folded(grid8), part8)


def test_n_stability_same_N_is_zero(chi8: TorusMap, part8: DyadicPartition):
    u = weierstrass(0.7, chi8.grid.J - 2, chi8.grid, seed=2)
    assert nStabilityDefect(u, chi8, part8, 3, 3).isZero()


def test_functorial_defect_of_shifts(grid8: TorusGrid, part8: DyadicPartition):
    u = _smooth(grid8)
    defect = functorialDefect(u, TorusMap.shift(grid8, 0.3), TorusMap.shift(grid8, -0.8), part8)
    assert defect.supNorm() < 1e-10


# ─── paralinearization ─────────────────────────────────────────────────────────


def test_paralinearize_residual(chi8: TorusMap, part8: DyadicPartition):
    u = weierstrass(0.7, chi8.grid.J - 2, chi8.grid, seed=2)
    result = paralinearize(u, chi8, part8, threads=2)
    assert result.residual <= 1e-9
    assert result.N_used >= MIN_N
    assert result.quadrature_nodes == 8
    assert set(result.components()) == {
        "chi_star_u", "T_term", "R0", "R1", "R2", "bookkeeping"
    }
    assert set(result.reports) == set(result.components())
    total = sum(result.components().values(), GridFunction.zeros(chi8.grid))
    assert np.allclose(total.values, result.composition.values, atol=1e-9)


def test_paralinearize_quadrature_is_converged(chi8: TorusMap, part8: DyadicPartition):
    u = weierstrass(0.7, chi8.grid.J - 2, chi8.grid, seed=2)
    coarse = paralinearize(u, chi8, part8, nodes=8).components()
    fine = paralinearize(u, chi8, part8, nodes=16).components()
    scale = u.supNorm()
    for name, f in coarse.items():
        change = float(np.max(np.abs(f.values - fine[name].values)))
        assert change <= 1e-11 * scale, name


def test_paralinearize_identity_map(grid8: TorusGrid, part8: DyadicPartition):
    u = weierstrass(0.7, grid8.J - 2, grid8, seed=2)
    result = paralinearize(u, TorusMap.identity(grid8), part8, norm_kind=NormKind.SOBOLEV)
    assert result.T_term.isZero()
    assert np.allclose(result.chi_star_u.values, u.values, atol=1e-12)


def test_paralinearize_tolerance_trips(chi8: TorusMap, part8: DyadicPartition):
    u = weierstrass(0.7, chi8.grid.J - 2, chi8.grid, seed=2)
    with pytest.raises(IdentityViolation, match="exceeds tolerance"):
        paralinearize(u, chi8, part8, tolerance=1e-300)


def test_paralinearize_needs_real_input(chi8: TorusMap, part8: DyadicPartition):
    u = GridFunction.fromValues(chi8.grid, np.full(chi8.grid.shape, 1j))
    with pytest.raises(InvalidInput, match="real function"):
        paralinearize(u, chi8, part8)


def test_paralinearize_needs_nodes(chi8: TorusMap, part8: DyadicPartition):
    u = weierstrass(0.7, chi8.grid.J - 2, chi8.grid, seed=2)
    with pytest.raises(InvalidInput, match="at least one node"):
        paralinearize(u, chi8, part8, nodes=0)


# ─── conjugation ───────────────────────────────────────────────────────────────


def test_conjugation_defect_vanishes_for_shift(
    grid8: TorusGrid, part8: DyadicPartition, psi8: AdmissibleCutoff
):
    a = multiplierSymbol(grid8, LinearXi(0))
    u = _smooth(grid8)
    defect = conjugationDefect(a, u, TorusMap.shift(grid8, 0.4), part8, psi8)
    assert defect.supNorm() < 1e-9


def test_conjugation_remainder_circle_only(psi8: AdmissibleCutoff):
    grid = TorusGrid(d=2, J=4)
    part = DyadicPartition(grid)
    a = multiplierSymbol(grid, LinearXi(0))
    with pytest.raises(InvalidInput, match="d = 1"):
        paralinearizationConjugationRemainder(
            a, GridFunction.zeros(grid), TorusMap.identity(grid), part, psi8
        )


def test_conjugation_remainder_identity_map(
    grid8: TorusGrid, part8: DyadicPartition, psi8: AdmissibleCutoff
):
    a = multiplierSymbol(grid8, LinearXi(0))
    rem = paralinearizationConjugationRemainder(
        a, _smooth(grid8), TorusMap.identity(grid8), part8, psi8
    )
    assert rem.supNorm() < 1e-12
