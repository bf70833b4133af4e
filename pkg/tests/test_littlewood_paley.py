from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paracalc.generators import sobolevSeries, weierstrass
from paracalc.grid import GridFunction, TorusGrid
from paracalc.littlewood_paley import (
    DyadicPartition,
    bernsteinRatios,
    decompose,
    fitRegularity,
    lowPass,
    smoothStep,
    sobolevNorm,
    zygmundNorm,
)
from paracalc.models import DegenerateSpectrum, InvalidInput, NormKind


def test_smoothStep_endpoints():
    t = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    assert smoothStep(t) == pytest.approx([0.0, 0.0, 0.5, 1.0, 1.0])


def test_smoothStep_monotone():
    t = np.linspace(0, 1, 101)
    assert np.all(np.diff(smoothStep(t)) >= 0)


def test_dyadicPartition_rejects_radii(grid8: TorusGrid):
    with pytest.raises(InvalidInput):
        DyadicPartition(grid8, inner=1.5, outer=1.4)


def test_dyadicPartition_qmax(part10: DyadicPartition):
    assert part10.q_max == 8
    assert len(part10.blockTables) == 9


def test_partition_sums_to_one(part10: DyadicPartition):
    assert part10.partitionDefect() <= 1e-12


@settings(max_examples=20, deadline=None)
@given(
    inner=st.floats(1.01, 1.45),
    outer=st.floats(1.55, 1.99),
    J=st.integers(5, 9),
)
def test_partition_sums_to_one_any_radii(inner: float, outer: float, J: int):
    part = DyadicPartition(TorusGrid(J=J), inner=inner, outer=outer)
    assert part.partitionDefect() <= 1e-12


def test_blockProfile_plateau(part10: DyadicPartition):
    r = np.array([8.0])
    assert part10.blockProfile(3, r) == pytest.approx([1.0])
    assert part10.blockProfile(2, r) == pytest.approx([0.0])
    assert part10.blockProfile(4, r) == pytest.approx([0.0])
    assert part10.blockProfile(-1, r) == pytest.approx([0.0])


def test_bandTable_matches_block_sum(part10: DyadicPartition):
    expected = part10.blockTables[2] + part10.blockTables[3] + part10.blockTables[4]
    assert np.max(np.abs(part10.bandTable(2, 4) - expected)) < 1e-14
    assert not np.any(part10.bandTable(5, 4))


def test_decompose_reconstructs(grid10: TorusGrid, part10: DyadicPartition):
    rng = np.random.default_rng(0)
    f = GridFunction.fromValues(grid10, rng.standard_normal(grid10.shape))
    dec = decompose(f, part10)
    assert len(dec.blocks) == part10.q_max + 1
    back = dec.reconstruct()
    assert np.max(np.abs(back.values - f.values)) < 1e-12 * np.max(np.abs(f.values))


def test_decompose_single_mode(grid10: TorusGrid, part10: DyadicPartition):
    f = GridFunction.fromCallable(grid10, lambda x: np.cos(16 * x))
    dec = decompose(f, part10)
    sups = dec.sup_norms
    assert sups[4] == pytest.approx(1.0)
    assert max(s for q, s in enumerate(sups) if q != 4) < 1e-14


def test_lowPass_identity_at_top(grid10: TorusGrid, part10: DyadicPartition):
    f = GridFunction.fromCallable(grid10, lambda x: np.cos(300 * x))
    assert lowPass(f, part10.q_max, part10) is f
    assert lowPass(f, 3, part10).supNorm() < 1e-14


def test_lowPass_rejects_negative(grid10: TorusGrid, part10: DyadicPartition):
    with pytest.raises(InvalidInput):
        lowPass(GridFunction.zeros(grid10), -1, part10)


def test_zygmundNorm_weierstrass(grid10: TorusGrid, part10: DyadicPartition):
    u = weierstrass(2.0, 8, grid10, seed=3)
    assert zygmundNorm(u, 2.0, part10) == pytest.approx(1.0, rel=1e-10)


def test_sobolevNorm_series(grid10: TorusGrid, part10: DyadicPartition):
    u = sobolevSeries(1.5, grid10, seed=2, part=part10)
    assert sobolevNorm(u, 1.5, part10) == pytest.approx(math.sqrt(part10.q_max), rel=1e-10)


@pytest.mark.parametrize("sigma", [0.3, 0.5, 1.2, 2.5])
def test_fitRegularity_weierstrass(grid10: TorusGrid, part10: DyadicPartition, sigma: float):
    u = weierstrass(sigma, 8, grid10, seed=7)
    report = fitRegularity(decompose(u, part10), NormKind.ZYGMUND, 1, 7)
    assert not report.degenerate
    assert report.exponent == pytest.approx(sigma, abs=0.05)
    assert report.residual < 1e-6
    assert report.fit_range == (1, 7)


@pytest.mark.parametrize("s", [0.5, 1.5, 2.0])
def test_fitRegularity_sobolev(grid10: TorusGrid, part10: DyadicPartition, s: float):
    u = sobolevSeries(s, grid10, seed=11, part=part10)
    report = fitRegularity(decompose(u, part10), NormKind.SOBOLEV, 1, 7)
    assert report.exponent == pytest.approx(s, abs=0.05)


def test_fitRegularity_per_block_lognorms(grid10: TorusGrid, part10: DyadicPartition):
    u = weierstrass(1.0, 8, grid10)
    report = fitRegularity(decompose(u, part10), NormKind.ZYGMUND, 1, 4)
    assert report.per_block_lognorms == pytest.approx([-1.0, -2.0, -3.0, -4.0])


def test_fitRegularity_zero_is_degenerate(grid10: TorusGrid, part10: DyadicPartition):
    dec = decompose(GridFunction.zeros(grid10), part10)
    with pytest.raises(DegenerateSpectrum):
        fitRegularity(dec)


def test_fitRegularity_lenient_flags_degenerate(grid10: TorusGrid, part10: DyadicPartition):
    dec = decompose(GridFunction.zeros(grid10), part10)
    report = fitRegularity(dec, strict=False)
    assert report.degenerate
    assert math.isnan(report.exponent)


def test_fitRegularity_rejects_range(grid10: TorusGrid, part10: DyadicPartition):
    dec = decompose(weierstrass(1.0, 8, grid10), part10)
    with pytest.raises(InvalidInput, match="fit range"):
        fitRegularity(dec, NormKind.ZYGMUND, 5, 3)
    with pytest.raises(InvalidInput, match="fit range"):
        fitRegularity(dec, NormKind.ZYGMUND, 1, 20)


def test_fitRegularity_scale_drops_rounding_blocks(grid10: TorusGrid, part10: DyadicPartition):
    dec = decompose(weierstrass(1.0, 8, grid10) * 1e-16, part10)
    assert fitRegularity(dec, NormKind.ZYGMUND, 1, 7).exponent == pytest.approx(1.0, abs=0.05)
    report = fitRegularity(dec, NormKind.ZYGMUND, 1, 7, scale=1.0, strict=False)
    assert report.degenerate
    assert report.used == ()


def _gaussianDecay(grid: TorusGrid) -> GridFunction:
    """Block q is 2^{-q²/2} cos(2^q x): faster than any power."""
    return GridFunction.fromCallable(
        grid,
        lambda x: sum(2.0 ** (-(q * q) / 2) * np.cos(2**q * x) for q in range(1, 8)),
        real=True,
    )


def test_envelopeExcess(grid10: TorusGrid, part10: DyadicPartition):
    report = fitRegularity(decompose(_gaussianDecay(grid10), part10), NormKind.ZYGMUND, 3, 6)
    assert report.used == (3, 4, 5, 6)
    assert report.residual > 0.25
    assert report.envelopeExcess(3.0) == 0.0
    assert report.envelopeExcess(5.0) == pytest.approx(2.0, abs=1e-9)


def test_envelopeExcess_degenerate(grid10: TorusGrid, part10: DyadicPartition):
    dec = decompose(GridFunction.zeros(grid10), part10)
    assert fitRegularity(dec, strict=False).envelopeExcess(1.0) == math.inf


def test_bernsteinRatios_single_mode(grid8: TorusGrid, part8: DyadicPartition):
    f = GridFunction.fromCallable(grid8, lambda x: np.cos(8 * x))
    (ratio,) = bernsteinRatios(decompose(f, part8))
    assert ratio.q == 3
    assert ratio.derivative == pytest.approx(0.5, rel=1e-9)
    assert ratio.lattice == pytest.approx(2.0**-1.5, rel=1e-9)
    assert ratio.reverse == pytest.approx(8 / 9, rel=1e-9)


def test_bernsteinRatios_random_bounds(grid10: TorusGrid, part10: DyadicPartition):
    rng = np.random.default_rng(5)
    f = GridFunction.fromValues(grid10, rng.standard_normal(grid10.shape))
    for r in bernsteinRatios(decompose(f, part10)):
        if r.q >= part10.q_max:
            continue
        assert r.derivative <= 1 + 1e-9
        assert r.lattice <= math.sqrt(2)
        assert r.reverse <= 4
