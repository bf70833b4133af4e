from __future__ import annotations

import math

import numpy as np
import pytest

from paracalc import generators
from paracalc.generators import (
    GeneratorSpec,
    bump,
    generate,
    sobolevSeries,
    torusDiffeo,
    weierstrass,
)
from paracalc.grid import GridFunction, TorusGrid
from paracalc.littlewood_paley import DyadicPartition, decompose, sobolevNorm
from paracalc.models import BandOverflow, GeneratorKind, InvalidInput, NotContractive
from paracalc.paracomposition import TorusMap


# ─── weierstrass ───────────────────────────────────────────────────────────────


@pytest.mark.parametrize("sigma", [0.3, 0.7, 1.5])
def test_weierstrass_block_sup_norms(grid10: TorusGrid, part10: DyadicPartition, sigma: float):
    u = weierstrass(sigma, grid10.J - 2, grid10, seed=5)
    dec = decompose(u, part10)
    for q in range(1, part10.q_max + 1):
        assert dec.sup_norms[q] == pytest.approx(2.0 ** (-q * sigma), rel=1e-9)
    assert dec.sup_norms[0] == pytest.approx(0.0, abs=1e-12)


def test_weierstrass_is_real_and_deterministic(grid8: TorusGrid):
    a = weierstrass(0.5, 4, grid8, seed=9)
    b = weierstrass(0.5, 4, grid8, seed=9)
    assert a.real
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, weierstrass(0.5, 4, grid8, seed=10).values)


def test_weierstrass_2d_adds_both_axes():
    grid = TorusGrid(d=2, J=5)
    part = DyadicPartition(grid)
    dec = decompose(weierstrass(1.0, 3, grid, seed=0), part)
    # the x and y modes of block q peak independently
    for q in range(1, 4):
        assert dec.sup_norms[q] == pytest.approx(2.0 ** (1 - q), rel=1e-9)


def test_weierstrass_rejects(grid8: TorusGrid):
    with pytest.raises(InvalidInput, match="sigma"):
        weierstrass(0.0, 3, grid8)
    with pytest.raises(BandOverflow):
        weierstrass(0.5, grid8.J - 1, grid8)
    with pytest.raises(BandOverflow):
        weierstrass(0.5, 0, grid8)


# ─── sobolev series ────────────────────────────────────────────────────────────


def test_sobolev_series_block_l2_norms(grid10: TorusGrid, part10: DyadicPartition):
    s = 1.25
    u = sobolevSeries(s, grid10, seed=3, part=part10)
    dec = decompose(u, part10)
    for q in range(1, part10.q_max + 1):
        assert dec.l2_norms[q] == pytest.approx(2.0 ** (-q * s), rel=1e-9)
    assert u.real


def test_sobolev_series_norm(grid10: TorusGrid, part10: DyadicPartition):
    s = 0.5
    u = sobolevSeries(s, grid10, seed=3, part=part10)
    assert sobolevNorm(u, s, part10) == pytest.approx(math.sqrt(part10.q_max), rel=1e-9)


def test_sobolev_series_seed_changes_phases_only(grid8: TorusGrid, part8: DyadicPartition):
    a = sobolevSeries(1.0, grid8, seed=1, part=part8)
    b = sobolevSeries(1.0, grid8, seed=2, part=part8)
    assert not np.allclose(a.values, b.values)
    assert np.allclose(np.abs(a.coeffs), np.abs(b.coeffs))


# ─── diffeomorphisms ───────────────────────────────────────────────────────────


def test_torus_diffeo(grid8: TorusGrid):
    chi = torusDiffeo(1.0, 0.3, grid8.J - 3, grid8, seed=4)
    assert isinstance(chi, TorusMap)
    assert chi.is_diffeo
    assert chi.min_jac > 0.5
    assert chi.g[0].real


def test_torus_diffeo_zero_eps_is_identity(grid8: TorusGrid):
    assert torusDiffeo(1.0, 0.0, 3, grid8).isIdentity


def test_torus_diffeo_rejects(grid8: TorusGrid):
    with pytest.raises(InvalidInput, match="eps"):
        torusDiffeo(1.0, 0.5, 3, grid8)
    with pytest.raises(InvalidInput, match="rho"):
        torusDiffeo(-0.1, 0.3, 3, grid8)
    with pytest.raises(BandOverflow):
        torusDiffeo(1.0, 0.3, grid8.J - 2, grid8)


def test_torus_diffeo_not_contractive(grid8: TorusGrid, monkeypatch: pytest.MonkeyPatch):
    monkeypatch.setattr(generators, "MAX_SLOPE", 0.1)
    with pytest.raises(NotContractive):
        torusDiffeo(0.0, 0.3, 1, grid8, seed=0)


# ─── bump ──────────────────────────────────────────────────────────────────────


def test_bump_peak_and_support(grid8: TorusGrid):
    u = bump(grid8, width=1.0, amplitude=2.0)
    assert u.supNorm() == pytest.approx(2.0)
    x = grid8.points[..., 0]
    outside = np.abs(x - math.pi) >= 1.0
    assert np.all(u.values[outside] == 0.0)


def test_bump_rejects_width(grid8: TorusGrid):
    with pytest.raises(InvalidInput, match="width"):
        bump(grid8, width=0.0)
    with pytest.raises(InvalidInput, match="width"):
        bump(grid8, width=4.0)


# ─── specs ─────────────────────────────────────────────────────────────────────


def test_generate_defaults_K(grid8: TorusGrid):
    spec = GeneratorSpec(GeneratorKind.WEIERSTRASS, {"sigma": 0.5}, seed=1)
    assert spec.resolved(grid8)["K"] == grid8.J - 2
    u = generate(spec, grid8)
    assert isinstance(u, GridFunction)
    assert np.array_equal(u.values, weierstrass(0.5, grid8.J - 2, grid8, 1).values)


def test_generate_diffeo_defaults(grid8: TorusGrid):
    spec = GeneratorSpec(GeneratorKind.DIFFEO, {"rho": 1.0})
    values = spec.resolved(grid8)
    assert values["eps"] == 0.3
    assert values["K"] == grid8.J - 3
    assert isinstance(generate(spec, grid8), TorusMap)


def test_generate_bump_center_optional(grid8: TorusGrid):
    u = generate(GeneratorSpec(GeneratorKind.BUMP), grid8)
    assert isinstance(u, GridFunction)
    assert u.supNorm() == pytest.approx(1.0)


@pytest.mark.parametrize(
    ("spec", "match"),
    [
        (GeneratorSpec(GeneratorKind.WEIERSTRASS), "needs parameter"),
        (GeneratorSpec(GeneratorKind.SOBOLEV_SERIES, {"s": 1.0, "t": 2.0}), "unknown"),
        (GeneratorSpec(GeneratorKind.WEIERSTRASS, {"sigma": 1.0, "K": 2.5}), "integer"),
    ],
)
def test_generate_rejects(grid8: TorusGrid, spec: GeneratorSpec, match: str):
    with pytest.raises(InvalidInput, match=match):
        generate(spec, grid8)
