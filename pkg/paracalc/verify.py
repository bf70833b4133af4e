"""Seeded acceptance suite.

Every check is deterministic given the configured base seed; the report holds
measured values and verdicts only, so repeated runs write identical files.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from paracalc.artifacts import writeJson
from paracalc.generators import sobolevSeries, torusDiffeo, weierstrass
from paracalc.grid import GridFunction, TorusGrid, dft, evaluateTrig, fourierMultiplier, idft
from paracalc.littlewood_paley import (
    DyadicPartition,
    RegularityReport,
    bernsteinRatios,
    decompose,
    fitRegularity,
    lowPass,
    sobolevNorm,
    zygmundNorm,
)
from paracalc.models import InvalidInput, NormKind, ParacalcConfig, getThreadCount
from paracalc.paracomposition import (
    TorusMap,
    alinhacDifference,
    conjugationDefect,
    functorialDefect,
    nStabilityDefect,
    paracomposeNew,
    paralinearize,
    selectN,
    selectNtilde,
)
from paracalc.paradiff import (
    bonyProductRemainder,
    directMatrix,
    matrixAdjoint,
    matrixOperator,
    paradiffApplyDirect,
    paradiffApplyLowrank,
    paraproduct,
    probeOperatorOrder,
    quantize,
)
from paracalc.symbols import (
    AbsPower,
    AdmissibleCutoff,
    ConstantFn,
    JapanesePower,
    LinearXi,
    LowRankSymbol,
    RankTerm,
    adjointSymbol,
    multiplierSymbol,
    productSymbol,
    sharpProduct,
)

logger = logging.getLogger(__name__)

REPORT_FILENAME = "verify_report.json"
SLACK = 0.3
FIT_RESIDUAL_MAX = 0.25
ENVELOPE_RISE = 0.25
NEGLIGIBLE = 1e-12

# replaced in tests to inject a corrupted partition
PARTITION_FACTORY: Callable[..., DyadicPartition] = DyadicPartition


@dataclass(frozen=True)
class CheckResult:
    name: str
    group: str
    passed: bool
    criterion: str
    measured: dict[str, float | int | bool | None] = field(default_factory=dict)
    elapsed: float = field(default=0.0, compare=False)


@dataclass(frozen=True)
class VerifyReport:
    checks: tuple[CheckResult, ...]
    seed: int
    cases: int

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]


class VerifyContext:
    """Shared grids, partitions and cut-offs for one suite run."""

    def __init__(
        self,
        config: ParacalcConfig,
        partition_factory: Callable[..., DyadicPartition] | None = None,
    ) -> None:
        self.config = config
        self.seed = config.verify.seed
        self.cases = config.verify.cases
        self.threads = getThreadCount(config)
        self._factory = partition_factory or PARTITION_FACTORY
        self._parts: dict[TorusGrid, DyadicPartition] = {}
        self._cutoffs: dict[TorusGrid, AdmissibleCutoff] = {}

    def grid(self, J: int, d: int = 1) -> TorusGrid:
        return TorusGrid(d=d, J=J)

    def part(self, grid: TorusGrid) -> DyadicPartition:
        if grid not in self._parts:
            radii = self.config.partition
            self._parts[grid] = self._factory(grid, inner=radii.inner, outer=radii.outer)
        return self._parts[grid]

    def psi(self, grid: TorusGrid) -> AdmissibleCutoff:
        if grid not in self._cutoffs:
            n0 = self.config.partition.cutoff_n0
            self._cutoffs[grid] = AdmissibleCutoff.build(self.part(grid), n0)
        return self._cutoffs[grid]

    def rng(self, offset: int = 0) -> np.random.Generator:
        return np.random.default_rng(self.seed + offset)


CheckFn = Callable[[VerifyContext], tuple[bool, str, dict]]


@dataclass(frozen=True)
class _Check:
    name: str
    group: str
    fn: CheckFn


_REGISTRY: dict[str, _Check] = {}


def check(name: str, group: str) -> Callable[[CheckFn], CheckFn]:
    def register(fn: CheckFn) -> CheckFn:
        _REGISTRY[name] = _Check(name, group, fn)
        return fn

    return register


def checkNames() -> list[str]:
    return list(_REGISTRY)


def groupNames() -> list[str]:
    return sorted({c.group for c in _REGISTRY.values()})


# ─── helpers ───────────────────────────────────────────────────────────────────


def _relErr(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(b))), 1e-300)
    return float(np.max(np.abs(a - b))) / scale


def _randomReal(grid: TorusGrid, rng: np.random.Generator) -> GridFunction:
    return GridFunction.fromValues(grid, rng.standard_normal(grid.shape), real=True)


def _smoothCoefficient(grid: TorusGrid, seed: int, rho: float) -> GridFunction:
    """1 + 0.3·W with W a lacunary series of regularity rho."""
    return weierstrass(rho, grid.J - 2, grid, seed) * 0.3 + 1.0


def _fit(
    ctx: VerifyContext,
    f: GridFunction,
    kind: NormKind,
    fit: tuple[int, int],
    scale: float = 0.0,
) -> RegularityReport:
    dec = decompose(f, ctx.part(f.grid))
    return fitRegularity(dec, kind, fit[0], fit[1], scale=scale, strict=False)


def _tail(part: DyadicPartition) -> tuple[int, int]:
    """Last three blocks below the top one, where remainders decay at their rate."""
    return part.q_max - 3, part.q_max - 1


def _atLeast(
    report: RegularityReport, f: GridFunction, threshold: float, scale: float
) -> tuple[bool, float | None]:
    """Decay at rate ≥ threshold, or a remainder that is negligible.

    The rate holds when the fitted exponent clears the threshold with an
    acceptable residual, or when the weighted blocks 2^{q·threshold}‖f_q‖ never
    rise above the first one.
    """
    if f.supNorm() <= NEGLIGIBLE * scale:
        return True, None
    if report.degenerate:
        return False, None
    fitted = report.exponent >= threshold and report.residual <= FIT_RESIDUAL_MAX
    ok = fitted or report.envelopeExcess(threshold) <= ENVELOPE_RISE
    return ok, report.exponent


def _finite(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None


# ─── exact identities ──────────────────────────────────────────────────────────


@check("dft_roundtrip", "identities")
def _dftRoundtrip(ctx: VerifyContext) -> tuple[bool, str, dict]:
    grid = ctx.grid(8)
    rng = ctx.rng(1)
    worst = 0.0
    for _ in range(ctx.cases):
        f = GridFunction.fromValues(
            grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        )
        worst = max(worst, _relErr(idft(dft(f)).values, f.values))
    return worst <= 1e-12, "max relative error <= 1e-12", {"max_error": worst}


@check("partition_sum", "identities")
def _partitionSum(ctx: VerifyContext) -> tuple[bool, str, dict]:
    worst = 0.0
    for J, d in ((8, 1), (10, 1), (6, 2)):
        worst = max(worst, ctx.part(ctx.grid(J, d)).partitionDefect())
    return worst <= 1e-12, "max |Σ φ_q − 1| <= 1e-12", {"max_defect": worst}


@check("paracompose_identity", "identities")
def _paracomposeIdentity(ctx: VerifyContext) -> tuple[bool, str, dict]:
    grid = ctx.grid(8)
    part = ctx.part(grid)
    ident = TorusMap.identity(grid)
    rng = ctx.rng(2)
    worst = 0.0
    for i in range(ctx.cases):
        u = _randomReal(grid, rng)
        out = paracomposeNew(u, ident, part, 2 + i % 2, threads=ctx.threads)
        worst = max(worst, _relErr(out.values, u.values))
    return worst <= 1e-12, "χ^⋆u = u at the identity to 1e-12", {"max_error": worst}


@check("paralinearize_residual", "identities")
def _paralinearizeResidual(ctx: VerifyContext) -> tuple[bool, str, dict]:
    grid = ctx.grid(8)
    part = ctx.part(grid)
    tol = ctx.config.paralinearize.residual_tolerance
    worst = 0.0
    for i in range(ctx.cases):
        u = weierstrass(2.5, 6, grid, ctx.seed + i)
        chi = torusDiffeo(0.5, 0.3, 5, grid, ctx.seed + 1000 + i)
        result = paralinearize(
            u, chi, part, nodes=ctx.config.paralinearize.quadrature_nodes, tolerance=None,
            threads=ctx.threads,
        )
        worst = max(worst, result.residual)
    return worst <= tol, f"residual <= {tol:g}", {"max_residual": worst}


# ─── regularity estimator ──────────────────────────────────────────────────────


@check("weierstrass_exponents", "estimator")
def _weierstrassExponents(ctx: VerifyContext) -> tuple[bool, str, dict]:
    grid = ctx.grid(10)
    measured: dict = {}
    ok = True
    for sigma in (0.3, 0.5, 1.2, 2.5):
        rep = _fit(ctx, weierstrass(sigma, 8, grid, ctx.seed), NormKind.ZYGMUND, (1, 7))
        measured[f"sigma_{sigma:g}"] = _finite(rep.exponent)
        ok &= not rep.degenerate and abs(rep.exponent - sigma) <= 0.05
    return ok, "|fitted − σ| <= 0.05 on q in [1, 7]", measured


@check("sobolev_exponents", "estimator")
def _sobolevExponents(ctx: VerifyContext) -> tuple[bool, str, dict]:
    grid = ctx.grid(10)
    measured: dict = {}
    ok = True
    for s in (0.5, 1.5, 2.0):
        u = sobolevSeries(s, grid, ctx.seed, ctx.part(grid))
        rep = _fit(ctx, u, NormKind.SOBOLEV, (1, 7))
        measured[f"s_{s:g}"] = _finite(rep.exponent)
        ok &= not rep.degenerate and abs(rep.exponent - s) <= 0.05
    return ok, "|fitted − s| <= 0.05 on q in [1, 7]", measured


@check("bernstein_inequalities", "bernstein")
def _bernstein(ctx: VerifyContext) -> tuple[bool, str, dict]:
    grid = ctx.grid(10)
    part = ctx.part(grid)
    rng = ctx.rng(3)
    deriv = lattice = reverse = 0.0
    for _ in range(ctx.cases):
        for r in bernsteinRatios(decompose(_randomReal(grid, rng), part)):
            if r.q >= part.q_max:
                continue
            deriv = max(deriv, r.derivative)
            lattice = max(lattice, r.lattice)
            reverse = max(reverse, r.reverse)
    ok = deriv <= 1 + 1e-9 and lattice <= math.sqrt(2) and reverse <= 4
    measured = {"derivative": deriv, "lattice": lattice, "reverse": reverse}
    return ok, "derivative <= 1, lattice <= √2, reverse <= 4", measured


# ─── boundedness ───────────────────────────────────────────────────────────────


def _ratioSpread(ratios: Sequence[float]) -> float:
    return max(ratios) / min(ratios) if min(ratios) > 0 else math.inf


def _foldedMap(grid: TorusGrid, amplitude: float, phase: float) -> TorusMap:
    """x + amplitude·sin(x + phase) in period units; folds over once amplitude > 1."""
    unit = grid.length / (2 * np.pi)
    t = grid.points[..., 0] / unit
    g = GridFunction.fromValues(grid, unit * amplitude * np.sin(t + phase), real=True)
    return TorusMap.fromDisplacement(grid, [g])


@check("zygmund_boundedness", "boundedness")
def _zygmundBoundedness(ctx: VerifyContext) -> tuple[bool, str, dict]:
    worst = 0.0
    folded = True
    rng = ctx.rng(7)
    for pair in range(5):
        amplitude, phase = 1.2 + 0.1 * pair, float(rng.uniform(0, 2 * np.pi))
        ratios = []
        for J in (8, 9, 10, 11):
            grid = ctx.grid(J)
            part = ctx.part(grid)
            u = weierstrass(1.5, 5, grid, ctx.seed + pair)
            chi = _foldedMap(grid, amplitude, phase)
            folded &= not chi.is_diffeo
            out = paracomposeNew(u, chi, part, threads=ctx.threads)
            ratios.append(zygmundNorm(out, 1.5, part) / zygmundNorm(u, 1.5, part))
        worst = max(worst, _ratioSpread(ratios))
    ok = folded and worst <= 2.0
    return ok, "norm ratio varies by <= 2x over J in 8..11 for folded maps", {
        "max_spread": worst,
        "folded": folded,
    }


@check("sobolev_boundedness", "boundedness")
def _sobolevBoundedness(ctx: VerifyContext) -> tuple[bool, str, dict]:
    worst = 0.0
    for pair in range(5):
        ratios = []
        for J in (8, 9, 10, 11):
            grid = ctx.grid(J)
            part = ctx.part(grid)
            u = weierstrass(2.0, 6, grid, ctx.seed + pair)
            chi = torusDiffeo(0.5, 0.3, 5, grid, ctx.seed + 200 + pair)
            out = paracomposeNew(u, chi, part, threads=ctx.threads)
            ratios.append(sobolevNorm(out, 1.5, part) / sobolevNorm(u, 1.5, part))
        worst = max(worst, _ratioSpread(ratios))
    return worst <= 2.0, "norm ratio varies by <= 2x over J in 8..11", {"max_spread": worst}


# ─── paralinearization ─────────────────────────────────────────────────────────

_RHO = 0.5
_SIGMA = 1.5


def _family(ctx: VerifyContext, J: int = 10) -> tuple[TorusGrid, GridFunction, TorusMap]:
    grid = ctx.grid(J)
    u = weierstrass(1 + _SIGMA, grid.J - 2, grid, ctx.seed)
    chi = torusDiffeo(_RHO, 0.3, grid.J - 3, grid, ctx.seed + 1)
    return grid, u, chi


def _sobolevFamily(ctx: VerifyContext, J: int = 10) -> tuple[GridFunction, TorusMap]:
    """H^{1+s} input kept two bands under the top so u∘χ does not alias."""
    grid = ctx.grid(J)
    part = ctx.part(grid)
    u = lowPass(sobolevSeries(1 + _SIGMA, grid, ctx.seed, part), part.q_max - 2, part)
    chi = torusDiffeo(_RHO, 0.3, grid.J - 3, grid, ctx.seed + 1)
    return u, chi


def _remainderChecks(
    ctx: VerifyContext,
    u: GridFunction,
    chi: TorusMap,
    kind: NormKind,
    thresholds: dict[str, float],
) -> tuple[bool, dict]:
    part = ctx.part(u.grid)
    result = paralinearize(
        u, chi, part, nodes=ctx.config.paralinearize.quadrature_nodes, norm_kind=kind,
        fit_range=_tail(part), tolerance=None, threads=ctx.threads,
    )
    comps = result.components()
    ok = True
    measured: dict = {"residual": result.residual, "N": result.N_used}
    for name, threshold in thresholds.items():
        passed, exponent = _atLeast(result.reports[name], comps[name], threshold, u.supNorm())
        measured[name] = exponent
        ok &= passed
    return ok, measured


@check("paralinearize_zygmund", "paralinearize")
def _paralinearizeZygmund(ctx: VerifyContext) -> tuple[bool, str, dict]:
    _, u, chi = _family(ctx)
    r0 = 1 + _RHO + min(1 + _RHO, _SIGMA) - SLACK
    r12 = 1 + _RHO + _SIGMA - SLACK
    ok, measured = _remainderChecks(
        ctx, u, chi, NormKind.ZYGMUND, {"R0": r0, "R1": r12, "R2": r12}
    )
    return ok, f"R0 >= {r0:g}, R1, R2 >= {r12:g}", measured


@check("paralinearize_sobolev", "paralinearize")
def _paralinearizeSobolev(ctx: VerifyContext) -> tuple[bool, str, dict]:
    u, chi = _sobolevFamily(ctx)
    s = _SIGMA
    r0 = 1 + _RHO + min(1 + _RHO, s - u.grid.d / 2) - SLACK
    r12 = 1 + _RHO + s - SLACK
    ok, measured = _remainderChecks(
        ctx, u, chi, NormKind.SOBOLEV, {"R0": r0, "R1": r12, "R2": r12}
    )
    return ok, f"R0 >= {r0:g}, R1, R2 >= {r12:g} (Sobolev)", measured


def _alinhacWindow(
    u: GridFunction, chi: TorusMap, part: DyadicPartition
) -> tuple[int, int]:
    """Blocks q with a block of u more than Ñ bands above them."""
    norms = decompose(u, part).sup_norms
    top = max(q for q, v in enumerate(norms) if v > NEGLIGIBLE * max(norms))
    hi = top - selectNtilde(chi, part) - 1
    return max(1, hi - 3), hi


def _alinhac(
    ctx: VerifyContext, u: GridFunction, chi: TorusMap, kind: NormKind
) -> tuple[bool, float, dict]:
    part = ctx.part(u.grid)
    diff = alinhacDifference(u, chi, part)
    threshold = 1 + _RHO + _SIGMA - SLACK
    report = _fit(ctx, diff, kind, _alinhacWindow(u, chi, part), u.supNorm())
    ok, exponent = _atLeast(report, diff, threshold, u.supNorm())
    return ok, threshold, {"exponent": exponent}


@check("alinhac_smoothing", "alinhac")
def _alinhacSmoothing(ctx: VerifyContext) -> tuple[bool, str, dict]:
    _, u, chi = _family(ctx)
    ok, threshold, measured = _alinhac(ctx, u, chi, NormKind.ZYGMUND)
    return ok, f"χ^*u − χ^⋆u exponent >= {threshold:g}", measured


@check("alinhac_smoothing_sobolev", "alinhac")
def _alinhacSmoothingSobolev(ctx: VerifyContext) -> tuple[bool, str, dict]:
    u, chi = _sobolevFamily(ctx)
    ok, threshold, measured = _alinhac(ctx, u, chi, NormKind.SOBOLEV)
    return ok, f"χ^*u − χ^⋆u Sobolev exponent >= {threshold:g}", measured


def _nStabilityFor(
    ctx: VerifyContext, u: GridFunction, chi: TorusMap, kind: NormKind
) -> tuple[bool, float, dict]:
    part = ctx.part(u.grid)
    n = selectN(chi, part)
    defect = nStabilityDefect(u, chi, part, n, n + 2)
    # u is built with exponent 1 + σ in either norm
    threshold = 1 + _SIGMA + _RHO - SLACK
    report = _fit(ctx, defect, kind, _tail(part), u.supNorm())
    ok, exponent = _atLeast(report, defect, threshold, u.supNorm())
    return ok, threshold, {"N": n, "exponent": exponent}


@check("n_stability", "alinhac")
def _nStability(ctx: VerifyContext) -> tuple[bool, str, dict]:
    _, u, chi = _family(ctx)
    ok, threshold, measured = _nStabilityFor(ctx, u, chi, NormKind.ZYGMUND)
    return ok, f"χ^⋆ with N vs N+2 exponent >= {threshold:g}", measured


@check("n_stability_sobolev", "alinhac")
def _nStabilitySobolev(ctx: VerifyContext) -> tuple[bool, str, dict]:
    u, chi = _sobolevFamily(ctx)
    ok, threshold, measured = _nStabilityFor(ctx, u, chi, NormKind.SOBOLEV)
    return ok, f"χ^⋆ with N vs N+2 Sobolev exponent >= {threshold:g}", measured


# ─── paradifferential calculus ─────────────────────────────────────────────────


@check("order_bound", "paradiff")
def _orderBound(ctx: VerifyContext) -> tuple[bool, str, dict]:
    grid = ctx.grid(9)
    part, psi = ctx.part(grid), ctx.psi(grid)
    b = _smoothCoefficient(grid, ctx.seed, 1.5)
    symbols = {
        "one": multiplierSymbol(grid, ConstantFn(1.0)),
        "ixi": multiplierSymbol(grid, LinearXi(0)),
        "abs^1": multiplierSymbol(grid, AbsPower(1.0)),
        "b_japanese^1": productSymbol(b, JapanesePower(1.0), 1.5),
    }
    ok = True
    measured: dict = {}
    for name, a in symbols.items():
        probe = probeOperatorOrder(
            lambda u, a=a: quantize(a, u, psi), part, ctx.config.quantization.probe_seed,
            threads=ctx.threads,
        )
        measured[name] = _finite(probe.fitted_order)
        ok &= not probe.degenerate and probe.fitted_order <= a.order + 0.2
    return ok, "probe order <= m + 0.2", measured


@check("composition_smoothing", "paradiff")
def _compositionSmoothing(ctx: VerifyContext) -> tuple[bool, str, dict]:
    grid = ctx.grid(9)
    part, psi = ctx.part(grid), ctx.psi(grid)
    rho = 1.5
    a = productSymbol(_smoothCoefficient(grid, ctx.seed, rho), JapanesePower(1.0), rho)
    b = productSymbol(_smoothCoefficient(grid, ctx.seed + 1, rho), LinearXi(0), rho)
    ab = sharpProduct(a, b, rho)

    def defect(u: GridFunction) -> GridFunction:
        return quantize(a, quantize(b, u, psi), psi) - quantize(ab, u, psi)

    probe = probeOperatorOrder(
        defect, part, ctx.config.quantization.probe_seed, threads=ctx.threads
    )
    bound = a.order + b.order - rho + SLACK
    ok = not probe.degenerate and probe.fitted_order <= bound
    return ok, f"order of T_aT_b − T_(a#b) <= {bound:g}", {"order": _finite(probe.fitted_order)}


@check("adjoint_smoothing", "paradiff")
def _adjointSmoothing(ctx: VerifyContext) -> tuple[bool, str, dict]:
    grid = ctx.grid(10)
    part, psi = ctx.part(grid), ctx.psi(grid)
    rho = 1.5
    a = productSymbol(_smoothCoefficient(grid, ctx.seed, rho), LinearXi(0), rho)
    a_t = adjointSymbol(a, rho)
    transpose = matrixOperator(matrixAdjoint(directMatrix(a, psi)), grid)

    def defect(u: GridFunction) -> GridFunction:
        return transpose(u) - quantize(a_t, u, psi)

    probe = probeOperatorOrder(
        defect, part, ctx.config.quantization.probe_seed, threads=ctx.threads
    )
    bound = a.order - rho + SLACK
    ok = not probe.degenerate and probe.fitted_order <= bound
    return ok, f"order of T_a^* − T_(a^t) <= {bound:g}", {"order": _finite(probe.fitted_order)}


@check("rough_paraproduct", "paradiff")
def _roughParaproduct(ctx: VerifyContext) -> tuple[bool, str, dict]:
    grid = ctx.grid(9)
    part = ctx.part(grid)
    m = 0.5
    a = sobolevSeries(grid.d / 2 - m, grid, ctx.seed, part)
    probe = probeOperatorOrder(
        lambda u: paraproduct(a, u, part), part, ctx.config.quantization.probe_seed,
        threads=ctx.threads,
    )
    bound = m + SLACK
    ok = not probe.degenerate and probe.fitted_order <= bound
    return ok, f"order of T_a for a in H^(d/2−m) <= {bound:g}", {
        "order": _finite(probe.fitted_order)
    }


@check("bony_remainder", "paradiff")
def _bonyRemainder(ctx: VerifyContext) -> tuple[bool, str, dict]:
    grid = ctx.grid(10)
    part = ctx.part(grid)
    a = sobolevSeries(2.0, grid, ctx.seed, part)
    b = sobolevSeries(2.0, grid, ctx.seed + 1, part)
    rem = bonyProductRemainder(a, b, part)
    threshold = 2 + 2 - grid.d / 2 - SLACK
    report = _fit(ctx, rem, NormKind.SOBOLEV, _tail(part), 1.0)
    ok, exponent = _atLeast(report, rem, threshold, 1.0)
    return ok, f"Sobolev exponent of ab − T_ab − T_ba >= {threshold:g}", {"exponent": exponent}


# ─── conjugation ───────────────────────────────────────────────────────────────


@check("conjugation_defect", "conjugation")
def _conjugation(ctx: VerifyContext) -> tuple[bool, str, dict]:
    grid = ctx.grid(9)
    part, psi = ctx.part(grid), ctx.psi(grid)
    a = productSymbol(_smoothCoefficient(grid, ctx.seed, 1.5), JapanesePower(1.0), 1.5)
    chi = torusDiffeo(_RHO, 0.3, grid.J - 3, grid, ctx.seed + 1)
    n = selectN(chi, part)
    probe = probeOperatorOrder(
        lambda u: conjugationDefect(a, u, chi, part, psi, n), part,
        ctx.config.quantization.probe_seed, threads=ctx.threads,
    )
    bound = a.order - min(a.rho, _RHO) + SLACK
    ok = not probe.degenerate and probe.fitted_order <= bound
    return ok, f"order of χ^⋆T_a − T_(a*)χ^⋆ <= {bound:g}", {
        "order": _finite(probe.fitted_order)
    }


# ─── oracles ───────────────────────────────────────────────────────────────────


@check("lowrank_direct", "oracle")
def _lowrankDirect(ctx: VerifyContext) -> tuple[bool, str, dict]:
    grid = ctx.grid(8)
    psi = ctx.psi(grid)
    rng = ctx.rng(4)
    multipliers = (ConstantFn(1.0), LinearXi(0), AbsPower(1.0), JapanesePower(1.0))
    worst = 0.0
    for i in range(20):
        rank = 1 + i % 3
        terms = tuple(
            RankTerm(
                sobolevSeries(2.0, grid, ctx.seed + 10 * i + r, ctx.part(grid)) + 1.0,
                multipliers[int(rng.integers(len(multipliers)))],
            )
            for r in range(rank)
        )
        a = LowRankSymbol(grid, terms, rho=2.0)
        u = _randomReal(grid, rng)
        worst = max(
            worst,
            _relErr(paradiffApplyLowrank(a, u, psi).values, paradiffApplyDirect(a, u, psi).values),
        )
    return worst <= 1e-10, "low-rank vs direct relative error <= 1e-10", {"max_error": worst}


@check("evaluate_trig_oracle", "oracle")
def _evaluateTrigOracle(ctx: VerifyContext) -> tuple[bool, str, dict]:
    grid = ctx.grid(10)
    f = weierstrass(0.5, 8, grid, ctx.seed)
    rng = ctx.rng(5)
    points = rng.uniform(0, grid.length, size=100)
    freqs = grid.flatFrequencies[:, 0]
    coeffs = f.coeffs.reshape(-1)
    oracle = np.array([np.sum(coeffs * np.exp(1j * p * freqs)) for p in points])
    err = float(np.max(np.abs(evaluateTrig(f, points) - oracle)))
    on_grid = _relErr(evaluateTrig(f, grid.flatPoints).real, f.values.reshape(-1))
    ok = err <= 1e-12 and on_grid <= 1e-12
    return ok, "direct-sum and on-grid agreement <= 1e-12", {
        "max_error": err,
        "grid_error": on_grid,
    }


@check("multiplier_composition", "oracle")
def _multiplierComposition(ctx: VerifyContext) -> tuple[bool, str, dict]:
    grid = ctx.grid(8)
    rng = ctx.rng(6)
    m1 = JapanesePower(1.0).values(grid.frequencies)
    m2 = LinearXi(0).values(grid.frequencies)
    worst = 0.0
    for _ in range(ctx.cases):
        f = _randomReal(grid, rng)
        twice = fourierMultiplier(m1, fourierMultiplier(m2, f)).coeffs
        once = fourierMultiplier(m1 * m2, f).coeffs
        worst = max(worst, _relErr(twice, once))
    return worst <= 1e-12, "m1(D)m2(D) = (m1 m2)(D) in coefficients", {"max_error": worst}


# ─── functorial property ───────────────────────────────────────────────────────


@check("functorial_property", "functorial")
def _functorial(ctx: VerifyContext) -> tuple[bool, str, dict]:
    grid = ctx.grid(10)
    part = ctx.part(grid)
    sigma, rho = 1.5, _RHO
    u = weierstrass(sigma, grid.J - 2, grid, ctx.seed)
    threshold = sigma + rho - SLACK
    ok = True
    measured: dict = {}
    for pair in range(3):
        chi = torusDiffeo(rho, 0.2, grid.J - 3, grid, ctx.seed + 300 + pair)
        chitilde = torusDiffeo(rho, 0.2, grid.J - 3, grid, ctx.seed + 400 + pair)
        defect = functorialDefect(u, chi, chitilde, part)
        report = _fit(ctx, defect, NormKind.ZYGMUND, _tail(part), u.supNorm())
        passed, exponent = _atLeast(report, defect, threshold, u.supNorm())
        measured[f"pair_{pair}"] = exponent
        ok &= passed
    return ok, f"defect exponent >= {threshold:g}", measured


# ─── runner ────────────────────────────────────────────────────────────────────


def _select(only: Sequence[str] | None) -> list[_Check]:
    if not only:
        return list(_REGISTRY.values())
    groups = set(groupNames())
    unknown = [o for o in only if o not in _REGISTRY and o not in groups]
    if unknown:
        raise InvalidInput(
            f"unknown check or group: {', '.join(unknown)} "
            f"(groups: {', '.join(groupNames())})"
        )
    wanted = set(only)
    return [c for c in _REGISTRY.values() if c.name in wanted or c.group in wanted]


def runVerify(
    config: ParacalcConfig,
    only: Sequence[str] | None = None,
    *,
    partition_factory: Callable[..., DyadicPartition] | None = None,
    progress: Callable[[CheckResult], None] | None = None,
) -> VerifyReport:
    ctx = VerifyContext(config, partition_factory)
    results = []
    for c in _select(only):
        start = time.perf_counter()
        try:
            passed, criterion, measured = c.fn(ctx)
        except Exception as e:  # a crashing check is a failing check
            logger.debug("check %s raised", c.name, exc_info=True)
            passed, criterion, measured = False, f"raised {type(e).__name__}: {e}", {}
        result = CheckResult(
            c.name, c.group, bool(passed), criterion, measured, time.perf_counter() - start
        )
        logger.debug("check %s: %s in %.2fs", c.name, result.passed, result.elapsed)
        results.append(result)
        if progress is not None:
            progress(result)
    return VerifyReport(tuple(results), ctx.seed, ctx.cases)


def verifyReportToDict(report: VerifyReport) -> dict:
    return {
        "passed": report.passed,
        "seed": report.seed,
        "cases": report.cases,
        "checks": [
            {
                "name": c.name,
                "group": c.group,
                "passed": c.passed,
                "criterion": c.criterion,
                "measured": {k: _jsonValue(v) for k, v in c.measured.items()},
            }
            for c in report.checks
        ],
    }


def _jsonValue(v: object) -> object:
    if isinstance(v, float):
        return v if math.isfinite(v) else None
    return v


def writeVerifyReport(out_dir: Path, report: VerifyReport) -> Path:
    return writeJson(out_dir / REPORT_FILENAME, verifyReportToDict(report))
