from __future__ import annotations

import contextlib
import math
from collections.abc import Iterator
from pathlib import Path
from typing import Annotated

import typer

from paracalc.artifacts import (
    BLOCKS_FILENAME,
    DECAY_FILENAME,
    DECAY_SVG_FILENAME,
    loadGridFunction,
    loadTorusMap,
    packageVersion,
    reportToDict,
    saveGridFunction,
    saveReport,
    saveTorusMap,
    writeBlocksCsv,
    writeDecayCsv,
    writeDecaySvg,
    writeJson,
    writeManifest,
)
from paracalc.config import configExists, loadConfig, updateConfigField, writeInitConfig
from paracalc.display import (
    configureLogging,
    printBlockTable,
    printCheckLine,
    printConfigTable,
    printConfigToml,
    printError,
    printGrid,
    printJson,
    printMap,
    printParalinearizationSummary,
    printProbe,
    printReport,
    printSuccess,
    printVerifyTable,
    printWarning,
    printWritten,
)
from paracalc.generators import GeneratorSpec, generate
from paracalc.grid import GridFunction, TorusGrid
from paracalc.littlewood_paley import (
    DyadicPartition,
    decompose,
    fitRegularity,
    sobolevNorm,
    zygmundNorm,
)
from paracalc.models import (
    Command,
    GeneratorKind,
    GridConfig,
    GridMismatch,
    InvalidInput,
    NormKind,
    ParacalcConfig,
    ParacalcError,
    QuantizationPath,
    RunConfig,
    getThreadCount,
)
from paracalc.paracomposition import (
    TorusMap,
    conjugationDefect,
    paracomposeAlinhac,
    paracomposeNew,
    paralinearize,
    selectN,
    selectNtilde,
)
from paracalc.paradiff import (
    OrderProbeResult,
    bonyCompositionRemainder,
    bonyProductRemainder,
    getScalarFunction,
    paraproduct,
    probeOperatorOrder,
    quantize,
)
from paracalc.symbols import (
    AdmissibleCutoff,
    Symbol,
    functionSymbol,
    multiplierSymbol,
    parseMultiplier,
    productSymbol,
)
from paracalc.verify import runVerify, verifyReportToDict, writeVerifyReport


def _versionCallback(value: bool) -> None:
    if value:
        print(f"paracalc {packageVersion()}")
        raise typer.Exit()


app = typer.Typer(
    name="paracalc",
    help="Littlewood-Paley, paradifferential and paracomposition operators on the torus",
    no_args_is_help=True,
    pretty_exceptions_enable=False,
)


@app.callback(invoke_without_command=True)
def _main(
    version: Annotated[
        bool | None,
        typer.Option(
            "--version", callback=_versionCallback, is_eager=True, help="Show version"
        ),
    ] = None,
    verbose: Annotated[bool, typer.Option("--verbose", help="Debug logging")] = False,
) -> None:
    """Littlewood-Paley, paradifferential and paracomposition operators on the torus."""
    configureLogging(verbose)


config_app = typer.Typer(help="Manage paracalc configuration", no_args_is_help=True)
app.add_typer(config_app, name="config")


# ─── shared options ────────────────────────────────────────────────────────────

OutOpt = Annotated[Path, typer.Option("--out", help="Output directory")]
SeedOpt = Annotated[int | None, typer.Option("--seed", help="Random seed")]
GridJOpt = Annotated[int | None, typer.Option("--grid-j", help="Dyadic depth J (2^J points)")]
NormOpt = Annotated[NormKind | None, typer.Option("--norm", help="zygmund or sobolev")]
FitOpt = Annotated[str | None, typer.Option("--fit", help="Fit range a:b")]
NOpt = Annotated[int | None, typer.Option("--n", help="Band offset N (default: selected)")]
JsonOpt = Annotated[bool, typer.Option("--json", help="JSON output on stdout")]


@contextlib.contextmanager
def _handled() -> Iterator[None]:
    """Turn library errors into their exit codes."""
    try:
        yield
    except ParacalcError as e:
        printError(str(e))
        raise typer.Exit(e.exit_code) from e


def _loadCfg() -> ParacalcConfig:
    return loadConfig(Path.cwd())


def _parseFit(fit: str | None, config: ParacalcConfig) -> tuple[int, int]:
    if fit is None:
        return config.analysis.fit_min, config.analysis.fit_max
    lo, sep, hi = fit.partition(":")
    try:
        if not sep:
            raise ValueError(fit)
        return int(lo), int(hi)
    except ValueError as e:
        raise InvalidInput(f"--fit expects a:b with integers, got '{fit}'") from e


def _partition(config: ParacalcConfig, grid: TorusGrid) -> DyadicPartition:
    return DyadicPartition(grid, config.partition.inner, config.partition.outer)


def _checkGridJ(grid: TorusGrid, grid_j: int | None, source: str) -> None:
    if grid_j is not None and grid.J != grid_j:
        raise GridMismatch(f"{source} has J={grid.J}, but --grid-j {grid_j} was given")


def _loadFunction(path: Path, grid_j: int | None = None) -> GridFunction:
    f = loadGridFunction(path)
    _checkGridJ(f.grid, grid_j, str(path))
    return f


def _loadMap(path: Path, grid: TorusGrid) -> TorusMap:
    chi = loadTorusMap(path)
    if chi.grid != grid:
        raise GridMismatch(f"{path}: grid {chi.grid.describe()} does not match {grid.describe()}")
    return chi


def _parseParams(params: list[str]) -> dict[str, float]:
    out: dict[str, float] = {}
    for item in params:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise InvalidInput(f"parameter must look like name=value, got '{item}'")
        try:
            out[key.strip()] = float(raw)
        except ValueError as e:
            raise InvalidInput(f"parameter {key} must be a number, got '{raw}'") from e
    return out


def parseSymbolSpec(spec: str, grid: TorusGrid, rho: float) -> Symbol:
    """mult:<m> | func:<file> | prod:<file>:<m> with m in one, ixi, abs^p, japanese^p."""
    kind, sep, rest = spec.partition(":")
    if not sep or not rest:
        raise InvalidInput(f"symbol must be mult:, func: or prod:, got '{spec}'")
    match kind:
        case "mult":
            return multiplierSymbol(grid, parseMultiplier(rest, grid.d))
        case "func":
            return functionSymbol(loadGridFunction(Path(rest), grid), rho)
        case "prod":
            path, sep, m = rest.rpartition(":")
            if not sep or not path:
                raise InvalidInput(f"prod symbol must be prod:<file>:<m>, got '{spec}'")
            b = loadGridFunction(Path(path), grid)
            return productSymbol(b, parseMultiplier(m, grid.d), rho)
        case _:
            raise InvalidInput(f"unknown symbol kind '{kind}' (expected mult, func or prod)")


def _finish(out: Path, run: RunConfig, outputs: list[str]) -> None:
    writeManifest(out, run, outputs)
    printWritten(out, outputs)


# ─── gen ───────────────────────────────────────────────────────────────────────


@app.command("gen")
def gen_cmd(
    kind: Annotated[
        GeneratorKind, typer.Argument(help="weierstrass, sobolev_series, diffeo or bump")
    ],
    param: Annotated[
        list[str] | None, typer.Option("--param", help="Generator parameter name=value")
    ] = None,
    name: Annotated[str | None, typer.Option("--name", help="Output file stem")] = None,
    grid_j: GridJOpt = None,
    dim: Annotated[int | None, typer.Option("--dim", help="Torus dimension (1 or 2)")] = None,
    seed: SeedOpt = None,
    out: OutOpt = Path("."),
) -> None:
    """Write a seeded test function or torus map."""
    with _handled():
        config = _loadCfg()
        try:
            grid_cfg = config.grid.model_copy(
                update={k: v for k, v in (("J", grid_j), ("d", dim)) if v is not None}
            )
            grid_cfg = GridConfig.model_validate(grid_cfg.model_dump())
        except ValueError as e:
            raise InvalidInput(str(e)) from e
        grid = TorusGrid(d=grid_cfg.d, J=grid_cfg.J, length=grid_cfg.length)
        spec = GeneratorSpec(kind, _parseParams(param or []), seed or 0)
        result = generate(spec, grid)

        printGrid(grid)
        if isinstance(result, TorusMap):
            filename = f"{name or 'chi'}.json"
            saveTorusMap(out / filename, result)
            printMap(result)
        else:
            filename = f"{name or 'u'}.json"
            saveGridFunction(out / filename, result)
        run = RunConfig(
            command=Command.GEN,
            grid=grid_cfg,
            seed=spec.seed,
            options={"kind": str(kind), **spec.params},
            output=str(out),
        )
        _finish(out, run, [filename])


# ─── decompose / norm ──────────────────────────────────────────────────────────


@app.command("decompose")
def decompose_cmd(
    input_: Annotated[Path, typer.Argument(help="GridFunction JSON file")],
    norm: NormOpt = None,
    fit: FitOpt = None,
    grid_j: GridJOpt = None,
    json_output: JsonOpt = False,
    out: OutOpt = Path("."),
) -> None:
    """Littlewood-Paley blocks and the fitted regularity exponent."""
    with _handled():
        config = _loadCfg()
        u = _loadFunction(input_, grid_j)
        part = _partition(config, u.grid)
        kind = norm or config.analysis.norm_kind
        lo, hi = _parseFit(fit, config)
        dec = decompose(u, part)
        writeBlocksCsv(out / BLOCKS_FILENAME, dec)
        report = fitRegularity(dec, kind, lo, hi, floor_ratio=config.analysis.floor_ratio)
        saveReport(out / "report.json", report)

        if json_output:
            printJson(reportToDict(report))
        else:
            printBlockTable(dec)
            printReport(report, input_.stem)
        run = RunConfig(
            command=Command.DECOMPOSE,
            inputs=[str(input_)],
            norm_kind=kind,
            fit_range=(lo, hi),
            output=str(out),
        )
        _finish(out, run, [BLOCKS_FILENAME, "report.json"])


@app.command("norm")
def norm_cmd(
    input_: Annotated[Path, typer.Argument(help="GridFunction JSON file")],
    r: Annotated[float, typer.Option("--r", help="Regularity index of the norm")],
    norm: NormOpt = None,
    grid_j: GridJOpt = None,
    json_output: JsonOpt = False,
    out: OutOpt = Path("."),
) -> None:
    """Block-characterized Zygmund or Sobolev norm."""
    with _handled():
        config = _loadCfg()
        u = _loadFunction(input_, grid_j)
        part = _partition(config, u.grid)
        kind = norm or config.analysis.norm_kind
        value = zygmundNorm(u, r, part) if kind == NormKind.ZYGMUND else sobolevNorm(u, r, part)
        data = {"norm_kind": str(kind), "r": r, "value": value}
        writeJson(out / "norm.json", data)

        if json_output:
            printJson(data)
        else:
            symbol = "C" if kind == NormKind.ZYGMUND else "H"
            printSuccess(f"‖{input_.stem}‖ in {symbol}^{r:g} = {value:.6g}")
        run = RunConfig(
            command=Command.NORM,
            inputs=[str(input_)],
            norm_kind=kind,
            options={"r": r},
            output=str(out),
        )
        _finish(out, run, ["norm.json"])


# ─── paraproduct / paradiff ────────────────────────────────────────────────────


@app.command("paraproduct")
def paraproduct_cmd(
    a_file: Annotated[Path, typer.Argument(help="Coefficient a (GridFunction JSON)")],
    u_file: Annotated[
        Path | None, typer.Argument(help="Function u (GridFunction JSON); omit with --compose")
    ] = None,
    compose: Annotated[
        str | None,
        typer.Option("--compose", help="Remainder of F(a) for a builtin F (square, sin, ...)"),
    ] = None,
    norm: NormOpt = None,
    fit: FitOpt = None,
    grid_j: GridJOpt = None,
    out: OutOpt = Path("."),
) -> None:
    """T_a u with the product remainder, or the composition remainder of F(a)."""
    with _handled():
        config = _loadCfg()
        a = _loadFunction(a_file, grid_j)
        part = _partition(config, a.grid)
        kind = norm or config.analysis.norm_kind
        lo, hi = _parseFit(fit, config)
        outputs: list[str] = []
        inputs = [str(a_file)]

        if compose is not None:
            if u_file is not None:
                raise InvalidInput("--compose takes a single input file")
            remainder = bonyCompositionRemainder(getScalarFunction(compose), a, part)
        else:
            if u_file is None:
                raise InvalidInput("paraproduct needs a and u files (or --compose NAME)")
            u = _loadFunction(u_file, grid_j)
            if u.grid != a.grid:
                raise GridMismatch(f"{a_file} and {u_file} live on different grids")
            inputs.append(str(u_file))
            saveGridFunction(out / "paraproduct.json", paraproduct(a, u, part))
            outputs.append("paraproduct.json")
            remainder = bonyProductRemainder(a, u, part)

        saveGridFunction(out / "remainder.json", remainder)
        report = fitRegularity(decompose(remainder, part), kind, lo, hi, strict=False)
        saveReport(out / "remainder_report.json", report)
        outputs += ["remainder.json", "remainder_report.json"]
        printReport(report, "remainder")

        run = RunConfig(
            command=Command.PARAPRODUCT,
            inputs=inputs,
            norm_kind=kind,
            fit_range=(lo, hi),
            options={"compose": compose},
            output=str(out),
        )
        _finish(out, run, outputs)


@app.command("paradiff")
def paradiff_cmd(
    symbol: Annotated[str, typer.Argument(help="mult:<m>, func:<file> or prod:<file>:<m>")],
    u_file: Annotated[Path, typer.Argument(help="Function u (GridFunction JSON)")],
    path: Annotated[
        QuantizationPath, typer.Option("--path", help="auto, direct or lowrank")
    ] = QuantizationPath.AUTO,
    rho: Annotated[float, typer.Option("--rho", help="x-regularity of the symbol")] = 1.0,
    probe: Annotated[bool, typer.Option("--probe", help="Also measure the operator order")] = False,
    grid_j: GridJOpt = None,
    seed: SeedOpt = None,
    out: OutOpt = Path("."),
) -> None:
    """Apply the paradifferential operator T_a."""
    with _handled():
        config = _loadCfg()
        u = _loadFunction(u_file, grid_j)
        part = _partition(config, u.grid)
        psi = AdmissibleCutoff.build(part, config.partition.cutoff_n0)
        a = parseSymbolSpec(symbol, u.grid, rho)
        max_points = config.quantization.direct_max_points
        result = quantize(a, u, psi, path, max_points=max_points)
        saveGridFunction(out / "paradiff.json", result)
        outputs = ["paradiff.json"]

        summary: dict = {"symbol": a.describe(), "order": a.order, "rho": a.rho}
        if probe:
            probe_seed = config.quantization.probe_seed if seed is None else seed
            res = probeOperatorOrder(
                lambda v: quantize(a, v, psi, path, max_points=max_points),
                part,
                probe_seed,
                threads=getThreadCount(config),
            )
            printProbe(res, "T_a")
            summary["probe"] = _probeDict(res)
            writeJson(out / "summary.json", summary)
            outputs.append("summary.json")

        run = RunConfig(
            command=Command.PARADIFF,
            inputs=[str(u_file)],
            seed=seed,
            options={"symbol": symbol, "path": str(path), "rho": rho, "probe": probe},
            output=str(out),
        )
        _finish(out, run, outputs)


def _probeDict(res: OrderProbeResult) -> dict:
    return {
        "fitted_order": None if res.degenerate else res.fitted_order,
        "fit_residual": None if res.degenerate else res.fit_residual,
        "degenerate": res.degenerate,
        "seed": res.seed,
        "per_band_gains": [
            {"band": j, "log2_gain": g if math.isfinite(g) else None}
            for j, g in res.per_band_gains
        ],
    }


# ─── paracompose / paralinearize / conjugate ───────────────────────────────────


@app.command("paracompose")
def paracompose_cmd(
    u_file: Annotated[Path, typer.Argument(help="Function u (GridFunction JSON)")],
    map_file: Annotated[Path, typer.Argument(help="Map χ (TorusMap JSON)")],
    alinhac: Annotated[
        bool, typer.Option("--alinhac", help="Alinhac's χ^* instead of χ^⋆")
    ] = False,
    n: NOpt = None,
    grid_j: GridJOpt = None,
    out: OutOpt = Path("."),
) -> None:
    """Paracomposition χ^⋆u (or χ^*u)."""
    with _handled():
        config = _loadCfg()
        u = _loadFunction(u_file, grid_j)
        chi = _loadMap(map_file, u.grid)
        part = _partition(config, u.grid)
        threads = getThreadCount(config)
        printMap(chi)
        if alinhac:
            n_used = selectNtilde(chi, part) if n is None else n
            result = paracomposeAlinhac(u, chi, part, n_used, threads=threads)
        else:
            n_used = selectN(chi, part) if n is None else n
            result = paracomposeNew(u, chi, part, n_used, threads=threads)
        saveGridFunction(out / "paracompose.json", result)
        printSuccess(f"{'χ^*u' if alinhac else 'χ^⋆u'} with N = {n_used}")

        run = RunConfig(
            command=Command.PARACOMPOSE,
            inputs=[str(u_file), str(map_file)],
            n_override=n,
            options={"alinhac": alinhac, "n_used": n_used},
            output=str(out),
        )
        _finish(out, run, ["paracompose.json"])


@app.command("paralinearize")
def paralinearize_cmd(
    u_file: Annotated[Path, typer.Argument(help="Function u (GridFunction JSON)")],
    map_file: Annotated[Path, typer.Argument(help="Map χ (TorusMap JSON)")],
    n: NOpt = None,
    norm: NormOpt = None,
    fit: FitOpt = None,
    emit_svg: Annotated[bool, typer.Option("--emit-svg", help="Also write decay.svg")] = False,
    grid_j: GridJOpt = None,
    json_output: JsonOpt = False,
    out: OutOpt = Path("."),
) -> None:
    """Split u∘χ into χ^⋆u, the paraproduct term and the remainders R0, R1, R2."""
    with _handled():
        config = _loadCfg()
        u = _loadFunction(u_file, grid_j)
        chi = _loadMap(map_file, u.grid)
        part = _partition(config, u.grid)
        kind = norm or config.analysis.norm_kind
        fit_range = _parseFit(fit, config)
        result = paralinearize(
            u,
            chi,
            part,
            n,
            nodes=config.paralinearize.quadrature_nodes,
            norm_kind=kind,
            fit_range=fit_range,
            tolerance=config.paralinearize.residual_tolerance,
            threads=getThreadCount(config),
        )

        outputs = []
        for name, f in result.components().items():
            saveGridFunction(out / f"{name}.json", f)
            outputs.append(f"{name}.json")
        summary = {
            "N": result.N_used,
            "quadrature_nodes": result.quadrature_nodes,
            "residual": result.residual,
            "reports": {name: reportToDict(r) for name, r in result.reports.items()},
        }
        writeJson(out / "summary.json", summary)
        decs = {name: decompose(f, part) for name, f in result.components().items()}
        writeDecayCsv(out / DECAY_FILENAME, decs)
        outputs += ["summary.json", DECAY_FILENAME]
        if emit_svg:
            writeDecaySvg(out / DECAY_SVG_FILENAME, decs)
            outputs.append(DECAY_SVG_FILENAME)

        if json_output:
            printJson(summary)
        else:
            printParalinearizationSummary(result)
        run = RunConfig(
            command=Command.PARALINEARIZE,
            inputs=[str(u_file), str(map_file)],
            n_override=n,
            norm_kind=kind,
            fit_range=fit_range,
            options={"emit_svg": emit_svg},
            output=str(out),
        )
        _finish(out, run, outputs)


@app.command("conjugate")
def conjugate_cmd(
    symbol: Annotated[str, typer.Argument(help="mult:<m>, func:<file> or prod:<file>:<m>")],
    map_file: Annotated[Path, typer.Argument(help="Map χ (TorusMap JSON)")],
    u_file: Annotated[
        Path | None, typer.Option("--input", help="Also write the defect applied to this u")
    ] = None,
    rho: Annotated[float, typer.Option("--rho", help="x-regularity of the symbol")] = 1.0,
    n: NOpt = None,
    seed: SeedOpt = None,
    out: OutOpt = Path("."),
) -> None:
    """Order of the conjugation defect χ^⋆T_a − T_(a*)χ^⋆."""
    with _handled():
        config = _loadCfg()
        chi = loadTorusMap(map_file)
        grid = chi.grid
        part = _partition(config, grid)
        psi = AdmissibleCutoff.build(part, config.partition.cutoff_n0)
        a = parseSymbolSpec(symbol, grid, rho)
        n_used = selectN(chi, part) if n is None else n
        printMap(chi)

        def defect(v: GridFunction) -> GridFunction:
            return conjugationDefect(a, v, chi, part, psi, n_used)

        probe_seed = config.quantization.probe_seed if seed is None else seed
        res = probeOperatorOrder(defect, part, probe_seed, threads=getThreadCount(config))
        printProbe(res, "χ^⋆T_a − T_(a*)χ^⋆")
        if not res.degenerate and res.fitted_order > a.order:
            printWarning(f"measured order exceeds the symbol order m = {a.order:g}")
        summary = {"symbol": a.describe(), "N": n_used, "probe": _probeDict(res)}
        writeJson(out / "summary.json", summary)
        outputs = ["summary.json"]
        inputs = [str(map_file)]
        if u_file is not None:
            u = loadGridFunction(u_file, grid)
            saveGridFunction(out / "defect.json", defect(u))
            outputs.append("defect.json")
            inputs.append(str(u_file))

        run = RunConfig(
            command=Command.CONJUGATE,
            inputs=inputs,
            n_override=n,
            seed=seed,
            options={"symbol": symbol, "rho": rho},
            output=str(out),
        )
        _finish(out, run, outputs)


# ─── verify ────────────────────────────────────────────────────────────────────


@app.command("verify")
def verify_cmd(
    only: Annotated[
        list[str] | None, typer.Option("--only", help="Run only these checks or groups")
    ] = None,
    cases: Annotated[int | None, typer.Option("--cases", help="Cases per identity check")] = None,
    seed: SeedOpt = None,
    json_output: JsonOpt = False,
    out: OutOpt = Path("."),
) -> None:
    """Run the seeded acceptance suite; exit 1 if any check fails."""
    with _handled():
        config = _loadCfg()
        overrides = {k: v for k, v in (("seed", seed), ("cases", cases)) if v is not None}
        if overrides:
            config = config.model_copy(
                update={"verify": config.verify.model_copy(update=overrides)}
            )
        report = runVerify(config, only, progress=None if json_output else printCheckLine)
        writeVerifyReport(out, report)
        if json_output:
            printJson(verifyReportToDict(report))
        else:
            printVerifyTable(report)
        run = RunConfig(
            command=Command.VERIFY,
            seed=config.verify.seed,
            options={"only": ",".join(only or []), "cases": config.verify.cases},
            output=str(out),
        )
        _finish(out, run, ["verify_report.json"])
    if not report.passed:
        raise typer.Exit(1)


# ─── config ────────────────────────────────────────────────────────────────────


@config_app.command("show")
def config_show_cmd(
    toml: Annotated[bool, typer.Option("--toml", help="Print as TOML")] = False,
) -> None:
    """Show resolved configuration."""
    with _handled():
        config = _loadCfg()
    if toml:
        printConfigToml(config)
    else:
        printConfigTable(config)


@config_app.command("set")
def config_set_cmd(
    key: Annotated[str, typer.Argument(help="Config key, e.g. grid.J")],
    value: Annotated[str, typer.Argument(help="Config value")],
) -> None:
    """Set a value in .paracalc.toml."""
    with _handled():
        updateConfigField(Path.cwd(), key, value)
    printSuccess(f"Set {key} = {value}")


@config_app.command("init")
def config_init_cmd(
    force: Annotated[bool, typer.Option("--force", help="Overwrite an existing file")] = False,
) -> None:
    """Write .paracalc.toml with commented-out defaults."""
    project_dir = Path.cwd()
    if configExists(project_dir) and not force:
        printError(".paracalc.toml already exists (use --force to overwrite)")
        raise typer.Exit(2)
    path = writeInitConfig(project_dir)
    printSuccess(f"Wrote {path.name}")
