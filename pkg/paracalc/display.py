from __future__ import annotations

import json
import logging
import math
from collections.abc import Sequence
from datetime import timedelta
from enum import StrEnum
from pathlib import Path

import humanize
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table
from rich.tree import Tree

from paracalc.config import _NESTED_SECTIONS, renderConfig
from paracalc.grid import TorusGrid
from paracalc.littlewood_paley import BlockDecomposition, RegularityReport
from paracalc.models import ParacalcConfig
from paracalc.paracomposition import ParalinearizationResult, TorusMap
from paracalc.paradiff import OrderProbeResult
from paracalc.verify import CheckResult, VerifyReport

_console = Console(stderr=True)


def configureLogging(verbose: bool = False) -> None:
    """Route package logs to stderr through rich; DEBUG with --verbose, else WARNING."""
    root = logging.getLogger("paracalc")
    for handler in list(root.handlers):
        if isinstance(handler, RichHandler):
            root.removeHandler(handler)
    handler = RichHandler(console=_console, show_path=False, markup=False)
    handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)


def formatFloat(x: float, digits: int = 4) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "∞" if x > 0 else "-∞"
    return f"{x:.{digits}g}"


def formatDuration(seconds: float) -> str:
    if seconds < 1:
        return f"{seconds * 1000:.0f}ms"
    delta = timedelta(seconds=seconds)
    return humanize.precisedelta(delta, minimum_unit="seconds", format="%0.1f")


def printGrid(grid: TorusGrid) -> None:
    _console.print(
        f"[dim]grid d={grid.d} J={grid.J} · {humanize.intcomma(grid.size)} points[/dim]"
    )


def printBlockTable(dec: BlockDecomposition) -> None:
    table = Table(show_header=True, header_style="bold")
    table.add_column("q", justify="right")
    table.add_column("sup", justify="right")
    table.add_column("L²", justify="right")
    table.add_column("log2 sup", justify="right")
    for b in dec.norms:
        log_sup = math.log2(b.sup) if b.sup > 0 else -math.inf
        table.add_row(str(b.q), formatFloat(b.sup), formatFloat(b.l2), formatFloat(log_sup, 3))
    _console.print(table)


def printReport(report: RegularityReport, label: str = "u") -> None:
    lo, hi = report.fit_range
    if report.degenerate:
        printWarning(f"{label}: degenerate spectrum on q in [{lo}, {hi}]")
        return
    _console.print(
        f"  {label}: [bold]{report.norm_kind}[/bold] exponent "
        f"[cyan]{report.exponent:.4f}[/cyan] on q in [{lo}, {hi}]"
        f"  [dim]residual {formatFloat(report.residual, 3)}[/dim]"
    )


def printParalinearizationSummary(result: ParalinearizationResult) -> None:
    table = Table(show_header=True, header_style="bold")
    table.add_column("component")
    table.add_column("sup", justify="right")
    table.add_column("exponent", justify="right")
    table.add_column("fit residual", justify="right")
    for name, f in result.components().items():
        report = result.reports.get(name)
        if report is None or report.degenerate:
            exponent, residual = "[dim]—[/dim]", ""
        else:
            exponent = formatFloat(report.exponent)
            residual = formatFloat(report.residual, 3)
        table.add_row(name, formatFloat(f.supNorm()), exponent, residual)
    _console.print(table)
    _console.print(
        f"  N = {result.N_used}, {result.quadrature_nodes} quadrature nodes, "
        f"residual [cyan]{result.residual:.3e}[/cyan]"
    )


def printMap(chi: TorusMap) -> None:
    tag = "[green]diffeomorphism[/green]" if chi.is_diffeo else "[yellow]not invertible[/yellow]"
    _console.print(f"  map: min det Dχ = {chi.min_jac:.4f} ({tag})")


def printProbe(probe: OrderProbeResult, label: str = "operator") -> None:
    if probe.degenerate:
        printWarning(f"{label}: too few bands with a measurable gain to fit an order")
        return
    _console.print(
        f"  {label}: order [cyan]{probe.fitted_order:.4f}[/cyan]"
        f"  [dim]fit residual {formatFloat(probe.fit_residual, 3)}, seed {probe.seed}[/dim]"
    )


def printCheckLine(result: CheckResult) -> None:
    icon = "[green]✓[/green]" if result.passed else "[red]✗[/red]"
    _console.print(
        f"  {icon} {result.name:<26} [dim]{result.group:<14} "
        f"{formatDuration(result.elapsed)}[/dim]"
    )


def printVerifyTable(report: VerifyReport) -> None:
    table = Table(show_header=True, header_style="bold")
    table.add_column("check")
    table.add_column("group")
    table.add_column("result")
    table.add_column("criterion")
    table.add_column("measured")
    for c in report.checks:
        verdict = "[green]pass[/green]" if c.passed else "[red]FAIL[/red]"
        measured = ", ".join(
            f"{k}={formatFloat(v) if isinstance(v, float) else v}" for k, v in c.measured.items()
        )
        table.add_row(c.name, c.group, verdict, c.criterion, measured)
    _console.print(table)
    total = sum(c.elapsed for c in report.checks)
    failed = len(report.failures)
    summary = f"{len(report.checks) - failed}/{len(report.checks)} checks passed"
    summary += f" in {formatDuration(total)}"
    if failed:
        printError(summary)
    else:
        printSuccess(summary)


def printWritten(out_dir: Path, names: Sequence[str]) -> None:
    _console.print(f"  [dim]wrote {', '.join(sorted(names))} to {out_dir}[/dim]")


def printJson(data: object) -> None:
    print(json.dumps(data, indent=2))


def printConfigTable(config: ParacalcConfig) -> None:
    """Rich tree view with field descriptions from schema."""
    tree = Tree("[bold]Paracalc Config[/bold]")

    for name, field_info in ParacalcConfig.model_fields.items():
        if name in _NESTED_SECTIONS:
            continue
        val = getattr(config, name)
        label = f"{name}: [cyan]{'auto' if val is None else val}[/cyan]"
        if field_info.description:
            label += f"  [dim]# {field_info.description}[/dim]"
        tree.add(label)

    for section_name, model_cls in _NESTED_SECTIONS.items():
        sub_config = getattr(config, section_name)
        sub_tree = tree.add(f"[bold]{section_name}[/bold]")
        for name, field_info in model_cls.model_fields.items():
            val = getattr(sub_config, name)
            val_str = val.value if isinstance(val, StrEnum) else str(val)
            label = f"{name}: [cyan]{val_str}[/cyan]"
            if field_info.description:
                label += f"  [dim]# {field_info.description}[/dim]"
            sub_tree.add(label)

    _console.print(tree)


def printConfigToml(config: ParacalcConfig) -> None:
    """Print config as commented TOML to stdout."""
    print(renderConfig(config), end="")


def printError(msg: str) -> None:
    _console.print(f"[bold red]✗[/bold red] {msg}", style="red")


def printSuccess(msg: str) -> None:
    _console.print(f"[bold green]✓[/bold green] {msg}")


def printWarning(msg: str) -> None:
    _console.print(f"[bold yellow]![/bold yellow] {msg}")
