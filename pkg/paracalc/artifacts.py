"""Reading and writing grid functions, maps, reports and run artifacts."""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Mapping, Sequence
from datetime import UTC, datetime
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from paracalc.grid import GridFunction, TorusGrid
from paracalc.littlewood_paley import BlockDecomposition, BlockNorm, RegularityReport
from paracalc.models import GridMismatch, InvalidInput, NormKind, RunConfig
from paracalc.paracomposition import TorusMap

MANIFEST_FILENAME = "manifest.json"
BLOCKS_FILENAME = "blocks.csv"
DECAY_FILENAME = "decay.csv"
DECAY_SVG_FILENAME = "decay.svg"


def packageVersion() -> str:
    try:
        return version("paracalc")
    except PackageNotFoundError:
        return "0.0.0"


# ─── JSON primitives ───────────────────────────────────────────────────────────


def _jsonFloat(x: float) -> float | None:
    """Non-finite floats are written as null."""
    x = float(x)
    return x if math.isfinite(x) else None


def _readFloat(x: float | None, default: float = math.nan) -> float:
    return default if x is None else float(x)


def writeJson(path: Path, data: object) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2) + "\n")
    return path


def readJson(path: Path) -> dict:
    if not path.exists():
        raise InvalidInput(f"file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise InvalidInput(f"{path}: not valid JSON ({e})") from e
    if not isinstance(data, dict):
        raise InvalidInput(f"{path}: expected a JSON object")
    return data


def _gridFrom(data: Mapping, source: str) -> TorusGrid:
    try:
        return TorusGrid(
            d=int(data["d"]), J=int(data["J"]), length=float(data.get("length", 2 * math.pi))
        )
    except KeyError as e:
        raise InvalidInput(f"{source}: missing field {e}") from e
    except (TypeError, ValueError) as e:
        raise InvalidInput(f"{source}: {e}") from e


def _encodeValues(f: GridFunction) -> list:
    flat = f.values.reshape(-1)
    if f.real:
        return [float(v) for v in flat]
    return [[float(v.real), float(v.imag)] for v in flat]


def _decodeValues(raw: object, grid: TorusGrid, real: bool, source: str) -> np.ndarray:
    if not isinstance(raw, list) or len(raw) != grid.size:
        count = len(raw) if isinstance(raw, list) else 0
        raise InvalidInput(f"{source}: expected {grid.size} values, got {count}")
    try:
        if real:
            return np.array(raw, dtype=np.float64).reshape(grid.shape)
        pairs = np.array(raw, dtype=np.float64)
        if pairs.shape != (grid.size, 2):
            raise InvalidInput(f"{source}: complex values must be [re, im] pairs")
        return (pairs[:, 0] + 1j * pairs[:, 1]).reshape(grid.shape)
    except (TypeError, ValueError) as e:
        raise InvalidInput(f"{source}: malformed values ({e})") from e


# ─── grid functions ────────────────────────────────────────────────────────────


def gridFunctionToDict(f: GridFunction) -> dict:
    grid = f.grid
    return {
        "d": grid.d,
        "J": grid.J,
        "length": grid.length,
        "real": f.real,
        "values": _encodeValues(f),
    }


def gridFunctionFromDict(data: Mapping, source: str = "<data>") -> GridFunction:
    grid = _gridFrom(data, source)
    real = bool(data.get("real", True))
    values = _decodeValues(data.get("values"), grid, real, source)
    return GridFunction.fromValues(grid, values, real=real)


def loadGridFunction(path: Path, grid: TorusGrid | None = None) -> GridFunction:
    f = gridFunctionFromDict(readJson(path), str(path))
    if grid is not None and f.grid != grid:
        raise GridMismatch(f"{path}: grid {f.grid.describe()} does not match {grid.describe()}")
    return f


def saveGridFunction(path: Path, f: GridFunction) -> Path:
    return writeJson(path, gridFunctionToDict(f))


# ─── maps ──────────────────────────────────────────────────────────────────────


def torusMapToDict(chi: TorusMap) -> dict:
    grid = chi.grid
    return {
        "d": grid.d,
        "J": grid.J,
        "length": grid.length,
        "g": [_encodeValues(gi) for gi in chi.g],
        "is_diffeo": chi.is_diffeo,
    }


def torusMapFromDict(data: Mapping, source: str = "<data>") -> TorusMap:
    """`is_diffeo` is recomputed; any stored value is ignored."""
    grid = _gridFrom(data, source)
    raw = data.get("g")
    if not isinstance(raw, list) or len(raw) != grid.d:
        raise InvalidInput(f"{source}: 'g' must hold {grid.d} component(s)")
    g = [
        GridFunction.fromValues(grid, _decodeValues(comp, grid, True, source), real=True)
        for comp in raw
    ]
    return TorusMap.fromDisplacement(grid, g)


def loadTorusMap(path: Path, grid: TorusGrid | None = None) -> TorusMap:
    chi = torusMapFromDict(readJson(path), str(path))
    if grid is not None and chi.grid != grid:
        raise GridMismatch(f"{path}: grid {chi.grid.describe()} does not match {grid.describe()}")
    return chi


def saveTorusMap(path: Path, chi: TorusMap) -> Path:
    return writeJson(path, torusMapToDict(chi))


# ─── reports ───────────────────────────────────────────────────────────────────


def reportToDict(report: RegularityReport) -> dict:
    return {
        "exponent": _jsonFloat(report.exponent),
        "norm_kind": str(report.norm_kind),
        "fit_range": list(report.fit_range),
        "residual": _jsonFloat(report.residual),
        "degenerate": report.degenerate,
        "blocks": [{"q": b.q, "sup": b.sup, "l2": b.l2} for b in report.blocks],
    }


def reportFromDict(data: Mapping) -> RegularityReport:
    try:
        return RegularityReport(
            exponent=_readFloat(data["exponent"]),
            norm_kind=NormKind(data["norm_kind"]),
            fit_range=(int(data["fit_range"][0]), int(data["fit_range"][1])),
            residual=_readFloat(data["residual"]),
            degenerate=bool(data["degenerate"]),
            blocks=tuple(
                BlockNorm(int(b["q"]), float(b["sup"]), float(b["l2"])) for b in data["blocks"]
            ),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidInput(f"malformed regularity report: {e}") from e


def saveReport(path: Path, report: RegularityReport) -> Path:
    return writeJson(path, reportToDict(report))


# ─── CSV / SVG ─────────────────────────────────────────────────────────────────


def _g17(x: float) -> str:
    return format(float(x), ".17g")


def _log2(x: float) -> float:
    return math.log2(x) if x > 0 else -math.inf


def writeBlocksCsv(path: Path, dec: BlockDecomposition) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["q", "sup", "l2"])
        for b in dec.norms:
            writer.writerow([b.q, _g17(b.sup), _g17(b.l2)])
    return path


def decayRows(components: Mapping[str, BlockDecomposition]) -> list[tuple[str, int, float, float]]:
    return [
        (name, b.q, _log2(b.sup), _log2(b.l2))
        for name, dec in components.items()
        for b in dec.norms
    ]


def writeDecayCsv(path: Path, components: Mapping[str, BlockDecomposition]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["component", "q", "log2_sup", "log2_l2"])
        for name, q, lsup, ll2 in decayRows(components):
            writer.writerow([name, q, _g17(lsup), _g17(ll2)])
    return path


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def writeDecaySvg(
    path: Path,
    components: Mapping[str, BlockDecomposition],
    *,
    width: int = 640,
    height: int = 400,
) -> Path:
    """Polyline chart of log2 sup-norm against q, one line per component."""
    rows = [(n, q, v) for n, q, v, _ in decayRows(components) if math.isfinite(v)]
    pad = 48
    qs = [q for _, q, _ in rows] or [0, 1]
    vs = [v for _, _, v in rows] or [0.0, 1.0]
    q_lo, q_hi = min(qs), max(max(qs), min(qs) + 1)
    v_lo, v_hi = min(vs), max(max(vs), min(vs) + 1.0)

    def sx(q: float) -> float:
        return pad + (q - q_lo) / (q_hi - q_lo) * (width - 2 * pad)

    def sy(v: float) -> float:
        return height - pad - (v - v_lo) / (v_hi - v_lo) * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" '
        'stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 12}" text-anchor="middle">q</text>',
        f'<text x="14" y="{height / 2:.1f}" transform="rotate(-90 14 {height / 2:.1f})" '
        'text-anchor="middle">log2 sup</text>',
    ]
    for i, name in enumerate(components):
        pts = [(q, v) for n, q, v in rows if n == name]
        if not pts:
            continue
        color = _SVG_COLORS[i % len(_SVG_COLORS)]
        coords = " ".join(f"{sx(q):.2f},{sy(v):.2f}" for q, v in pts)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}"/>')
        parts.append(
            f'<text x="{width - pad + 4}" y="{pad + 14 * i}" fill="{color}" '
            f'font-size="11">{name}</text>'
        )
    parts.append("</svg>")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n")
    return path


# ─── manifest ──────────────────────────────────────────────────────────────────


def writeManifest(out_dir: Path, run: RunConfig, outputs: Sequence[str] = ()) -> Path:
    """The only artifact carrying a timestamp."""
    data = {
        "command": str(run.command),
        "parameters": run.model_dump(mode="json"),
        "outputs": sorted(outputs),
        "paracalc_version": packageVersion(),
        "numpy_version": np.__version__,
        "created_at": datetime.now(UTC).isoformat(timespec="seconds"),
    }
    return writeJson(out_dir / MANIFEST_FILENAME, data)
