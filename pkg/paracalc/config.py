from __future__ import annotations

import math
import tomllib
from enum import StrEnum
from pathlib import Path

import tomlkit
from pydantic import BaseModel, ValidationError

from paracalc.models import (
    AnalysisConfig,
    GridConfig,
    InvalidInput,
    ParacalcConfig,
    ParalinearizeConfig,
    PartitionConfig,
    QuantizationConfig,
    VerifyConfig,
    getParacalcHome,
)

CONFIG_FILENAME = ".paracalc.toml"
GLOBAL_CONFIG_FILENAME = "config.toml"
TABLE = "paracalc"

_NESTED_SECTIONS: dict[str, type[BaseModel]] = {
    "grid": GridConfig,
    "partition": PartitionConfig,
    "analysis": AnalysisConfig,
    "paralinearize": ParalinearizeConfig,
    "quantization": QuantizationConfig,
    "verify": VerifyConfig,
}


def globalConfigPath() -> Path:
    return getParacalcHome() / GLOBAL_CONFIG_FILENAME


def configExists(project_dir: Path) -> bool:
    return (project_dir / CONFIG_FILENAME).exists()


def _readTable(path: Path) -> dict:
    try:
        with open(path, "rb") as f:
            return tomllib.load(f).get(TABLE, {})
    except tomllib.TOMLDecodeError as e:
        raise InvalidInput(f"{path}: {e}") from e


def loadConfig(project_dir: Path) -> ParacalcConfig:
    """Load config: project .paracalc.toml > global config > defaults."""
    data: dict = {}

    global_path = globalConfigPath()
    if global_path.exists():
        data.update(_readTable(global_path))

    # project config, deep-merged over nested tables
    project_path = project_dir / CONFIG_FILENAME
    if project_path.exists():
        for key, val in _readTable(project_path).items():
            if isinstance(val, dict) and isinstance(data.get(key), dict):
                data[key] = {**data[key], **val}
            else:
                data[key] = val

    try:
        return ParacalcConfig.model_validate(data)
    except ValidationError as e:
        raise InvalidInput(f"invalid configuration: {e}") from e


def _tomlValue(val: object) -> object:
    if isinstance(val, bool):
        return val
    if isinstance(val, StrEnum):
        return val.value
    if isinstance(val, BaseModel):
        return val.model_dump(mode="json")
    return val


def _formatTomlLiteral(val: object) -> str:
    """A value as a TOML literal for commented-out lines."""
    if isinstance(val, bool):
        return "true" if val else "false"
    if isinstance(val, StrEnum):
        return f'"{val.value}"'
    if isinstance(val, str):
        return f'"{val}"'
    if isinstance(val, float):
        return repr(val)
    return str(val)


def _buildTomlDocument(config: ParacalcConfig, *, only_changed: bool) -> tomlkit.TOMLDocument:
    """Document under [paracalc]; with only_changed, defaults become comments."""
    defaults = ParacalcConfig()
    doc = tomlkit.document()
    table = tomlkit.table()

    for name, field_info in ParacalcConfig.model_fields.items():
        if name in _NESTED_SECTIONS:
            continue
        val = getattr(config, name)
        if val is None:
            continue
        desc = field_info.description or ""
        if only_changed and val == getattr(defaults, name):
            table.add(tomlkit.comment(f"{name} = {_formatTomlLiteral(val)}  # {desc}"))
            continue
        if desc and not only_changed:
            table.add(tomlkit.comment(desc))
        table.add(name, _tomlValue(val))

    for section_name, model_cls in _NESTED_SECTIONS.items():
        sub_config = getattr(config, section_name)
        sub_defaults = getattr(defaults, section_name)
        sub_table = tomlkit.table()
        has_content = False
        for name, field_info in model_cls.model_fields.items():
            val = getattr(sub_config, name)
            if val is None:
                continue
            has_content = True
            desc = field_info.description or ""
            if only_changed and val == getattr(sub_defaults, name):
                sub_table.add(tomlkit.comment(f"{name} = {_formatTomlLiteral(val)}  # {desc}"))
                continue
            if desc and not only_changed:
                sub_table.add(tomlkit.comment(desc))
            sub_table.add(name, _tomlValue(val))
        if has_content:
            table.add(section_name, sub_table)

    doc.add(TABLE, table)
    return doc


def renderConfig(config: ParacalcConfig) -> str:
    return tomlkit.dumps(_buildTomlDocument(config, only_changed=False))


def writeConfig(project_dir: Path, config: ParacalcConfig) -> Path:
    path = project_dir / CONFIG_FILENAME
    path.write_text(renderConfig(config))
    return path


def writeInitConfig(project_dir: Path, config: ParacalcConfig | None = None) -> Path:
    """Minimal config with commented-out defaults for self-documentation."""
    path = project_dir / CONFIG_FILENAME
    doc = _buildTomlDocument(config or ParacalcConfig(), only_changed=True)
    path.write_text(tomlkit.dumps(doc))
    return path


def _coerceValue(value: str) -> str | bool | int | float:
    """CLI string to the narrowest TOML type."""
    if value.lower() == "true":
        return True
    if value.lower() == "false":
        return False
    try:
        return int(value)
    except ValueError:
        pass
    try:
        number = float(value)
    except ValueError:
        return value
    return number if math.isfinite(number) else value


def updateConfigField(project_dir: Path, key: str, value: str) -> ParacalcConfig:
    """Set one field by dot notation (e.g. 'grid.J') and return the reloaded config."""
    config_path = project_dir / CONFIG_FILENAME
    if config_path.exists():
        with open(config_path, "rb") as f:
            data = tomllib.load(f)
    else:
        data = {TABLE: {}}

    section_or_field, _, field_name = key.partition(".")
    known = set(ParacalcConfig.model_fields)
    if section_or_field not in known:
        raise InvalidInput(f"unknown config key '{key}'")
    if field_name:
        model_cls = _NESTED_SECTIONS.get(section_or_field)
        if model_cls is None or field_name not in model_cls.model_fields:
            raise InvalidInput(f"unknown config key '{key}'")
    elif section_or_field in _NESTED_SECTIONS:
        raise InvalidInput(f"'{key}' is a section; set one of its fields")

    coerced = _coerceValue(value)
    table = data.setdefault(TABLE, {})
    if field_name:
        table.setdefault(section_or_field, {})[field_name] = coerced
    else:
        table[section_or_field] = coerced

    previous = config_path.read_text() if config_path.exists() else None
    config_path.write_text(tomlkit.dumps(data))
    try:
        return loadConfig(project_dir)
    except InvalidInput:
        if previous is None:
            config_path.unlink()
        else:
            config_path.write_text(previous)
        raise
