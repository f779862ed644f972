"""
Config Loader
Flat key=value cluster configuration files
"""

from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Tuple, Union

from pydantic import ValidationError

from api.models import ClusterConfig
from core.exceptions import ConfigError, ConfigParseError, ConfigValidationError
from core.logging import get_logger
from database.presets import get_preset_registry

logger = get_logger()

BASE_PRESET = "table2"
METADATA_PREFIX = "config."
NONE_LITERALS = {"", "none", "null"}


def _format_errors(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "config"
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def build_config(values: Mapping[str, Any], base: Optional[ClusterConfig] = None) -> ClusterConfig:
    """
    Layer values over a base configuration (the table2 preset by default)

    Raises:
        ConfigValidationError: a value is malformed or breaks a model invariant
    """
    if base is None:
        base = get_preset_registry().config(BASE_PRESET)
    unknown = sorted(set(values) - set(ClusterConfig.model_fields))
    if unknown:
        raise ConfigValidationError(f"Unknown configuration keys: {unknown}")
    try:
        return ClusterConfig.model_validate({**base.model_dump(), **values})
    except ValidationError as e:
        raise ConfigValidationError(_format_errors(e)) from e


def _parse_lines(lines: Iterable[str], path: Optional[str]) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigParseError(f"expected key=value, got '{line}'", line_no, path)
        if key not in ClusterConfig.model_fields:
            raise ConfigParseError(f"unknown key '{key}'", line_no, path)
        if key in values:
            raise ConfigParseError(f"duplicate key '{key}'", line_no, path)
        values[key] = None if value.lower() in NONE_LITERALS else value
    return values


def parse_config(path: Union[str, Path]) -> ClusterConfig:
    """
    Read a cluster configuration file

    Blank lines and lines starting with '#' are ignored; every other line is
    KEY=VALUE with KEY a ClusterConfig field. Missing keys keep their table2
    value.

    Raises:
        ConfigParseError: malformed line, unknown or repeated key (with line number)
        ConfigValidationError: a value breaks a model invariant, e.g. an even C
        ConfigError: the file cannot be read
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e
    values = _parse_lines(text.splitlines(), str(path))
    cfg = build_config(values)
    logger.debug(f"Loaded {len(values)} config overrides from {path}")
    return cfg


def _render_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_items(cfg: ClusterConfig) -> Tuple[Tuple[str, str], ...]:
    """(key, text) pairs in field order; unset optional values are skipped"""
    return tuple(
        (key, _render_value(value))
        for key, value in cfg.echo().items()
        if value is not None
    )


def format_config(cfg: ClusterConfig) -> str:
    """Render a configuration as a file parse_config reads back to the same value"""
    return "".join(f"{key}={text}\n" for key, text in config_items(cfg))


def config_from_metadata(metadata: Mapping[str, Any]) -> ClusterConfig:
    """Rebuild the configuration echoed in a result table's metadata"""
    values = {
        key[len(METADATA_PREFIX):]: value
        for key, value in metadata.items()
        if key.startswith(METADATA_PREFIX)
    }
    if not values:
        raise ConfigError("Result metadata carries no configuration echo")
    return build_config(values)
