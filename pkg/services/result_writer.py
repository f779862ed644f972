"""
Result Writer
CSV and JSON rendering of study result tables
"""

import io
import json
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Union

import pandas as pd

from api.models import OutputFormat, ResultTable
from core.exceptions import ConfigError
from core.logging import get_logger

logger = get_logger()

CSV_FLOAT_FORMAT = "%.12g"
COMMENT_PREFIX = "# "


def _metadata_text(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(table: ResultTable) -> str:
    """Metadata as '# key=value' lines, then the header and one line per row"""
    lines = [f"{COMMENT_PREFIX}{key}={_metadata_text(value)}\n" for key, value in table.metadata.items()]
    frame = pd.DataFrame(table.rows, columns=table.columns, dtype="float64")
    body = frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return "".join(lines) + body


def render_json(table: ResultTable) -> str:
    document = {
        "metadata": table.metadata,
        "columns": table.columns,
        "rows": [[float(cell) for cell in row] for row in table.rows],
    }
    return json.dumps(document, indent=2, allow_nan=False) + "\n"


def render(table: ResultTable, fmt: Union[OutputFormat, str] = OutputFormat.CSV) -> str:
    fmt = OutputFormat(fmt)
    if fmt is OutputFormat.JSON:
        return render_json(table)
    return render_csv(table)


def emit(table: ResultTable, fmt: Union[OutputFormat, str] = OutputFormat.CSV, path: Optional[Union[str, Path]] = None) -> None:
    """
    Write a table to path, or to stdout when no path is given

    Raises:
        OSError: the path cannot be written
    """
    text = render(table, fmt)
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)
    logger.info(f"Wrote {len(table.rows)} rows x {len(table.columns)} columns to {path}")


def _load_csv(text: str) -> ResultTable:
    metadata: Dict[str, Any] = {}
    body_start = 0
    lines = text.splitlines(keepends=True)
    for body_start, line in enumerate(lines):
        if not line.startswith("#"):
            break
        key, _, value = line[len(COMMENT_PREFIX):].rstrip("\n").partition("=")
        metadata[key] = value
    else:
        body_start = len(lines)
    body = "".join(lines[body_start:])
    if not body.strip():
        raise ConfigError("Result file has no header row")
    frame = pd.read_csv(io.StringIO(body), dtype="float64")
    return ResultTable(
        columns=[str(c) for c in frame.columns],
        rows=frame.to_numpy().tolist(),
        metadata=metadata,
    )


def load_table(path: Union[str, Path]) -> ResultTable:
    """Read a table written by emit; CSV metadata values come back as strings"""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        document = json.loads(text)
        return ResultTable(columns=document["columns"], rows=document["rows"], metadata=document["metadata"])
    return _load_csv(text)
