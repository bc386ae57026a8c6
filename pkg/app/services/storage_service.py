import csv
import io
import json
import logging
import math
import sys
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from app.config import settings
from app.schemas.results import ResultTable

logger = logging.getLogger(__name__)

STDOUT = "-"
# magnitudes below this are written in scientific notation
SCIENTIFIC_BELOW = 1e-3


def format_number(value: float) -> str:
    """Plain decimal with up to 15 significant digits, scientific below 1e-3."""
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if value == 0:
        return "0"
    if abs(value) < SCIENTIFIC_BELOW:
        mantissa, exponent = f"{value:.14e}".split("e")
        mantissa = mantissa.rstrip("0").rstrip(".")
        return f"{mantissa}e{int(exponent):+03d}"
    text = f"{value:.15g}"
    if "e" in text:
        # large magnitudes: spell out the digits
        text = f"{value:.15f}".rstrip("0").rstrip(".")
    return text


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_number(float(value))
    return str(value)


def _json_safe(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    return value


class StorageService:
    """Service for writing result tables as CSV or JSON."""

    def __init__(self, output_format: Optional[str] = None):
        self.output_format = output_format or settings.output_format
        if self.output_format not in ("csv", "json"):
            raise ValueError(f"Unsupported output format: {self.output_format}")

    def render(self, table: ResultTable) -> str:
        if self.output_format == "json":
            return self.render_json(table)
        return self.render_csv(table)

    @staticmethod
    def render_csv(table: ResultTable) -> str:
        """`# key: value` metadata lines, then the header and data rows."""
        buffer = io.StringIO()
        for key, value in table.metadata.items():
            rendered = json.dumps(_json_safe(value)) if isinstance(value, (dict, list)) else format_value(value)
            buffer.write(f"# {key}: {rendered}\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([format_value(value) for value in row])
        return buffer.getvalue()

    @staticmethod
    def render_json(table: ResultTable) -> str:
        document = {
            "metadata": _json_safe(dict(table.metadata.items())),
            "columns": table.columns,
            "rows": _json_safe(table.rows),
        }
        return json.dumps(document, indent=2) + "\n"

    def store(self, table: ResultTable, path: Union[str, Path, None] = None) -> Optional[Path]:
        """
        Write the table and return the file path, or None when written to stdout.

        Args:
            table: Result table to write
            path: Destination file; None or '-' means stdout
        """
        text = self.render(table)
        if path is None or str(path) == STDOUT:
            sys.stdout.write(text)
            sys.stdout.flush()
            return None
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        logger.info(f"Wrote {len(table.rows)} rows to {path}")
        return path

    @staticmethod
    def data_rows(text: str) -> list[str]:
        """CSV lines after the metadata header; the part that must be reproducible."""
        return [line for line in text.splitlines() if not line.startswith("#")]
