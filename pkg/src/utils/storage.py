"""Artifact storage: CSV and JSON writers with a provenance header, and measurement readers."""
from __future__ import annotations

import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, List, TextIO

from config import Config
from src.exceptions import ValidationError
from src.numerics.operator import MeasurementGrid


def format_value(value: Any, digits: int | None = None) -> str:
    """Render one CSV cell; reals get ``digits`` significant digits so doubles round-trip."""
    digits = Config.CSV_DIGITS if digits is None else digits
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if value is None:
        return ''
    if isinstance(value, float):
        if math.isnan(value):
            return 'nan'
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return f'{value:.{digits}g}'
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def render_csv(rows: List[Dict[str, Any]], header: Dict[str, Any] | None = None, digits: int | None = None) -> str:
    """CSV text with ``# key: value`` comment lines for the resolved config, then the table."""
    buffer = io.StringIO()
    for key, value in (header or {}).items():
        buffer.write(f'# {key}: {json.dumps(_jsonable(value), sort_keys=True)}\n')
    if rows:
        writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()), lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({k: format_value(v, digits) for k, v in row.items()})
    return buffer.getvalue()


def render_json(payload: Any, header: Dict[str, Any] | None = None) -> str:
    document = {'meta': _jsonable(header or {}), 'data': _jsonable(payload)}
    return json.dumps(document, indent=2, sort_keys=False) + '\n'


def write_text(text: str, path: str | Path | None = None, stream: TextIO | None = None) -> None:
    """Write to ``path``, or to ``stream`` (stdout by default) when no path is given."""
    if path is None or str(path) == '-':
        (stream or sys.stdout).write(text)
        return
    Path(path).write_text(text)


def write_rows(rows: List[Dict[str, Any]], path: str | Path | None = None, fmt: str = 'csv',
               header: Dict[str, Any] | None = None, stream: TextIO | None = None) -> None:
    text = render_csv(rows, header) if fmt == 'csv' else render_json(rows, header)
    write_text(text, path, stream)


def _data_lines(lines: Iterable[str]) -> List[str]:
    return [line for line in lines if line.strip() and not line.lstrip().startswith('#')]


def read_json(path: str | Path) -> Any:
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ValidationError(f"input file {path} does not exist") from e
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read JSON from {path}: {e}") from e
    if isinstance(document, dict) and 'data' in document and 'meta' in document:
        return document['data']
    return document


def read_measurements(path: str | Path) -> MeasurementGrid:
    """Load a grid from CSV (``ell,j,value`` rows, comment lines allowed) or JSON."""
    path = Path(path)
    if path.suffix.lower() == '.json':
        data = read_json(path)
        if isinstance(data, list):
            return MeasurementGrid.from_records(data)
        if not isinstance(data, dict):
            raise ValidationError(f"{path} does not hold a measurement record")
        return MeasurementGrid.from_dict(data)
    try:
        lines = path.read_text().splitlines()
    except FileNotFoundError as e:
        raise ValidationError(f"measurement file {path} does not exist") from e
    except OSError as e:
        raise ValidationError(f"cannot read measurement file {path}: {e}") from e
    reader = csv.DictReader(_data_lines(lines))
    if reader.fieldnames is None or not {'ell', 'j', 'value'} <= set(reader.fieldnames):
        raise ValidationError(f"{path} needs the CSV header ell,j,value")
    return MeasurementGrid.from_records(list(reader))
