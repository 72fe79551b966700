"""Plot-ready output files: CSV tables and JSON documents.

The formatting contract is deliberately rigid so outputs are diffable
and byte-stable across runs: comma-separated CSV with a header row, LF
line endings, '.' decimals with shortest round-trip float text, and
JSON with sorted keys.  Nothing here writes timestamps or hostnames.
"""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = [
    "format_cell",
    "write_csv",
    "jsonable",
    "to_json",
    "write_json",
    "si_magnetic_field",
]


def format_cell(value: Any) -> str:
    """One CSV cell: shortest round-trip text for floats, str otherwise."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, complex):
        raise TypeError("split complex values into columns before writing")
    return str(value)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write one CSV table; returns the path written."""
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row width {len(row)} != header width {len(header)}")
        lines.append(",".join(format_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def jsonable(obj: Any) -> Any:
    """Recursively convert dataclasses and numpy containers to JSON types."""
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(obj, (np.bool_, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__} to JSON")


def to_json(obj: Any, compact: bool = False) -> str:
    """Serialize with sorted keys; compact form for one-line summaries."""
    payload = jsonable(obj)
    if compact:
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return json.dumps(payload, sort_keys=True, indent=2)


def write_json(path: str | Path, obj: Any) -> Path:
    path = Path(path)
    path.write_text(to_json(obj) + "\n", encoding="utf-8", newline="\n")
    return path


_FIELD_SCALES = [
    (1.0, "T"),
    (1e-3, "mT"),
    (1e-6, "uT"),
    (1e-9, "nT"),
    (1e-12, "pT"),
    (1e-15, "fT"),
]


def si_magnetic_field(value_t: float, unit_suffix: str = "") -> str:
    """Human-readable tesla value with an auto-selected SI prefix."""
    mag = abs(value_t)
    if mag == 0.0:
        return f"0 T{unit_suffix}"
    for scale, name in _FIELD_SCALES:
        if mag >= scale:
            return f"{value_t / scale:.3g} {name}{unit_suffix}"
    scale, name = _FIELD_SCALES[-1]
    return f"{value_t / scale:.3g} {name}{unit_suffix}"
