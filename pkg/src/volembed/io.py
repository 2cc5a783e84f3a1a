"""Point-set CSV and report JSON, written atomically."""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .linalg import InvalidInputError, PointSet


class ParseError(InvalidInputError):
    pass


def parse_points_csv(text: str, source: str = "<input>") -> PointSet:
    """One point per row, comma-separated floats; lines starting with '#' are skipped."""
    rows = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or (row[0].lstrip().startswith("#")) or all(not c.strip() for c in row):
            continue
        try:
            rows.append([float(c) for c in row])
        except ValueError:
            raise ParseError(f"{source}:{lineno}: non-numeric field in {row!r}") from None
        if len(rows[-1]) != len(rows[0]):
            raise ParseError(f"{source}:{lineno}: expected {len(rows[0])} columns, got {len(rows[-1])}")
    if len(rows) < 2:
        raise ParseError(f"{source}: need at least 2 points, found {len(rows)}")
    try:
        return PointSet(np.asarray(rows))
    except InvalidInputError as exc:
        raise ParseError(f"{source}: {exc}") from None


def read_points_csv(path) -> PointSet:
    return parse_points_csv(Path(path).read_text(), str(path))


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def points_to_csv(points: np.ndarray, header: str | None = None) -> str:
    lines = [f"# {header}"] if header else []
    lines += [",".join(format_float(v) for v in row) for row in np.asarray(points)]
    return "\n".join(lines) + "\n"


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(_csv_cell(v) for v in row))
    return "\n".join(out) + "\n"


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return format_float(v) if math.isfinite(v) else ""
    return str(v)


def to_json(obj: Any, indent: int = 2) -> str:
    """JSON with every float printed to 17 significant digits; non-finite floats become null."""
    return _encode(obj, indent, 0) + "\n"


def _encode(obj: Any, indent: int, level: int) -> str:
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    pad, inner = " " * indent * level, " " * indent * (level + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        items = [inner + _encode(v, indent, level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot encode {type(obj).__name__} as JSON")


def write_atomic(path, text: str) -> None:
    """Write via a temp file in the target directory, then rename over the target."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
