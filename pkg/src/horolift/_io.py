"""CSV/JSON emission with a fixed float format and an embedded config echo."""

from __future__ import annotations

import csv
import json
import math
from typing import Iterable, Mapping, Optional, Sequence, TextIO


def fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    return str(value)


def _jsonable(obj):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return fmt(obj)
        return float(format(obj, ".17g"))
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalars
        return _jsonable(obj.item())
    return obj


def write_csv(fh: TextIO, header: Sequence[str], rows: Iterable[Sequence],
              config: Optional[Mapping] = None) -> None:
    """Rows go out with 17 significant digits; ``config`` becomes a leading
    ``# config: {...}`` comment line."""
    if config is not None:
        fh.write("# config: " + json.dumps(_jsonable(config), sort_keys=True) + "\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])


def write_json(fh: TextIO, payload: Mapping) -> None:
    json.dump(_jsonable(payload), fh, sort_keys=True, indent=2)
    fh.write("\n")


def read_csv(fh: TextIO) -> list[dict[str, str]]:
    lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))
