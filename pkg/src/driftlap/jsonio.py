"""JSON read/write helpers with full-precision float formatting.

All artifact files (meshes, spectra, nodal analyses, reports) go through
this module so that floats are serialized with 17 significant digits,
which round-trips IEEE double exactly and keeps output byte-stable.
"""

from __future__ import annotations

import json
import math
from typing import Any


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    s = format(float(x), ".17g")
    # keep the value a float on reload ("2" -> "2.0")
    if "." not in s and "e" not in s and "E" not in s:
        s += ".0"
    return s


def dumps(obj: Any, indent: int = 0, _level: int = 0) -> str:
    """Serialize to JSON text; floats via :func:`format_float`."""
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = [
            f"{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}"
            for k, v in obj.items()
        ]
        return _wrap(items, "{}", indent, _level)
    if isinstance(obj, (list, tuple)):
        items = [dumps(v, indent, _level + 1) for v in obj]
        return _wrap(items, "[]", indent, _level)
    # numpy scalars and arrays arrive here; fall back on their Python forms
    if hasattr(obj, "tolist"):
        return dumps(obj.tolist(), indent, _level)
    raise TypeError(f"cannot serialize object of type {type(obj).__name__}")


def _wrap(items: list[str], brackets: str, indent: int, level: int) -> str:
    if not items:
        return brackets
    if indent <= 0 or level >= 2:
        return brackets[0] + ", ".join(items) + brackets[1]
    pad = " " * (indent * (level + 1))
    close_pad = " " * (indent * level)
    body = (",\n" + pad).join(items)
    return f"{brackets[0]}\n{pad}{body}\n{close_pad}{brackets[1]}"


def dump(obj: Any, path: str, indent: int = 2) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj, indent=indent))
        fh.write("\n")


def load(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
