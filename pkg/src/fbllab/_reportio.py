"""Canonical JSON / CSV report writing.

Reports must be byte-identical across reruns with the same seed: keys are
emitted sorted, floats with 17 significant digits, and no timestamps or
environment data are included.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np


def _format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError("reports must not contain non-finite floats")
    if x == int(x) and abs(x) < 1e16:
        return f"{x:.1f}"
    return f"{x:.17g}"


def _encode(value, out: list[str]):
    if value is None:
        out.append("null")
    elif value is True:
        out.append("true")
    elif value is False:
        out.append("false")
    elif isinstance(value, (int, np.integer)):
        out.append(str(int(value)))
    elif isinstance(value, (float, np.floating)):
        out.append(_format_float(float(value)))
    elif isinstance(value, str):
        import json

        out.append(json.dumps(value))
    elif isinstance(value, np.ndarray):
        _encode(value.tolist(), out)
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, item in enumerate(value):
            if i:
                out.append(", ")
            _encode(item, out)
        out.append("]")
    elif isinstance(value, dict):
        out.append("{")
        for i, key in enumerate(sorted(value)):
            if i:
                out.append(", ")
            _encode(str(key), out)
            out.append(": ")
            _encode(value[key], out)
        out.append("}")
    else:
        raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps_report(doc) -> str:
    out: list[str] = []
    _encode(doc, out)
    return "".join(out) + "\n"


def write_report(path: str | Path, doc) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_report(doc), encoding="utf-8")
    return path


def flatten(doc, prefix: str = "") -> list[tuple[str, str]]:
    rows: list[tuple[str, str]] = []
    if isinstance(doc, dict):
        for key in sorted(doc):
            rows.extend(flatten(doc[key], f"{prefix}.{key}" if prefix else str(key)))
    elif isinstance(doc, (list, tuple)):
        for i, item in enumerate(doc):
            rows.extend(flatten(item, f"{prefix}[{i}]"))
    else:
        chunk: list[str] = []
        _encode(doc, chunk)
        rows.append((prefix, "".join(chunk)))
    return rows


def write_csv(path: str | Path, doc) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["key,value"]
    for key, value in flatten(doc):
        value = value.replace('"', '""')
        lines.append(f'"{key}","{value}"')
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
