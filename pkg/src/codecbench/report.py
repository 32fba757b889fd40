"""Deterministic report assembly and serialization.

Reports are plain dicts serialized as JSON with stable key order; float
values are rounded to six significant digits by default so repeated runs
diff cleanly, with a flag for full precision.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys

SCHEMA_VERSION = 1
DEFAULT_SIG_DIGITS = 6


def inputs_digest(paths) -> list[dict]:
    out = []
    for path in paths:
        out.append({"name": str(path), "bytes": os.path.getsize(path)})
    return out


def make_report(command, inputs, results, warnings=(), notes=()) -> dict:
    from . import __version__

    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "codecbench", "version": __version__},
        "command": list(command),
        "inputs": inputs_digest(inputs),
        "results": results,
        "warnings": list(warnings),
        "notes": list(notes),
    }


def round_floats(obj, sig_digits: int = DEFAULT_SIG_DIGITS):
    """Recursively round floats to a fixed number of significant digits."""
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        return float(f"{obj:.{sig_digits}g}") if math.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {k: round_floats(v, sig_digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v, sig_digits) for v in obj]
    return obj


def _sanitize_nonfinite(obj):
    # JSON has no Infinity/NaN literals; degenerate statistics (e.g. a
    # perfectly separated ANOVA) serialize as strings instead of crashing.
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _sanitize_nonfinite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize_nonfinite(v) for v in obj]
    return obj


def render_json(report: dict, full_precision: bool = False) -> str:
    doc = report if full_precision else round_floats(report)
    return json.dumps(_sanitize_nonfinite(doc), indent=2, allow_nan=False) + "\n"


def render_csv(header, rows, full_precision: bool = False) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if not full_precision:
            row = [round_floats(cell) for cell in row]
        writer.writerow(row)
    return buf.getvalue()


def write_text(path, text: str):
    """Write to a file, or to stdout when path is '-'."""
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fp:
            fp.write(text)
