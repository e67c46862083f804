"""Report emission: JSON documents and flat CSV sample tables.

Floats are printed with 17 significant digits so that reruns with the
same seed produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import os


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def emit_json(obj, path: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def emit_csv(rows, path: str, columns=None) -> None:
    """rows: list of flat dicts. Column order fixed by `columns` or by the
    first row's key order."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c, "")) for c in columns])


def flatten_record(rec: dict, prefix: str = "") -> dict:
    """Flatten nested dicts/lists into scalar CSV-friendly columns."""
    out = {}
    for key, val in rec.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            out.update(flatten_record(val, prefix=name + "."))
        elif isinstance(val, (list, tuple)):
            if all(isinstance(v, (int, float)) for v in val):
                for i, v in enumerate(val):
                    out[f"{name}.{i}"] = v
            else:
                out[name] = json.dumps(val)
        else:
            out[name] = val
    return out
