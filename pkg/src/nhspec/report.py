"""Deterministic JSON and CSV serialization for reports."""

import csv
import io
import json
import math

import numpy as np

SCHEMA = "nhs/1"


def to_jsonable(obj):
    """Convert numpy scalars/arrays, complex numbers and tuples to plain JSON types.

    Complex values become ``[re, im]``; non-finite floats become the strings
    ``"inf"``, ``"-inf"`` or ``"nan"`` so the output stays valid JSON.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(float(obj.real)), to_jsonable(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj):
    """Canonical JSON: sorted keys, fixed separators, shortest float repr."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=1, separators=(",", ": "),
                      allow_nan=False)


def envelope(body, sidecar=None):
    """Wrap a report body; ``sidecar`` holds non-deterministic fields like timestamps."""
    out = {"schema": SCHEMA, "body": body}
    if sidecar is not None:
        out["sidecar"] = sidecar
    return out


def body_bytes(report):
    """The bytes that determinism checks compare: the report minus its sidecar."""
    return dumps({k: v for k, v in report.items() if k != "sidecar"}).encode()


def write_csv(path_or_buf, header, rows):
    if hasattr(path_or_buf, "write"):
        w = csv.writer(path_or_buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return
    with open(path_or_buf, "w", newline="") as fh:
        write_csv(fh, header, rows)


def csv_text(header, rows):
    buf = io.StringIO()
    write_csv(buf, header, rows)
    return buf.getvalue()


def fmt(x):
    """Round-trip float text for CSV cells."""
    return repr(float(x))
