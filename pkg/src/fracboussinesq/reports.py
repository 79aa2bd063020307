"""Deterministic JSON/CSV emission.

Floats are written with 17 significant digits (enough to round-trip any
double), mapping keys are sorted, and non-finite floats become JSON null so
every file is standard JSON. Identical inputs give byte-identical files.
"""

import csv
import hashlib
import io
import json
import math
import os
import platform

import numpy as np

__all__ = ["format_float", "dumps", "write_json", "write_csv", "to_plain", "config_hash", "versions"]


def format_float(x):
    x = float(x)
    if not math.isfinite(x):
        return None
    if x == 0.0:
        return "0.0"
    s = f"{x:.17g}"
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def to_plain(obj):
    """Convert numpy scalars/arrays, tuples and dataclass-like dicts into JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _emit(obj, indent, level, out):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        keys = sorted(obj)
        for i, k in enumerate(keys):
            out.append(pad + json.dumps(k) + ": ")
            _emit(obj[k], indent, level + 1, out)
            out.append(",\n" if i + 1 < len(keys) else "\n")
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i + 1 < len(obj) else "\n")
        out.append(end + "]")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        f = format_float(obj)
        out.append("null" if f is None else f)
    elif obj is None:
        out.append("null")
    else:
        out.append(json.dumps(obj))


def dumps(obj, indent=2):
    out = []
    _emit(to_plain(obj), indent, 0, out)
    out.append("\n")
    return "".join(out)


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_json(path, obj):
    _write_text(path, dumps(obj))


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        f = format_float(v)
        return "nan" if f is None else f
    return "" if v is None else str(v)


def write_csv(path, header, rows):
    """Write a header and rows; an empty row list gives a header-only file."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    _write_text(path, buf.getvalue())


def config_hash(raw_bytes):
    return hashlib.sha256(raw_bytes).hexdigest()


def versions():
    import scipy
    from . import __version__, _kernels
    out = {
        "fracboussinesq": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "kernel_backend": _kernels.backend(),
    }
    if _kernels.HAVE_NUMBA:
        import numba
        out["numba"] = numba.__version__
    return out


def ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path}: {exc.strerror or exc}") from exc
    if not os.access(path, os.W_OK):
        raise OSError(f"output directory {path} is not writable")
