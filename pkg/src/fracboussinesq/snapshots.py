"""Field snapshot and trajectory dump files (layout in docs/formats.md).

A snapshot is a zip container (numpy ``.npz`` compatible) holding

* ``header``: a 0-d unicode array with the JSON header
  ``{"format", "version", "n", "N", "L", "real_flag", "component_count", ...}``;
* ``coeffs``: complex128 array of shape (component_count, N, ..., N) in numpy
  FFT order along every axis;
* optionally ``rate``: same shape, the time derivative.

Zip entries carry a fixed timestamp so identical fields give identical bytes.
A trajectory dump is a directory with ``trajectory.json`` (time grid header)
and one snapshot per node, ``node_0000.npz`` ...
"""

import io
import json
import os
import zipfile

import numpy as np

from .reports import dumps
from .semigroup import Trajectory
from .spectral import ScalarField, SpectralGrid, VectorField

__all__ = ["save_field", "load_field", "save_trajectory", "load_trajectory", "FORMAT_VERSION"]

FORMAT = "fracboussinesq-field"
FORMAT_VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


def _grid_header(grid):
    return {"n": grid.n, "N": grid.N, "L": float(grid.L)}


def _write_npz(path, arrays):
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            a = np.asarray(arrays[name])
            if a.ndim:
                a = np.ascontiguousarray(a)  # would promote 0-d to 1-d
            buf = io.BytesIO()
            np.lib.format.write_array(buf, a, allow_pickle=False)
            info = zipfile.ZipInfo(name + ".npy", date_time=_EPOCH)
            info.external_attr = 0o644 << 16
            zf.writestr(info, buf.getvalue())


def _header(grid, components, real, extra):
    h = dict(_grid_header(grid))
    h.update({"format": FORMAT, "version": FORMAT_VERSION, "real_flag": bool(real),
              "component_count": int(components)})
    if extra:
        h.update(extra)
    return h


def save_field(path, field, rate=None, extra=None):
    """Write a ScalarField or VectorField (and optionally its rate)."""
    vector = isinstance(field, VectorField)
    coeffs = field.coeffs if vector else field.coeffs[None]
    h = _header(field.grid, coeffs.shape[0], field.real, dict({"vector": vector}, **(extra or {})))
    h["solenoidal"] = bool(getattr(field, "solenoidal", False))
    arrays = {"header": np.array(dumps(h)), "coeffs": coeffs.astype(np.complex128)}
    if rate is not None:
        arrays["rate"] = np.asarray(rate, dtype=np.complex128).reshape(coeffs.shape)
    _write_npz(path, arrays)


def _read(path):
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(str(z["header"]))
        coeffs = z["coeffs"]
        rate = z["rate"] if "rate" in z.files else None
    if header.get("format") != FORMAT:
        raise ValueError(f"{path}: not a field snapshot")
    grid = SpectralGrid(header["n"], header["N"], header["L"])
    expected = (header["component_count"],) + grid.shape
    if coeffs.shape != expected:
        raise ValueError(f"{path}: coefficient shape {coeffs.shape} does not match header {expected}")
    return header, grid, coeffs, rate


def load_field(path):
    header, grid, coeffs, _ = _read(path)
    if header["component_count"] == 1 and not header.get("vector", False):
        return ScalarField(grid, coeffs[0], header["real_flag"])
    return VectorField(grid, coeffs, header["real_flag"], header.get("solenoidal", False))


def save_trajectory(directory, traj):
    os.makedirs(directory, exist_ok=True)
    names = []
    for m in range(traj.times.size):
        name = f"node_{m:04d}.npz"
        names.append(name)
        c = traj.coeffs[m]
        f = VectorField(traj.grid, c) if traj.vector else ScalarField(traj.grid, c[0])
        rate = None if traj.rate is None else traj.rate[m]
        save_field(os.path.join(directory, name), f, rate=rate,
                   extra={"vector": bool(traj.vector), "node": m, "t": float(traj.times[m])})
    header = dict(_grid_header(traj.grid))
    header.update({
        "format": "fracboussinesq-trajectory",
        "version": FORMAT_VERSION,
        "M": traj.M,
        "T": traj.T,
        "times": [float(t) for t in traj.times],
        "vector": bool(traj.vector),
        "indices": None if traj.indices is None else list(traj.indices),
        "nodes": names,
    })
    with open(os.path.join(directory, "trajectory.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(header))


def load_trajectory(directory):
    with open(os.path.join(directory, "trajectory.json"), encoding="utf-8") as fh:
        header = json.load(fh)
    coeffs, rates = [], []
    for name in header["nodes"]:
        _, grid, c, r = _read(os.path.join(directory, name))
        coeffs.append(c)
        rates.append(r)
    rate = None if any(r is None for r in rates) else np.stack(rates)
    traj = Trajectory(grid, np.array(header["times"]), np.stack(coeffs), rate, header["vector"])
    return traj.with_indices(header["indices"])
