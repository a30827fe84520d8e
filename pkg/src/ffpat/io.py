"""Artifact files: raw fields and sinograms with text headers, PNG previews, CSV logs."""
import configparser
import csv
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ShapeError
from .fields import Grid
from .radon import CONVENTION, MaskSpec, Sinogram, SinogramGeom

__all__ = [
    "write_field",
    "read_field",
    "write_sinogram",
    "read_sinogram",
    "write_png",
    "write_run_csv",
    "write_timing_csv",
    "read_csv",
]

_DTYPE = "<f8"


def _header_path(path):
    return Path(path).with_suffix(".hdr")


def _write_header(path, section, items):
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp[section] = {k: str(v) for k, v in items.items()}
    with open(_header_path(path), "w") as fh:
        cp.write(fh)


def _read_header(path, section):
    cp = configparser.ConfigParser()
    cp.optionxform = str
    if not cp.read(_header_path(path)):
        raise FileNotFoundError(f"missing header for {path}")
    return cp[section]


def _write_raw(path, values):
    np.ascontiguousarray(values, dtype=_DTYPE).tofile(path)


def write_field(path, values, grid, role="field"):
    """Write ``values`` as raw little-endian float64 plus a ``.hdr`` sidecar."""
    if np.shape(values) != grid.shape:
        raise ShapeError(f"field shape {np.shape(values)} does not match grid {grid.shape}")
    path = Path(path)
    _write_raw(path, values)
    _write_header(path, "field", {
        "n": grid.n,
        "extent": repr(grid.extent),
        "periodic": str(grid.periodic).lower(),
        "role": role,
        "dtype": "float64 little-endian row-major",
        "axis0": "x1",
    })
    return path


def read_field(path):
    hdr = _read_header(path, "field")
    grid = Grid(int(hdr["n"]), float(hdr["extent"]), hdr["periodic"] == "true")
    values = np.fromfile(path, dtype=_DTYPE)
    if values.size != grid.n**2:
        raise ShapeError(f"{path}: {values.size} values for a {grid.n}x{grid.n} grid")
    return values.reshape(grid.shape), grid, hdr["role"]


def write_sinogram(path, sin, mask_spec=None):
    path = Path(path)
    _write_raw(path, sin.values)
    g = sin.geom
    spec = mask_spec or MaskSpec()
    _write_header(path, "sinogram", {
        "n_theta": g.n_theta,
        "n_s": g.n_s,
        "s_spacing": repr(g.s_spacing),
        "theta_min": repr(float(g.theta_range[0])),
        "theta_max": repr(float(g.theta_range[1])),
        "mask_exterior_radius": repr(float(spec.exterior_radius)),
        "mask_theta_min": repr(float(spec.angular_range[0])),
        "mask_theta_max": repr(float(spec.angular_range[1])),
        "dtype": "float64 little-endian row-major, angle-major",
        "convention": CONVENTION,
    })
    np.ascontiguousarray(sin.mask, dtype=np.uint8).tofile(path.with_suffix(".mask"))
    return path


def read_sinogram(path):
    """Return ``(Sinogram, MaskSpec)``."""
    path = Path(path)
    hdr = _read_header(path, "sinogram")
    geom = SinogramGeom(int(hdr["n_theta"]), int(hdr["n_s"]), float(hdr["s_spacing"]),
                        (float(hdr["theta_min"]), float(hdr["theta_max"])))
    spec = MaskSpec(float(hdr["mask_exterior_radius"]),
                    (float(hdr["mask_theta_min"]), float(hdr["mask_theta_max"])))
    values = np.fromfile(path, dtype=_DTYPE)
    if values.size != geom.n_theta * geom.n_s:
        raise ShapeError(f"{path}: {values.size} values for geometry {geom.shape}")
    mask_file = path.with_suffix(".mask")
    mask = None
    if mask_file.exists():
        mask = np.fromfile(mask_file, dtype=np.uint8).astype(bool).reshape(geom.shape)
    return Sinogram(geom, values.reshape(geom.shape), mask), spec


def write_png(path, values):
    """8-bit grayscale preview with linear min-max scaling; returns (min, max).

    Axis 0 (x1) is drawn left to right and x2 upwards.
    """
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    scaled = np.zeros(v.shape) if hi == lo else (v - lo) / (hi - lo)
    img = np.round(255 * scaled).astype(np.uint8)
    Image.fromarray(np.flipud(img.T), mode="L").save(path)
    return lo, hi


def write_run_csv(path, run):
    """``iter, residual, rel_error`` per iteration (rel_error empty without truth)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "residual", "rel_error"])
        for k, res in enumerate(run.residual_norms):
            err = run.rel_errors[k] if k < len(run.rel_errors) else ""
            w.writerow([k + 1, repr(res), repr(err) if err != "" else ""])
    return path


def write_timing_csv(path, run):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "wall_ms"])
        for k, t in enumerate(run.wall_times):
            w.writerow([k + 1, f"{1000.0 * t:.3f}"])
    return path


def read_csv(path):
    """Return the header and a float array of the rows (empty cells become NaN)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(c) if c else np.nan for c in r] for r in rows[1:]])
    return rows[0], data
