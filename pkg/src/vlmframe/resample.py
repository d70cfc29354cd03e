"""Sampling the coarse global model at InSAR pixels and differencing."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import AlignmentError, EmptyOverlapError
from .fields import RasterGrid, VelocityField

OK = 0
OUT_OF_HULL = 1
NODATA_NEIGHBOR = 2
REASONS = {OUT_OF_HULL: "out-of-hull", NODATA_NEIGHBOR: "nodata-neighbor"}


def sample_grid(grid: RasterGrid, lon, lat) -> Tuple[np.ndarray, np.ndarray]:
    """Bilinear interpolation between the four surrounding cell centres.

    Returns ``(values, status)``. ``values`` is NaN wherever ``status`` is
    :data:`OUT_OF_HULL` (outside the hull of cell centres) or
    :data:`NODATA_NEIGHBOR` (one of the four neighbours is nodata).
    """
    lon = np.atleast_1d(np.asarray(lon, dtype=float))
    lat = np.atleast_1d(np.asarray(lat, dtype=float))
    # south-first view so row index grows with latitude
    vals = grid.values[::-1]
    nodata = ~grid.valid[::-1]
    ny, nx = vals.shape
    c = grid.cellsize

    fx = (lon - (grid.xll + 0.5 * c)) / c
    fy = (lat - (grid.yll + 0.5 * c)) / c
    inside = (fx >= 0) & (fx <= nx - 1) & (fy >= 0) & (fy <= ny - 1)
    inside &= np.isfinite(fx) & np.isfinite(fy)

    j0 = np.clip(np.floor(np.where(inside, fx, 0)).astype(np.int64), 0, nx - 2)
    i0 = np.clip(np.floor(np.where(inside, fy, 0)).astype(np.int64), 0, ny - 2)
    tx = np.where(inside, fx - j0, 0.0)
    ty = np.where(inside, fy - i0, 0.0)

    v00 = vals[i0, j0]
    v01 = vals[i0, j0 + 1]
    v10 = vals[i0 + 1, j0]
    v11 = vals[i0 + 1, j0 + 1]
    bad = nodata[i0, j0] | nodata[i0, j0 + 1] | nodata[i0 + 1, j0] | nodata[i0 + 1, j0 + 1]

    out = ((1 - ty) * ((1 - tx) * v00 + tx * v01)
           + ty * ((1 - tx) * v10 + tx * v11))
    status = np.full(lon.shape, OK, dtype=np.int8)
    status[inside & bad] = NODATA_NEIGHBOR
    status[~inside] = OUT_OF_HULL
    out = np.where(status == OK, out, np.nan)
    return out, status


def bilinear_sample(grid: RasterGrid, lon: float, lat: float) -> float:
    """Scalar form of :func:`sample_grid`; NaN marks an unresolvable point."""
    v, _ = sample_grid(grid, lon, lat)
    return float(v[0])


@dataclass(frozen=True, eq=False)
class Oversampled:
    """Model values at the resolvable pixels plus the exclusion list."""

    ids: np.ndarray
    model_value: np.ndarray
    excluded_ids: np.ndarray
    excluded_reason: tuple

    @property
    def exclusions(self):
        return list(zip(self.excluded_ids.tolist(), self.excluded_reason))


def oversample_model(grid: RasterGrid, fld: VelocityField) -> Oversampled:
    values, status = sample_grid(grid, fld.lon, fld.lat)
    ok = status == OK
    if not ok.any():
        raise EmptyOverlapError(
            f"none of the {len(fld)} pixels falls inside the global grid's valid area")
    return Oversampled(
        ids=fld.ids[ok].copy(),
        model_value=values[ok],
        excluded_ids=fld.ids[~ok].copy(),
        excluded_reason=tuple(REASONS[int(s)] for s in status[~ok]),
    )


@dataclass(frozen=True, eq=False)
class DifferenceField:
    """Per-pixel ``delta = model - local`` over the resolvable pixels."""

    ids: np.ndarray
    lon: np.ndarray
    lat: np.ndarray
    delta: np.ndarray
    excluded_count: int

    def __len__(self):
        return self.ids.size


def difference_field(fld: VelocityField, model: Oversampled) -> DifferenceField:
    """Form ``delta_i = model_i - value_i`` for every pixel in ``model``.

    A positive delta means the global model sits above the local map there;
    adding the fitted delta surface back therefore moves the field toward the
    global frame.
    """
    ids = np.asarray(model.ids)
    mv = np.asarray(model.model_value, dtype=float)
    if ids.shape != mv.shape:
        raise AlignmentError("model ids and values differ in length")
    if np.unique(ids).size != ids.size:
        raise AlignmentError("model values contain repeated pixel ids")
    order = np.argsort(fld.ids, kind="stable")
    pos = np.searchsorted(fld.ids, ids, sorter=order)
    pos = np.clip(pos, 0, len(fld) - 1)
    idx = order[pos]
    if not np.array_equal(fld.ids[idx], ids):
        missing = ids[fld.ids[idx] != ids]
        raise AlignmentError(f"model values refer to pixel(s) not in the field, e.g. {int(missing[0])}")
    if not np.all(np.isfinite(mv)):
        raise AlignmentError("model values must be finite")
    delta = mv - fld.value[idx]
    return DifferenceField(ids.copy(), fld.lon[idx], fld.lat[idx], delta,
                           excluded_count=len(fld) - ids.size)
