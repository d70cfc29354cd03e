"""Point fields, rasters and GNSS tables, with their text formats.

Three carriers move data through the pipeline:

* :class:`VelocityField` -- scattered pixels with a vertical rate in mm/yr,
  read from a ``lon,lat,value[,incidence]`` CSV.
* :class:`RasterGrid` -- a regular geographic grid in ESRI ASCII format,
  used for the coarse global VLM model.
* :class:`GnssStationSet` -- GNSS vertical rates from an
  ``id,lon,lat,vu,sigma,span`` CSV.

Positive rates are uplift. All objects are immutable once built; their
arrays are flagged read-only.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass
from typing import IO, Optional, Union

import numpy as np

from .errors import FieldValidationError, ParseError

FRAMES = ("local", "global")
DEFAULT_NODATA = -9999.0
DEFAULT_MAX_INCIDENCE = 60.0

TextSource = Union[str, IO[str]]


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def format_float(x: float, digits: Optional[int] = None) -> str:
    """Format ``x`` for text output.

    With ``digits=None`` the shortest string that round-trips exactly is
    used; otherwise ``digits`` significant digits.
    """
    x = float(x)
    if digits is None:
        return repr(x)
    return f"{x:.{digits}g}"


def _as_stream(source: TextSource) -> IO[str]:
    if isinstance(source, str):
        return io.StringIO(source)
    return source


# --------------------------------------------------------------------------
# VelocityField
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class VelocityField:
    """Scattered VLM samples.

    ``ids`` default to ``0..n-1``. ``incidence`` (degrees) is optional and is
    only needed for line-of-sight conversion.
    """

    lon: np.ndarray
    lat: np.ndarray
    value: np.ndarray
    ids: Optional[np.ndarray] = None
    incidence: Optional[np.ndarray] = None
    frame: str = "local"

    def __post_init__(self):
        lon = _frozen(self.lon)
        lat = _frozen(self.lat)
        value = _frozen(self.value)
        n = lon.size
        if lon.ndim != 1 or lat.shape != lon.shape or value.shape != lon.shape:
            raise FieldValidationError("lon, lat and value must be 1-D arrays of equal length")
        if n == 0:
            raise FieldValidationError("velocity field is empty")
        ids = np.arange(n) if self.ids is None else self.ids
        ids = _frozen(ids, dtype=np.int64)
        if ids.shape != lon.shape:
            raise FieldValidationError("ids must match the number of samples")
        if np.unique(ids).size != n:
            raise FieldValidationError("pixel ids are not unique")
        if not np.all(np.isfinite(value)):
            bad = int(np.flatnonzero(~np.isfinite(value))[0])
            raise FieldValidationError(f"non-finite value at pixel {int(ids[bad])}")
        _check_coords(lon, lat, ids)
        inc = None
        if self.incidence is not None:
            inc = _frozen(self.incidence)
            if inc.shape != lon.shape:
                raise FieldValidationError("incidence must match the number of samples")
            ok = np.isfinite(inc) & (inc >= 0.0) & (inc < 90.0)
            if not np.all(ok):
                bad = int(np.flatnonzero(~ok)[0])
                raise FieldValidationError(
                    f"incidence {inc[bad]!r} outside [0, 90) at pixel {int(ids[bad])}")
        if self.frame not in FRAMES:
            raise FieldValidationError(f"frame must be one of {FRAMES}, got {self.frame!r}")
        for name, arr in (("lon", lon), ("lat", lat), ("value", value), ("ids", ids),
                          ("incidence", inc)):
            object.__setattr__(self, name, arr)

    def __len__(self):
        return self.lon.size

    def replace(self, **changes) -> "VelocityField":
        kw = dict(lon=self.lon, lat=self.lat, value=self.value, ids=self.ids,
                  incidence=self.incidence, frame=self.frame)
        kw.update(changes)
        return VelocityField(**kw)


def _check_coords(lon, lat, ids):
    ok_lat = np.isfinite(lat) & (lat >= -90.0) & (lat <= 90.0)
    ok_lon = np.isfinite(lon) & (lon >= -180.0) & (lon < 180.0)
    if not np.all(ok_lat):
        bad = int(np.flatnonzero(~ok_lat)[0])
        raise FieldValidationError(f"latitude {lat[bad]!r} out of range at pixel {int(ids[bad])}")
    if not np.all(ok_lon):
        bad = int(np.flatnonzero(~ok_lon)[0])
        raise FieldValidationError(f"longitude {lon[bad]!r} out of range at pixel {int(ids[bad])}")


def _header(reader, required, source_name):
    for raw in reader:
        if not raw or all(not c.strip() for c in raw):
            continue
        names = [c.strip().lower() for c in raw]
        names[0] = names[0].lstrip("\ufeff")
        missing = [r for r in required if r not in names]
        if missing:
            raise ParseError(f"{source_name} header lacks column(s): {', '.join(missing)}")
        return names
    return None


def _row_floats(row, cols, lineno):
    out = []
    for name, idx in cols:
        try:
            token = row[idx].strip()
        except IndexError:
            raise ParseError(f"expected column {name!r}, row has {len(row)} fields", lineno)
        try:
            out.append(float(token))
        except ValueError:
            raise ParseError(f"cannot parse {name}={token!r} as a number", lineno)
    return out


def parse_point_field(source: TextSource, has_incidence: Optional[bool] = None,
                      frame: str = "local") -> VelocityField:
    """Parse a ``lon,lat,value[,incidence]`` CSV into a :class:`VelocityField`.

    ``has_incidence=None`` uses the incidence column when the header has one.
    ``True`` requires it. Ids are assigned in input order.
    """
    reader = csv.reader(_as_stream(source))
    required = ["lon", "lat", "value"] + (["incidence"] if has_incidence else [])
    names = _header(reader, required, "point file")
    if names is None:
        raise ParseError("point file is empty")
    use_inc = "incidence" in names if has_incidence is None else bool(has_incidence)
    cols = [(c, names.index(c)) for c in ("lon", "lat", "value")]
    if use_inc:
        cols.append(("incidence", names.index("incidence")))

    rows = []
    lineno = 0
    for raw in reader:
        if not raw or all(not c.strip() for c in raw):
            continue
        lineno += 1
        vals = _row_floats(raw, cols, lineno)
        lon, lat, value = vals[:3]
        if not math.isfinite(value):
            raise ParseError(f"non-finite value {value!r}", lineno)
        if not (-90.0 <= lat <= 90.0):
            raise ParseError(f"latitude {lat!r} out of range [-90, 90]", lineno)
        if not (-180.0 <= lon < 180.0):
            raise ParseError(f"longitude {lon!r} out of range [-180, 180)", lineno)
        if use_inc and not (0.0 <= vals[3] < 90.0):
            raise ParseError(f"incidence {vals[3]!r} outside [0, 90)", lineno)
        rows.append(vals)
    if not rows:
        raise ParseError("point file has no data rows")
    a = np.asarray(rows, dtype=float)
    return VelocityField(a[:, 0], a[:, 1], a[:, 2],
                         incidence=a[:, 3] if use_inc else None, frame=frame)


def write_point_field(fld: VelocityField, stream: IO[str], digits: Optional[int] = None,
                      with_incidence: Optional[bool] = None) -> None:
    """Write ``fld`` as point CSV. Row order follows the field's sample order."""
    if with_incidence is None:
        with_incidence = fld.incidence is not None
    stream.write("lon,lat,value,incidence\n" if with_incidence else "lon,lat,value\n")
    f = lambda x: format_float(x, digits)  # noqa: E731
    for i in range(len(fld)):
        parts = [f(fld.lon[i]), f(fld.lat[i]), f(fld.value[i])]
        if with_incidence:
            parts.append(f(fld.incidence[i]))
        stream.write(",".join(parts) + "\n")


def los_to_vertical(fld: VelocityField, max_incidence: float = DEFAULT_MAX_INCIDENCE,
                    inclusive: bool = False) -> VelocityField:
    """Convert line-of-sight rates to vertical by dividing by cos(incidence).

    Incidence at or above ``max_incidence`` is rejected; ``inclusive=True``
    accepts the boundary value itself.
    """
    if fld.incidence is None:
        raise FieldValidationError("line-of-sight conversion needs an incidence angle per pixel")
    inc = fld.incidence
    bad = inc > max_incidence if inclusive else inc >= max_incidence
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise FieldValidationError(
            f"incidence {inc[i]!r} deg at pixel {int(fld.ids[i])} exceeds the "
            f"{max_incidence!r} deg guard")
    return fld.replace(value=fld.value / np.cos(np.deg2rad(inc)))


def vertical_to_los(fld: VelocityField) -> VelocityField:
    """Inverse of :func:`los_to_vertical`."""
    if fld.incidence is None:
        raise FieldValidationError("line-of-sight conversion needs an incidence angle per pixel")
    return fld.replace(value=fld.value * np.cos(np.deg2rad(fld.incidence)))


# --------------------------------------------------------------------------
# RasterGrid
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RasterGrid:
    """Regular lon/lat grid. ``values[0]`` is the northernmost row.

    ``xll``/``yll`` are the lower-left corner of the lower-left cell, so the
    cell centres sit at ``xll + (j + 0.5) * cellsize``.
    """

    values: np.ndarray
    xll: float
    yll: float
    cellsize: float
    nodata: float = DEFAULT_NODATA

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2:
            raise FieldValidationError("grid values must be a 2-D array (nrows, ncols)")
        nrows, ncols = v.shape
        if ncols < 2 or nrows < 2:
            raise FieldValidationError(f"grid must be at least 2x2, got {nrows}x{ncols}")
        if not (math.isfinite(self.cellsize) and self.cellsize > 0):
            raise FieldValidationError(f"cellsize must be positive, got {self.cellsize!r}")
        if not math.isfinite(self.nodata):
            raise FieldValidationError("nodata sentinel must be a finite number")
        data = v[v != self.nodata]
        if not np.all(np.isfinite(data)):
            raise FieldValidationError("grid holds non-finite values")
        object.__setattr__(self, "values", v)
        for name in ("xll", "yll", "cellsize", "nodata"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def nrows(self) -> int:
        return self.values.shape[0]

    @property
    def ncols(self) -> int:
        return self.values.shape[1]

    @property
    def x_centers(self) -> np.ndarray:
        return self.xll + (np.arange(self.ncols) + 0.5) * self.cellsize

    @property
    def y_centers(self) -> np.ndarray:
        """Cell-centre latitudes, north row first (matching ``values``)."""
        return self.yll + (self.nrows - np.arange(self.nrows) - 0.5) * self.cellsize

    @property
    def valid(self) -> np.ndarray:
        return self.values != self.nodata


_GRID_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize")


def parse_grid(source: TextSource) -> RasterGrid:
    """Parse an ESRI ASCII grid. Header keys are case-insensitive."""
    text = _as_stream(source).read()
    tokens = text.split()
    header = {}
    pos = 0
    while pos + 1 < len(tokens) and tokens[pos][:1].isalpha():
        key = tokens[pos].lower()
        if key in header:
            raise ParseError(f"duplicate grid header key {tokens[pos]!r}")
        header[key] = tokens[pos + 1]
        pos += 2
    if "xllcenter" in header and "xllcorner" not in header:
        header["_xc"] = header.pop("xllcenter")
    if "yllcenter" in header and "yllcorner" not in header:
        header["_yc"] = header.pop("yllcenter")
    need = [k for k in _GRID_KEYS
            if k not in header and not (k == "xllcorner" and "_xc" in header)
            and not (k == "yllcorner" and "_yc" in header)]
    if need:
        raise ParseError(f"grid header missing key(s): {', '.join(need)}")
    try:
        ncols = int(header["ncols"])
        nrows = int(header["nrows"])
        cellsize = float(header["cellsize"])
        nodata = float(header.get("nodata_value", DEFAULT_NODATA))
        xll = float(header["xllcorner"]) if "xllcorner" in header else float(header["_xc"]) - cellsize / 2
        yll = float(header["yllcorner"]) if "yllcorner" in header else float(header["_yc"]) - cellsize / 2
    except ValueError as exc:
        raise ParseError(f"bad grid header value: {exc}")
    if not cellsize > 0:
        raise ParseError(f"cellsize must be positive, got {cellsize!r}")
    body = tokens[pos:]
    if len(body) != ncols * nrows:
        raise ParseError(
            f"grid header declares {nrows}x{ncols}={ncols * nrows} values, found {len(body)}")
    try:
        values = np.array([float(t) for t in body]).reshape(nrows, ncols)
    except ValueError as exc:
        raise ParseError(f"bad grid value: {exc}")
    try:
        return RasterGrid(values, xll, yll, cellsize, nodata)
    except FieldValidationError as exc:
        raise ParseError(str(exc))


def write_grid(grid: RasterGrid, stream: IO[str], digits: Optional[int] = None) -> None:
    f = lambda x: format_float(x, digits)  # noqa: E731
    stream.write(f"ncols {grid.ncols}\n")
    stream.write(f"nrows {grid.nrows}\n")
    stream.write(f"xllcorner {f(grid.xll)}\n")
    stream.write(f"yllcorner {f(grid.yll)}\n")
    stream.write(f"cellsize {f(grid.cellsize)}\n")
    stream.write(f"NODATA_value {f(grid.nodata)}\n")
    for row in grid.values:
        stream.write(" ".join(f(v) for v in row) + "\n")


# --------------------------------------------------------------------------
# GNSS stations
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GnssStationSet:
    """GNSS vertical rates. ``dropped`` counts rows removed by the span filter."""

    ids: tuple
    lon: np.ndarray
    lat: np.ndarray
    vu: np.ndarray
    sigma: np.ndarray
    span: np.ndarray
    dropped: int = 0

    def __post_init__(self):
        ids = tuple(str(s) for s in self.ids)
        arrays = {k: _frozen(getattr(self, k)) for k in ("lon", "lat", "vu", "sigma", "span")}
        n = len(ids)
        if any(a.shape != (n,) for a in arrays.values()):
            raise FieldValidationError("station columns must all have one entry per station")
        if len(set(ids)) != n:
            dup = next(s for s in ids if ids.count(s) > 1)
            raise FieldValidationError(f"duplicate station id {dup!r}")
        if not (np.all(np.isfinite(arrays["vu"])) and np.all(np.isfinite(arrays["sigma"]))):
            raise FieldValidationError("station vu and sigma must be finite")
        if np.any(arrays["sigma"] < 0):
            raise FieldValidationError("station sigma must be non-negative")
        if n:
            _check_coords(arrays["lon"], arrays["lat"], np.arange(n))
        object.__setattr__(self, "ids", ids)
        for k, a in arrays.items():
            object.__setattr__(self, k, a)

    def __len__(self):
        return len(self.ids)

    @classmethod
    def empty(cls) -> "GnssStationSet":
        z = np.zeros(0)
        return cls((), z, z, z, z, z)


_GNSS_COLS = ("id", "lon", "lat", "vu", "sigma", "span")


def parse_gnss_table(source: TextSource, min_span: Optional[float] = 3.0) -> GnssStationSet:
    """Parse an ``id,lon,lat,vu,sigma,span`` CSV.

    Stations observed for less than ``min_span`` years are dropped and
    counted in ``dropped``; pass ``min_span=None`` to keep everything.
    """
    reader = csv.reader(_as_stream(source))
    names = _header(reader, _GNSS_COLS, "GNSS table")
    if names is None:
        return GnssStationSet.empty()
    idx = {c: names.index(c) for c in _GNSS_COLS}
    num_cols = [(c, idx[c]) for c in _GNSS_COLS[1:]]
    kept = []
    seen = set()
    dropped = 0
    lineno = 0
    for raw in reader:
        if not raw or all(not c.strip() for c in raw):
            continue
        lineno += 1
        try:
            sid = raw[idx["id"]].strip()
        except IndexError:
            raise ParseError("missing station id", lineno)
        if not sid:
            raise ParseError("empty station id", lineno)
        if sid in seen:
            raise ParseError(f"duplicate station id {sid!r}", lineno)
        seen.add(sid)
        lon, lat, vu, sigma, span = _row_floats(raw, num_cols, lineno)
        if not math.isfinite(vu):
            raise ParseError(f"non-finite vu {vu!r} for station {sid!r}", lineno)
        if not (math.isfinite(sigma) and sigma >= 0):
            raise ParseError(f"sigma must be finite and >= 0 for station {sid!r}", lineno)
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon < 180.0):
            raise ParseError(f"station {sid!r} coordinates out of range", lineno)
        if min_span is not None and not span >= min_span:
            dropped += 1
            continue
        kept.append((sid, lon, lat, vu, sigma, span))
    if not kept:
        s = GnssStationSet.empty()
        return GnssStationSet(s.ids, s.lon, s.lat, s.vu, s.sigma, s.span, dropped=dropped)
    cols = list(zip(*kept))
    return GnssStationSet(cols[0], *cols[1:], dropped=dropped)


def write_gnss_table(stations: GnssStationSet, stream: IO[str],
                     digits: Optional[int] = None) -> None:
    f = lambda x: format_float(x, digits)  # noqa: E731
    stream.write(",".join(_GNSS_COLS) + "\n")
    for i, sid in enumerate(stations.ids):
        stream.write(",".join([sid, f(stations.lon[i]), f(stations.lat[i]), f(stations.vu[i]),
                               f(stations.sigma[i]), f(stations.span[i])]) + "\n")


# --------------------------------------------------------------------------
# path helpers
# --------------------------------------------------------------------------

def read_point_field(path: os.PathLike, **kw) -> VelocityField:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_point_field(fh, **kw)


def read_grid(path: os.PathLike) -> RasterGrid:
    with open(path, encoding="utf-8") as fh:
        return parse_grid(fh)


def read_gnss_table(path: os.PathLike, **kw) -> GnssStationSet:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_gnss_table(fh, **kw)


def dumps(writer, obj, **kw) -> str:
    """Run one of the ``write_*`` functions into a string."""
    buf = io.StringIO()
    writer(obj, buf, **kw)
    return buf.getvalue()
