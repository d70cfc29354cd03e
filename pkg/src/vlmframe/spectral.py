"""Radially averaged power spectra of point fields.

Points are binned onto a regular grid, demeaned, tapered with a separable
Hann window and Fourier transformed. The 2-D power ``|FFT|^2 / N`` is
reduced to a 1-D curve over logarithmically spaced radial frequency bins,
indexed by wavelength in km. The DC term is always left out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .errors import DegenerateExtentError, EmptySpectrumError
from .fields import RasterGrid, VelocityField, format_float
from .validation import M_PER_DEG_LAT, M_PER_DEG_LON

DEFAULT_BINS = 24


def rasterize_points(fld: VelocityField, cellsize: float,
                     like: Optional[RasterGrid] = None) -> RasterGrid:
    """Mean-bin the samples of ``fld`` onto a grid of ``cellsize`` degrees.

    Without ``like`` the first cell centre sits on the field's south-west
    corner and the grid is just large enough to hold every sample. With
    ``like`` its geometry is reused and samples outside it are ignored. Empty cells take the value of the nearest
    filled cell.
    """
    if like is not None:
        xll, yll, c = like.xll, like.yll, like.cellsize
        nx, ny = like.ncols, like.nrows
    else:
        if not cellsize > 0:
            raise ValueError("cellsize must be positive")
        c = float(cellsize)
        lo_x, hi_x = float(fld.lon.min()), float(fld.lon.max())
        lo_y, hi_y = float(fld.lat.min()), float(fld.lat.max())
        nx = int(math.floor((hi_x - lo_x) / c + 0.5)) + 1
        ny = int(math.floor((hi_y - lo_y) / c + 0.5)) + 1
        if nx < 2 or ny < 2:
            raise DegenerateExtentError(
                f"field extent {hi_x - lo_x:.3g} x {hi_y - lo_y:.3g} deg gives a "
                f"{ny}x{nx} grid at cellsize {c:g}; need at least 2x2")
        xll, yll = lo_x - 0.5 * c, lo_y - 0.5 * c

    j = np.floor((fld.lon - xll) / c).astype(np.int64)
    i = np.floor((fld.lat - yll) / c).astype(np.int64)
    keep = (j >= 0) & (j < nx) & (i >= 0) & (i < ny)
    flat = i[keep] * nx + j[keep]
    sums = np.bincount(flat, weights=fld.value[keep], minlength=nx * ny)
    counts = np.bincount(flat, minlength=nx * ny)
    if not counts.any():
        raise DegenerateExtentError("no sample falls inside the raster")
    grid = np.zeros(nx * ny)
    filled = counts > 0
    grid[filled] = sums[filled] / counts[filled]
    grid = grid.reshape(ny, nx)
    empty = ~filled.reshape(ny, nx)
    if empty.any():
        idx = ndimage.distance_transform_edt(empty, return_distances=False, return_indices=True)
        grid = grid[idx[0], idx[1]]
    # rows were accumulated south-first
    return RasterGrid(grid[::-1], xll, yll, c)


@dataclass(frozen=True, eq=False)
class PreparedGrid:
    values: np.ndarray
    cellsize: float
    mean_lat: float
    mean: float
    window_power: float

    @property
    def dx_km(self) -> float:
        return self.cellsize * M_PER_DEG_LON * math.cos(math.radians(self.mean_lat)) / 1000.0

    @property
    def dy_km(self) -> float:
        return self.cellsize * M_PER_DEG_LAT / 1000.0


def preprocess(grid: RasterGrid, window: bool = True) -> PreparedGrid:
    """Demean and Hann-taper ``grid``.

    ``window_power`` is the mean squared window weight, 1 with no window.
    """
    if not grid.valid.all():
        raise ValueError("fill nodata cells before spectral analysis")
    v = np.array(grid.values, dtype=float)
    mean = float(v.mean())
    # a constant grid would otherwise leave rounding residue after demeaning
    v = v - mean if v.max() > v.min() else np.zeros_like(v)
    wp = 1.0
    if window:
        w = np.outer(np.hanning(grid.nrows), np.hanning(grid.ncols))
        v *= w
        wp = float(np.mean(w * w))
    v.setflags(write=False)
    return PreparedGrid(v, grid.cellsize, float(grid.y_centers.mean()), mean, wp)


@dataclass(frozen=True, eq=False)
class PowerSpectrum2D:
    power: np.ndarray
    fx: np.ndarray
    fy: np.ndarray

    @property
    def radial_frequency(self) -> np.ndarray:
        return np.hypot(self.fx[None, :], self.fy[:, None])


def power_spectrum(prepared: PreparedGrid) -> PowerSpectrum2D:
    """``|FFT|^2 / N`` with frequency axes in cycles/km."""
    v = prepared.values
    P = np.abs(np.fft.fft2(v)) ** 2 / v.size
    fx = np.fft.fftfreq(v.shape[1], d=prepared.dx_km)
    fy = np.fft.fftfreq(v.shape[0], d=prepared.dy_km)
    return PowerSpectrum2D(P, fx, fy)


@dataclass(frozen=True, eq=False)
class SpectrumCurve:
    """1-D spectrum ordered by increasing frequency (decreasing wavelength)."""

    wavelength: np.ndarray
    power: np.ndarray
    label: str = ""
    normalized: bool = False

    def __len__(self):
        return self.wavelength.size

    def to_csv(self, stream: IO[str], digits: Optional[int] = None) -> None:
        stream.write("wavelength_km,power\n")
        for w, p in zip(self.wavelength, self.power):
            stream.write(f"{format_float(w, digits)},{format_float(p, digits)}\n")


def radial_bin_edges(spec: PowerSpectrum2D, n_bins: int = DEFAULT_BINS) -> np.ndarray:
    f = spec.radial_frequency
    fmin = float(f[f > 0].min())
    fmax = float(f.max())
    edges = np.geomspace(fmin, fmax, n_bins + 1)
    edges[0] = fmin * (1 - 1e-12)
    edges[-1] = fmax * (1 + 1e-12)
    return edges


def radial_average(spec: PowerSpectrum2D, n_bins: int = DEFAULT_BINS,
                   edges: Optional[np.ndarray] = None, label: str = "") -> SpectrumCurve:
    """Average power over annuli of ``|f|``.

    Each bin's wavelength is the reciprocal of the mean ``|f|`` of the cells
    it holds. Bins with no cells are dropped.
    """
    if edges is None:
        edges = radial_bin_edges(spec, n_bins)
    f = spec.radial_frequency.ravel()
    P = spec.power.ravel()
    nz = f > 0
    f, P = f[nz], P[nz]
    which = np.digitize(f, edges) - 1
    ok = (which >= 0) & (which < len(edges) - 1)
    nb = len(edges) - 1
    cnt = np.bincount(which[ok], minlength=nb)
    psum = np.bincount(which[ok], weights=P[ok], minlength=nb)
    fsum = np.bincount(which[ok], weights=f[ok], minlength=nb)
    used = cnt > 0
    fmean = fsum[used] / cnt[used]
    return SpectrumCurve(1.0 / fmean, psum[used] / cnt[used], label)


def normalize_spectrum(curve: SpectrumCurve) -> SpectrumCurve:
    peak = float(curve.power.max()) if len(curve) else 0.0
    if not peak > 0:
        raise EmptySpectrumError(f"spectrum {curve.label!r} has no positive power")
    return SpectrumCurve(curve.wavelength, curve.power / peak, curve.label, normalized=True)


def field_spectrum(fld: VelocityField, cellsize: float, like: Optional[RasterGrid] = None,
                   n_bins: int = DEFAULT_BINS, label: str = "", window: bool = True,
                   normalize: bool = False) -> SpectrumCurve:
    """Rasterise, preprocess, transform and radially average in one call."""
    grid = rasterize_points(fld, cellsize, like=like)
    spec = power_spectrum(preprocess(grid, window=window))
    curve = radial_average(spec, n_bins=n_bins, label=label)
    return normalize_spectrum(curve) if normalize else curve


def _band_mask(curve, band):
    lo, hi = band
    return (curve.wavelength >= lo) & (curve.wavelength <= hi)


def spectral_slope(curve: SpectrumCurve, band: Tuple[float, float]) -> float:
    """OLS slope of log10(power) against log10(wavelength) inside ``band`` (km)."""
    m = _band_mask(curve, band) & (curve.power > 0)
    if m.sum() < 3:
        raise ValueError(f"need at least 3 positive bins in band {band}, got {int(m.sum())}")
    x = np.log10(curve.wavelength[m])
    y = np.log10(curve.power[m])
    x = x - x.mean()
    return float(x @ (y - y.mean()) / (x @ x))


def log_power_distance(a: SpectrumCurve, b: SpectrumCurve,
                       band: Tuple[float, float] = (0.0, math.inf)) -> float:
    """Mean ``|log10 Pa - log10 Pb|`` over the bins both curves share in ``band``."""
    common, ia, ib = np.intersect1d(a.wavelength, b.wavelength, return_indices=True)
    keep = (common >= band[0]) & (common <= band[1]) & (a.power[ia] > 0) & (b.power[ib] > 0)
    if not keep.any():
        raise ValueError(f"curves share no positive bins in band {band}")
    return float(np.mean(np.abs(np.log10(a.power[ia][keep]) - np.log10(b.power[ib][keep]))))


def write_curve_bundle(curves: Sequence[SpectrumCurve], stream: IO[str],
                       digits: Optional[int] = None) -> None:
    """Write several curves side by side, one column per label.

    Rows are the union of wavelengths in decreasing order; a curve without a
    given bin leaves its cell empty.
    """
    waves = np.unique(np.concatenate([c.wavelength for c in curves]))[::-1]
    lookup = [dict(zip(c.wavelength.tolist(), c.power.tolist())) for c in curves]
    stream.write(",".join(["wavelength_km"] + [c.label for c in curves]) + "\n")
    for w in waves.tolist():
        cells = [format_float(w, digits)]
        for d in lookup:
            cells.append(format_float(d[w], digits) if w in d else "")
        stream.write(",".join(cells) + "\n")
