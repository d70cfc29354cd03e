"""Synthetic frame-tie scenarios with known ground truth.

A scenario draws a global-frame truth field (Gaussian subsidence/uplift
bowls on top of an optional low-order regional ramp), subtracts a known
polynomial frame distortion to obtain the "local" InSAR map, builds a coarse
global model by moving-average smoothing of the truth, and samples noisy
GNSS rates at stations near pixels.

All randomness comes from ``numpy.random.Generator(PCG64(seed))``, drawn in
a fixed order: pixel longitudes, pixel latitudes, bowl centres, bowl
amplitude scales, pixel noise, then per station (position, offset angle,
offset radius), GNSS noise and observation spans.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields as dc_fields
from typing import Dict, Tuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import AlignmentError, FieldValidationError
from .fields import GnssStationSet, RasterGrid, VelocityField
from .frame_fit import exponents, monomials
from .validation import M_PER_DEG_LAT, M_PER_DEG_LON

SNAP_RADIUS_M = 50.0
DISK_POINTS_PER_RADIUS = 8


def _degree_of(n_coeffs: int) -> int:
    for d in range(4):
        if (d + 1) * (d + 2) // 2 == n_coeffs:
            return d
    raise FieldValidationError(f"{n_coeffs} coefficients is not a full polynomial of degree 0-3")


@dataclass(frozen=True)
class ScenarioSpec:
    """Scenario parameters.

    ``distortion_coeffs`` and ``ramp_coeffs`` are graded-order polynomial
    coefficients (mm/yr) over coordinates normalised to the domain box, so
    ``x1 = x2 = 0`` is the domain centre and the edges are at +-1. Their
    length fixes the degree: 1, 3, 6 or 10 terms.
    """

    domain: Tuple[float, float, float, float] = (-74.25, -73.75, 40.55, 40.95)
    n_pixels: int = 20000
    distortion_coeffs: Tuple[float, ...] = (1.8, 0.3, -0.2)
    ramp_coeffs: Tuple[float, ...] = (-1.0, 0.3, 0.2)
    n_bowls: int = 6
    bowl_amplitude: float = 2.0
    bowl_radius: float = 1.5
    noise_sigma: float = 0.05
    model_cellsize: float = 0.1
    model_smoothing_radius: float = 10.0
    n_gnss: int = 20
    gnss_sigma: float = 0.05
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "domain", tuple(float(v) for v in self.domain))
        object.__setattr__(self, "distortion_coeffs", tuple(float(v) for v in self.distortion_coeffs))
        object.__setattr__(self, "ramp_coeffs", tuple(float(v) for v in self.ramp_coeffs))
        lo_x, hi_x, lo_y, hi_y = self.domain
        if not (-180 <= lo_x < hi_x < 180 and -90 <= lo_y < hi_y <= 90):
            raise FieldValidationError(f"invalid domain {self.domain}")
        if self.n_pixels < 100:
            raise FieldValidationError(f"n_pixels must be >= 100, got {self.n_pixels}")
        if not self.model_cellsize > 0:
            raise FieldValidationError("model_cellsize must be positive")
        if not self.model_smoothing_radius > 0:
            raise FieldValidationError("model_smoothing_radius must be positive")
        for name in ("noise_sigma", "gnss_sigma", "bowl_radius"):
            if not getattr(self, name) >= 0:
                raise FieldValidationError(f"{name} must be non-negative")
        if self.n_bowls < 0 or self.n_gnss < 0:
            raise FieldValidationError("n_bowls and n_gnss must be non-negative")
        _degree_of(len(self.distortion_coeffs))
        if self.ramp_coeffs:
            _degree_of(len(self.ramp_coeffs))
        if self.n_bowls:
            w_km, h_km = self.extent_km
            if not self.bowl_radius > 0:
                raise FieldValidationError("bowl_radius must be positive when n_bowls > 0")
            if 2 * self.bowl_radius >= min(w_km, h_km):
                raise FieldValidationError(
                    f"bowls of radius {self.bowl_radius} km do not fit a "
                    f"{w_km:.1f} x {h_km:.1f} km domain")

    @property
    def center(self) -> Tuple[float, float]:
        lo_x, hi_x, lo_y, hi_y = self.domain
        return 0.5 * (lo_x + hi_x), 0.5 * (lo_y + hi_y)

    @property
    def km_per_deg(self) -> Tuple[float, float]:
        lat0 = self.center[1]
        return M_PER_DEG_LON * math.cos(math.radians(lat0)) / 1000.0, M_PER_DEG_LAT / 1000.0

    @property
    def extent_km(self) -> Tuple[float, float]:
        lo_x, hi_x, lo_y, hi_y = self.domain
        kx, ky = self.km_per_deg
        return (hi_x - lo_x) * kx, (hi_y - lo_y) * ky

    @property
    def distortion_degree(self) -> int:
        return _degree_of(len(self.distortion_coeffs))

    def domain_coords(self, lon, lat):
        lo_x, hi_x, lo_y, hi_y = self.domain
        cx, cy = self.center
        return ((np.asarray(lon, dtype=float) - cx) / (0.5 * (hi_x - lo_x)),
                (np.asarray(lat, dtype=float) - cy) / (0.5 * (hi_y - lo_y)))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("domain", "distortion_coeffs", "ramp_coeffs"):
            d[k] = list(d[k])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        known = {f.name for f in dc_fields(cls)}
        extra = set(d) - known
        if extra:
            raise FieldValidationError(f"unknown scenario field(s): {', '.join(sorted(extra))}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioSpec":
        return cls.from_dict(json.loads(text))


def _poly(coeffs, x1, x2):
    if not coeffs:
        return np.zeros(np.shape(x1))
    return monomials(x1, x2, _degree_of(len(coeffs))) @ np.asarray(coeffs)


@dataclass(frozen=True, eq=False)
class Scenario:
    spec: ScenarioSpec
    truth: VelocityField
    local: VelocityField
    coarse_model: RasterGrid
    gnss: GnssStationSet
    bowl_lon: np.ndarray
    bowl_lat: np.ndarray
    bowl_amp: np.ndarray

    def distortion_at(self, lon, lat) -> np.ndarray:
        """Frame distortion surface; ``local = truth - distortion + noise``."""
        x1, x2 = self.spec.domain_coords(lon, lat)
        return _poly(self.spec.distortion_coeffs, np.atleast_1d(x1), np.atleast_1d(x2))

    def truth_at(self, lon, lat) -> np.ndarray:
        return _truth(self.spec, self.bowl_lon, self.bowl_lat, self.bowl_amp, lon, lat)

    def manifest(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "distortion": {
                "degree": self.spec.distortion_degree,
                "coeffs": list(self.spec.distortion_coeffs),
                "exponents": [list(e) for e in exponents(self.spec.distortion_degree)],
                "coords": "normalised to the domain box: x1=(lon-lon_c)/half_width, "
                          "x2=(lat-lat_c)/half_height",
                "center": list(self.spec.center),
            },
            "bowls": [{"lon": float(a), "lat": float(b), "amplitude": float(c)}
                      for a, b, c in zip(self.bowl_lon, self.bowl_lat, self.bowl_amp)],
            "rng": "numpy PCG64",
        }


def _truth(spec, blon, blat, bamp, lon, lat):
    lon = np.atleast_1d(np.asarray(lon, dtype=float))
    lat = np.atleast_1d(np.asarray(lat, dtype=float))
    x1, x2 = spec.domain_coords(lon, lat)
    out = _poly(spec.ramp_coeffs, x1, x2)
    if len(bamp):
        kx, ky = spec.km_per_deg
        s2 = 2.0 * spec.bowl_radius ** 2
        for bx, by, a in zip(blon, blat, bamp):
            d2 = ((lon - bx) * kx) ** 2 + ((lat - by) * ky) ** 2
            out = out + a * np.exp(-d2 / s2)
    return out


def _disk_offsets_km(radius_km):
    n = DISK_POINTS_PER_RADIUS
    g = (np.arange(-n, n + 1) / n) * radius_km
    ox, oy = np.meshgrid(g, g)
    inside = ox ** 2 + oy ** 2 <= radius_km ** 2 * (1 + 1e-12)
    return ox[inside], oy[inside]


def moving_average(spec, blon, blat, bamp, lon, lat) -> np.ndarray:
    """Disk average of the truth field around each ``(lon, lat)``."""
    kx, ky = spec.km_per_deg
    ox, oy = _disk_offsets_km(spec.model_smoothing_radius)
    lon = np.asarray(lon, dtype=float).ravel()
    lat = np.asarray(lat, dtype=float).ravel()
    qx = lon[:, None] + ox[None, :] / kx
    qy = lat[:, None] + oy[None, :] / ky
    vals = _truth(spec, blon, blat, bamp, qx.ravel(), qy.ravel()).reshape(qx.shape)
    return vals.mean(axis=1)


def make_scenario(spec: ScenarioSpec) -> Scenario:
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    lo_x, hi_x, lo_y, hi_y = spec.domain
    kx, ky = spec.km_per_deg

    lon = rng.uniform(lo_x, hi_x, spec.n_pixels)
    lat = rng.uniform(lo_y, hi_y, spec.n_pixels)

    # keep bowl centres two radii inside the domain when it is large enough
    mx = min(2 * spec.bowl_radius / kx, 0.25 * (hi_x - lo_x))
    my = min(2 * spec.bowl_radius / ky, 0.25 * (hi_y - lo_y))
    blon = rng.uniform(lo_x + mx, hi_x - mx, spec.n_bowls)
    blat = rng.uniform(lo_y + my, hi_y - my, spec.n_bowls)
    sign = np.where(np.arange(spec.n_bowls) % 2 == 0, 1.0, -1.0)
    bamp = sign * spec.bowl_amplitude * rng.uniform(0.5, 1.0, spec.n_bowls)

    truth_v = _truth(spec, blon, blat, bamp, lon, lat)
    x1, x2 = spec.domain_coords(lon, lat)
    distortion = _poly(spec.distortion_coeffs, x1, x2)
    noise = spec.noise_sigma * rng.standard_normal(spec.n_pixels)
    truth = VelocityField(lon, lat, truth_v, frame="global")
    local = VelocityField(lon, lat, truth_v - distortion + noise, frame="local")

    # coarse grid: cell centres from one cell outside the domain on each side
    c = spec.model_cellsize
    nx = int(math.ceil((hi_x - lo_x) / c - 1e-9)) + 3
    ny = int(math.ceil((hi_y - lo_y) / c - 1e-9)) + 3
    xll, yll = lo_x - 1.5 * c, lo_y - 1.5 * c
    xc = xll + (np.arange(nx) + 0.5) * c
    yc = yll + (ny - np.arange(ny) - 0.5) * c
    gx, gy = np.meshgrid(xc, yc)
    coarse = moving_average(spec, blon, blat, bamp, gx, gy).reshape(ny, nx)
    grid = RasterGrid(coarse, xll, yll, c)

    gnss = _make_stations(spec, rng, lon, lat, blon, blat, bamp)
    return Scenario(spec, truth, local, grid, gnss, blon, blat, bamp)


def _make_stations(spec, rng, lon, lat, blon, blat, bamp) -> GnssStationSet:
    if spec.n_gnss == 0:
        return GnssStationSet.empty()
    lo_x, hi_x, lo_y, hi_y = spec.domain
    mx = M_PER_DEG_LON * math.cos(math.radians(spec.center[1]))
    tree = cKDTree(np.column_stack([lon * mx, lat * M_PER_DEG_LAT]))
    slon = np.empty(spec.n_gnss)
    slat = np.empty(spec.n_gnss)
    for k in range(spec.n_gnss):
        px, py = rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y)
        theta = rng.uniform(0.0, 2 * math.pi)
        r = SNAP_RADIUS_M * math.sqrt(rng.uniform())
        _, i = tree.query([px * mx, py * M_PER_DEG_LAT])
        slon[k] = lon[i] + r * math.cos(theta) / mx
        slat[k] = lat[i] + r * math.sin(theta) / M_PER_DEG_LAT
    vu = _truth(spec, blon, blat, bamp, slon, slat) + spec.gnss_sigma * rng.standard_normal(spec.n_gnss)
    span = rng.uniform(3.0, 8.0, spec.n_gnss)
    ids = tuple(f"G{k:03d}" for k in range(spec.n_gnss))
    return GnssStationSet(ids, slon, slat, vu, np.full(spec.n_gnss, spec.gnss_sigma), span)


def scenario_error(scenario: Scenario, transformed: VelocityField) -> Dict[str, float]:
    """Pixel-wise RMSE and MAE of ``transformed`` against the scenario truth."""
    truth = scenario.truth
    if len(transformed) != len(truth) or not np.array_equal(np.sort(transformed.ids), truth.ids):
        raise AlignmentError("transformed field does not carry the scenario's pixel ids")
    value = transformed.value[np.argsort(transformed.ids, kind="stable")]
    e = value - truth.value
    return {"rmse_vs_truth": float(np.sqrt(np.mean(e * e))),
            "mae_vs_truth": float(np.mean(np.abs(e)))}
