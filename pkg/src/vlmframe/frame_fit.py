"""Low-order 2-D polynomial fits to the model-minus-local difference.

The fitted surface is what separates the local frame from the global one.
Coordinates are rescaled onto [-1, 1] before the monomials are formed, and
the least-squares problem is solved through a QR factorisation of the
rescaled design matrix, so degree-3 fits over geographic coordinates stay
well conditioned.

Monomials come in graded order; within degree ``j`` the power of the second
coordinate rises from 0 to ``j``::

    1, x1, x2, x1^2, x1*x2, x2^2, x1^3, x1^2*x2, x1*x2^2, x2^3
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import FieldValidationError, RankDeficientError
from .fields import VelocityField
from .resample import DifferenceField

DEGREES = (1, 2, 3)
COND_LIMIT = 1e12
SCALE_FLOOR = 1e-9
MODEL_FORMAT = "vlmframe.polynomial"
MODEL_VERSION = 1


def n_terms(degree: int) -> int:
    """Number of coefficients of a full bivariate polynomial of ``degree``."""
    return (degree + 1) * (degree + 2) // 2


def exponents(degree: int):
    """``(p1, p2)`` exponent pairs in graded monomial order."""
    return [(j - p, p) for j in range(degree + 1) for p in range(j + 1)]


@dataclass(frozen=True)
class NormalizationParams:
    """Affine map ``x1 = (lon - lon0) / sx``, ``x2 = (lat - lat0) / sy``."""

    lon0: float
    lat0: float
    sx: float
    sy: float

    def __post_init__(self):
        if not (self.sx > 0 and self.sy > 0):
            raise FieldValidationError("normalisation scales must be positive")

    def apply(self, lon, lat) -> Tuple[np.ndarray, np.ndarray]:
        lon = np.asarray(lon, dtype=float)
        lat = np.asarray(lat, dtype=float)
        return (lon - self.lon0) / self.sx, (lat - self.lat0) / self.sy

    @classmethod
    def identity(cls) -> "NormalizationParams":
        return cls(0.0, 0.0, 1.0, 1.0)


def normalize_coords(lon, lat):
    """Centre on the bounding-box midpoint and scale by half the range.

    Every input point maps into [-1, 1] on both axes. Half-ranges below
    ``1e-9`` degrees are floored to avoid division by zero.
    """
    lon = np.asarray(lon, dtype=float)
    lat = np.asarray(lat, dtype=float)
    if lon.size == 0:
        raise FieldValidationError("cannot normalise an empty coordinate set")
    lo_x, hi_x = float(lon.min()), float(lon.max())
    lo_y, hi_y = float(lat.min()), float(lat.max())
    norm = NormalizationParams(
        lon0=0.5 * (lo_x + hi_x),
        lat0=0.5 * (lo_y + hi_y),
        sx=max(0.5 * (hi_x - lo_x), SCALE_FLOOR),
        sy=max(0.5 * (hi_y - lo_y), SCALE_FLOOR),
    )
    x1, x2 = norm.apply(lon, lat)
    # rounding can overshoot the unit box by one ulp
    return norm, np.clip(x1, -1.0, 1.0), np.clip(x2, -1.0, 1.0)


def monomials(x1, x2, degree: int) -> np.ndarray:
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    cols = [x1 ** a * x2 ** b for a, b in exponents(degree)]
    return np.stack(cols, axis=1)


def _check_degree(degree):
    if degree not in DEGREES:
        raise ValueError(f"polynomial degree must be one of {DEGREES}, got {degree!r}")


def build_design_matrix(x1, x2, degree: int) -> np.ndarray:
    """Design matrix of shape ``(n, n_terms(degree))``."""
    _check_degree(degree)
    X = monomials(x1, x2, degree)
    if X.shape[0] < X.shape[1]:
        raise RankDeficientError(
            f"degree {degree} needs at least {X.shape[1]} points, got {X.shape[0]}")
    return X


def condition_number(matrix) -> float:
    """Ratio of extreme singular values; ``inf`` when numerically rank deficient."""
    A = np.asarray(matrix, dtype=float)
    if A.ndim != 2 or A.size == 0:
        raise ValueError("condition_number expects a non-empty 2-D matrix")
    s = np.linalg.svd(A, compute_uv=False)
    smax, smin = float(s[0]), float(s[-1])
    if smax == 0.0 or smin <= smax * max(A.shape) * np.finfo(float).eps:
        return float("inf")
    return smax / smin


@dataclass(frozen=True)
class PolynomialModel:
    """Fitted frame-difference surface.

    ``coeffs`` act on normalised coordinates (see ``norm``). ``rss`` is the
    residual sum of squares over the ``n_fit`` fit pixels, in (mm/yr)^2;
    ``cond`` is the condition number of the normalised design matrix.
    """

    degree: int
    coeffs: Tuple[float, ...]
    norm: NormalizationParams
    cond: float = 1.0
    rss: float = 0.0
    n_fit: int = 0

    def __post_init__(self):
        _check_degree(self.degree)
        coeffs = tuple(float(c) for c in self.coeffs)
        if len(coeffs) != n_terms(self.degree):
            raise FieldValidationError(
                f"degree {self.degree} needs {n_terms(self.degree)} coefficients, got {len(coeffs)}")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def n_params(self) -> int:
        return n_terms(self.degree)

    @property
    def label(self) -> str:
        return f"D{self.degree}"

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "degree": self.degree,
            "coeffs": list(self.coeffs),
            "norm": {"lon0": self.norm.lon0, "lat0": self.norm.lat0,
                     "sx": self.norm.sx, "sy": self.norm.sy},
            "cond": self.cond,
            "rss": self.rss,
            "n_fit": self.n_fit,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PolynomialModel":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a polynomial model document: format={d.get('format')!r}")
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')!r}")
        return cls(degree=int(d["degree"]), coeffs=tuple(d["coeffs"]),
                   norm=NormalizationParams(**d["norm"]), cond=float(d["cond"]),
                   rss=float(d["rss"]), n_fit=int(d["n_fit"]))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "PolynomialModel":
        return cls.from_dict(json.loads(text))


def fit_polynomial(diff: DifferenceField, degree: int) -> PolynomialModel:
    """Least-squares fit of a degree-``degree`` surface to ``diff.delta``.

    Raises :class:`RankDeficientError` when there are too few points or the
    normalised design matrix has condition number above ``1e12``.
    """
    _check_degree(degree)
    m = n_terms(degree)
    if len(diff) < m:
        raise RankDeficientError(f"degree {degree} needs at least {m} points, got {len(diff)}")
    norm, x1, x2 = normalize_coords(diff.lon, diff.lat)
    X = build_design_matrix(x1, x2, degree)
    cond = condition_number(X)
    if not cond <= COND_LIMIT:
        raise RankDeficientError(
            f"degree {degree} design matrix is rank deficient (condition number {cond:.3g})")
    y = np.asarray(diff.delta, dtype=float)
    Q, R = np.linalg.qr(X, mode="reduced")
    beta = scipy.linalg.solve_triangular(R, Q.T @ y)
    resid = y - X @ beta
    return PolynomialModel(degree, tuple(beta), norm, cond=cond,
                           rss=float(resid @ resid), n_fit=int(len(diff)))


def evaluate_polynomial(model: PolynomialModel, lon, lat) -> np.ndarray:
    x1, x2 = model.norm.apply(lon, lat)
    return monomials(x1, x2, model.degree) @ np.asarray(model.coeffs)


def is_extrapolated(model: PolynomialModel, lon, lat, tol: float = 1e-9) -> np.ndarray:
    """True where a point lies outside the bounding box of the fit pixels."""
    x1, x2 = model.norm.apply(lon, lat)
    return (np.abs(np.atleast_1d(x1)) > 1 + tol) | (np.abs(np.atleast_1d(x2)) > 1 + tol)


@dataclass(frozen=True, eq=False)
class Correction:
    """Per-pixel audit record of a transformation."""

    ids: np.ndarray
    correction: np.ndarray
    applied: np.ndarray
    extrapolated: np.ndarray


def pixel_corrections(fld: VelocityField, model: PolynomialModel,
                      uncorrected_ids: Optional[Sequence[int]] = None) -> Correction:
    """Evaluate the correction at every pixel of ``fld``.

    Pixels listed in ``uncorrected_ids`` (typically the ones the global grid
    could not resolve) receive zero correction and ``applied=False``.
    """
    corr = evaluate_polynomial(model, fld.lon, fld.lat)
    applied = np.ones(len(fld), dtype=bool)
    if uncorrected_ids is not None and len(uncorrected_ids):
        applied = ~np.isin(fld.ids, np.asarray(uncorrected_ids, dtype=np.int64))
        corr = np.where(applied, corr, 0.0)
    return Correction(fld.ids.copy(), corr, applied, is_extrapolated(model, fld.lon, fld.lat))


def transform_field(fld: VelocityField, model: PolynomialModel,
                    uncorrected_ids: Optional[Sequence[int]] = None) -> VelocityField:
    """Add the fitted surface to the local values and tag the result global."""
    c = pixel_corrections(fld, model, uncorrected_ids)
    return fld.replace(value=fld.value + c.correction, frame="global")
