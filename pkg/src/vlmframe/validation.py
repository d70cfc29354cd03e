"""GNSS collocation and the model comparison table.

Each GNSS station is paired with the mean rate of the pixels within a fixed
radius (100 m by default). Residuals ``insar - gnss`` then feed RMSE, MAE,
STD and, for the fitted models, AIC and BIC.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Dict, IO, List, Mapping, Optional

import numpy as np

from .errors import AlignmentError, EmptyCollocationError
from .fields import GnssStationSet, VelocityField, format_float
from .frame_fit import n_terms

M_PER_DEG_LON = 111320.0
M_PER_DEG_LAT = 110540.0
DEFAULT_RADIUS = 100.0
LOCAL_LABEL = "Local InSAR"
REPORT_FORMAT = "vlmframe.report"
REPORT_VERSION = 1


@dataclass(frozen=True)
class CollocationPair:
    station_id: str
    gnss_vu: float
    insar_mean: float
    pixel_count: int

    @property
    def residual(self) -> float:
        return self.insar_mean - self.gnss_vu


@dataclass(frozen=True)
class Collocation:
    pairs: tuple
    excluded: tuple

    def __iter__(self):
        return iter(self.pairs)

    def __len__(self):
        return len(self.pairs)


def local_offsets_m(lon, lat, lon0: float, lat0: float):
    """Equirectangular east/north offsets in metres from ``(lon0, lat0)``."""
    dlon = (np.asarray(lon, dtype=float) - lon0 + 180.0) % 360.0 - 180.0
    dx = dlon * M_PER_DEG_LON * math.cos(math.radians(lat0))
    dy = (np.asarray(lat, dtype=float) - lat0) * M_PER_DEG_LAT
    return dx, dy


def collocate(fld: VelocityField, gnss: GnssStationSet,
              radius: float = DEFAULT_RADIUS) -> Collocation:
    """Pair every station with the mean of the pixels within ``radius`` metres.

    Stations without any pixel in range are listed in ``excluded``. Pairs
    come out sorted by station id.
    """
    if len(gnss) == 0:
        raise EmptyCollocationError("no GNSS stations to collocate")
    if not radius > 0:
        raise ValueError("collocation radius must be positive")
    # cheap prefilter in degrees, widened for the cosine factor
    pad_lat = radius / M_PER_DEG_LAT
    order = np.argsort(fld.lat, kind="stable")
    lat_sorted = fld.lat[order]
    pairs, excluded = [], []
    for k in sorted(range(len(gnss)), key=lambda i: gnss.ids[i]):
        lo = np.searchsorted(lat_sorted, gnss.lat[k] - pad_lat, side="left")
        hi = np.searchsorted(lat_sorted, gnss.lat[k] + pad_lat, side="right")
        cand = order[lo:hi]
        dx, dy = local_offsets_m(fld.lon[cand], fld.lat[cand], gnss.lon[k], gnss.lat[k])
        hit = cand[dx * dx + dy * dy <= radius * radius]
        if hit.size == 0:
            excluded.append(gnss.ids[k])
            continue
        pairs.append(CollocationPair(gnss.ids[k], float(gnss.vu[k]),
                                     float(np.mean(fld.value[hit])), int(hit.size)))
    if not pairs:
        raise EmptyCollocationError(
            f"none of the {len(gnss)} stations has a pixel within {radius:g} m")
    return Collocation(tuple(pairs), tuple(excluded))


def _residuals(pairs) -> np.ndarray:
    if isinstance(pairs, np.ndarray):
        return pairs.astype(float)
    items = list(pairs)
    if items and isinstance(items[0], CollocationPair):
        return np.array([p.residual for p in items], dtype=float)
    return np.asarray(items, dtype=float)


def residual_metrics(pairs) -> Dict[str, float]:
    """RMSE, MAE and sample STD of ``insar - gnss``.

    ``pairs`` may be collocation pairs or the residuals themselves.
    """
    r = _residuals(pairs)
    if r.size < 2:
        raise ValueError(f"need at least 2 residuals, got {r.size}")
    return {
        "rmse": float(np.linalg.norm(r) / math.sqrt(r.size)),
        "mae": float(np.mean(np.abs(r))),
        "std": float(np.std(r, ddof=1)),
    }


def information_criteria(pairs, n_params: int) -> Dict[str, float]:
    """Gaussian AIC and BIC from the residual sum of squares.

    ``aic = n ln(RSS/n) + 2m`` and ``bic = n ln(RSS/n) + m ln n``. A zero RSS
    gives ``-inf`` for both, with a warning.
    """
    r = _residuals(pairs)
    n = r.size
    if n < 2:
        raise ValueError(f"need at least 2 residuals, got {n}")
    if n_params < 1:
        raise ValueError("model must have at least one parameter")
    rss = float(r @ r)
    if rss == 0.0:
        warnings.warn("residual sum of squares is zero; AIC and BIC are -inf", RuntimeWarning)
        return {"aic": -math.inf, "bic": -math.inf}
    ll = n * math.log(rss / n)
    return {"aic": ll + 2 * n_params, "bic": ll + n_params * math.log(n)}


@dataclass(frozen=True, eq=False)
class ECDF:
    """Right-continuous empirical CDF with steps at the unique values."""

    x: np.ndarray
    F: np.ndarray
    n: int

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        idx = np.searchsorted(self.x, q, side="right")
        F = np.concatenate([[0.0], self.F])
        return F[idx]

    def to_csv(self, stream: IO[str], digits: Optional[int] = None) -> None:
        stream.write("value,cdf\n")
        for a, b in zip(self.x, self.F):
            stream.write(f"{format_float(a, digits)},{format_float(b, digits)}\n")


def ecdf(values) -> ECDF:
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise ValueError("ECDF of an empty sample")
    x, counts = np.unique(v, return_counts=True)
    F = np.cumsum(counts) / v.size
    F[-1] = 1.0
    return ECDF(x, F, int(v.size))


# --------------------------------------------------------------------------
# model comparison
# --------------------------------------------------------------------------

@dataclass
class ModelRow:
    rmse: float
    mae: float
    std: float
    aic: Optional[float] = None
    bic: Optional[float] = None
    n_params: Optional[int] = None


@dataclass
class ModelReport:
    rows: Dict[str, ModelRow]
    n_stations: int
    station_ids: List[str] = field(default_factory=list)
    selected: Optional[str] = None
    radius: float = DEFAULT_RADIUS

    def to_dict(self) -> dict:
        return {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "n_stations": self.n_stations,
            "station_ids": list(self.station_ids),
            "radius_m": self.radius,
            "selected": self.selected,
            "rows": {k: asdict(v) for k, v in self.rows.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelReport":
        if d.get("format") != REPORT_FORMAT:
            raise ValueError(f"not a model report: format={d.get('format')!r}")
        rows = {k: ModelRow(**v) for k, v in d["rows"].items()}
        return cls(rows, int(d["n_stations"]), list(d["station_ids"]), d["selected"],
                   float(d["radius_m"]))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "ModelReport":
        return cls.from_dict(json.loads(text))

    def to_table(self) -> str:
        """Plain-text table with columns Model, RMSE, BIC, AIC, MAE, STD."""
        head = ["Model", "RMSE (mm/yr)", "BIC", "AIC", "MAE (mm/yr)", "STD (mm/yr)"]
        body = []
        for label, r in self.rows.items():
            ic = lambda v: "--" if v is None else f"{v:.3f}"  # noqa: E731
            body.append([label, f"{r.rmse:.4f}", ic(r.bic), ic(r.aic),
                         f"{r.mae:.4f}", f"{r.std:.4f}"])
        widths = [max(len(row[i]) for row in [head] + body) for i in range(len(head))]
        fmt = lambda row: "  ".join(c.ljust(w) if i == 0 else c.rjust(w)  # noqa: E731
                                    for i, (c, w) in enumerate(zip(row, widths)))
        lines = [fmt(head), "  ".join("-" * w for w in widths)]
        lines += [fmt(row) for row in body]
        lines.append(f"stations: {self.n_stations}   selected (lowest BIC): {self.selected}")
        return "\n".join(lines) + "\n"


def compare_models(local: VelocityField, transformed: Mapping[int, VelocityField],
                   gnss: GnssStationSet, radius: float = DEFAULT_RADIUS) -> ModelReport:
    """Score the local field and each transformed field against GNSS.

    All rows use the same stations: those collocated in every field. The
    model with the lowest BIC is selected, ties going to fewer parameters.
    """
    fields = {LOCAL_LABEL: local}
    degrees = {}
    for k in sorted(transformed):
        fld = transformed[k]
        if len(fld) != len(local) or not np.array_equal(np.sort(fld.ids), np.sort(local.ids)):
            raise AlignmentError(f"transformed field D{k} does not share the local pixel ids")
        fields[f"D{k}"] = fld
        degrees[f"D{k}"] = int(k)

    colloc = {label: {p.station_id: p for p in collocate(f, gnss, radius)}
              for label, f in fields.items()}
    common = sorted(set.intersection(*(set(c) for c in colloc.values())))
    if not common:
        raise EmptyCollocationError("no station is collocated in every compared field")

    rows = {}
    for label in fields:
        pairs = [colloc[label][s] for s in common]
        met = residual_metrics(pairs)
        row = ModelRow(**met)
        if label in degrees:
            m = n_terms(degrees[label])
            ic = information_criteria(pairs, m)
            row.aic, row.bic, row.n_params = ic["aic"], ic["bic"], m
        rows[label] = row

    fitted = [lab for lab in rows if rows[lab].bic is not None]
    selected = min(fitted, key=lambda lab: (rows[lab].bic, rows[lab].n_params)) if fitted else None
    return ModelReport(rows, len(common), common, selected, radius)
