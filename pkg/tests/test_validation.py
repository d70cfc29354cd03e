import io
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vlmframe.errors import AlignmentError, EmptyCollocationError
from vlmframe.fields import GnssStationSet, VelocityField
from vlmframe.validation import (LOCAL_LABEL, M_PER_DEG_LAT, M_PER_DEG_LON, CollocationPair,
                                 ModelReport, collocate, compare_models, ecdf,
                                 information_criteria, residual_metrics)

LON0, LAT0 = -73.97, 40.70


def offset(east_m, north_m, lat=LAT0):
    return east_m / (M_PER_DEG_LON * math.cos(math.radians(lat))), north_m / M_PER_DEG_LAT


def stations(ids, lons, lats, vus):
    n = len(ids)
    return GnssStationSet(tuple(ids), lons, lats, vus, np.full(n, 0.1), np.full(n, 5.0))


def test_collocate_cluster_mean():
    dx, dy = zip(*(offset(e, n) for e, n in [(10, 0), (-30, 20), (0, -45)]))
    f = VelocityField(LON0 + np.array(dx), LAT0 + np.array(dy), [1.0, 2.0, 3.0])
    pairs = collocate(f, stations(["NYBK"], [LON0], [LAT0], [1.5])).pairs
    assert len(pairs) == 1
    assert pairs[0].insar_mean == 2.0 and pairs[0].pixel_count == 3
    assert pairs[0].residual == 0.5


def test_collocate_far_station_excluded():
    f = VelocityField([LON0, LON0], [LAT0, LAT0 + 1e-4], [1.0, 2.0])
    dlon, _ = offset(500, 0)
    res = collocate(f, stations(["A", "B"], [LON0, LON0 + dlon], [LAT0, LAT0], [0.0, 0.0]))
    assert [p.station_id for p in res] == ["A"]
    assert res.excluded == ("B",)
    with pytest.raises(EmptyCollocationError):
        collocate(f, stations(["B"], [LON0 + dlon], [LAT0], [0.0]))
    with pytest.raises(EmptyCollocationError):
        collocate(f, GnssStationSet.empty())


def test_collocate_matches_exhaustive_scan():
    rng = np.random.default_rng(0)
    n = 4000
    lon = rng.uniform(LON0 - 0.02, LON0 + 0.02, n)
    lat = rng.uniform(LAT0 - 0.02, LAT0 + 0.02, n)
    f = VelocityField(lon, lat, rng.normal(size=n))
    slon = rng.uniform(LON0 - 0.02, LON0 + 0.02, 20)
    slat = rng.uniform(LAT0 - 0.02, LAT0 + 0.02, 20)
    ids = [f"S{i:02d}" for i in range(20)][::-1]
    g = stations(ids, slon, slat, np.zeros(20))
    got = {p.station_id: p for p in collocate(f, g, radius=150.0)}
    for k, sid in enumerate(ids):
        members = []
        for i in range(n):
            dx = (lon[i] - slon[k]) * M_PER_DEG_LON * math.cos(math.radians(slat[k]))
            dy = (lat[i] - slat[k]) * M_PER_DEG_LAT
            if dx * dx + dy * dy <= 150.0 ** 2:
                members.append(f.value[i])
        if members:
            assert got[sid].pixel_count == len(members)
            assert got[sid].insar_mean == pytest.approx(np.mean(members), abs=1e-12)
        else:
            assert sid not in got
    assert list(got) == sorted(got)


def test_metric_examples():
    m = residual_metrics(np.array([1.0, -1.0]))
    assert m["rmse"] == 1.0 and m["mae"] == 1.0
    assert m["std"] == pytest.approx(math.sqrt(2), rel=1e-15)
    m = residual_metrics([0.5] * 4)
    assert (m["rmse"], m["mae"], m["std"]) == (0.5, 0.5, 0.0)
    with pytest.raises(ValueError):
        residual_metrics([1.0])


def test_metrics_accept_pairs():
    pairs = [CollocationPair("a", 1.0, 2.0, 1), CollocationPair("b", 1.0, 0.0, 1)]
    assert residual_metrics(pairs)["rmse"] == 1.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=60))
def test_metric_identities(r):
    m = residual_metrics(r)
    r = np.array(r)
    assert m["mae"] <= m["rmse"] * (1 + 1e-12) + 1e-300
    brute = math.sqrt(math.fsum(v * v for v in r) / r.size)
    assert m["rmse"] == pytest.approx(brute, rel=1e-12, abs=1e-150)
    assert m["mae"] == pytest.approx(math.fsum(abs(v) for v in r) / r.size, rel=1e-12)


def test_information_criteria_examples():
    r = np.ones(10)  # RSS = 10, n = 10
    ic = information_criteria(r, 3)
    assert ic["aic"] == 6.0
    assert ic["bic"] == pytest.approx(3 * math.log(10), rel=1e-15)
    ic6 = information_criteria(r, 6)
    assert ic6["aic"] - ic["aic"] == 6.0
    assert ic6["bic"] - ic["bic"] == pytest.approx(3 * math.log(10), rel=1e-12)


def test_information_criteria_zero_rss():
    with pytest.warns(RuntimeWarning):
        ic = information_criteria(np.zeros(5), 3)
    assert ic == {"aic": -math.inf, "bic": -math.inf}


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5).filter(lambda v: abs(v) > 1e-6), min_size=8, max_size=40),
       st.integers(1, 10), st.integers(1, 10))
def test_bic_penalises_more_than_aic(r, m1, m2):
    n = len(r)
    a, b = information_criteria(r, m1), information_criteria(r, m2)
    if m2 > m1 and n > math.e ** 2:
        assert b["bic"] - a["bic"] > b["aic"] - a["aic"]


def test_ecdf_examples():
    e = ecdf([3, 1, 2])
    assert e(2) == pytest.approx(2 / 3)
    assert e(0.5) == 0.0 and e(3) == 1.0
    c = ecdf([4.0, 4.0, 4.0])
    assert c.x.tolist() == [4.0] and c.F.tolist() == [1.0]


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=50))
def test_ecdf_properties(values):
    e = ecdf(values)
    assert np.all(np.diff(e.F) > 0) and e.F[-1] == 1.0
    q = np.linspace(-120, 120, 41)
    brute = np.array([np.mean(np.array(values) <= x) for x in q])
    np.testing.assert_allclose(e(q), brute, atol=1e-15)


def test_ecdf_shift_moves_median():
    rng = np.random.default_rng(1)
    v = rng.normal(size=501)
    assert np.median(v + 1.8) - np.median(v) == pytest.approx(1.8, abs=1e-12)
    a, b = ecdf(v), ecdf(v + 1.8)
    np.testing.assert_allclose(b.x - a.x, 1.8, atol=1e-12)
    np.testing.assert_array_equal(a.F, b.F)


def _scene(seed=0, offset_mm=1.8, n=3000, n_sta=15):
    rng = np.random.default_rng(seed)
    lon = rng.uniform(LON0 - 0.05, LON0 + 0.05, n)
    lat = rng.uniform(LAT0 - 0.05, LAT0 + 0.05, n)
    truth = 0.5 * (lon - LON0) * 10
    idx = rng.choice(n, n_sta, replace=False)
    g = stations([f"S{i}" for i in range(n_sta)], lon[idx], lat[idx],
                 truth[idx] + rng.normal(0, 0.05, n_sta))
    local = VelocityField(lon, lat, truth - offset_mm)
    return local, VelocityField(lon, lat, truth, frame="global"), g


def test_compare_identical_fields_ties_to_d1():
    local, _, g = _scene()
    rep = compare_models(local, {1: local, 2: local, 3: local}, g)
    rows = [rep.rows[k] for k in (LOCAL_LABEL, "D1", "D2", "D3")]
    for r in rows[1:]:
        assert (r.rmse, r.mae, r.std) == (rows[0].rmse, rows[0].mae, rows[0].std)
    assert rep.selected == "D1"
    assert rep.rows[LOCAL_LABEL].aic is None and rep.rows[LOCAL_LABEL].bic is None


def test_compare_offset_collapse():
    local, fixed, g = _scene()
    rep = compare_models(local, {1: fixed}, g)
    assert rep.rows[LOCAL_LABEL].mae == pytest.approx(1.8, abs=0.1)
    assert rep.rows["D1"].mae < 0.1
    assert rep.selected == "D1"


def test_compare_uses_common_stations():
    local, fixed, g = _scene()
    # move the pixels around one station away in the D1 field only; ids still align
    sid, slon, slat = g.ids[0], g.lon[0], g.lat[0]
    near = (np.abs(local.lon - slon) < 0.003) & (np.abs(local.lat - slat) < 0.003)
    moved = fixed.replace(lon=np.where(near, fixed.lon + 0.2, fixed.lon))
    rep = compare_models(local, {1: moved}, g)
    assert sid not in rep.station_ids
    assert rep.n_stations == len(g) - 1
    # adding a model leaves earlier rows untouched
    rep2 = compare_models(local, {1: moved, 2: moved}, g)
    assert rep2.rows["D1"] == rep.rows["D1"]


def test_compare_alignment_and_empty():
    local, fixed, g = _scene()
    with pytest.raises(AlignmentError):
        compare_models(local, {1: VelocityField(fixed.lon[:10], fixed.lat[:10], fixed.value[:10])}, g)
    far = stations(["X", "Y"], [10.0, 11.0], [10.0, 10.0], [0.0, 0.0])
    with pytest.raises(EmptyCollocationError):
        compare_models(local, {1: fixed}, far)


def test_report_round_trip_and_table():
    local, fixed, g = _scene()
    rep = compare_models(local, {1: fixed, 2: fixed}, g)
    back = ModelReport.from_json(rep.to_json())
    assert back == rep
    table = rep.to_table()
    head = table.splitlines()[0].split()
    assert head[0] == "Model" and "RMSE" in head and head.index("BIC") < head.index("AIC")
    local_line = [ln for ln in table.splitlines() if ln.startswith(LOCAL_LABEL)][0]
    assert local_line.count("--") == 2


def test_ecdf_csv():
    buf = io.StringIO()
    ecdf([1.0, 2.0]).to_csv(buf)
    assert buf.getvalue() == "value,cdf\n1.0,0.5\n2.0,1.0\n"


def test_zero_rss_report_warns():
    local, fixed, g = _scene()
    exact = stations(g.ids, g.lon, g.lat, np.zeros(len(g)))
    flat = fixed.replace(value=np.zeros(len(fixed)))
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        rep = compare_models(local, {1: flat}, exact)
    assert rep.rows["D1"].bic == -math.inf and w
