import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vlmframe.errors import RankDeficientError
from vlmframe.fields import VelocityField
from vlmframe.frame_fit import (NormalizationParams, PolynomialModel, build_design_matrix,
                                condition_number, evaluate_polynomial, fit_polynomial,
                                is_extrapolated, monomials, n_terms, normalize_coords, pixel_corrections,
                                transform_field)
from vlmframe.resample import DifferenceField


def diff_from(lon, lat, delta):
    lon = np.asarray(lon, dtype=float)
    return DifferenceField(np.arange(lon.size), lon, np.asarray(lat, float),
                           np.asarray(delta, float), 0)


def scattered(n, seed, lon0=-118.3, lat0=34.0, half=0.25):
    rng = np.random.default_rng(seed)
    return rng.uniform(lon0 - half, lon0 + half, n), rng.uniform(lat0 - half, lat0 + half, n)


def test_normalize_square():
    norm, x1, x2 = normalize_coords([0, 2, 0, 2], [10, 10, 12, 12])
    assert (norm.lon0, norm.lat0, norm.sx, norm.sy) == (1.0, 11.0, 1.0, 1.0)
    assert x1.tolist() == [-1, 1, -1, 1] and x2.tolist() == [-1, -1, 1, 1]


def test_normalize_single_point_floor():
    norm, x1, x2 = normalize_coords([5.0], [6.0])
    assert norm.sx == norm.sy == 1e-9
    assert (x1[0], x2[0]) == (0.0, 0.0)


def test_normalized_range():
    lon, lat = scattered(1000, 0)
    _, x1, x2 = normalize_coords(lon, lat)
    assert x1.min() == -1 and x1.max() == 1
    assert np.all(np.abs(x1) <= 1) and np.all(np.abs(x2) <= 1)


def test_design_row_order():
    assert monomials([2.0], [3.0], 2)[0].tolist() == [1, 2, 3, 4, 6, 9]
    assert monomials([2.0], [3.0], 3)[0].tolist() == [1, 2, 3, 4, 6, 9, 8, 12, 18, 27]
    for k in (1, 2, 3):
        row = monomials([0.0], [0.0], k)[0]
        assert row[0] == 1 and not row[1:].any()


def test_design_shapes_and_errors():
    x = np.linspace(-1, 1, 12)
    assert build_design_matrix(x, x[::-1], 1).shape == (12, 3)
    assert build_design_matrix(x, x[::-1], 3).shape == (12, 10)
    assert [n_terms(k) for k in (1, 2, 3)] == [3, 6, 10]
    with pytest.raises(ValueError):
        build_design_matrix(x, x, 4)
    with pytest.raises(RankDeficientError):
        build_design_matrix(x[:5], x[:5], 3)


def test_exact_plane_recovery_identity_frame():
    rng = np.random.default_rng(11)
    x1, x2 = rng.uniform(-1, 1, 50), rng.uniform(-1, 1, 50)
    # pin the bounding box to [-1, 1]^2 so the fitted normalisation is the identity
    x1[:2], x2[2:4] = [-1, 1], [-1, 1]
    m = fit_polynomial(diff_from(x1, x2, 2 + 3 * x1 - x2), 1)
    assert m.norm == NormalizationParams.identity()
    np.testing.assert_allclose(m.coeffs, [2, 3, -1], atol=1e-10)
    assert m.rss <= 1e-18


@pytest.mark.parametrize("k", [1, 2, 3])
def test_constant_delta(k):
    lon, lat = scattered(80, k)
    m = fit_polynomial(diff_from(lon, lat, np.full(80, 1.8)), k)
    assert m.coeffs[0] == pytest.approx(1.8, abs=1e-10)
    np.testing.assert_allclose(m.coeffs[1:], 0, atol=1e-10)


def test_collinear_points_rank_deficient():
    t = np.linspace(0, 1, 100)
    with pytest.raises(RankDeficientError):
        fit_polynomial(diff_from(-118 + t, 34 + t, t), 1)


def test_too_few_points():
    with pytest.raises(RankDeficientError):
        fit_polynomial(diff_from([0, 1, 2, 3], [0, 1, 0, 1], [1, 2, 3, 4]), 2)


def test_evaluate_examples():
    m = PolynomialModel(1, (2, 3, -1), NormalizationParams.identity())
    assert evaluate_polynomial(m, [0.0], [0.0])[0] == 2.0
    z = PolynomialModel(3, (0,) * 10, NormalizationParams(-118, 34, 0.3, 0.2))
    assert not evaluate_polynomial(z, [-118.5, 10.0], [3.0, 34.0]).any()


def test_evaluate_at_fit_points_reproduces_rss():
    lon, lat = scattered(200, 5)
    rng = np.random.default_rng(5)
    delta = np.sin(10 * lon) + rng.normal(0, 0.1, 200)
    m = fit_polynomial(diff_from(lon, lat, delta), 2)
    r = delta - evaluate_polynomial(m, lon, lat)
    assert r @ r == pytest.approx(m.rss, rel=1e-10)
    assert not is_extrapolated(m, lon, lat).any()
    assert is_extrapolated(m, [lon.max() + 0.1], [lat.mean()])[0]


def dense_normal_equations(lon, lat, delta, k, norm):
    """Literal (X^T X)^-1 X^T delta on the same normalised coordinates."""
    X = monomials(*norm.apply(lon, lat), k)
    return np.linalg.solve(X.T @ X, X.T @ delta)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**31), st.integers(30, 300))
def test_residual_orthogonality_and_oracle(k, seed, n):
    rng = np.random.default_rng(seed)
    lon, lat = scattered(n, seed)
    delta = rng.normal(0, 2, n) + 5 * (lon + 118.3)
    m = fit_polynomial(diff_from(lon, lat, delta), k)
    X = monomials(*m.norm.apply(lon, lat), k)
    r = delta - X @ np.array(m.coeffs)
    assert np.abs(X.T @ r).max() <= 1e-8 * np.linalg.norm(delta)
    beta = dense_normal_equations(lon, lat, delta, k, m.norm)
    np.testing.assert_allclose(evaluate_polynomial(m, lon, lat), X @ beta, atol=1e-8)


@pytest.mark.parametrize("j", [1, 2, 3])
def test_exact_recovery_of_lower_degree_truth(j):
    lon, lat = scattered(150, 20 + j)
    rng = np.random.default_rng(j)
    c = rng.normal(size=n_terms(j))
    truth = PolynomialModel(j, c, NormalizationParams(-118.3, 34.0, 0.2, 0.3))
    delta = evaluate_polynomial(truth, lon, lat)
    for k in range(j, 4):
        m = fit_polynomial(diff_from(lon, lat, delta), k)
        np.testing.assert_allclose(evaluate_polynomial(m, lon, lat), delta, atol=1e-9)


def test_nested_rss_monotone():
    lon, lat = scattered(500, 9)
    rng = np.random.default_rng(9)
    d = diff_from(lon, lat, rng.normal(size=500) + np.cos(20 * lat))
    rss = [fit_polynomial(d, k).rss for k in (1, 2, 3)]
    assert rss[0] >= rss[1] >= rss[2]


def test_fit_is_deterministic():
    lon, lat = scattered(1000, 3)
    d = diff_from(lon, lat, np.sin(lon * 7) * lat)
    a = fit_polynomial(d, 3)
    b = fit_polynomial(d, 3)
    assert a.coeffs == b.coeffs and a.rss == b.rss


def test_condition_number_cases():
    Q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(20, 4)))
    assert condition_number(Q) == pytest.approx(1.0, abs=1e-12)
    A = np.ones((5, 2))
    assert condition_number(A) == float("inf")


def test_normalisation_tames_conditioning():
    """Raw ~(-118, 34) degree-3 monomials are hopeless; normalised ones are not."""
    lon, lat = scattered(2000, 1)
    raw = condition_number(monomials(lon, lat, 3))
    _, x1, x2 = normalize_coords(lon, lat)
    normed = condition_number(build_design_matrix(x1, x2, 3))
    print(f"degree-3 condition number: raw {raw:.3e}, normalised {normed:.3e}")
    assert normed < 1e4
    assert raw > 1e12 or raw == float("inf")
    assert raw / normed > 1e8


def test_transform_zero_and_constant_models():
    f = VelocityField([-74.0, -73.9], [40.7, 40.8], [1.0, -2.0])
    zero = PolynomialModel(1, (0, 0, 0), NormalizationParams.identity())
    t = transform_field(f, zero)
    assert t.frame == "global" and np.array_equal(t.value, f.value)
    shift = PolynomialModel(2, (1.8,) + (0,) * 5, NormalizationParams(-74, 40.7, 0.1, 0.1))
    np.testing.assert_allclose(transform_field(f, shift).value - f.value, 1.8, rtol=0, atol=1e-15)


def test_transform_linearity():
    lon, lat = scattered(100, 4)
    f = VelocityField(lon, lat, np.random.default_rng(4).normal(size=100))
    norm = NormalizationParams(-118.3, 34.0, 0.25, 0.25)
    m1 = PolynomialModel(2, (1, 2, 3, 4, 5, 6), norm)
    m2 = PolynomialModel(2, (-0.5, 0.1, 0, 2, -1, 0.3), norm)
    both = PolynomialModel(2, tuple(a + b for a, b in zip(m1.coeffs, m2.coeffs)), norm)
    np.testing.assert_allclose(transform_field(f, both).value,
                               transform_field(transform_field(f, m1), m2).value, atol=1e-12)


def test_uncorrected_pixels_pass_through():
    f = VelocityField([0.0, 1.0, 2.0], [0.0, 1.0, 2.0], [1.0, 1.0, 1.0], ids=[10, 11, 12])
    m = PolynomialModel(1, (1.0, 0, 0), NormalizationParams.identity())
    c = pixel_corrections(f, m, uncorrected_ids=[11])
    assert c.applied.tolist() == [True, False, True]
    assert transform_field(f, m, uncorrected_ids=[11]).value.tolist() == [2.0, 1.0, 2.0]


def test_model_json_round_trip():
    lon, lat = scattered(60, 2)
    m = fit_polynomial(diff_from(lon, lat, lon * lat), 3)
    back = PolynomialModel.from_json(m.to_json())
    assert back == m
    d = m.to_dict()
    assert d["version"] == 1 and len(d["coeffs"]) == 10
    with pytest.raises(ValueError):
        PolynomialModel.from_dict({**d, "format": "other"})
