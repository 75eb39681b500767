import math

import numpy as np
import pytest

from earth4d.errors import DomainError
from earth4d.geocoords import (
    GeodeticPoint,
    NormalizationConfig,
    cell_edge_m,
    denormalize,
    denormalize_batch,
    ecef_to_geodetic,
    format_time,
    geodetic_to_ecef,
    normalize,
    normalize_batch,
    parse_time,
    validate_geodetic,
)

CFG = NormalizationConfig()

# frozen from an independent WGS-84 evaluation
POLE_Z = 6356752.314245179
P45 = (3194469.1450605746, 3194469.145060574, 4487419.119544039)


def test_ecef_equator_prime_meridian():
    x, y, z = geodetic_to_ecef(0.0, 0.0, 0.0)
    assert x == pytest.approx(6378137.0, abs=1e-6)
    assert abs(y) < 1e-6 and abs(z) < 1e-6


def test_ecef_north_pole():
    x, y, z = geodetic_to_ecef(90.0, 0.0, 0.0)
    assert abs(x) < 1e-6 and abs(y) < 1e-6
    assert z == pytest.approx(POLE_Z, abs=1e-6)


def test_ecef_midlatitude_frozen_vector():
    x, y, z = geodetic_to_ecef(45.0, 45.0, 100.0)
    assert x == pytest.approx(P45[0], abs=1e-6)
    assert y == pytest.approx(P45[1], abs=1e-6)
    assert z == pytest.approx(P45[2], abs=1e-6)


def test_ecef_norm_stays_near_shell():
    rng = np.random.default_rng(3)
    lat = rng.uniform(-90, 90, 200)
    lon = rng.uniform(-180, 180, 200)
    elev = rng.uniform(-11000, 9000, 200)
    for la, lo, el in zip(lat, lon, elev):
        x, y, z = geodetic_to_ecef(float(la), float(lo), float(el))
        r = math.sqrt(x * x + y * y + z * z)
        assert 6378137.0 - 11200 - 22000 < r < 6378137.0 + 9200


def test_ecef_rejects_out_of_range():
    with pytest.raises(DomainError, match="latitude"):
        geodetic_to_ecef(90.5, 0.0, 0.0)
    with pytest.raises(DomainError, match="longitude"):
        geodetic_to_ecef(0.0, 180.0, 0.0)
    with pytest.raises(DomainError, match="elevation"):
        geodetic_to_ecef(0.0, 0.0, 9001.0)


def test_validate_geodetic_names_field_and_index():
    with pytest.raises(DomainError, match="longitude"):
        validate_geodetic(
            np.array([0.0, 0.0]), np.array([0.0, 180.0]), np.array([0.0, 0.0])
        )
    with pytest.raises(DomainError, match="time"):
        validate_geodetic(0.0, 0.0, 0.0, time_s=CFG.time_end_s)


def test_ecef_inverse_round_trip():
    rng = np.random.default_rng(7)
    for _ in range(100):
        la = float(rng.uniform(-90, 90))
        lo = float(rng.uniform(-180, 180))
        el = float(rng.uniform(-11000, 9000))
        x, y, z = geodetic_to_ecef(la, lo, el)
        la2, lo2, el2 = ecef_to_geodetic(x, y, z)
        assert la2 == pytest.approx(la, abs=1e-6)
        assert el2 == pytest.approx(el, abs=1e-3)
        if abs(la) < 89.999:
            assert lo2 == pytest.approx(lo, abs=1e-6)


def test_ecef_inverse_rejects_interior_point():
    with pytest.raises(DomainError):
        ecef_to_geodetic(0.0, 0.0, 0.0)


def test_normalize_equator_frozen_value():
    mid = (CFG.time_start_s + CFG.time_end_s) / 2.0
    q = normalize(GeodeticPoint(0.0, 0.0, 0.0, mid))
    assert q.x == pytest.approx(0.9906259230769231, abs=1e-12)
    assert q.y == pytest.approx(0.5, abs=1e-12)
    assert q.z == pytest.approx(0.5, abs=1e-12)
    assert q.t == pytest.approx(0.5, abs=1e-12)


def test_normalize_time_endpoints():
    q = normalize(GeodeticPoint(0.0, 0.0, 0.0, CFG.time_start_s))
    assert q.t == 0.0
    with pytest.raises(DomainError):
        normalize(GeodeticPoint(0.0, 0.0, 0.0, CFG.time_end_s))


def test_normalize_components_in_unit_interval():
    rng = np.random.default_rng(11)
    n = 500
    q = normalize_batch(
        rng.uniform(-90, 90, n),
        rng.uniform(-180, 180, n),
        rng.uniform(-11000, 9000, n),
        rng.uniform(CFG.time_start_s, CFG.time_end_s, n),
    )
    assert q.shape == (n, 4)
    assert np.all(q >= 0.0) and np.all(q < 1.0)


def test_normalize_is_affine_midpoint_property():
    rng = np.random.default_rng(13)
    for _ in range(20):
        la = rng.uniform(-80, 80, 2)
        lo = rng.uniform(-170, 170, 2)
        el = rng.uniform(-1000, 1000, 2)
        ts = rng.uniform(0, 1e9, 2)
        q = normalize_batch(la, lo, el, ts)
        # affine in ECEF and time: midpoint in ECEF maps to midpoint of outputs
        e0 = np.array(geodetic_to_ecef(*map(float, (la[0], lo[0], el[0]))))
        e1 = np.array(geodetic_to_ecef(*map(float, (la[1], lo[1], el[1]))))
        em = (e0 + e1) / 2.0
        hw = CFG.half_width_m
        expected = (em + hw) / (2.0 * hw)
        got = (q[0, :3] + q[1, :3]) / 2.0
        assert np.allclose(got, expected, atol=1e-12)


def test_round_trip_known_point():
    t = parse_time("2020-06-01T00:00:00Z")
    p = GeodeticPoint(37.42, -122.08, 30.0, t)
    q = normalize(p)
    back = denormalize(q)
    assert back.latitude_deg == pytest.approx(37.42, abs=1e-6)
    assert back.longitude_deg == pytest.approx(-122.08, abs=1e-6)
    assert back.elevation_m == pytest.approx(30.0, abs=1e-3)
    assert back.time_s == pytest.approx(t, abs=1e-3)


def test_round_trip_batch_random():
    rng = np.random.default_rng(17)
    n = 200
    la = rng.uniform(-89, 89, n)
    lo = rng.uniform(-180, 180, n)
    el = rng.uniform(-11000, 9000, n)
    ts = rng.uniform(CFG.time_start_s, CFG.time_end_s, n)
    q = normalize_batch(la, lo, el, ts)
    la2, lo2, el2, ts2 = denormalize_batch(q)
    assert np.allclose(la2, la, atol=1e-6)
    assert np.allclose(lo2, lo, atol=1e-6)
    assert np.allclose(el2, el, atol=1e-3)
    assert np.allclose(ts2, ts, atol=1e-3)
    # normalize(denormalize(q)) == q within 1e-9 per component
    q2 = normalize_batch(la2, lo2, el2, ts2)
    assert np.allclose(q2, q, atol=1e-9)


def test_denormalize_center_point_fails():
    with pytest.raises(DomainError):
        denormalize_batch(np.array([[0.5, 0.5, 0.5, 0.5]]))


def test_denormalize_t_zero_is_window_start():
    mid = (CFG.time_start_s + CFG.time_end_s) / 2.0
    q = normalize(GeodeticPoint(10.0, 20.0, 0.0, mid))
    p = denormalize(type(q)(q.x, q.y, q.z, 0.0))
    assert p.time_s == CFG.time_start_s


def test_denormalize_rejects_out_of_unit_range():
    with pytest.raises(DomainError):
        denormalize_batch(np.array([[1.0, 0.5, 0.5, 0.5]]))


def test_finest_cell_edge_is_sub_meter():
    edge = cell_edge_m(CFG, 1 << 28)
    assert edge == pytest.approx(0.048428774060416124, rel=1e-12)
    assert edge <= 0.15


def test_parse_time_formats():
    assert parse_time("0") == 0.0
    assert parse_time("123.5") == 123.5
    assert parse_time("1970-01-01T00:00:00Z") == 0.0
    assert parse_time("1970-01-02T00:00:00+00:00") == 86400.0
    # naive timestamps are read as UTC
    assert parse_time("1970-01-01T01:00:00") == 3600.0
    with pytest.raises(DomainError):
        parse_time("not-a-time")


def test_format_time_round_trip():
    t = parse_time("2020-06-01T12:34:56Z")
    assert parse_time(format_time(t)) == t


def test_config_invariants_enforced():
    with pytest.raises(DomainError):
        NormalizationConfig(time_start_s=10.0, time_end_s=10.0)
    with pytest.raises(DomainError):
        NormalizationConfig(half_width_m=6378137.0)  # must exceed a + max elev
