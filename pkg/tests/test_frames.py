"""Frame conversions, Kepler propagation, Sagnac correction, elevation."""
import math
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from bdsfix.frames import (
    ELLIPSOID_A,
    ELLIPSOID_B,
    MU_EARTH,
    OMEGA_EARTH,
    GeodeticPoint,
    KeplerConvergenceError,
    OrbitalElements,
    apparent_sat_position,
    earth_rotation_angle,
    ecef_to_geodetic,
    elevation_angle,
    enu_basis,
    geodetic_to_ecef,
    propagate_kepler,
    sagnac_correct,
    solve_kepler,
)

EPOCH = datetime(2015, 5, 19, 4, 0, 0, tzinfo=timezone.utc)


# ---------------------------------------------------------------------------
# geodetic <-> ECEF

def test_geodetic_to_ecef_equator_prime_meridian():
    v = geodetic_to_ecef(GeodeticPoint(0.0, 0.0, 0.0))
    np.testing.assert_allclose(v, [ELLIPSOID_A, 0.0, 0.0], atol=1e-9)


def test_geodetic_to_ecef_pole():
    v = geodetic_to_ecef(GeodeticPoint(90.0, 45.0, 0.0))
    np.testing.assert_allclose(v, [0.0, 0.0, ELLIPSOID_B], atol=1e-8)


def test_geodetic_to_ecef_reference_point():
    # Frozen from an arbitrary-precision evaluation of the closed form,
    # computed independently before the build.
    v = geodetic_to_ecef(GeodeticPoint(40.0, 116.0, 50.0))
    expected = [-2144838.632151108, 4397570.887067099, 4078017.711474043]
    np.testing.assert_allclose(v, expected, atol=1e-6)


def test_ecef_to_geodetic_equator():
    g = ecef_to_geodetic(np.array([ELLIPSOID_A, 0.0, 0.0]))
    assert abs(g.latitude) < 1e-12
    assert abs(g.longitude) < 1e-12
    assert abs(g.altitude) < 1e-9


def test_ecef_to_geodetic_polar_axis():
    g = ecef_to_geodetic(np.array([0.0, 0.0, ELLIPSOID_B + 1_000_000.0]))
    assert abs(g.latitude - 90.0) < 1e-12
    assert abs(g.altitude - 1_000_000.0) < 1e-9


def test_ecef_to_geodetic_origin_rejected():
    with pytest.raises(ValueError, match="origin"):
        ecef_to_geodetic(np.zeros(3))


def test_geodetic_round_trip_10000_points():
    rng = np.random.default_rng(2024)
    worst_alt = worst_ang = 0.0
    for _ in range(10_000):
        p = GeodeticPoint(rng.uniform(-90.0, 90.0),
                          rng.uniform(-179.999, 180.0),
                          rng.uniform(-1000.0, 2_000_000.0))
        q = ecef_to_geodetic(geodetic_to_ecef(p))
        worst_alt = max(worst_alt, abs(q.altitude - p.altitude))
        worst_ang = max(worst_ang, abs(q.latitude - p.latitude),
                        abs(q.longitude - p.longitude))
    assert worst_alt < 1e-9
    assert worst_ang < 1e-12


# ---------------------------------------------------------------------------
# Kepler's equation

def test_solve_kepler_circular():
    assert solve_kepler(1.0, 0.0) == pytest.approx(1.0, abs=1e-15)


def test_solve_kepler_perigee():
    assert solve_kepler(0.0, 0.5) == pytest.approx(0.0, abs=1e-15)


def _bisect_kepler(mean_anomaly, e, lo=0.0, hi=math.pi):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid - e * math.sin(mid) - mean_anomaly > 0.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def test_solve_kepler_against_bisection_oracle():
    e = 0.004004
    expected = _bisect_kepler(math.pi / 2.0, e)
    assert solve_kepler(math.pi / 2.0, e) == pytest.approx(expected, abs=1e-12)


def test_solve_kepler_residual_grid():
    for e in (0.0, 0.001, 0.01, 0.1, 0.5, 0.9):
        for mean in np.arange(0.0, 2.0 * math.pi, math.pi / 50.0):
            ecc = solve_kepler(float(mean), e)
            assert abs(ecc - e * math.sin(ecc) - mean) < 1e-12


def test_solve_kepler_reports_non_convergence():
    with pytest.raises(KeplerConvergenceError, match="residual"):
        solve_kepler(3.0, 0.9, max_iterations=1)


# ---------------------------------------------------------------------------
# propagation

def _elements(a, e, inc, raan, argp, nu, epoch=EPOCH):
    return OrbitalElements(a, e, inc, raan, argp, nu, epoch)


def test_propagate_geostationary_periodicity():
    # Synchronous radius for the package constants: one orbital period of
    # such an orbit leaves the ECEF position unchanged.
    a_sync = (MU_EARTH / OMEGA_EARTH**2) ** (1.0 / 3.0)
    elem = _elements(a_sync, 0.0, 0.0, 0.0, 0.0, 25.0)
    period = 2.0 * math.pi / math.sqrt(MU_EARTH / a_sync**3)
    p0 = propagate_kepler(elem, EPOCH)
    p1 = propagate_kepler(elem, EPOCH + timedelta(seconds=period))
    assert np.linalg.norm(p1 - p0) < 1.0


def test_propagate_g1_snapshot_longitude_and_radius():
    a, e = 42_167_046.0, 0.000385
    elem = _elements(a, e, 1.660, 14.091, 166.081, 256.057)
    pos = propagate_kepler(elem, EPOCH)
    geo = ecef_to_geodetic(pos)
    assert abs(geo.longitude - 140.0) < 0.5
    radius = np.linalg.norm(pos)
    assert a * (1.0 - e) <= radius <= a * (1.0 + e)


def _inertial_state(elem):
    """Independently coded element->state conversion for the RK4 oracle."""
    a, e = elem.semi_major_axis, elem.eccentricity
    nu = math.radians(elem.true_anomaly)
    p = a * (1.0 - e * e)
    r = p / (1.0 + e * math.cos(nu))
    pos_pf = np.array([r * math.cos(nu), r * math.sin(nu), 0.0])
    vel_pf = math.sqrt(MU_EARTH / p) * np.array([-math.sin(nu), e + math.cos(nu), 0.0])
    cO, sO = math.cos(math.radians(elem.raan)), math.sin(math.radians(elem.raan))
    cw, sw = math.cos(math.radians(elem.arg_perigee)), math.sin(math.radians(elem.arg_perigee))
    ci, si = math.cos(math.radians(elem.inclination)), math.sin(math.radians(elem.inclination))
    rot = np.array([
        [cO * cw - sO * sw * ci, -cO * sw - sO * cw * ci, sO * si],
        [sO * cw + cO * sw * ci, -sO * sw + cO * cw * ci, -cO * si],
        [sw * si, cw * si, ci],
    ])
    return rot @ pos_pf, rot @ vel_pf


def _rk4_two_body(pos, vel, dt_total, h=1.0):
    def acc(p):
        return -MU_EARTH * p / np.linalg.norm(p) ** 3

    remaining = dt_total
    while remaining > 0.0:
        step = min(h, remaining)
        k1p, k1v = vel, acc(pos)
        k2p, k2v = vel + 0.5 * step * k1v, acc(pos + 0.5 * step * k1p)
        k3p, k3v = vel + 0.5 * step * k2v, acc(pos + 0.5 * step * k2p)
        k4p, k4v = vel + step * k3v, acc(pos + step * k3p)
        pos = pos + step / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        vel = vel + step / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        remaining -= step
    return pos, vel


def test_propagate_meo_half_period_against_rk4_oracle():
    a, e = 27_907_553.0, 0.002132
    elem = _elements(a, e, 55.838, 79.515, 207.483, 152.594)
    half_period = math.pi / math.sqrt(MU_EARTH / a**3)
    t = EPOCH + timedelta(seconds=half_period)
    dt = (t - EPOCH).total_seconds()

    pos0, vel0 = _inertial_state(elem)
    oracle_inertial, _ = _rk4_two_body(pos0, vel0, dt)
    theta = earth_rotation_angle(t, EPOCH)
    c, s = math.cos(theta), math.sin(theta)
    oracle_ecef = np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]]) @ oracle_inertial

    impl = propagate_kepler(elem, t)
    assert np.linalg.norm(impl - oracle_ecef) < 0.5

    radius = np.linalg.norm(impl)
    assert a * (1.0 - e) <= radius <= a * (1.0 + e)
    # Antipodal in the orbital plane after half a period (near-circular orbit).
    cos_sep = np.dot(oracle_inertial / np.linalg.norm(oracle_inertial),
                     pos0 / np.linalg.norm(pos0))
    assert math.degrees(math.acos(np.clip(cos_sep, -1.0, 1.0))) > 179.0


def test_propagate_radius_stays_in_band():
    elem = _elements(42_157_559.0, 0.004004, 54.293, 200.802, 210.089, 1.845)
    a, e = elem.semi_major_axis, elem.eccentricity
    for hours in range(0, 48, 5):
        pos = propagate_kepler(elem, EPOCH + timedelta(hours=hours))
        radius = np.linalg.norm(pos)
        assert a * (1.0 - e) - 1e-3 <= radius <= a * (1.0 + e) + 1e-3


def test_propagate_rejects_times_outside_window():
    elem = _elements(42_164_000.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError, match="30 d"):
        propagate_kepler(elem, EPOCH + timedelta(days=31))


# ---------------------------------------------------------------------------
# Sagnac correction

def test_sagnac_zero_travel_time_is_identity():
    v = np.array([42_164_169.0, 1234.5, -987.0])
    np.testing.assert_array_equal(sagnac_correct(v, 0.0), v)


def test_sagnac_displacement_against_rotation_matrix():
    v = np.array([42_164_169.0, 0.0, 0.0])
    tau = 0.07
    rotated = sagnac_correct(v, tau)
    angle = OMEGA_EARTH * tau
    oracle = np.array([
        [math.cos(angle), math.sin(angle), 0.0],
        [-math.sin(angle), math.cos(angle), 0.0],
        [0.0, 0.0, 1.0],
    ]) @ v
    # a couple of float64 ulp at GEO magnitude
    np.testing.assert_allclose(rotated, oracle, rtol=0, atol=2e-8)
    displacement = np.linalg.norm(rotated - v)
    assert displacement == pytest.approx(np.linalg.norm(v) * math.sin(angle), rel=1e-9)


def test_sagnac_composition():
    rng = np.random.default_rng(5)
    v = rng.uniform(-4e7, 4e7, size=3)
    once = sagnac_correct(v, 0.09)
    twice = sagnac_correct(sagnac_correct(v, 0.04), 0.05)
    assert np.linalg.norm(once - twice) < 1e-9


def test_sagnac_preserves_norm():
    rng = np.random.default_rng(6)
    for _ in range(100):
        v = rng.uniform(-4e7, 4e7, size=3)
        tau = rng.uniform(0.0, 0.999)
        assert np.linalg.norm(sagnac_correct(v, tau)) == pytest.approx(
            np.linalg.norm(v), rel=1e-9)


def test_sagnac_rejects_out_of_range_travel_time():
    with pytest.raises(ValueError):
        sagnac_correct(np.ones(3), -0.1)
    with pytest.raises(ValueError):
        sagnac_correct(np.ones(3), 1.0)


def test_apparent_position_close_to_simple_rotation():
    user = geodetic_to_ecef(GeodeticPoint(30.0, 110.0, 0.0))
    sat = np.array([42_164_169.0 * math.cos(math.radians(110.0)),
                    42_164_169.0 * math.sin(math.radians(110.0)), 0.0])
    apparent = apparent_sat_position(sat, user)
    tau = np.linalg.norm(sat - user) / 299792458.0
    assert np.linalg.norm(apparent - sagnac_correct(sat, tau)) < 0.01


# ---------------------------------------------------------------------------
# elevation

def test_elevation_zenith():
    user = geodetic_to_ecef(GeodeticPoint(35.0, 60.0, 0.0))
    sat = geodetic_to_ecef(GeodeticPoint(35.0, 60.0, 20_000_000.0))
    assert elevation_angle(user, sat) == pytest.approx(90.0, abs=1e-6)


def test_elevation_horizon():
    user = geodetic_to_ecef(GeodeticPoint(35.0, 60.0, 0.0))
    east, _, _ = enu_basis(35.0, 60.0)
    assert elevation_angle(user, user + 1e7 * east) == pytest.approx(0.0, abs=1e-9)


def test_elevation_geostationary_overhead():
    user = geodetic_to_ecef(GeodeticPoint(0.0, 100.0, 0.0))
    r = 42_164_169.0
    sat = np.array([r * math.cos(math.radians(100.0)), r * math.sin(math.radians(100.0)), 0.0])
    assert abs(elevation_angle(user, sat) - 90.0) < 0.2


def test_elevation_antisymmetric_about_tangent_plane():
    rng = np.random.default_rng(11)
    for _ in range(50):
        point = GeodeticPoint(rng.uniform(-80, 80), rng.uniform(-179, 180), 0.0)
        user = geodetic_to_ecef(point)
        _, _, up = enu_basis(point.latitude, point.longitude)
        sat = user + rng.uniform(1e6, 4e7) * _random_unit(rng)
        mirrored = sat - 2.0 * np.dot(sat - user, up) * up
        assert elevation_angle(user, sat) == pytest.approx(
            -elevation_angle(user, mirrored), abs=1e-9)


def _random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)
