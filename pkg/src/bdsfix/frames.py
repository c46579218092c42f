"""Reference frames, orbit propagation, and local geometry.

Conventions used throughout the package:

    ECEF     — earth-centered earth-fixed Cartesian frame; positions are
               numpy arrays of shape (3,) in meters.
    Geodetic — latitude/longitude in degrees, altitude in meters above the
               CGCS2000 reference ellipsoid.

Orbital elements are held in an inertial frame that is tied to ECEF through
the sidereal rotation angle: the angle is anchored to Greenwich mean sidereal
time at the element epoch and accumulates at OMEGA_EARTH afterwards.  Orbit
propagation is two-body only.
"""
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

SPEED_OF_LIGHT = 299792458.0        # m/s
MU_EARTH = 3.986004418e14           # m^3/s^2 — gravitational parameter
OMEGA_EARTH = 7.2921150e-5          # rad/s — sidereal rotation rate
ELLIPSOID_A = 6378137.0             # m — CGCS2000 semi-major axis
ELLIPSOID_F = 1.0 / 298.257222101   # CGCS2000 flattening
ELLIPSOID_E2 = ELLIPSOID_F * (2.0 - ELLIPSOID_F)   # first eccentricity squared
ELLIPSOID_B = ELLIPSOID_A * (1.0 - ELLIPSOID_F)    # m — semi-minor axis

# Conversions between geodetic and Cartesian coordinates are evaluated in
# extended precision so that round trips hold to 1e-9 m in altitude.
_LD = np.longdouble
_A_LD = _LD("6378137.0")
_F_LD = _LD(1) / _LD("298.257222101")
_E2_LD = _F_LD * (2 - _F_LD)

PROPAGATION_WINDOW_S = 30 * 86400.0   # two-body validity window around epoch

_J2000 = datetime(2000, 1, 1, 12, 0, 0, tzinfo=timezone.utc)


class KeplerConvergenceError(RuntimeError):
    """Kepler's equation did not converge within the iteration budget."""


def ecef_vector(x: float, y: float, z: float) -> np.ndarray:
    """Build an ECEF position vector, rejecting non-finite components."""
    v = np.array([x, y, z], dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"ECEF components must be finite, got {v}")
    return v


@dataclass(frozen=True)
class GeodeticPoint:
    """Geodetic position: latitude/longitude in degrees, altitude in meters."""

    latitude: float
    longitude: float
    altitude: float = 0.0

    def __post_init__(self) -> None:
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 < self.longitude <= 180.0:
            raise ValueError(f"longitude {self.longitude} outside (-180, 180]")


@dataclass(frozen=True)
class OrbitalElements:
    """Keplerian elements of one satellite at a reference epoch.

    Angles are in degrees, the semi-major axis in meters, and the epoch is a
    timezone-aware UTC timestamp.
    """

    semi_major_axis: float
    eccentricity: float
    inclination: float
    raan: float
    arg_perigee: float
    true_anomaly: float
    epoch: datetime

    def __post_init__(self) -> None:
        if self.semi_major_axis <= ELLIPSOID_A:
            raise ValueError(f"semi-major axis {self.semi_major_axis} m is not above the earth")
        if not 0.0 <= self.eccentricity < 1.0:
            raise ValueError(f"eccentricity {self.eccentricity} outside [0, 1)")
        if self.epoch.tzinfo is None:
            raise ValueError("element epoch must be timezone-aware UTC")


def geodetic_to_ecef(point: GeodeticPoint) -> np.ndarray:
    """Convert a geodetic point to ECEF Cartesian coordinates.

    Args:
        point: Geodetic position on the CGCS2000 ellipsoid.

    Returns:
        ECEF position (x, y, z) in meters.
    """
    lat = np.radians(_LD(point.latitude))
    lon = np.radians(_LD(point.longitude))
    alt = _LD(point.altitude)

    sin_lat, cos_lat = np.sin(lat), np.cos(lat)
    n = _A_LD / np.sqrt(1 - _E2_LD * sin_lat * sin_lat)

    x = (n + alt) * cos_lat * np.cos(lon)
    y = (n + alt) * cos_lat * np.sin(lon)
    z = (n * (1 - _E2_LD) + alt) * sin_lat
    return np.array([float(x), float(y), float(z)])


def ecef_to_geodetic(v: np.ndarray) -> GeodeticPoint:
    """Convert an ECEF position to geodetic coordinates.

    Uses the fixed-point Bowring iteration for latitude; the iteration count
    is fixed high enough to reach extended-precision convergence.

    Args:
        v: ECEF position (x, y, z) in meters; must not be the origin.

    Returns:
        GeodeticPoint with longitude canonicalized to (-180, 180].
    """
    x, y, z = _LD(v[0]), _LD(v[1]), _LD(v[2])
    p = np.sqrt(x * x + y * y)
    if float(p) == 0.0 and float(z) == 0.0:
        raise ValueError("origin has no geodetic image")

    lon = np.arctan2(y, x)
    lat = np.arctan2(z, p * (1 - _E2_LD))
    for _ in range(15):
        sin_lat = np.sin(lat)
        n = _A_LD / np.sqrt(1 - _E2_LD * sin_lat * sin_lat)
        lat = np.arctan2(z + _E2_LD * n * sin_lat, p)

    sin_lat, cos_lat = np.sin(lat), np.cos(lat)
    n = _A_LD / np.sqrt(1 - _E2_LD * sin_lat * sin_lat)
    # Pick the better-conditioned altitude expression near the poles/equator.
    if abs(cos_lat) >= abs(sin_lat):
        alt = p / cos_lat - n
    else:
        alt = z / sin_lat - n * (1 - _E2_LD)

    lon_deg = float(np.degrees(lon))
    if lon_deg <= -180.0:
        lon_deg += 360.0
    return GeodeticPoint(float(np.degrees(lat)), lon_deg, float(alt))


def gmst_angle(t: datetime) -> float:
    """Greenwich mean sidereal time for a UTC instant, in radians [0, 2*pi)."""
    days = (t - _J2000).total_seconds() / 86400.0
    centuries = days / 36525.0
    gmst_deg = (
        280.46061837
        + 360.98564736629 * days
        + 0.000387933 * centuries**2
        - centuries**3 / 38710000.0
    ) % 360.0
    return math.radians(gmst_deg)


def earth_rotation_angle(t: datetime, reference_epoch: datetime) -> float:
    """Inertial-to-ECEF rotation angle in radians.

    Anchored at GMST of ``reference_epoch`` and advanced at OMEGA_EARTH, so a
    satellite whose mean motion equals OMEGA_EARTH exactly is stationary in
    ECEF.
    """
    return gmst_angle(reference_epoch) + OMEGA_EARTH * (t - reference_epoch).total_seconds()


def solve_kepler(mean_anomaly: float, eccentricity: float, *, tol: float = 1e-12,
                 max_iterations: int = 50) -> float:
    """Solve Kepler's equation E - e*sin(E) = M for the eccentric anomaly.

    Newton iteration starting from E = M.

    Args:
        mean_anomaly: M in radians.
        eccentricity: e in [0, 1).
        tol: residual tolerance in radians.
        max_iterations: iteration budget before giving up.

    Returns:
        Eccentric anomaly E in radians with |E - e*sin(E) - M| < tol.
    """
    if not 0.0 <= eccentricity < 1.0:
        raise ValueError(f"eccentricity {eccentricity} outside [0, 1)")
    e = eccentricity
    ecc_anomaly = mean_anomaly
    for _ in range(max_iterations):
        residual = ecc_anomaly - e * math.sin(ecc_anomaly) - mean_anomaly
        if abs(residual) < tol:
            return ecc_anomaly
        ecc_anomaly -= residual / (1.0 - e * math.cos(ecc_anomaly))
    residual = ecc_anomaly - e * math.sin(ecc_anomaly) - mean_anomaly
    if abs(residual) < tol:
        return ecc_anomaly
    raise KeplerConvergenceError(
        f"Kepler iteration did not converge after {max_iterations} iterations "
        f"(M={mean_anomaly}, e={e}, residual={residual})"
    )


def _rot_z(angle: float) -> np.ndarray:
    """Frame rotation about +Z: maps coordinates into a frame rotated by +angle."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def propagate_kepler(elem: OrbitalElements, t: datetime) -> np.ndarray:
    """Two-body propagation of Keplerian elements to an ECEF position.

    Converts the epoch true anomaly to a mean anomaly, advances it at the
    mean motion sqrt(mu/a^3), solves Kepler's equation, forms perifocal
    coordinates, rotates them to the inertial frame by (argp, i, raan), and
    finally rotates into ECEF by the accumulated earth rotation angle.

    Args:
        elem: Keplerian elements at their reference epoch.
        t: target UTC time, within +/-30 days of the epoch.

    Returns:
        Satellite ECEF position (x, y, z) in meters at time t.
    """
    dt = (t - elem.epoch).total_seconds()
    if abs(dt) > PROPAGATION_WINDOW_S:
        raise ValueError(
            f"target time {t.isoformat()} is {dt / 86400.0:+.1f} d from the element epoch; "
            f"two-body propagation is limited to +/-30 d"
        )

    a, e = elem.semi_major_axis, elem.eccentricity
    nu0 = math.radians(elem.true_anomaly)
    ecc0 = 2.0 * math.atan2(math.sqrt(1.0 - e) * math.sin(nu0 / 2.0),
                            math.sqrt(1.0 + e) * math.cos(nu0 / 2.0))
    mean0 = ecc0 - e * math.sin(ecc0)

    mean_motion = math.sqrt(MU_EARTH / a**3)
    mean = math.fmod(mean0 + mean_motion * dt, 2.0 * math.pi)
    ecc_anomaly = solve_kepler(mean, e)

    nu = 2.0 * math.atan2(math.sqrt(1.0 + e) * math.sin(ecc_anomaly / 2.0),
                          math.sqrt(1.0 - e) * math.cos(ecc_anomaly / 2.0))
    radius = a * (1.0 - e * math.cos(ecc_anomaly))
    perifocal = np.array([radius * math.cos(nu), radius * math.sin(nu), 0.0])

    raan = math.radians(elem.raan)
    argp = math.radians(elem.arg_perigee)
    inc = math.radians(elem.inclination)
    cos_o, sin_o = math.cos(raan), math.sin(raan)
    cos_w, sin_w = math.cos(argp), math.sin(argp)
    cos_i, sin_i = math.cos(inc), math.sin(inc)
    to_inertial = np.array([
        [cos_o * cos_w - sin_o * sin_w * cos_i, -cos_o * sin_w - sin_o * cos_w * cos_i, sin_o * sin_i],
        [sin_o * cos_w + cos_o * sin_w * cos_i, -sin_o * sin_w + cos_o * cos_w * cos_i, -cos_o * sin_i],
        [sin_w * sin_i, cos_w * sin_i, cos_i],
    ])
    inertial = to_inertial @ perifocal

    return _rot_z(earth_rotation_angle(t, elem.epoch)) @ inertial


def sagnac_correct(sat_pos: np.ndarray, travel_time: float) -> np.ndarray:
    """Rotate a satellite position for earth rotation during signal flight.

    The position is rotated about +Z by -OMEGA_EARTH * travel_time, i.e. into
    the ECEF frame as it stands at signal reception.  Evaluated in extended
    precision so successive corrections compose to within a float64 rounding
    of a single combined correction.

    Args:
        sat_pos: satellite ECEF position at transmission, meters.
        travel_time: signal travel time in seconds, within [0, 1).

    Returns:
        Rotated ECEF position.
    """
    if not 0.0 <= travel_time < 1.0:
        raise ValueError(f"travel time {travel_time} s outside [0, 1)")
    angle = _LD(OMEGA_EARTH) * _LD(travel_time)
    c, s = np.cos(angle), np.sin(angle)
    x, y, z = _LD(sat_pos[0]), _LD(sat_pos[1]), _LD(sat_pos[2])
    return np.array([float(c * x + s * y), float(-s * x + c * y), float(z)])


def apparent_sat_position(sat_pos: np.ndarray, receiver_pos: np.ndarray) -> np.ndarray:
    """Sagnac-corrected satellite position as seen from a receiver.

    The signal travel time is refined by two fixed-point iterations of
    tau = |rotated(sat) - receiver| / c before the final rotation.
    """
    sat = np.asarray(sat_pos, dtype=float)
    rcv = np.asarray(receiver_pos, dtype=float)
    tau = float(np.linalg.norm(sat - rcv)) / SPEED_OF_LIGHT
    for _ in range(2):
        tau = float(np.linalg.norm(sagnac_correct(sat, tau) - rcv)) / SPEED_OF_LIGHT
    return sagnac_correct(sat, tau)


def enu_basis(lat_deg: float, lon_deg: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """East, north, up unit vectors of the local tangent frame in ECEF."""
    lat, lon = math.radians(lat_deg), math.radians(lon_deg)
    sin_lat, cos_lat = math.sin(lat), math.cos(lat)
    sin_lon, cos_lon = math.sin(lon), math.cos(lon)
    east = np.array([-sin_lon, cos_lon, 0.0])
    north = np.array([-sin_lat * cos_lon, -sin_lat * sin_lon, cos_lat])
    up = np.array([cos_lat * cos_lon, cos_lat * sin_lon, sin_lat])
    return east, north, up


def elevation_from_up(user: np.ndarray, sat: np.ndarray, up: np.ndarray) -> float:
    """Elevation in degrees given a precomputed local up unit vector."""
    los = np.asarray(sat, dtype=float) - np.asarray(user, dtype=float)
    norm = np.linalg.norm(los)
    if norm == 0.0:
        raise ValueError("satellite position coincides with the user position")
    return math.degrees(math.asin(float(np.clip(np.dot(los / norm, up), -1.0, 1.0))))


def elevation_angle(user: np.ndarray, sat: np.ndarray) -> float:
    """Elevation of a satellite above the user's local tangent plane.

    The tangent plane is taken at the user's geodetic position (ellipsoid
    normal as "up"), so the angle is positive above the local horizon.

    Args:
        user: receiver ECEF position, |user| > 0.
        sat: satellite ECEF position, distinct from the user.

    Returns:
        Elevation in degrees, in [-90, 90].
    """
    user = np.asarray(user, dtype=float)
    geo = ecef_to_geodetic(user)
    _, _, up = enu_basis(geo.latitude, geo.longitude)
    return elevation_from_up(user, sat, up)
