"""Catalog positions and visibility."""
import math
from datetime import timedelta, timezone, datetime

import numpy as np
import pytest

from bdsfix.constellation import (
    Catalog,
    SatelliteRecord,
    count_visible_geos,
    positions_at,
    visible_satellites,
)
from bdsfix.frames import (
    MU_EARTH,
    GeodeticPoint,
    OrbitalElements,
    ecef_to_geodetic,
    elevation_angle,
    geodetic_to_ecef,
    propagate_kepler,
)
from bdsfix.io import bundled_elements_path, read_elements

EPOCH = datetime(2015, 5, 19, 4, 0, 0, tzinfo=timezone.utc)


@pytest.fixture(scope="module")
def catalog():
    return read_elements(bundled_elements_path())


def test_positions_at_epoch_counts_and_geo_radii(catalog):
    positions = positions_at(catalog, EPOCH)
    assert len(positions) == 14
    assert [sat_id for sat_id, _, _ in positions] == [r.sat_id for r in catalog.records]
    geo_radii = [np.linalg.norm(p) for _, cls, p in positions if cls == "GEO"]
    assert len(geo_radii) == 5
    for radius in geo_radii:
        assert 42_154_000.0 <= radius <= 42_174_000.0


def test_positions_at_delegates_to_propagation():
    elem = OrbitalElements(42_164_169.0, 0.0, 0.0, 10.0, 20.0, 30.0, EPOCH)
    cat = Catalog((SatelliteRecord("G9", "GEO", elem),))
    (sat_id, cls, pos), = positions_at(cat, EPOCH)
    np.testing.assert_array_equal(pos, propagate_kepler(elem, EPOCH))


def test_meo_ground_track_recurs_after_thirteen_orbits(catalog):
    # Thirteen orbital revolutions of the MEO ring span close to seven
    # sidereal days, so the sub-satellite track approximately repeats.
    m3 = next(r for r in catalog.records if r.sat_id == "M3")
    period = 2.0 * math.pi / math.sqrt(MU_EARTH / m3.elements.semi_major_axis**3)
    t1 = EPOCH + timedelta(seconds=13.0 * period)
    lon0 = ecef_to_geodetic(propagate_kepler(m3.elements, EPOCH)).longitude
    lon1 = ecef_to_geodetic(propagate_kepler(m3.elements, t1)).longitude
    delta = abs(lon1 - lon0)
    assert min(delta, 360.0 - delta) < 3.0


def test_positions_at_reports_failing_satellite(catalog):
    with pytest.raises(RuntimeError, match="G1"):
        positions_at(catalog, EPOCH + timedelta(days=45))


def test_all_five_geos_visible_mid_footprint(catalog):
    user = geodetic_to_ecef(GeodeticPoint(30.0, 110.0, 0.0))
    visible = visible_satellites(catalog, user, EPOCH, 0.0)
    geo_ids = sorted(v.sat_id for v in visible if v.is_geo)
    assert geo_ids == ["G1", "G3", "G4", "G5", "G6"]


def test_no_geos_visible_antipodal(catalog):
    user = geodetic_to_ecef(GeodeticPoint(0.0, -60.0, 0.0))
    assert count_visible_geos(catalog, user, EPOCH, 0.0) == 0


def test_visible_counts_match_brute_force_elevation_sign(catalog):
    positions = positions_at(catalog, EPOCH)
    for lat in (-60.0, -20.0, 10.0, 45.0, 75.0):
        for lon in (-120.0, 0.0, 80.0, 110.0, 150.0):
            user = geodetic_to_ecef(GeodeticPoint(lat, lon, 0.0))
            expected = sum(
                1 for _, cls, pos in positions
                if cls == "GEO" and elevation_angle(user, pos) >= 0.0
            )
            assert count_visible_geos(catalog, user, EPOCH, 0.0) == expected


def test_visible_is_subset_of_positions_and_above_cutoff(catalog):
    user = geodetic_to_ecef(GeodeticPoint(25.0, 100.0, 0.0))
    cutoff = 15.0
    visible = visible_satellites(catalog, user, EPOCH, cutoff)
    all_ids = {sat_id for sat_id, _, _ in positions_at(catalog, EPOCH)}
    for v in visible:
        assert v.sat_id in all_ids
        assert v.elevation >= cutoff


def test_raising_cutoff_never_increases_visible_set(catalog):
    user = geodetic_to_ecef(GeodeticPoint(25.0, 100.0, 0.0))
    previous = None
    for cutoff in (0.0, 5.0, 15.0, 30.0, 60.0):
        ids = {v.sat_id for v in visible_satellites(catalog, user, EPOCH, cutoff)}
        if previous is not None:
            assert ids <= previous
        previous = ids


def test_geo_split_counts_every_satellite_once(catalog):
    user = geodetic_to_ecef(GeodeticPoint(25.0, 100.0, 0.0))
    visible = visible_satellites(catalog, user, EPOCH, 0.0)
    geos = [v for v in visible if v.is_geo]
    non_geos = [v for v in visible if not v.is_geo]
    assert len(geos) + len(non_geos) == len(visible)
    assert {v.sat_id for v in geos}.isdisjoint({v.sat_id for v in non_geos})


def test_geo_count_bounded_by_catalog(catalog):
    bound = len(catalog.geo_records())
    for lon in (-150.0, -60.0, 30.0, 110.0):
        user = geodetic_to_ecef(GeodeticPoint(0.0, lon, 0.0))
        assert count_visible_geos(catalog, user, EPOCH, 0.0) <= bound


def test_catalog_rejects_duplicates_and_empty():
    elem = OrbitalElements(42_164_169.0, 0.0, 0.0, 0.0, 0.0, 0.0, EPOCH)
    rec = SatelliteRecord("G1", "GEO", elem)
    with pytest.raises(ValueError, match="duplicate"):
        Catalog((rec, rec))
    with pytest.raises(ValueError, match="at least one"):
        Catalog(())


def test_satellite_record_rejects_unknown_class():
    elem = OrbitalElements(42_164_169.0, 0.0, 0.0, 0.0, 0.0, 0.0, EPOCH)
    with pytest.raises(ValueError, match="class"):
        SatelliteRecord("X1", "LEO", elem)
