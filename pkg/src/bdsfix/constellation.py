"""Satellite catalog, per-epoch positions, and visibility."""
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .frames import (
    OrbitalElements,
    ecef_to_geodetic,
    elevation_from_up,
    enu_basis,
    propagate_kepler,
)

SAT_CLASSES = ("GEO", "IGSO", "MEO")


@dataclass(frozen=True)
class SatelliteRecord:
    """One cataloged satellite: short id, orbit class, and elements."""

    sat_id: str
    sat_class: str
    elements: OrbitalElements

    def __post_init__(self) -> None:
        if self.sat_class not in SAT_CLASSES:
            raise ValueError(f"unknown satellite class {self.sat_class!r} for {self.sat_id}")

    @property
    def is_geo(self) -> bool:
        return self.sat_class == "GEO"


@dataclass(frozen=True)
class Catalog:
    """Ordered collection of satellites with unique ids."""

    records: tuple[SatelliteRecord, ...]

    def __post_init__(self) -> None:
        if not self.records:
            raise ValueError("catalog requires at least one satellite")
        ids = [r.sat_id for r in self.records]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate satellite ids in catalog: {dupes}")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def geo_records(self) -> tuple[SatelliteRecord, ...]:
        return tuple(r for r in self.records if r.is_geo)


@dataclass(frozen=True)
class VisibleSatellite:
    """A satellite above the elevation cutoff at one epoch."""

    sat_id: str
    sat_class: str
    position: np.ndarray
    elevation: float
    is_geo: bool


def positions_at(cat: Catalog, t: datetime) -> list[tuple[str, str, np.ndarray]]:
    """ECEF positions of every cataloged satellite at time t, order preserved."""
    out = []
    for rec in cat.records:
        try:
            pos = propagate_kepler(rec.elements, t)
        except Exception as exc:
            raise RuntimeError(f"propagation failed for satellite {rec.sat_id}: {exc}") from exc
        out.append((rec.sat_id, rec.sat_class, pos))
    return out


def visible_satellites(cat: Catalog, user: np.ndarray, t: datetime,
                       cutoff: float = 0.0) -> list[VisibleSatellite]:
    """Satellites whose elevation at the user is at least the cutoff (degrees)."""
    user = np.asarray(user, dtype=float)
    geo = ecef_to_geodetic(user)
    _, _, up = enu_basis(geo.latitude, geo.longitude)
    visible = []
    for sat_id, sat_class, pos in positions_at(cat, t):
        elev = elevation_from_up(user, pos, up)
        if elev >= cutoff:
            visible.append(VisibleSatellite(sat_id, sat_class, pos, elev, sat_class == "GEO"))
    return visible


def count_visible_geos(cat: Catalog, user: np.ndarray, t: datetime,
                       cutoff: float = 0.0) -> int:
    """Number of GEO-class satellites visible from the user position."""
    return sum(1 for v in visible_satellites(cat, user, t, cutoff) if v.is_geo)
