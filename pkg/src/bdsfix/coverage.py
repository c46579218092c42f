"""Grid/time sweeps of GEO visibility, geometry-gate verdicts, and usability.

A coverage cell is usable when at least 4 GEO satellites are above the
elevation cutoff and the GDOP of those satellites, computed from geometry
alone at the cell point, is below the gate threshold.  All evaluation is a
pure function of (catalog, grid, epoch, config): results are identical
regardless of evaluation order or batching.
"""
import math
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .constellation import Catalog, positions_at
from .frames import GeodeticPoint, geodetic_to_ecef
from .solver import SolverConfig


@dataclass(frozen=True)
class GridSpec:
    """Global sampling grid: steps in degrees, altitudes in meters."""

    lat_step: float = 5.0
    lon_step: float = 5.0
    altitudes: tuple[float, ...] = (0.0,)

    def __post_init__(self) -> None:
        if self.lat_step <= 0 or self.lon_step <= 0:
            raise ValueError("grid steps must be positive")
        if abs(360.0 / self.lon_step - round(360.0 / self.lon_step)) > 1e-9:
            raise ValueError(f"lon step {self.lon_step} must divide 360 evenly")
        if abs(180.0 / self.lat_step - round(180.0 / self.lat_step)) > 1e-9:
            raise ValueError(f"lat step {self.lat_step} must divide 180 evenly")
        if not self.altitudes:
            raise ValueError("at least one altitude is required")


@dataclass(frozen=True)
class CoverageCell:
    """Visibility and gate verdict at one grid point."""

    point: GeodeticPoint
    n_geo_visible: int
    gdop_geo: float | None
    gate_pass: bool


@dataclass(frozen=True)
class FootprintExtent:
    lon_min: float
    lon_max: float
    lat_min: float
    lat_max: float


@dataclass(frozen=True)
class Footprint:
    """Cells with >=4 visible GEOs and their bounding extents per altitude."""

    cells: tuple[CoverageCell, ...]
    extents: dict[float, FootprintExtent]


@dataclass(frozen=True)
class SweepBand:
    """Usable-area proportions: per epoch, pooled, and their extremes."""

    per_epoch: tuple[float, ...]
    overall: float
    minimum: float
    maximum: float


@dataclass(frozen=True)
class SweepSummary:
    epochs: tuple[datetime, ...]
    per_altitude: dict[float, SweepBand]
    combined: SweepBand


# ---------------------------------------------------------------------------
# grid construction

def grid_points(grid: GridSpec, altitude: float) -> list[GeodeticPoint]:
    """Grid points at one altitude; poles appear once, longitude wraps."""
    n_lat = round(180.0 / grid.lat_step) + 1
    n_lon = round(360.0 / grid.lon_step)
    lats = -90.0 + np.arange(n_lat) * grid.lat_step
    lons = -180.0 + (np.arange(n_lon) + 1) * grid.lon_step   # (-180, 180]
    points = []
    for lat in lats:
        if abs(lat) >= 90.0 - 1e-12:
            points.append(GeodeticPoint(float(np.sign(lat)) * 90.0, 0.0, altitude))
        else:
            points.extend(GeodeticPoint(float(lat), float(lon), altitude) for lon in lons)
    return points


def _grid_arrays(points: list[GeodeticPoint]) -> tuple[np.ndarray, np.ndarray]:
    """User ECEF positions and local up vectors for a list of grid points."""
    users = np.array([geodetic_to_ecef(p) for p in points])
    lat = np.radians(np.array([p.latitude for p in points]))
    lon = np.radians(np.array([p.longitude for p in points]))
    ups = np.stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)], axis=1)
    return users, ups


def _geo_positions(cat: Catalog, t: datetime) -> np.ndarray:
    geo = [pos for _, sat_class, pos in positions_at(cat, t) if sat_class == "GEO"]
    return np.array(geo).reshape(-1, 3)


def _evaluate_batch(geo_pos: np.ndarray, users: np.ndarray, ups: np.ndarray,
                    cutoff: float, beta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Visible-GEO count, GDOP (nan if <4 visible), and gate verdict per point."""
    n_points = len(users)
    n_geo = np.zeros(n_points, dtype=int)
    gdop = np.full(n_points, np.nan)
    gate = np.zeros(n_points, dtype=bool)
    if len(geo_pos) == 0:
        return n_geo, gdop, gate

    los = geo_pos[None, :, :] - users[:, None, :]
    dist = np.linalg.norm(los, axis=2)
    unit = los / dist[..., None]
    sin_elev = np.clip(np.einsum("kgi,ki->kg", unit, ups), -1.0, 1.0)
    elev = np.degrees(np.arcsin(sin_elev))
    visible = elev >= cutoff
    n_geo = visible.sum(axis=1)

    eligible = n_geo >= 4
    if np.any(eligible):
        rows = np.concatenate([-unit, np.ones(unit.shape[:2] + (1,))], axis=2)
        rows = rows * visible[..., None]
        normals = np.einsum("kgi,kgj->kij", rows[eligible], rows[eligible])
        eig = np.linalg.eigvalsh(normals)
        positive = np.all(eig > 0.0, axis=1)
        with np.errstate(divide="ignore"):
            values = np.sqrt(np.sum(1.0 / np.where(eig > 0.0, eig, np.inf), axis=1))
        values = np.where(positive, values, np.inf)
        gdop[eligible] = values
        gate[eligible] = positive & (values < beta)
    return n_geo, gdop, gate


def _cells_from_batch(points: list[GeodeticPoint], n_geo: np.ndarray, gdop: np.ndarray,
                      gate: np.ndarray) -> list[CoverageCell]:
    return [
        CoverageCell(p, int(n), None if math.isnan(g) else float(g), bool(ok))
        for p, n, g, ok in zip(points, n_geo, gdop, gate)
    ]


# ---------------------------------------------------------------------------
# public operations

def evaluate_cell(cat: Catalog, point: GeodeticPoint, t: datetime,
                  cfg: SolverConfig | None = None) -> CoverageCell:
    """Evaluate visibility and the geometry gate at a single point."""
    cfg = cfg or SolverConfig()
    users, ups = _grid_arrays([point])
    n_geo, gdop, gate = _evaluate_batch(_geo_positions(cat, t), users, ups,
                                        cfg.elevation_cutoff, cfg.beta)
    return _cells_from_batch([point], n_geo, gdop, gate)[0]


def evaluate_grid(cat: Catalog, t: datetime, grid: GridSpec,
                  cfg: SolverConfig | None = None) -> list[CoverageCell]:
    """Evaluate every grid cell at one epoch, all altitudes."""
    cfg = cfg or SolverConfig()
    geo_pos = _geo_positions(cat, t)
    cells: list[CoverageCell] = []
    for alt in grid.altitudes:
        points = grid_points(grid, alt)
        users, ups = _grid_arrays(points)
        n_geo, gdop, gate = _evaluate_batch(geo_pos, users, ups,
                                            cfg.elevation_cutoff, cfg.beta)
        cells.extend(_cells_from_batch(points, n_geo, gdop, gate))
    return cells


def footprint(cat: Catalog, t: datetime, cfg: SolverConfig | None = None,
              grid: GridSpec | None = None) -> Footprint:
    """Cells covered by at least 4 GEOs and their lon/lat extents per altitude."""
    cfg = cfg or SolverConfig()
    grid = grid or GridSpec()
    geo_pos = _geo_positions(cat, t)
    covered: list[CoverageCell] = []
    extents: dict[float, FootprintExtent] = {}
    for alt in grid.altitudes:
        points = grid_points(grid, alt)
        users, ups = _grid_arrays(points)
        n_geo, gdop, gate = _evaluate_batch(geo_pos, users, ups,
                                            cfg.elevation_cutoff, cfg.beta)
        cells = [c for c in _cells_from_batch(points, n_geo, gdop, gate)
                 if c.n_geo_visible >= 4]
        covered.extend(cells)
        if cells:
            lons = [c.point.longitude for c in cells]
            lats = [c.point.latitude for c in cells]
            extents[alt] = FootprintExtent(min(lons), max(lons), min(lats), max(lats))
    return Footprint(tuple(covered), extents)


def _make_band(passes: np.ndarray, eligibles: np.ndarray) -> SweepBand:
    """Aggregate per-epoch pass/eligible tallies into a proportion band."""
    with np.errstate(invalid="ignore"):
        per_epoch = np.where(eligibles > 0, passes / np.maximum(eligibles, 1), np.nan)
    total_eligible = int(eligibles.sum())
    overall = float(passes.sum() / total_eligible) if total_eligible else float("nan")
    has_data = eligibles > 0
    minimum = float(np.min(per_epoch[has_data])) if np.any(has_data) else float("nan")
    maximum = float(np.max(per_epoch[has_data])) if np.any(has_data) else float("nan")
    return SweepBand(tuple(float(p) for p in per_epoch), overall, minimum, maximum)


def sweep(cat: Catalog, start: datetime, duration: float, step: float,
          grid: GridSpec | None = None, cfg: SolverConfig | None = None) -> SweepSummary:
    """Proportion of gate-passing cells among >=4-GEO cells over a time span.

    Epochs run from ``start`` to ``start + duration`` inclusive at ``step``
    seconds.  Proportions are reported per altitude and pooled; the overall
    value aggregates by total cell counts, not by averaging epochs.
    """
    if step <= 0:
        raise ValueError("epoch step must be positive")
    grid = grid or GridSpec()
    cfg = cfg or SolverConfig()
    n_epochs = int(math.floor(duration / step)) + 1
    epochs = tuple(start + timedelta(seconds=step * k) for k in range(n_epochs))

    cached = {alt: _grid_arrays(grid_points(grid, alt)) for alt in grid.altitudes}
    passes = {alt: np.zeros(n_epochs) for alt in grid.altitudes}
    eligibles = {alt: np.zeros(n_epochs) for alt in grid.altitudes}
    for i, t in enumerate(epochs):
        geo_pos = _geo_positions(cat, t)
        for alt in grid.altitudes:
            users, ups = cached[alt]
            n_geo, _, gate = _evaluate_batch(geo_pos, users, ups,
                                             cfg.elevation_cutoff, cfg.beta)
            passes[alt][i] = int(gate.sum())
            eligibles[alt][i] = int((n_geo >= 4).sum())

    per_altitude = {alt: _make_band(passes[alt], eligibles[alt]) for alt in grid.altitudes}
    combined = _make_band(sum(passes.values()), sum(eligibles.values()))
    return SweepSummary(epochs, per_altitude, combined)
