"""Fast positioning for BeiDou-style constellations.

Solves receiver position, clock bias, and the integer cycle ambiguities of
fractional pseudoranges simultaneously from at least 4 full (GEO) and any
number of fractional (non-GEO) pseudoranges, with no prior position or time.
Includes a constellation simulator and a coverage/usability analyzer.
"""
from .constellation import Catalog, SatelliteRecord, VisibleSatellite, count_visible_geos, positions_at, visible_satellites
from .coverage import CoverageCell, Footprint, GridSpec, SweepSummary, evaluate_cell, footprint, sweep
from .frames import GeodeticPoint, OrbitalElements, ecef_to_geodetic, geodetic_to_ecef, propagate_kepler
from .measurements import Measurement, MeasurementSet, SimulationScenario, simulate_scenario, truncate_fractional
from .solver import (
    NavState,
    SolveResult,
    SolveStatus,
    SolverConfig,
    solve_conventional,
    solve_fast,
)

__version__ = "0.1.0"
