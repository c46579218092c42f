"""Fast position fixing from mixed full and fractional pseudoranges.

The fast solver estimates receiver position, clock bias, and one real-valued
("float") cycle ambiguity per fractional pseudorange in a single Gauss-Newton
iteration started from the earth center — no prior position or time is used.
The geometry of the full-pseudorange (GEO) subset is tested every iteration:
if sqrt(sum 1/lambda_i) of its 4x4 normal matrix reaches the configured
threshold, ambiguity rounding would not be safe and the solve is aborted.
After convergence the float ambiguities are rounded to integers, the full
pseudoranges are reconstructed, and a final position/clock solve over all
measurements produces the corrected solution.

A conventional all-full-pseudorange solver is provided as the comparison
baseline; with no fractional measurements the fast solver reduces to it
exactly.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from .constellation import Catalog, positions_at
from .frames import apparent_sat_position
from .measurements import KIND_FULL, MeasurementSet


class DegenerateGeometryError(ValueError):
    """Receiver estimate coincides with a satellite position."""


class UnderdeterminedSystemError(ValueError):
    """Design matrix does not have full column rank."""


class InsufficientMeasurementsError(ValueError):
    """Fewer measurements than the operation requires."""


class SolveStatus(Enum):
    CONVERGED = "Converged"
    GDOP_GATE_FAILED = "GdopGateFailed"
    MAX_ITERATIONS = "MaxIterations"
    INSUFFICIENT_MEASUREMENTS = "InsufficientMeasurements"


@dataclass(frozen=True)
class NavState:
    """Augmented unknowns: position (m), clock bias (m), ambiguities (cycles)."""

    position: np.ndarray
    clock_bias: float
    ambiguities: np.ndarray = field(default_factory=lambda: np.array([]))

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "ambiguities", np.asarray(self.ambiguities, dtype=float))
        if self.position.shape != (3,):
            raise ValueError("position must be a 3-vector")


@dataclass(frozen=True)
class SolverConfig:
    """Solver thresholds.

    ``alpha`` is the half-cycle rounding margin in meters and ``beta`` the
    geometry gate threshold alpha / max-range-error (150 km / 50 m = 3000).
    The convergence norm is measured over all unknowns with ambiguity
    components scaled into meters.
    """

    alpha: float = 150_000.0
    beta: float = 3000.0
    max_iterations: int = 20
    convergence_norm: float = 1e-4
    elevation_cutoff: float = 0.0

    def __post_init__(self) -> None:
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class GeoNormalMatrix:
    """4x4 normal matrix of the full-pseudorange geometry and its eigenvalues."""

    matrix: np.ndarray
    eigenvalues: np.ndarray


class GateCheck(NamedTuple):
    passed: bool
    gdop: float
    reason: str | None = None


@dataclass(frozen=True)
class UsabilityCheck:
    """Rounding-safety diagnostics; truthiness follows the GDOP-based verdict."""

    passed: bool
    los_projection: float     # worst projected full-measurement error, meters
    gdop_bound: float         # gdop * max error, meters
    gdop: float

    def __bool__(self) -> bool:
        return self.passed


@dataclass(frozen=True)
class SolveResult:
    status: SolveStatus
    state: NavState | None
    gdop_geo: float | None
    iterations: int
    recovered_full_pseudoranges: tuple[float, ...] = ()
    ambiguity_sats: tuple[str, ...] = ()


# ---------------------------------------------------------------------------
# measurement-set geometry helpers

def _rows_arrays(meas: MeasurementSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Values, full-kind mask, and per-row cycle length (0 for full rows)."""
    values = np.array([m.value for m in meas.measurements])
    full_mask = np.array([m.kind == KIND_FULL for m in meas.measurements])
    cycles = np.array([0.0 if m.kind == KIND_FULL else m.cycle_length
                       for m in meas.measurements])
    return values, full_mask, cycles


def _geometry(position: np.ndarray, sat_positions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ranges and unit line-of-sight vectors from a receiver position."""
    sats = np.asarray(sat_positions, dtype=float).reshape(-1, 3)
    diff = sats - np.asarray(position, dtype=float)
    rho = np.linalg.norm(diff, axis=1)
    if np.any(rho == 0.0):
        raise DegenerateGeometryError("degenerate geometry: receiver coincides with a satellite")
    return rho, diff / rho[:, None]


def _predicted(rho: np.ndarray, clock: float, ambiguities: np.ndarray,
               full_mask: np.ndarray, cycles: np.ndarray) -> np.ndarray:
    pred = rho + clock
    frac_rows = np.flatnonzero(~full_mask)
    pred[frac_rows] -= ambiguities * cycles[frac_rows]
    return pred


def _design(los: np.ndarray, full_mask: np.ndarray, cycles: np.ndarray) -> np.ndarray:
    k = len(full_mask)
    frac_rows = np.flatnonzero(~full_mask)
    H = np.zeros((k, 4 + len(frac_rows)))
    H[:, :3] = -los
    H[:, 3] = 1.0
    for j, row in enumerate(frac_rows):
        H[row, 4 + j] = -cycles[row]
    return H


def _ls_step(H: np.ndarray, resid: np.ndarray, frac_cycles: np.ndarray) -> tuple[np.ndarray, float]:
    """Least-squares correction and its norm with ambiguities scaled to meters."""
    delta, _, rank, _ = np.linalg.lstsq(H, resid, rcond=None)
    if rank < H.shape[1]:
        raise UnderdeterminedSystemError("underdetermined system: design matrix is rank deficient")
    scaled = delta.copy()
    scaled[4:] *= frac_cycles
    return delta, float(np.linalg.norm(scaled))


def _catalog_positions(meas: MeasurementSet, cat: Catalog) -> np.ndarray:
    """Reception-epoch satellite positions aligned with the measurement rows."""
    by_id = {sat_id: pos for sat_id, _, pos in positions_at(cat, meas.epoch)}
    missing = [m.sat_id for m in meas.measurements if m.sat_id not in by_id]
    if missing:
        raise KeyError(f"measurements reference satellites missing from the catalog: {missing}")
    return np.array([by_id[m.sat_id] for m in meas.measurements])


def _apparent_all(sat_rx: np.ndarray, position: np.ndarray) -> np.ndarray:
    return np.array([apparent_sat_position(s, position) for s in sat_rx])


def _geometry_gdop(position: np.ndarray, sat_rx_full: np.ndarray) -> float:
    """GDOP of the full-measurement rows evaluated at a receiver position."""
    _, los = _geometry(position, _apparent_all(sat_rx_full, position))
    rows = np.hstack([-los, np.ones((len(los), 1))])
    eig = np.linalg.eigvalsh(rows.T @ rows)
    if np.any(eig <= 0.0):
        return float("inf")
    return float(np.sqrt(np.sum(1.0 / eig)))


# ---------------------------------------------------------------------------
# public per-step operations

def geometric_distances(state: NavState, sat_positions: np.ndarray) -> np.ndarray:
    """Distances from the estimated receiver position to each satellite, meters."""
    rho, _ = _geometry(state.position, sat_positions)
    return rho


def residuals(state: NavState, meas: MeasurementSet, sat_positions: np.ndarray) -> np.ndarray:
    """Measured minus predicted pseudoranges at the current state estimate.

    ``sat_positions`` must already carry the earth-rotation correction and be
    aligned row-for-row with ``meas.measurements``.
    """
    values, full_mask, cycles = _rows_arrays(meas)
    rho, _ = _geometry(state.position, sat_positions)
    return values - _predicted(rho, state.clock_bias, state.ambiguities, full_mask, cycles)


def design_matrix(state: NavState, meas: MeasurementSet, sat_positions: np.ndarray) -> np.ndarray:
    """Jacobian of the predicted measurements wrt [x, y, z, b, N_1..N_m].

    Full rows are [-e, 1, 0...]; fractional rows additionally carry -c*T in
    their own ambiguity column, with e the unit receiver-to-satellite LOS.
    """
    _, full_mask, cycles = _rows_arrays(meas)
    _, los = _geometry(state.position, sat_positions)
    return _design(los, full_mask, cycles)


def geo_normal_matrix(meas: MeasurementSet, state: NavState,
                      sat_positions: np.ndarray) -> GeoNormalMatrix:
    """Normal matrix D = G^T G of the full-pseudorange geometry rows."""
    _, full_mask, _ = _rows_arrays(meas)
    if int(full_mask.sum()) < 4:
        raise InsufficientMeasurementsError("at least 4 full-pseudorange rows are required")
    sats = np.asarray(sat_positions, dtype=float).reshape(-1, 3)
    _, los = _geometry(state.position, sats[full_mask])
    rows = np.hstack([-los, np.ones((len(los), 1))])
    matrix = rows.T @ rows
    return GeoNormalMatrix(matrix=matrix, eigenvalues=np.linalg.eigvalsh(matrix))


def eigenvalue_gate(D: GeoNormalMatrix, beta: float) -> GateCheck:
    """Test sqrt(sum 1/lambda_i) < beta; the value is reported either way."""
    if np.any(D.eigenvalues <= 0.0):
        return GateCheck(False, float("inf"), "singular geometry")
    gdop = float(np.sqrt(np.sum(1.0 / D.eigenvalues)))
    return GateCheck(gdop < beta, gdop)


def iterate_once(state: NavState, meas: MeasurementSet,
                 sat_positions: np.ndarray) -> tuple[NavState, float]:
    """One unweighted Gauss-Newton update of the augmented state.

    Returns the updated state (ambiguities still real-valued) and the step
    norm in meters.
    """
    resid = residuals(state, meas, sat_positions)
    H = design_matrix(state, meas, sat_positions)
    _, full_mask, cycles = _rows_arrays(meas)
    delta, step = _ls_step(H, resid, cycles[~full_mask])
    new_state = NavState(position=state.position + delta[:3],
                         clock_bias=state.clock_bias + delta[3],
                         ambiguities=state.ambiguities + delta[4:])
    return new_state, step


def usability_criterion(geo_errors: np.ndarray, geo_los: np.ndarray,
                        nongeo_los: np.ndarray, alpha: float) -> UsabilityCheck:
    """Rounding-safety check for a concrete full-measurement error realization.

    Evaluates both the projected-error form |sum_i d_i e_i . e_j| and the
    stricter geometry form gdop * max|d_i|; the verdict follows the stricter
    form, both values are reported.
    """
    errors = np.asarray(geo_errors, dtype=float).reshape(-1)
    geo = np.asarray(geo_los, dtype=float).reshape(-1, 3)
    nongeo = np.asarray(nongeo_los, dtype=float).reshape(-1, 3)
    if len(errors) != len(geo):
        raise ValueError("one error per full-measurement LOS vector is required")
    for name, arr in (("geo", geo), ("nongeo", nongeo)):
        norms = np.linalg.norm(arr, axis=1)
        if len(arr) and not np.allclose(norms, 1.0, atol=1e-9):
            raise ValueError(f"{name} LOS vectors must be unit-norm")

    error_sum = geo.T @ errors
    projection = float(np.max(np.abs(nongeo @ error_sum))) if len(nongeo) else 0.0

    rows = np.hstack([-geo, np.ones((len(geo), 1))])
    eig = np.linalg.eigvalsh(rows.T @ rows)
    gdop = float("inf") if np.any(eig <= 0.0) else float(np.sqrt(np.sum(1.0 / eig)))
    max_error = float(np.max(np.abs(errors))) if len(errors) else 0.0
    gdop_bound = 0.0 if max_error == 0.0 else gdop * max_error
    return UsabilityCheck(gdop_bound < alpha, projection, gdop_bound, gdop)


# ---------------------------------------------------------------------------
# full solves

def _gauss_newton(values: np.ndarray, sat_rx: np.ndarray, full_mask: np.ndarray,
                  cycles: np.ndarray, cfg: SolverConfig, vec: np.ndarray,
                  beta: float | None) -> tuple[np.ndarray, int, str, float | None]:
    """Iterate to convergence; gate every iteration before the update if beta given.

    Returns (state vector, iterations performed, flag, last gate gdop) where
    flag is "converged", "gate_failed", or "max_iterations".
    """
    frac_rows = np.flatnonzero(~full_mask)
    last_gdop: float | None = None
    vec = vec.astype(float).copy()
    for iteration in range(1, cfg.max_iterations + 1):
        apparent = _apparent_all(sat_rx, vec[:3])
        rho, los = _geometry(vec[:3], apparent)
        pred = _predicted(rho, vec[3], vec[4:], full_mask, cycles)
        resid = values - pred
        if beta is not None:
            geo_rows = np.hstack([-los[full_mask], np.ones((int(full_mask.sum()), 1))])
            matrix = geo_rows.T @ geo_rows
            gate = eigenvalue_gate(GeoNormalMatrix(matrix, np.linalg.eigvalsh(matrix)), beta)
            last_gdop = gate.gdop
            if not gate.passed:
                return vec, iteration - 1, "gate_failed", last_gdop
        H = _design(los, full_mask, cycles)
        delta, step = _ls_step(H, resid, cycles[frac_rows])
        vec += delta
        if step < cfg.convergence_norm:
            return vec, iteration, "converged", last_gdop
    return vec, cfg.max_iterations, "max_iterations", last_gdop


def _initial_vector(m: int, initial_state: NavState | None) -> np.ndarray:
    vec = np.zeros(4 + m)
    if initial_state is not None:
        vec[:3] = initial_state.position
        vec[3] = initial_state.clock_bias
        if len(initial_state.ambiguities) == m:
            vec[4:] = initial_state.ambiguities
        elif len(initial_state.ambiguities):
            raise ValueError("initial ambiguity count does not match the measurement set")
    return vec


def solve_fast(meas: MeasurementSet, cat: Catalog, cfg: SolverConfig | None = None,
               initial_state: NavState | None = None) -> SolveResult:
    """Solve position, clock, and fractional-pseudorange ambiguities together.

    Requires at least 4 full pseudoranges; fractional measurements are
    optional.  Without an ``initial_state`` the iteration starts from the
    earth center with zero clock and zero ambiguities.  On success the
    returned state carries integer-valued ambiguities and the corrected
    position/clock; ``recovered_full_pseudoranges`` holds value + N*c*T for
    every fractional row.
    """
    cfg = cfg or SolverConfig()
    values, full_mask, cycles = _rows_arrays(meas)
    frac_rows = np.flatnonzero(~full_mask)
    frac_sats = tuple(meas.measurements[i].sat_id for i in frac_rows)
    m = len(frac_rows)
    if int(full_mask.sum()) < 4:
        return SolveResult(SolveStatus.INSUFFICIENT_MEASUREMENTS, None, None, 0, (), frac_sats)

    sat_rx = _catalog_positions(meas, cat)
    vec0 = _initial_vector(m, initial_state)
    beta = cfg.beta if m > 0 else None
    vec, iterations, flag, last_gdop = _gauss_newton(values, sat_rx, full_mask, cycles,
                                                     cfg, vec0, beta)
    if flag == "gate_failed":
        return SolveResult(SolveStatus.GDOP_GATE_FAILED, None, last_gdop, iterations, (), frac_sats)
    if flag == "max_iterations":
        gdop = last_gdop if last_gdop is not None else _geometry_gdop(vec[:3], sat_rx[full_mask])
        return SolveResult(SolveStatus.MAX_ITERATIONS, None, gdop, iterations, (), frac_sats)

    if m == 0:
        final = NavState(vec[:3], float(vec[3]))
        recovered: tuple[float, ...] = ()
    else:
        fixed = np.rint(vec[4:])
        rec_values = values.copy()
        rec_values[frac_rows] += fixed * cycles[frac_rows]
        cvec, _, cflag, _ = _gauss_newton(rec_values, sat_rx, np.ones(len(values), dtype=bool),
                                          np.zeros(len(values)), cfg, np.zeros(4), None)
        if cflag != "converged":
            return SolveResult(SolveStatus.MAX_ITERATIONS, None, last_gdop, iterations, (), frac_sats)
        final = NavState(cvec[:3], float(cvec[3]), fixed)
        recovered = tuple(float(v) for v in rec_values[frac_rows])

    gdop = _geometry_gdop(final.position, sat_rx[full_mask])
    return SolveResult(SolveStatus.CONVERGED, final, gdop, iterations, recovered, frac_sats)


def solve_conventional(meas: MeasurementSet, cat: Catalog, cfg: SolverConfig | None = None,
                       initial_state: NavState | None = None) -> SolveResult:
    """Standard iterative least squares over [x, y, z, b] from full pseudoranges."""
    cfg = cfg or SolverConfig()
    if meas.fractional():
        raise ValueError("conventional solver accepts full measurements only")
    values, full_mask, cycles = _rows_arrays(meas)
    if len(values) < 4:
        return SolveResult(SolveStatus.INSUFFICIENT_MEASUREMENTS, None, None, 0)

    sat_rx = _catalog_positions(meas, cat)
    vec0 = _initial_vector(0, initial_state)
    vec, iterations, flag, _ = _gauss_newton(values, sat_rx, full_mask, cycles, cfg, vec0, None)
    if flag == "max_iterations":
        return SolveResult(SolveStatus.MAX_ITERATIONS, None,
                           _geometry_gdop(vec[:3], sat_rx), iterations)
    final = NavState(vec[:3], float(vec[3]))
    return SolveResult(SolveStatus.CONVERGED, final,
                       _geometry_gdop(final.position, sat_rx), iterations)


def state_correction(fixed_state: NavState, meas: MeasurementSet,
                     sat_positions: np.ndarray, cfg: SolverConfig | None = None) -> NavState:
    """Re-solve position and clock with the ambiguities held at their integers.

    Fractional values are reconstructed to full pseudoranges with the fixed
    ambiguities and the 4-unknown problem is solved from scratch over all
    rows, so the output matches a conventional solve of the recovered set.
    ``sat_positions`` are the reception-epoch satellite positions aligned
    with the measurement rows.
    """
    cfg = cfg or SolverConfig()
    values, full_mask, cycles = _rows_arrays(meas)
    frac_rows = np.flatnonzero(~full_mask)
    if len(fixed_state.ambiguities) != len(frac_rows):
        raise ValueError("fixed state must carry one ambiguity per fractional measurement")
    rec_values = values.copy()
    rec_values[frac_rows] += fixed_state.ambiguities * cycles[frac_rows]

    sat_rx = np.asarray(sat_positions, dtype=float).reshape(-1, 3)
    vec, _, flag, _ = _gauss_newton(rec_values, sat_rx, np.ones(len(values), dtype=bool),
                                    np.zeros(len(values)), cfg, np.zeros(4), None)
    if flag != "converged":
        raise RuntimeError("state correction did not converge within the iteration budget")
    return NavState(vec[:3], float(vec[3]), fixed_state.ambiguities.copy())
