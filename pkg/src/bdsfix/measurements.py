"""Pseudorange measurement model and scenario simulation.

A full pseudorange is geometric range plus receiver clock bias plus noise.
A fractional pseudorange is a full pseudorange reduced modulo c*T, where T is
the code period (1 ms) or the navigation bit period (20 ms); the discarded
integer count of c*T lengths is the pseudorange ambiguity.
"""
import math
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .constellation import Catalog, visible_satellites
from .frames import (
    SPEED_OF_LIGHT,
    GeodeticPoint,
    apparent_sat_position,
    geodetic_to_ecef,
)

KIND_FULL = "full"
KIND_FRACTIONAL = "fractional"
ALLOWED_MODULI_S = (0.001, 0.020)


@dataclass(frozen=True)
class Measurement:
    """One pseudorange observation.

    ``modulus`` is the truncation period in seconds for fractional
    measurements and None for full ones.  ``value`` is in meters.
    """

    sat_id: str
    epoch: datetime
    kind: str
    value: float
    modulus: float | None = None

    def __post_init__(self) -> None:
        if self.kind == KIND_FULL:
            if self.modulus is not None:
                raise ValueError(f"full measurement for {self.sat_id} must not carry a modulus")
            if not self.value > 0.0:
                raise ValueError(f"full pseudorange for {self.sat_id} must be positive")
        elif self.kind == KIND_FRACTIONAL:
            if self.modulus not in ALLOWED_MODULI_S:
                raise ValueError(
                    f"fractional modulus must be one of {ALLOWED_MODULI_S} s, got {self.modulus}"
                )
            if not 0.0 <= self.value < SPEED_OF_LIGHT * self.modulus:
                raise ValueError(
                    f"fractional pseudorange {self.value} m for {self.sat_id} outside "
                    f"[0, {SPEED_OF_LIGHT * self.modulus})"
                )
        else:
            raise ValueError(f"unknown measurement kind {self.kind!r}")

    @property
    def cycle_length(self) -> float:
        """Length of one ambiguity cycle, c*T, in meters (fractional only)."""
        if self.modulus is None:
            raise ValueError("full measurements have no cycle length")
        return SPEED_OF_LIGHT * self.modulus


@dataclass(frozen=True)
class MeasurementSet:
    """All measurements of a single epoch; at most one per satellite."""

    epoch: datetime
    measurements: tuple[Measurement, ...]

    def __post_init__(self) -> None:
        ids = [m.sat_id for m in self.measurements]
        if len(set(ids)) != len(ids):
            raise ValueError("measurement set contains a duplicate satellite id")
        for m in self.measurements:
            if m.epoch != self.epoch:
                raise ValueError(f"measurement for {m.sat_id} is not at the set epoch")

    def full(self) -> tuple[Measurement, ...]:
        return tuple(m for m in self.measurements if m.kind == KIND_FULL)

    def fractional(self) -> tuple[Measurement, ...]:
        return tuple(m for m in self.measurements if m.kind == KIND_FRACTIONAL)


@dataclass(frozen=True)
class SimulationScenario:
    """Ground-truth receiver state and noise model for simulation.

    ``clock_bias`` is in seconds; the simulator converts to meters internally.
    ``exclude_sats`` drops satellites from the simulation (e.g. a vehicle
    whose signal is not broadcast) without touching the catalog.
    """

    user_truth: GeodeticPoint
    clock_bias: float = 5.0
    noise_sigma: float = 1.3
    seed: int = 0
    fractional_modulus: float = 0.001
    elevation_cutoff: float = 0.0
    exclude_sats: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.noise_sigma < 0.0:
            raise ValueError("noise sigma must be non-negative")
        if self.fractional_modulus not in ALLOWED_MODULI_S:
            raise ValueError(f"fractional modulus must be one of {ALLOWED_MODULI_S} s")


def simulate_full(sat_pos: np.ndarray, user_pos: np.ndarray,
                  clock_bias_m: float = 0.0, noise: float = 0.0) -> float:
    """Full pseudorange: Sagnac-corrected range + clock bias + noise, meters."""
    sat = np.asarray(sat_pos, dtype=float)
    user = np.asarray(user_pos, dtype=float)
    if np.array_equal(sat, user):
        raise ValueError("satellite and user positions coincide")
    corrected = apparent_sat_position(sat, user)
    return float(np.linalg.norm(corrected - user)) + clock_bias_m + noise


def truncate_fractional(z_full: float, modulus: float) -> tuple[float, int]:
    """Reduce a full pseudorange modulo c*T.

    Returns (fractional value in [0, c*T), integer ambiguity N) such that
    fractional + N * c * T reconstructs the input exactly.
    """
    if z_full < 0.0:
        raise ValueError("full pseudorange must be non-negative")
    cycle = SPEED_OF_LIGHT * modulus
    ambiguity = math.floor(z_full / cycle)
    fractional = z_full - ambiguity * cycle
    # floor can land on the cycle boundary when z_full/cycle rounds up
    if fractional >= cycle:
        ambiguity += 1
        fractional = z_full - ambiguity * cycle
    if fractional < 0.0:
        ambiguity -= 1
        fractional = z_full - ambiguity * cycle
    return fractional, ambiguity


def simulate_scenario(cat: Catalog, scen: SimulationScenario, t: datetime):
    """Simulate one epoch of measurements for a ground-truth receiver.

    Every visible GEO contributes a full pseudorange; every visible non-GEO
    contributes a fractional one.  Noise draws are deterministic under the
    scenario seed, one draw per visible satellite in catalog order.

    Returns:
        (MeasurementSet, ground truth NavState) — the truth state carries the
        true position, clock bias in meters, and the true ambiguities in the
        order of the fractional measurements.
    """
    from .solver import NavState

    user = geodetic_to_ecef(scen.user_truth)
    visible = [v for v in visible_satellites(cat, user, t, scen.elevation_cutoff)
               if v.sat_id not in scen.exclude_sats]
    if not visible:
        raise ValueError("no satellites visible from the scenario position")

    clock_bias_m = scen.clock_bias * SPEED_OF_LIGHT
    rng = np.random.default_rng(scen.seed)
    noise = rng.normal(0.0, scen.noise_sigma, size=len(visible)) if scen.noise_sigma > 0 \
        else np.zeros(len(visible))

    full_meas: list[Measurement] = []
    frac_meas: list[Measurement] = []
    ambiguities: list[float] = []
    for sat, eps in zip(visible, noise):
        z = simulate_full(sat.position, user, clock_bias_m, float(eps))
        if sat.is_geo:
            full_meas.append(Measurement(sat.sat_id, t, KIND_FULL, z))
        else:
            fractional, ambiguity = truncate_fractional(z, scen.fractional_modulus)
            frac_meas.append(Measurement(sat.sat_id, t, KIND_FRACTIONAL, fractional,
                                         scen.fractional_modulus))
            ambiguities.append(float(ambiguity))

    mset = MeasurementSet(t, tuple(full_meas) + tuple(frac_meas))
    truth = NavState(position=user, clock_bias=clock_bias_m,
                     ambiguities=np.array(ambiguities))
    return mset, truth
