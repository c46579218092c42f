"""File formats: element CSV, measurement JSONL, result JSON, coverage CSV.

All writers are atomic (write to a temp file in the target directory, then
rename).  Timestamps are ISO-8601 UTC with a trailing Z.
"""
import csv
import json
import math
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

from .constellation import Catalog, SatelliteRecord
from .coverage import CoverageCell
from .frames import SPEED_OF_LIGHT, OrbitalElements, ecef_to_geodetic
from .measurements import KIND_FRACTIONAL, KIND_FULL, Measurement, MeasurementSet
from .solver import SolveResult, SolveStatus

ELEMENTS_COLUMNS = (
    "sat_id", "class", "semi_major_axis_m", "eccentricity", "inclination_deg",
    "raan_deg", "arg_perigee_deg", "true_anomaly_deg", "epoch_utc",
)
COVERAGE_COLUMNS = ("epoch_utc", "lat_deg", "lon_deg", "alt_m", "n_geo", "gdop_geo", "gate_pass")

_CLASS_BY_PREFIX = {"G": "GEO", "I": "IGSO", "M": "MEO"}


class ElementsFormatError(ValueError):
    """Malformed orbital-elements CSV."""


class MeasurementsFormatError(ValueError):
    """Malformed measurements JSONL."""


def bundled_elements_path() -> Path:
    """Path of the packaged 14-satellite element table."""
    return Path(__file__).parent / "data" / "table1.csv"


def parse_utc(text: str) -> datetime:
    """Parse an ISO-8601 UTC timestamp; a trailing Z is accepted."""
    t = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if t.tzinfo is None:
        raise ValueError(f"timestamp {text!r} must carry a UTC offset or Z")
    return t.astimezone(timezone.utc)


def format_utc(t: datetime) -> str:
    if t.tzinfo is None:
        raise ValueError("timestamps must be timezone-aware")
    return t.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_elements(path: str | os.PathLike) -> Catalog:
    """Load a satellite catalog from an elements CSV."""
    records: list[SatelliteRecord] = []
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or set(ELEMENTS_COLUMNS) - set(reader.fieldnames):
            raise ElementsFormatError(
                f"{path}: header must contain columns {', '.join(ELEMENTS_COLUMNS)}"
            )
        for line, row in enumerate(reader, start=2):
            try:
                sat_id = row["sat_id"].strip()
                sat_class = row["class"].strip()
                elements = OrbitalElements(
                    semi_major_axis=float(row["semi_major_axis_m"]),
                    eccentricity=float(row["eccentricity"]),
                    inclination=float(row["inclination_deg"]),
                    raan=float(row["raan_deg"]),
                    arg_perigee=float(row["arg_perigee_deg"]),
                    true_anomaly=float(row["true_anomaly_deg"]),
                    epoch=parse_utc(row["epoch_utc"]),
                )
                expected = _CLASS_BY_PREFIX.get(sat_id[:1])
                if expected is not None and sat_class != expected:
                    raise ValueError(f"class {sat_class} inconsistent with id prefix {sat_id[:1]}")
                records.append(SatelliteRecord(sat_id, sat_class, elements))
            except (ValueError, TypeError, KeyError) as exc:
                raise ElementsFormatError(f"{path} line {line}: {exc}") from exc
    if not records:
        raise ElementsFormatError(f"{path}: no satellite rows (catalog requires at least one)")
    try:
        return Catalog(tuple(records))
    except ValueError as exc:
        raise ElementsFormatError(f"{path}: {exc}") from exc


def write_measurements(mset: MeasurementSet, path: str | os.PathLike) -> None:
    """Write one epoch of measurements as JSON lines."""
    lines = []
    for m in mset.measurements:
        doc: dict = {"epoch": format_utc(m.epoch), "sat": m.sat_id, "kind": m.kind}
        if m.kind == KIND_FRACTIONAL:
            doc["modulus_ms"] = int(round(m.modulus * 1000.0))
        doc["value_m"] = m.value
        lines.append(json.dumps(doc))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_measurements(path: str | os.PathLike) -> list[MeasurementSet]:
    """Read a measurements JSONL file, grouped by epoch in chronological order."""
    by_epoch: dict[datetime, list[Measurement]] = {}
    with open(path) as handle:
        for line_no, raw in enumerate(handle, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                doc = json.loads(raw)
                epoch = parse_utc(doc["epoch"])
                kind = doc["kind"]
                modulus = doc["modulus_ms"] / 1000.0 if kind == KIND_FRACTIONAL else None
                meas = Measurement(doc["sat"], epoch, kind, float(doc["value_m"]), modulus)
            except (ValueError, TypeError, KeyError) as exc:
                raise MeasurementsFormatError(f"{path} line {line_no}: {exc}") from exc
            by_epoch.setdefault(epoch, []).append(meas)
    try:
        return [MeasurementSet(epoch, tuple(group))
                for epoch, group in sorted(by_epoch.items())]
    except ValueError as exc:
        raise MeasurementsFormatError(f"{path}: {exc}") from exc


def write_result(res: SolveResult, path: str | os.PathLike) -> None:
    """Write a solve result as JSON; position fields only when converged."""
    doc: dict = {"status": res.status.value, "iterations": res.iterations}
    if res.gdop_geo is not None and math.isfinite(res.gdop_geo):
        doc["gdop_geo"] = res.gdop_geo
    if res.status is SolveStatus.CONVERGED and res.state is not None:
        lla = ecef_to_geodetic(res.state.position)
        doc["position_ecef_m"] = [float(c) for c in res.state.position]
        doc["position_lla"] = [lla.latitude, lla.longitude, lla.altitude]
        doc["clock_bias_m"] = res.state.clock_bias
        doc["clock_bias_s"] = res.state.clock_bias / SPEED_OF_LIGHT
        doc["ambiguities"] = [
            {"sat": sat, "N": int(round(n))}
            for sat, n in zip(res.ambiguity_sats, res.state.ambiguities)
        ]
        doc["recovered_full_pseudoranges_m"] = list(res.recovered_full_pseudoranges)
    atomic_write_text(path, json.dumps(doc, indent=2) + "\n")


def write_coverage(rows: Iterable[tuple[datetime, CoverageCell]], path: str | os.PathLike) -> None:
    """Write coverage cells as CSV in (epoch, lat, lon, alt) order."""
    ordered = sorted(
        rows,
        key=lambda row: (row[0], row[1].point.latitude, row[1].point.longitude,
                         row[1].point.altitude),
    )
    out = [",".join(COVERAGE_COLUMNS)]
    for epoch, cell in ordered:
        gdop = "" if cell.gdop_geo is None else repr(cell.gdop_geo)
        out.append(",".join([
            format_utc(epoch),
            repr(cell.point.latitude),
            repr(cell.point.longitude),
            repr(cell.point.altitude),
            str(cell.n_geo_visible),
            gdop,
            "1" if cell.gate_pass else "0",
        ]))
    atomic_write_text(path, "\n".join(out) + "\n")
