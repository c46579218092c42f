"""Command-line driver: simulate, solve, coverage, and compare workflows."""
import argparse
import json
import math
import sys
from datetime import datetime

import numpy as np

from . import io
from .coverage import GridSpec, evaluate_grid, sweep
from .frames import SPEED_OF_LIGHT, GeodeticPoint, geodetic_to_ecef
from .measurements import KIND_FULL, Measurement, MeasurementSet, SimulationScenario, simulate_scenario
from .solver import SolveStatus, SolverConfig, solve_conventional, solve_fast

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_GATE_FAILED = 3
EXIT_INSUFFICIENT = 4
EXIT_IO = 5
EXIT_NO_CONVERGENCE = 6

_STATUS_EXIT = {
    SolveStatus.CONVERGED: EXIT_OK,
    SolveStatus.GDOP_GATE_FAILED: EXIT_GATE_FAILED,
    SolveStatus.INSUFFICIENT_MEASUREMENTS: EXIT_INSUFFICIENT,
    SolveStatus.MAX_ITERATIONS: EXIT_NO_CONVERGENCE,
}

_DURATION_UNITS = {"s": 1.0, "m": 60.0, "h": 3600.0, "d": 86400.0}


def parse_duration(text: str) -> float:
    """Parse a duration as seconds, accepting s/m/h/d suffixes."""
    text = text.strip()
    unit = 1.0
    if text and text[-1].lower() in _DURATION_UNITS:
        unit = _DURATION_UNITS[text[-1].lower()]
        text = text[:-1]
    value = float(text)
    if value < 0:
        raise ValueError("duration must be non-negative")
    return value * unit


def parse_lla(text: str) -> GeodeticPoint:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError(f"--user-lla expects 'lat,lon,alt', got {text!r}")
    return GeodeticPoint(float(parts[0]), float(parts[1]), float(parts[2]))


def parse_alts(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(","))


def parse_modulus(text: str) -> float:
    table = {"1ms": 0.001, "20ms": 0.020}
    if text not in table:
        raise ValueError(f"--frac-modulus must be 1ms or 20ms, got {text!r}")
    return table[text]


def _solver_config(args: argparse.Namespace) -> SolverConfig:
    return SolverConfig(beta=args.threshold, elevation_cutoff=args.cutoff)


def _load_catalog(args: argparse.Namespace):
    return io.read_elements(args.elements or io.bundled_elements_path())


def _default_epoch(cat) -> datetime:
    return cat.records[0].elements.epoch


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--elements", help="orbital elements CSV (default: bundled table)")
    p.add_argument("--out", required=True, help="output path")
    p.add_argument("--cutoff", type=float, default=0.0, help="elevation cutoff, degrees")
    p.add_argument("--threshold", type=float, default=3000.0, help="geometry gate threshold")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bdsfix",
        description="Fast positioning from full GEO and fractional non-GEO pseudoranges.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one epoch of measurements")
    _add_common(p)
    p.add_argument("--user-lla", required=True, help="ground-truth position 'lat,lon,alt'")
    p.add_argument("--epoch", help="measurement epoch, ISO-8601 (default: element epoch)")
    p.add_argument("--clock-bias", type=float, default=5.0, help="receiver clock bias, seconds")
    p.add_argument("--noise-sigma", type=float, default=1.3, help="pseudorange noise 1-sigma, m")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frac-modulus", default="1ms", choices=["1ms", "20ms"])

    p = sub.add_parser("solve", help="solve a measurements file")
    _add_common(p)
    p.add_argument("--meas", required=True, help="measurements JSONL")
    p.add_argument("--mode", default="fast", choices=["fast", "conventional"])
    p.add_argument("--epoch", help="epoch to solve when the file holds several")

    p = sub.add_parser("coverage", help="grid/time sweep of usability")
    _add_common(p)
    p.add_argument("--start", help="sweep start, ISO-8601 (default: element epoch)")
    p.add_argument("--duration", default="0", help="sweep length, e.g. 8d, 12h, 3600")
    p.add_argument("--step", type=float, default=3600.0, help="epoch step, seconds")
    p.add_argument("--grid", type=float, default=5.0, help="grid step, degrees")
    p.add_argument("--alts", default="0,1000000", help="altitudes in meters, comma separated")

    p = sub.add_parser("compare", help="paired-noise fast vs conventional accuracy")
    _add_common(p)
    p.add_argument("--epoch", help="evaluation epoch, ISO-8601 (default: element epoch)")
    p.add_argument("--grid", type=float, default=10.0, help="grid step, degrees")
    p.add_argument("--alts", default="0", help="altitudes in meters, comma separated")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--clock-bias", type=float, default=5.0)
    p.add_argument("--noise-sigma", type=float, default=1.3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frac-modulus", default="1ms", choices=["1ms", "20ms"])
    return parser


def cmd_simulate(args: argparse.Namespace) -> int:
    cat = _load_catalog(args)
    point = parse_lla(args.user_lla)
    epoch = io.parse_utc(args.epoch) if args.epoch else _default_epoch(cat)
    scen = SimulationScenario(
        user_truth=point,
        clock_bias=args.clock_bias,
        noise_sigma=args.noise_sigma,
        seed=args.seed,
        fractional_modulus=parse_modulus(args.frac_modulus),
        elevation_cutoff=args.cutoff,
    )
    mset, truth = simulate_scenario(cat, scen, epoch)
    io.write_measurements(mset, args.out)

    lla = point
    n_geo = sum(1 for m in mset.measurements if m.kind == KIND_FULL)
    truth_doc = {
        "epoch": io.format_utc(epoch),
        "position_ecef_m": [float(c) for c in truth.position],
        "position_lla": [lla.latitude, lla.longitude, lla.altitude],
        "clock_bias_m": truth.clock_bias,
        "clock_bias_s": truth.clock_bias / SPEED_OF_LIGHT,
        "ambiguities": [
            {"sat": m.sat_id, "N": int(n)}
            for m, n in zip(mset.fractional(), truth.ambiguities)
        ],
        "seed": args.seed,
        "n_full": n_geo,
    }
    if n_geo < 4:
        truth_doc["warning"] = f"only {n_geo} full (GEO) measurements; the solver gate will reject"
    io.atomic_write_text(str(args.out) + ".truth.json", json.dumps(truth_doc, indent=2) + "\n")
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    cat = _load_catalog(args)
    sets = io.read_measurements(args.meas)
    if args.epoch:
        wanted = io.parse_utc(args.epoch)
        matches = [s for s in sets if s.epoch == wanted]
        if not matches:
            raise ValueError(f"no measurements at epoch {args.epoch} in {args.meas}")
        mset = matches[0]
    elif len(sets) == 1:
        mset = sets[0]
    else:
        raise ValueError(f"{args.meas} holds {len(sets)} epochs; pick one with --epoch")

    cfg = _solver_config(args)
    if args.mode == "conventional":
        result = solve_conventional(mset, cat, cfg)
    else:
        result = solve_fast(mset, cat, cfg)
    io.write_result(result, args.out)
    code = _STATUS_EXIT[result.status]
    if code != EXIT_OK:
        print(f"solve finished with status {result.status.value}", file=sys.stderr)
    return code


def cmd_coverage(args: argparse.Namespace) -> int:
    cat = _load_catalog(args)
    start = io.parse_utc(args.start) if args.start else _default_epoch(cat)
    duration = parse_duration(args.duration)
    grid = GridSpec(args.grid, args.grid, parse_alts(args.alts))
    cfg = _solver_config(args)

    summary = sweep(cat, start, duration, args.step, grid, cfg)
    rows = []
    for t in summary.epochs:
        rows.extend((t, cell) for cell in evaluate_grid(cat, t, grid, cfg))
    io.write_coverage(rows, args.out)

    def band_doc(band):
        return {
            "max": band.maximum,
            "min": band.minimum,
            "overall": band.overall,
            "per_epoch": list(band.per_epoch),
        }

    summary_doc = {
        "start": io.format_utc(start),
        "epochs": len(summary.epochs),
        "step_s": args.step,
        "per_altitude": {str(alt): band_doc(band) for alt, band in summary.per_altitude.items()},
        "combined": band_doc(summary.combined),
    }
    io.atomic_write_text(str(args.out) + ".summary.json", json.dumps(summary_doc, indent=2) + "\n")
    return EXIT_OK


def _paired_full_set(mset: MeasurementSet, truth) -> MeasurementSet:
    """Reconstruct the pre-truncation full measurements of a simulated set."""
    full = list(mset.full())
    for m, n in zip(mset.fractional(), truth.ambiguities):
        full.append(Measurement(m.sat_id, m.epoch, KIND_FULL, m.value + n * m.cycle_length))
    return MeasurementSet(mset.epoch, tuple(full))


def cmd_compare(args: argparse.Namespace) -> int:
    cat = _load_catalog(args)
    epoch = io.parse_utc(args.epoch) if args.epoch else _default_epoch(cat)
    grid = GridSpec(args.grid, args.grid, parse_alts(args.alts))
    cfg = _solver_config(args)
    modulus = parse_modulus(args.frac_modulus)

    points = [cell.point for cell in evaluate_grid(cat, epoch, grid, cfg) if cell.gate_pass]
    lines = ["lat_deg,lon_deg,alt_m,rmse_fast_m,rmse_conv_m,ambiguity_success_rate"]
    for idx, point in enumerate(points):
        truth_pos = geodetic_to_ecef(point)
        sq_fast: list[float] = []
        sq_conv: list[float] = []
        fixes = 0
        for trial in range(args.trials):
            seed = int(np.random.SeedSequence((args.seed, idx, trial)).generate_state(1)[0])
            scen = SimulationScenario(point, args.clock_bias, args.noise_sigma, seed,
                                      modulus, args.cutoff)
            mset, truth = simulate_scenario(cat, scen, epoch)
            fast = solve_fast(mset, cat, cfg)
            conv = solve_conventional(_paired_full_set(mset, truth), cat, cfg)
            if fast.status is SolveStatus.CONVERGED and conv.status is SolveStatus.CONVERGED:
                if np.array_equal(fast.state.ambiguities, truth.ambiguities):
                    fixes += 1
                sq_fast.append(float(np.sum((fast.state.position - truth_pos) ** 2)))
                sq_conv.append(float(np.sum((conv.state.position - truth_pos) ** 2)))
        rmse_fast = math.sqrt(np.mean(sq_fast)) if sq_fast else float("nan")
        rmse_conv = math.sqrt(np.mean(sq_conv)) if sq_conv else float("nan")
        lines.append(",".join([
            repr(point.latitude), repr(point.longitude), repr(point.altitude),
            repr(rmse_fast), repr(rmse_conv), repr(fixes / args.trials),
        ]))
    io.atomic_write_text(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": cmd_simulate,
        "solve": cmd_solve,
        "coverage": cmd_coverage,
        "compare": cmd_compare,
    }
    try:
        return handlers[args.command](args)
    except (io.ElementsFormatError, io.MeasurementsFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
