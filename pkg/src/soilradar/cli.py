"""Command-line interface: ``simulate``, ``process``, ``calibrate`` and ``sweep``.

Exit codes: 0 success (tag detected), 2 validation error, 3 I/O error or
corrupt file, 4 tag not detected.
"""

import argparse
import csv
import json
import logging
import sys

from .capture_io import CorruptCapture, read_capture, write_capture
from .moisture import (
    LOW_SNR,
    CalibrationCurve,
    MeasurementGeometry,
    NegativeDelta,
    NoSurfaceEcho,
    estimate_vwc,
    fit_calibration,
    surface_distance,
)
from .scenario import ScenarioError, load_scenario, load_sweep, run_sweep, simulate, write_rows_csv

log = logging.getLogger("soilradar")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NOT_DETECTED = 4


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _emit(record):
    json.dump(record, sys.stdout, sort_keys=True)
    sys.stdout.write("\n")


def _load_json_file(loader, path):
    try:
        return loader(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: malformed JSON: {exc}", EXIT_VALIDATION) from exc
    except ScenarioError as exc:
        raise CliError(f"{path}: invalid\n{exc}", EXIT_VALIDATION) from exc


def cmd_simulate(args):
    scenario = _load_json_file(load_scenario, args.scenario)
    capture = simulate(scenario)
    try:
        write_capture(args.output, capture)
    except OSError as exc:
        raise CliError(f"cannot write {args.output}: {exc}", EXIT_IO) from exc
    _emit({
        "output": args.output,
        "scenario_digest": scenario.digest(),
        "seed": scenario.seed,
        "frames": capture.n_frames,
        "bins": capture.n_bins,
    })
    return EXIT_OK


def _load_calibration(path):
    try:
        with open(path) as fh:
            return CalibrationCurve.from_dict(json.load(fh))
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"{path}: invalid calibration: {exc}", EXIT_VALIDATION) from exc


def cmd_process(args):
    try:
        capture = read_capture(args.capture)
    except OSError as exc:
        raise CliError(f"cannot read {args.capture}: {exc}", EXIT_IO) from exc
    except CorruptCapture as exc:
        raise CliError(str(exc), EXIT_IO) from exc

    notes = capture.annotations
    d_soil = args.d_soil if args.d_soil is not None else notes.get("d_soil")
    if d_soil is None:
        raise CliError("missing geometry: pass --d-soil (not in capture annotations)", EXIT_VALIDATION)
    d_air = args.d_air if args.d_air is not None else notes.get("d_air")
    d_air_source = "given" if d_air is not None else "measured"
    if d_air is None:
        try:
            d_air = surface_distance(capture)
        except NoSurfaceEcho as exc:
            raise CliError(f"missing geometry: no --d-air and {exc}", EXIT_VALIDATION) from exc
    log.debug("d_air %.4f m (%s), d_soil %.4f m", float(d_air), d_air_source, float(d_soil))
    osc_freq = args.osc_freq if args.osc_freq is not None else notes.get("osc_freq", 80.0)
    curve = _load_calibration(args.calibration) if args.calibration else None

    try:
        geom = MeasurementGeometry.for_radar(capture.config, float(d_air), float(d_soil))
        est = estimate_vwc(capture, float(osc_freq), geom, curve, mode=args.ka_mode,
                           threshold_db=args.threshold_db)
    except NegativeDelta as exc:
        raise CliError(f"negative delay: {exc}", EXIT_VALIDATION) from exc
    except ValueError as exc:
        raise CliError(str(exc), EXIT_VALIDATION) from exc

    record = est.to_record()
    record.update({
        "capture": args.capture,
        "d_air": float(d_air),
        "d_air_source": d_air_source,
        "d_soil": float(d_soil),
        "osc_freq": float(osc_freq),
        "calibration": args.calibration or "topp",
        "scenario_digest": notes.get("scenario_digest"),
        "seed": capture.seed,
    })
    _emit(record)
    return EXIT_NOT_DETECTED if LOW_SNR in est.flags else EXIT_OK


def read_pairs_csv(path):
    """Rows of a ``ka,theta`` CSV as a list of float pairs."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip().lower() for h in (reader.fieldnames or [])]
        if header != ["ka", "theta"]:
            raise ValueError(f"expected header 'ka,theta', got {','.join(header) or '<empty>'}")
        pairs = []
        for lineno, row in enumerate(reader, start=2):
            values = list(row.values())
            if len(values) != 2 or None in values or row.get(None):
                raise ValueError(f"line {lineno}: expected 2 columns")
            try:
                pairs.append((float(values[0]), float(values[1])))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from exc
    return pairs


def cmd_calibrate(args):
    try:
        pairs = read_pairs_csv(args.pairs)
    except OSError as exc:
        raise CliError(f"cannot read {args.pairs}: {exc}", EXIT_IO) from exc
    except ValueError as exc:
        raise CliError(f"{args.pairs}: malformed CSV: {exc}", EXIT_VALIDATION) from exc
    try:
        curve = fit_calibration(pairs)
    except ValueError as exc:
        raise CliError(f"{args.pairs}: {exc}", EXIT_VALIDATION) from exc
    record = curve.to_dict()
    try:
        with open(args.output, "w") as fh:
            json.dump(record, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise CliError(f"cannot write {args.output}: {exc}", EXIT_IO) from exc
    _emit(dict(record, output=args.output))
    return EXIT_OK


def _plot_sweep(rows, path, variable):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_theta, ax_snr) = plt.subplots(1, 2, figsize=(9, 3.5))
    x = [r["value"] for r in rows]
    ax_theta.plot(x, [r["true_theta"] for r in rows], "k.", label="true")
    ax_theta.plot(x, [r["theta_hat"] if r["theta_hat"] is not None else float("nan") for r in rows],
                  "C0x", label="estimate")
    ax_theta.set_xlabel(variable)
    ax_theta.set_ylabel("VWC (cm3/cm3)")
    ax_theta.legend()
    ax_snr.plot(x, [r["snr_db"] for r in rows], "C1.")
    ax_snr.set_xlabel(variable)
    ax_snr.set_ylabel("SNR (dB)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def cmd_sweep(args):
    spec = _load_json_file(load_sweep, args.sweep)
    try:
        rows = run_sweep(spec, jobs=args.jobs, mode=args.ka_mode, threshold_db=args.threshold_db)
    except RuntimeError as exc:
        raise CliError(str(exc), EXIT_VALIDATION) from exc
    try:
        write_rows_csv(args.output, rows)
        if args.plot:
            _plot_sweep(rows, args.plot, spec.variable)
    except OSError as exc:
        raise CliError(f"cannot write output: {exc}", EXIT_IO) from exc
    _emit({"output": args.output, "rows": len(rows), "scenario_digest": spec.base.digest(),
           "seed": spec.base.seed})
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="soilradar", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize a capture from a scenario file")
    p.add_argument("scenario")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_simulate)

    def estimation_flags(p):
        p.add_argument("--ka-mode", choices=("exact", "paper"), default="exact")
        p.add_argument("--threshold-db", type=float, default=10.0)

    p = sub.add_parser("process", help="estimate water content from a capture")
    p.add_argument("capture")
    p.add_argument("--d-air", type=float, help="radar-to-surface distance (m)")
    p.add_argument("--d-soil", type=float, help="tag burial depth (m)")
    p.add_argument("--osc-freq", type=float, help="tag oscillation frequency (Hz)")
    p.add_argument("--calibration", help="calibration JSON from 'calibrate'")
    estimation_flags(p)
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("calibrate", help="fit a cubic Ka->VWC calibration")
    p.add_argument("pairs", help="CSV with header ka,theta")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sweep", help="run a parameter sweep and write CSV")
    p.add_argument("sweep")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--plot", help="also write a PNG summary plot")
    estimation_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"soilradar {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
