"""Command-line interface: ``sample``, ``interpolate``, ``estimate``, ``study``.

Every data file gets a ``<file>.manifest.json`` sidecar recording the
subcommand, argv, resolved configuration, seed and tool version.  Data files
themselves carry no timestamps, so re-running the recorded argv reproduces
them byte for byte.

Exit codes: 0 success, 2 user or configuration error, 3 I/O failure,
4 non-finite values in an input record or an output.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .estimator import estimate_with_errors
from .experiments import STUDIES, StudyConfig, sample_state, threshold_padua
from .io import coeffs_to_dict, dense_grid_csv, read_record, write_record
from .padua import DEFAULT_L, FUNCTION_TAGS, equidistant_grid, eval_grid, interpolate, padua_points
from .states import state_from_spec

log = logging.getLogger("padua_tomo")

EXIT_OK, EXIT_USER, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4


class UserError(Exception):
    """Bad input or configuration (exit 2)."""


class NumericalError(Exception):
    """Non-finite values detected (exit 4)."""


def _check_finite(label: str, values) -> None:
    if not np.all(np.isfinite(np.asarray(values))):
        raise NumericalError(f"non-finite values in {label}")


def _load_json(path) -> dict:
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UserError(f"{path}: invalid JSON ({exc})") from exc


def _load_record(path):
    record = read_record(path)
    _check_finite(f"record {path}", record.values)
    return record


def _load_state(path):
    spec = _load_json(path)
    try:
        return state_from_spec(spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise UserError(f"{path}: malformed state spec ({exc})") from exc


def _write_manifest(out: Path, args: argparse.Namespace, argv: list, config: dict, inputs: list, outputs: list) -> None:
    manifest = {
        "subcommand": args.command,
        "argv": list(argv),
        "config": config,
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    Path(str(out) + ".manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def _parse_shape(text: str) -> tuple[int, int]:
    try:
        rows, cols = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected RxC, got {text!r}")
    return rows, cols


# ---------------------------------------------------------------------------
# subcommands


def cmd_sample(args, argv) -> int:
    state = _load_state(args.state)
    if args.eps < 0:
        raise UserError("--eps must be non-negative")
    try:
        if args.padua is not None:
            grid = padua_points(args.padua, args.L)
        else:
            grid = equidistant_grid(*args.equidistant, args.L)
    except ValueError as exc:
        raise UserError(str(exc)) from exc
    record = sample_state(state, grid, args.function, args.eps, args.seed, args.trial)
    _check_finite("sampled values", record.values)
    out = Path(args.output)
    write_record(record, out)
    config = {"grid": grid.describe(), "function": args.function, "epsilon": args.eps, "trial": args.trial}
    _write_manifest(out, args, argv, config, [args.state], [out])
    print(f"wrote {len(grid)}-point {grid.kind} record to {out}")
    return EXIT_OK


def cmd_interpolate(args, argv) -> int:
    record = _load_record(args.record)
    if args.threshold is not None:
        try:
            record = threshold_padua(record, args.threshold)
        except ValueError as exc:
            raise UserError(str(exc)) from exc
        print(f"{record.nonzero_count} nonzero")
    try:
        coeffs = interpolate(record)
    except ValueError as exc:
        raise UserError(str(exc)) from exc
    dense = eval_grid(coeffs, args.resolution)
    _check_finite("coefficients", coeffs.coeffs)
    _check_finite("dense grid", dense.values)
    out = Path(args.output)
    grid_out = Path(args.grid_out) if args.grid_out else out.with_suffix(".csv")
    out.write_text(json.dumps(coeffs_to_dict(coeffs), indent=1) + "\n")
    grid_out.write_text(dense_grid_csv(dense))
    config = {"resolution": args.resolution, "threshold": args.threshold}
    _write_manifest(out, args, argv, config, [args.record], [out, grid_out])
    print(f"wrote order-{coeffs.order} coefficients to {out} and {args.resolution}x{args.resolution} grid to {grid_out}")
    return EXIT_OK


def cmd_estimate(args, argv) -> int:
    record = _load_record(args.record)
    if record.grid.kind != "padua":
        raise UserError("estimation needs a Padua record")
    if 2 * args.d_max > record.grid.n:
        raise UserError(f"d_max = {args.d_max} needs interpolation order n >= {2 * args.d_max}, record has n = {record.grid.n}")
    oracle = _load_state(args.oracle) if args.oracle else None
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            est = estimate_with_errors(record, oracle=oracle, d_max=args.d_max, K=args.K)
    except ValueError as exc:
        raise UserError(str(exc)) from exc
    for w in caught:
        log.warning("%s", w.message)
    _check_finite("estimate", est.matrix())
    out = Path(args.output)
    out.write_text(est.to_json() + "\n")
    config = {"d_max": args.d_max, "K": args.K, "metadata": est.metadata}
    _write_manifest(out, args, argv, config, [args.record] + ([args.oracle] if args.oracle else []), [out])
    print(est.table())
    return EXIT_OK


def cmd_study(args, argv) -> int:
    raw = _load_json(args.config) if args.config else {}
    if not isinstance(raw, dict):
        raise UserError("study config must be a JSON object")
    overrides = {"seed": args.seed, "L": args.L, "trials": args.trials}
    raw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        config = StudyConfig.from_dict(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise UserError(f"config schema violation: {exc}") from exc
    result = STUDIES[args.kind](config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path, csv_path = out_dir / f"{args.kind}.json", out_dir / f"{args.kind}.csv"
    json_path.write_text(result.to_json() + "\n")
    csv_path.write_text(result.to_csv())
    args.seed = config.seed
    _write_manifest(json_path, args, argv, config.to_dict(), [args.config] if args.config else [], [json_path, csv_path])
    n_rows = len(result.rows)
    print(f"{args.kind} study: {n_rows} rows written to {json_path} and {csv_path}")
    for key, value in sorted(result.summary.items()):
        print(f"  {key}: {value}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="padua-tomo", description="Phase-space interpolation and density-matrix estimation at Padua points.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="synthesize a measurement record from a state spec")
    p.add_argument("--state", required=True, help="state-spec JSON")
    grid = p.add_mutually_exclusive_group(required=True)
    grid.add_argument("--padua", type=int, metavar="N", help="Padua grid of degree N")
    grid.add_argument("--equidistant", type=_parse_shape, metavar="RxC", help="equidistant R-by-C grid")
    p.add_argument("--L", type=float, default=DEFAULT_L, help="domain half-width (default %(default)s)")
    p.add_argument("--function", choices=FUNCTION_TAGS, default="husimi_q")
    p.add_argument("--eps", type=float, default=0.0, help="Gaussian noise standard deviation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trial", type=int, default=0, help="trial index within the seeded stream")
    p.add_argument("-o", "--output", required=True, help="record path (.json, or .csv with sidecar)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("interpolate", help="interpolate a record and export coefficients plus a dense grid")
    p.add_argument("record")
    p.add_argument("--resolution", type=int, default=100)
    p.add_argument("--threshold", type=float, default=None, help="zero Padua samples below this magnitude first")
    p.add_argument("-o", "--output", required=True, help="coefficient JSON path")
    p.add_argument("--grid-out", default=None, help="dense-grid CSV path (default: output with .csv suffix)")
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("estimate", help="estimate density-matrix elements with error bounds")
    p.add_argument("record")
    p.add_argument("--d-max", type=int, default=4)
    p.add_argument("--K", type=float, default=1.0, help="noise constant in sigma_bound")
    p.add_argument("--oracle", default=None, help="state-spec JSON used for the reconstruction bound")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("study", help="run a seeded batch study")
    p.add_argument("kind", choices=sorted(STUDIES))
    p.add_argument("--config", default=None, help="StudyConfig JSON")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--L", type=float, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.set_defaults(func=cmd_study)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USER if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args, argv)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: malformed input ({exc})", file=sys.stderr)
        return EXIT_USER


if __name__ == "__main__":
    sys.exit(main())
