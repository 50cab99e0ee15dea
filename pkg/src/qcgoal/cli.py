"""Command line entry point: ``qcgoal {adaptive,efficiency,dump-local}``.

Exit codes: 0 success (adaptive: converged), 1 adaptive stopped at the
iteration cap, 2 invalid arguments, 3 solver failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import re
import sys

import numpy as np

from ._validation import check_labels_in_chain, parse_range
from .adaptive import AdaptiveConfig, run_adaptive
from .estimator import QuantityOfInterest, estimate, exact_error
from .linalg import LinAlgError
from .model import ModelParams, Partition, atom_labels

EXIT_OK, EXIT_NOT_CONVERGED, EXIT_USAGE, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3, 4

DEFAULT_EFFICIENCY_REGIONS = ["none", "-4..10", "-9..20", "-14..30", "-19..40",
                              "-24..50", "-29..60", "-34..70"]

log = logging.getLogger("qcgoal")


def fmt(x: float) -> str:
    return f"{x:.6e}"


def fmt_ratio(num: float, den: float) -> str:
    return "inf" if den <= 1e-300 else f"{num / den:.7g}"


class UsageError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--M", type=int, default=500, help="half the number of atoms")
    common.add_argument("--a0", type=float, default=1.0, help="lattice constant")
    common.add_argument("--k0", type=float, default=1.0, help="misfit spring constant")
    common.add_argument("--k1", type=float, default=2.0, help="nearest-neighbour spring constant")
    common.add_argument("--k2", type=float, default=2.0, help="next-nearest-neighbour spring constant")
    common.add_argument("--qoi", default="11..30", help="atoms lo..hi summed by the quantity of interest")
    common.add_argument("--out", default=None, help="also write results to this file")
    common.add_argument("--format", choices=("tsv", "csv"), default="tsv")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="qcgoal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("adaptive", parents=[common], help="run the adaptive model selection")
    p.add_argument("--tau-gl", type=float, default=1e-10, help="goal tolerance for eta1")
    p.add_argument("--tau-div", type=float, default=10.0, help="division factor for tau_at")
    p.add_argument("--max-iter", type=int, default=50)

    p = sub.add_parser("efficiency", parents=[common], help="estimator efficiency per region")
    p.add_argument("--region", action="append", default=None,
                   help="atomistic region lo..hi or none (repeatable)")

    p = sub.add_parser("dump-local", parents=[common], help="per-atom indicators as CSV")
    p.add_argument("--region", default="none", help="atomistic region lo..hi or none")
    return parser


def _params(args) -> ModelParams:
    try:
        return ModelParams(M=args.M, a0=args.a0, k0=args.k0, k1=args.k1, k2=args.k2)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _region(text: str, M: int) -> Partition:
    try:
        rng = parse_range(text)
        if rng is None:
            return Partition.continuum(M)
        check_labels_in_chain(*rng, M, "region")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return Partition.from_region(M, *rng)


def _qoi(text: str, M: int) -> QuantityOfInterest:
    try:
        rng = parse_range(text)
        if rng is None:
            raise ValueError("the quantity of interest needs at least one atom")
        check_labels_in_chain(*rng, M, "qoi")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return QuantityOfInterest.indicator(M, *rng)


def _table(header, rows, fmt_name) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter="\t" if fmt_name == "tsv" else ",", lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_adaptive(args) -> int:
    params = _params(args)
    q = _qoi(args.qoi, params.M)
    try:
        config = AdaptiveConfig(args.tau_gl, args.tau_div, args.max_iter)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    result = run_adaptive(params, q, config)
    rows = [[r.iteration, r.region_label, fmt(r.tau_at), fmt(r.eta1)] for r in result.trace]
    sys.stdout.write(_table(["iteration", "atomistic_region", "tau_at", "eta1"], rows, args.format))
    if args.out:
        _write_json(args.out, {
            "params": vars(params),
            "tau_gl": config.tau_gl,
            "tau_div": config.tau_div,
            "converged": result.converged,
            "iterations": [
                {
                    "iteration": r.iteration,
                    "region": r.region_label,
                    "contiguous": r.contiguous,
                    "atomistic_atoms": r.partition.atomistic_labels.tolist(),
                    "tau_at": r.tau_at,
                    "eta1": r.eta1,
                }
                for r in result.trace
            ],
        })
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_efficiency(args) -> int:
    params = _params(args)
    q = _qoi(args.qoi, params.M)
    regions = args.region or DEFAULT_EFFICIENCY_REGIONS
    partitions = [(text, _region(text, params.M)) for text in regions]
    rows, records = [], []
    for text, partition in partitions:
        err = exact_error(params, partition, q)
        report = estimate(params, partition, q)
        label = "none" if partition.region() is None else text.strip()
        rows.append([label, fmt(err), fmt(report.eta1), fmt_ratio(report.eta1, err),
                     fmt(report.eta2), fmt_ratio(report.eta2, err)])
        records.append({"region": label, "error": err, "eta1": report.eta1, "eta2": report.eta2})
    header = ["atomistic_region", "abs_Q_error", "eta1", "eta1_over_error", "eta2", "eta2_over_error"]
    sys.stdout.write(_table(header, rows, args.format))
    if args.out:
        _write_json(args.out, {"params": vars(params), "rows": records})
    return EXIT_OK


def cmd_dump_local(args) -> int:
    params = _params(args)
    q = _qoi(args.qoi, params.M)
    partition = _region(args.region, params.M)
    report = estimate(params, partition, q)
    rows = [[int(i), repr(float(at)), repr(float(el)), repr(float(tot))]
            for i, at, el, tot in zip(atom_labels(params.M), report.eta2_at,
                                      report.eta2_el, report.eta2_tot)]
    # Always comma separated: this output is meant for plotting tools.
    text = _table(["i", "eta2_at", "eta2_el", "eta2_tot"], rows, "csv")
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"adaptive": cmd_adaptive, "efficiency": cmd_efficiency, "dump-local": cmd_dump_local}


_RANGE_FLAGS = ("--region", "--qoi")
_NEGATIVE_RANGE = re.compile(r"^-\d+\s*\.\.")


def _attach_negative_ranges(argv):
    # argparse treats "-9..20" as an option; turn "--region -9..20" into "--region=-9..20".
    out = []
    for token in argv:
        if out and out[-1] in _RANGE_FLAGS and _NEGATIVE_RANGE.match(token):
            out[-1] = f"{out[-1]}={token}"
        else:
            out.append(token)
    return out


def main(argv=None) -> int:
    parser = _build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_attach_negative_ranges(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"qcgoal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LinAlgError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"qcgoal: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"qcgoal: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
