"""Command-line front end: ``solve``, ``kpi``, ``compare`` and ``validate``.

Exit status: 0 on success, 1 when a run finishes but fails (diagnostics,
non-convergence, measurement threshold), 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from typing import Sequence

from . import formats
from .compare import DEFAULT_THRESHOLD_PCT, compare_measurements, probe_unique_quantities
from .formats import FormatError, data_path
from .grid_model import GRID_MODES, NetworkError, per_unit_normalize, validate
from .kpi import OC_ENERGY, OC_LITERAL
from .opf import OBJECTIVES, solve_opf
from .report import FORMATS, render_report
from .scenario import ECONOMIC_KINDS, OpfScenario, economic_report

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _fraction(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("storage fraction must lie in [0, 1]")
    return v


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("value must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridgrid",
        description="AC/DC hybrid microgrid optimal power flow and techno-economic KPIs.",
        epilog=f"Default fixtures are read from ${formats.DATA_ENV} when set, else the "
               "bundled CEDER data.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, network=True):
        if network:
            p.add_argument("--network", help="network document (default: bundled CEDER)")
        p.add_argument("--format", choices=FORMATS, default="text")

    p = sub.add_parser("solve", help="solve the optimal power flow")
    common(p)
    p.add_argument("--objective", default="h1", choices=[*OBJECTIVES, "all"],
                   type=str.lower)
    p.add_argument("--storage-fraction", type=_fraction, default=0.5)
    p.add_argument("--grid-mode", choices=GRID_MODES, default="consume")
    p.add_argument("--s-base", type=_positive, default=100.0, help="base power in kVA")
    p.add_argument("--out", help="write the solution document here")

    p = sub.add_parser("kpi", help="techno-economic indicators")
    common(p)
    p.add_argument("--econ", help="economics document (default: bundled CEDER)")
    p.add_argument("--scenario", default="all", choices=[*ECONOMIC_KINDS, "all"])
    p.add_argument("--oc-mode", choices=(OC_ENERGY, OC_LITERAL),
                   help="override how operating costs enter the lifetime cost")

    p = sub.add_parser("compare", help="compare solutions against measurements")
    common(p)
    p.add_argument("--measurements", help="measurement document (default: bundled CEDER)")
    p.add_argument("--scenario", default="all", type=str.upper,
                   help="measurement label, e.g. H1 (default: all)")
    p.add_argument("--threshold", type=_positive, default=DEFAULT_THRESHOLD_PCT,
                   help="pass threshold in percent")
    p.add_argument("--all-quantities", action="store_true",
                   help="also compare quantities the optimum leaves undetermined")

    p = sub.add_parser("validate", help="check a network for structural problems")
    common(p)
    return parser


def _out(text: str) -> None:
    sys.stdout.write(text)


def _cmd_solve(args) -> int:
    net = per_unit_normalize(formats.load_network(args.network or data_path(formats.CEDER_NETWORK)),
                             args.s_base)
    kinds = OBJECTIVES if args.objective == "all" else (args.objective,)
    solutions = {}
    for kind in kinds:
        sol = solve_opf(net, OpfScenario(kind, args.storage_fraction, args.grid_mode))
        solutions[kind.upper()] = sol
        if len(kinds) > 1 and args.format == "text":
            _out(f"== {kind.upper()} ==\n")
        _out(render_report(sol, args.format))
    if args.out:
        docs = {k: formats.solution_document(s) for k, s in solutions.items()}
        if len(docs) == 1:
            formats.write_document(next(iter(docs.values())), args.out)
        else:
            formats.write_document({"format_version": formats.FORMAT_VERSION,
                                    "solutions": docs}, args.out)
    bad = [k for k, s in solutions.items() if not s.feasible]
    if bad:
        sys.stderr.write(f"not converged to a feasible point: {', '.join(bad)}\n")
        return EXIT_FAIL
    return EXIT_OK


def _cmd_kpi(args) -> int:
    net = formats.load_network(args.network or data_path(formats.CEDER_NETWORK))
    econ, flex = formats.load_economics(args.econ or data_path(formats.CEDER_ECONOMICS))
    if args.oc_mode:
        econ = replace(econ, oc_mode=args.oc_mode)
    kinds = ECONOMIC_KINDS if args.scenario == "all" else (args.scenario,)
    reports = {k: economic_report(econ, net, flex.scenario(k)) for k in kinds}
    _out(render_report(reports, args.format))
    return EXIT_OK


def _cmd_compare(args) -> int:
    net = per_unit_normalize(formats.load_network(args.network
                                                  or data_path(formats.CEDER_NETWORK)))
    sets = formats.load_measurements(args.measurements
                                     or data_path(formats.CEDER_MEASUREMENTS))
    if args.scenario != "ALL":
        if args.scenario not in sets:
            raise FormatError(f"no measurement set labelled {args.scenario!r}; "
                              f"available: {', '.join(sets)}")
        sets = {args.scenario: sets[args.scenario]}
    tables = {}
    for label, ms in sets.items():
        if ms.scenario is None:
            raise FormatError(f"measurement set {label!r} does not name an objective")
        if args.all_quantities:
            sol, determined = solve_opf(net, ms.scenario), None
        else:
            probe = probe_unique_quantities(net, ms.scenario)
            sol, determined = probe.base, probe.determined
        try:
            tables[label] = compare_measurements(sol, ms, args.threshold, determined)
        except KeyError as exc:
            raise FormatError(str(exc.args[0])) from exc
    _out(render_report(tables, args.format))
    return EXIT_OK if all(t.passed for t in tables.values()) else EXIT_FAIL


def _cmd_validate(args) -> int:
    net = formats.load_network(args.network or data_path(formats.CEDER_NETWORK))
    issues = validate(net)
    if args.format == "json":
        _out(json.dumps({"network": net.name, "diagnostics": issues}, indent=2) + "\n")
    elif args.format == "csv":
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerows([["diagnostic"], *([d] for d in issues)])
    else:
        _out("".join(f"{d}\n" for d in issues) if issues else
             f"{net.name or 'network'}: {net.n_bus} buses, no problems found\n")
    return EXIT_FAIL if issues else EXIT_OK


COMMANDS = {"solve": _cmd_solve, "kpi": _cmd_kpi, "compare": _cmd_compare,
            "validate": _cmd_validate}


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors this way
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (FormatError, NetworkError, OSError, ValueError) as exc:
        sys.stderr.write(f"hybridgrid {args.command}: {exc}\n")
        return EXIT_USAGE


def main() -> None:
    sys.exit(run_cli())
