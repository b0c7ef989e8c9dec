"""Command-line front end: ``memtbwp analyze|trees|pencil|simulate|trace|check-ode``.

Exit codes: 0 certified (or success), 1 refuted, 2 inconclusive, 3 error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import jsonio
from .dae import assemble_dae, find_equilibrium, pencil_spectrum
from .graph import check_configurations, enumerate_trees, mr_product_sum
from .netlist import load_netlist
from .numerics import DEFAULT_TOLERANCES, Tolerances
from .odefile import load_ode
from .sim import stability_exchange_experiment, trace_equilibrium_line, write_line_csv, write_trajectory_csv
from .tbwp import (
    CERTIFIED,
    INCONCLUSIVE,
    REFUTED,
    check_circuit_tbwp,
    check_nonpassive_zero_multiplicity,
    check_ode_tbwp,
)

EXIT_CODES = {CERTIFIED: 0, REFUTED: 1, INCONCLUSIVE: 2}
EXIT_ERROR = 3


def parse_at(text: str) -> float:
    """Accept ``q=0.3`` or a bare ``0.3``."""
    key, sep, value = text.partition("=")
    if sep and key.strip() not in ("q", "q_m"):
        raise argparse.ArgumentTypeError(f"expected q=<real>, got {text!r}")
    try:
        return float(value if sep else key)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected q=<real>, got {text!r}") from None


def parse_tol(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key.strip(), value.strip()


def _tolerances(args) -> Tolerances:
    tols = DEFAULT_TOLERANCES
    if getattr(args, "config", None):
        tols = Tolerances.from_file(args.config, tols)
    overrides = dict(getattr(args, "tol", None) or [])
    return tols.replace(**overrides) if overrides else tols


def _emit_json(target: str | None, payload: dict, out) -> list[str]:
    if target is None:
        return []
    if target == "-":
        out.write(jsonio.dumps(payload))
        return []
    jsonio.write_json(target, payload)
    return [target]


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _print_conditions(report, out) -> None:
    for c in report.conditions:
        note = f"  ({c.message})" if c.message else ""
        print(f"  [{c.status:>12}] {c.id}{note}", file=out)


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(args, out) -> int:
    tols = _tolerances(args)
    circuit = load_netlist(args.netlist)
    dae = assemble_dae(circuit)
    eq = find_equilibrium(dae, args.at, tols=tols)
    report = check_circuit_tbwp(circuit, eq, tols=tols)
    nonpassive = check_nonpassive_zero_multiplicity(circuit, eq, tols=tols)
    text_out = sys.stderr if args.json == "-" else out
    print(f"circuit: {args.netlist}  q* = {_fmt(report.q_star)}", file=text_out)
    print(f"TBWP verdict: {report.verdict}", file=text_out)
    print(f"  structural: {report.structural.verdict}", file=text_out)
    _print_conditions(report.structural, text_out)
    print(f"  numeric: {report.numeric.verdict}", file=text_out)
    _print_conditions(report.numeric, text_out)
    print(f"nonpassive multiplicity criterion: {nonpassive.verdict}", file=text_out)
    _print_conditions(nonpassive, text_out)
    bundle = {
        "schema": jsonio.SCHEMA_VERSION,
        "command": "analyze",
        "netlist": Path(args.netlist).name,
        "q_star": args.at,
        "circuit": circuit.summary(),
        "equilibrium": eq.as_dict(dae),
        "config": check_configurations(circuit).as_dict(),
        "trees": nonpassive.tree_families,
        "tbwp": report.as_dict(),
        "nonpassive": nonpassive.as_dict(),
        "tolerances": tols.as_dict(),
        "artifacts": [] if args.json in (None, "-") else [args.json],
    }
    _emit_json(args.json, bundle, out)
    return EXIT_CODES[report.verdict]


def cmd_trees(args, out) -> int:
    circuit = load_netlist(args.netlist)
    family = enumerate_trees(circuit, args.family)
    total = mr_product_sum(circuit, family, q_m=args.at) if family.trees else None
    text_out = sys.stderr if args.json == "-" else out
    print(f"family: {family.family}  count: {len(family)}", file=text_out)
    if family.explanation:
        print(f"  {family.explanation}", file=text_out)
    for k in range(len(family)):
        prod = "" if family.products is None else f"  cotree product {_fmt(family.products[k])}"
        print(f"  {{{', '.join(family.tree_ids(k))}}}{prod}", file=text_out)
    if total is not None:
        print(f"sum: {_fmt(total)}", file=text_out)
    payload = {"schema": jsonio.SCHEMA_VERSION, "command": "trees", "q_m": args.at, **family.as_dict()}
    _emit_json(args.json, payload, out)
    return 0


def cmd_pencil(args, out) -> int:
    tols = _tolerances(args)
    circuit = load_netlist(args.netlist)
    dae = assemble_dae(circuit)
    eq = find_equilibrium(dae, args.at, tols=tols)
    ps = pencil_spectrum(dae, eq, tols)
    text_out = sys.stderr if args.json == "-" else out
    print(f"pencil spectrum at q = {_fmt(args.at)}:", file=text_out)
    for k, z in enumerate(ps.spectrum.eigenvalues):
        tag = "zero" if k in ps.spectrum.zero_cluster else ""
        print(f"  {_fmt(z.real)} {'+' if z.imag >= 0 else '-'} {_fmt(abs(z.imag))}i  {tag}", file=text_out)
    print(f"corank F' = {ps.corank_F}, corank g_z = {ps.corank_gz}", file=text_out)
    payload = {"schema": jsonio.SCHEMA_VERSION, "command": "pencil", "q_m": args.at, **ps.as_dict()}
    _emit_json(args.json, payload, out)
    return 0


def cmd_simulate(args, out) -> int:
    tols = _tolerances(args)
    circuit = load_netlist(args.netlist)
    dae = assemble_dae(circuit)
    report = stability_exchange_experiment(
        dae, args.at, dq=args.dq, eps=args.eps, t_end=args.tmax, step=args.step, tols=tols
    )
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.netlist).stem
    artifacts = []
    for side in report.sides:
        slug = {"M>0": "Mpos", "M<0": "Mneg"}.get(side.label, side.label)
        path = write_trajectory_csv(outdir / f"{stem}_{slug}.csv", dae, side)
        artifacts.append(path.name)
        print(
            f"{side.label:>5}: q_m = {_fmt(side.q_m)}  {side.verdict}"
            f"  (final distance {side.final_distance:.3e})",
            file=out,
        )
    payload = {"schema": jsonio.SCHEMA_VERSION, "command": "simulate", **report.as_dict(), "artifacts": artifacts}
    jsonio.write_json(outdir / f"{stem}_exchange.json", payload)
    return 0


def cmd_trace(args, out) -> int:
    tols = _tolerances(args)
    dae = assemble_dae(load_netlist(args.netlist))
    rows = trace_equilibrium_line(dae, (args.q_from, args.q_to), args.samples, tols)
    write_line_csv(args.out, rows)
    failed = sum(1 for r in rows if r.status != "ok")
    print(f"{len(rows)} samples written to {args.out} ({failed} failed)", file=out)
    return 0


def cmd_check_ode(args, out) -> int:
    tols = _tolerances(args)
    spec = load_ode(args.odefile)
    report = check_ode_tbwp(spec.field, spec.jacobian, spec.x_star, spec.line_direction, tols)
    text_out = sys.stderr if args.json == "-" else out
    print(f"ODE TBWP verdict: {report.verdict}", file=text_out)
    _print_conditions(report, text_out)
    payload = {
        "schema": jsonio.SCHEMA_VERSION,
        "command": "check-ode",
        "system": spec.as_dict(),
        "report": report.as_dict(),
        "tolerances": tols.as_dict(),
    }
    _emit_json(args.json, payload, out)
    return EXIT_CODES[report.verdict]


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="memtbwp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, at=True, tol=True, json=True):
        if at:
            p.add_argument("--at", type=parse_at, default=0.0, metavar="q=<real>",
                           help="memristor charge of the equilibrium (default 0)")
        if tol:
            p.add_argument("--tol", type=parse_tol, action="append", metavar="KEY=VALUE",
                           help="override one tolerance (repeatable)")
            p.add_argument("--config", help="key=value tolerance file; --tol takes precedence")
        if json:
            p.add_argument("--json", metavar="PATH", help="write JSON to PATH ('-' for stdout)")

    p = sub.add_parser("analyze", help="certify or refute the bifurcation at a point")
    p.add_argument("netlist")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("trees", help="enumerate spanning trees and MR-products")
    p.add_argument("netlist")
    p.add_argument("--family", default="all", choices=["all", "proper", "l-proper", "lproper"])
    common(p, tol=False)
    p.set_defaults(func=cmd_trees)

    p = sub.add_parser("pencil", help="finite spectrum of the linearized DAE")
    p.add_argument("netlist")
    common(p)
    p.set_defaults(func=cmd_pencil)

    p = sub.add_parser("simulate", help="stability exchange experiment, CSV trajectories")
    p.add_argument("netlist")
    common(p, json=False)
    p.add_argument("--dq", type=float, default=0.1)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--tmax", type=float, default=50.0)
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("trace", help="spectra along the equilibrium line, as CSV")
    p.add_argument("netlist")
    common(p, at=False, json=False)
    p.add_argument("--from", dest="q_from", type=float, default=-1.0)
    p.add_argument("--to", dest="q_to", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=21)
    p.add_argument("--out", required=True, help="CSV path")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("check-ode", help="check a polynomial vector field")
    p.add_argument("odefile")
    common(p, at=False)
    p.set_defaults(func=cmd_check_ode)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else EXIT_ERROR
    try:
        return args.func(args, out)
    except (OSError, ValueError, KeyError, ArithmeticError, RuntimeError) as exc:
        print(f"memtbwp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
