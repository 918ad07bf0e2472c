"""Command-line front end.

Exit codes: 0 ok, 2 bad input, 3 incoherent assertions, 4 search limit
reached, 5 reproduction mismatch.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import asbestos
from .bounds import BoundsResult, Linear, SolverConfig, Solver, Status, SystemError_, bounds, check_coherence
from .events import EventAlgebraError
from .scenario import BUILTIN, Scenario, ScenarioError, builtin_document, dumps, load, load_document
from .targets import compile_target

EXIT_OK, EXIT_PARSE, EXIT_INCOHERENT, EXIT_LIMIT, EXIT_MISMATCH = 0, 2, 3, 4, 5

EXAMPLE_EXPECTED = {"example1": (0.1, 0.5), "example2": (0.4, 1.0)}


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_PARSE):
        super().__init__(message)
        self.code = code


def _load(ref: str) -> Scenario:
    path = Path(ref)
    try:
        if path.exists():
            return load(path)
        if ref in BUILTIN or ref in asbestos.COLUMNS:
            return load_document(builtin_document(ref))
    except (ScenarioError, EventAlgebraError) as exc:
        text = str(exc)
        raise CliError(text if text.startswith(ref) else f"{ref}: {text}") from None
    raise CliError(f"{ref}: no such file or built-in scenario")


def _config(args) -> SolverConfig:
    kw = {}
    if getattr(args, "gap", None) is not None:
        kw["gap_tol"] = args.gap
    if getattr(args, "tol", None) is not None:
        kw["feas_tol"] = args.tol
    if getattr(args, "time_limit", None) is not None:
        kw["time_limit"] = args.time_limit
    if getattr(args, "node_limit", None) is not None:
        kw["node_limit"] = args.node_limit
    try:
        return SolverConfig(**kw)
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _fmt(x: float) -> str:
    return "nan" if x != x else f"{x:.3f}"


def _yes(flag: bool) -> str:
    return "yes" if flag else "no"


# ---------------------------------------------------------------------------
# bounds / check
# ---------------------------------------------------------------------------


def _solve_targets(scn: Scenario, names, config: SolverConfig, solver_kind: str):
    realm = scn.realm()
    system = scn.system()
    if solver_kind == "lp" and system.has_bilinear:
        raise CliError("--solver lp cannot handle orderings between conditional probabilities; use --solver global")
    try:
        ok, _ = check_coherence(system, config)
    except RuntimeError as exc:
        raise CliError(f"coherence undecided: {exc}", EXIT_LIMIT) from None
    if not ok:
        raise CliError("incoherent: no probability distribution satisfies all assertions", EXIT_INCOHERENT)
    shared = Solver(system, config) if system.has_bilinear else None
    out = {}
    for name in names:
        target = compile_target(scn.targets[name], realm)
        try:
            res = bounds(system, target, config, shared)
        except SystemError_ as exc:
            raise CliError(f"target {name}: {exc}") from None
        out[name] = res
    return out


def _result_dict(name: str, res: BoundsResult) -> dict:
    d = res.as_dict()
    d["target"] = name
    d["notes"] = list(res.notes)
    return d


def _render_bounds(results: dict[str, BoundsResult], fmt: str) -> str:
    if fmt == "json":
        return json.dumps([_result_dict(n, r) for n, r in results.items()], indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["target", "lower", "upper", "status", "lower_attained", "upper_attained", "certified_gap"])
        for n, r in results.items():
            w.writerow([n, repr(r.lower), repr(r.upper), str(r.status), int(r.lower_attained),
                        int(r.upper_attained), repr(r.certified_gap)])
        return buf.getvalue()
    rows = [[n, f"[{_fmt(r.lower)}, {_fmt(r.upper)}]", str(r.status),
             f"{_yes(r.lower_attained)}/{_yes(r.upper_attained)}"] for n, r in results.items()]
    header = ["target", "bounds", "status", "attained"]
    if fmt == "markdown":
        lines = ["| " + " | ".join(header) + " |", "|---|---|---|---|"]
        lines += ["| " + " | ".join(r) + " |" for r in rows]
        return "\n".join(lines) + "\n"
    widths = [max(len(x[i]) for x in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    notes = [f"  {n}: {note}" for n, r in results.items() for note in r.notes]
    return "\n".join(lines + notes) + "\n"


def cmd_bounds(args) -> int:
    scn = _load(args.scenario)
    names = args.target or list(scn.targets)
    for n in names:
        if n not in scn.targets:
            raise CliError(f"unknown target {n!r}; available: {', '.join(scn.targets) or 'none'}")
    if not names:
        raise CliError("the scenario declares no targets")
    results = _solve_targets(scn, names, _config(args), args.solver)
    sys.stdout.write(_render_bounds(results, args.format))
    if any(r.status == Status.LIMIT for r in results.values()):
        return EXIT_LIMIT
    if any(r.status == Status.INFEASIBLE for r in results.values()):
        return EXIT_INCOHERENT
    return EXIT_OK


def cmd_check(args) -> int:
    scn = _load(args.scenario)
    system = scn.system()
    try:
        ok, witness = check_coherence(system, _config(args))
    except RuntimeError as exc:
        raise CliError(f"coherence undecided: {exc}", EXIT_LIMIT) from None
    if args.format == "json":
        doc = {"coherent": ok, "witness": None if witness is None else [float(x) for x in witness]}
        sys.stdout.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    elif ok:
        sys.stdout.write("coherent\n")
        sys.stdout.write("witness q = (" + ", ".join(f"{x:.6g}" for x in witness) + ")\n")
    else:
        sys.stdout.write("incoherent: no probability distribution satisfies all assertions\n")
    return EXIT_OK if ok else EXIT_INCOHERENT


# ---------------------------------------------------------------------------
# reproduce
# ---------------------------------------------------------------------------


def _reproduce_examples(args) -> int:
    results = {}
    for name in BUILTIN:
        scn = load_document(builtin_document(name))
        results[name] = _solve_targets(scn, list(scn.targets), _config(args), "auto")["E3"]
    sys.stdout.write(_render_bounds(results, args.format))
    if not args.check:
        return EXIT_OK
    bad = []
    for name, (lo, hi) in EXAMPLE_EXPECTED.items():
        r = results[name]
        if abs(r.lower - lo) > 1e-9 or abs(r.upper - hi) > 1e-9:
            bad.append(f"{name}: expected [{lo}, {hi}], got [{r.lower!r}, {r.upper!r}]")
    return _report(bad)


def _report(bad: list[str]) -> int:
    if bad:
        for line in bad:
            sys.stderr.write(f"MISMATCH {line}\n")
        return EXIT_MISMATCH
    sys.stderr.write("check passed\n")
    return EXIT_OK


def _progress(column, key, entry):
    sys.stderr.write(f"  {column:12s} {key:13s} {asbestos.format_entry(entry):16s} {entry.status}\n")
    sys.stderr.flush()


def cmd_reproduce(args) -> int:
    if args.what == "examples":
        return _reproduce_examples(args)
    columns = args.columns or list(asbestos.COLUMNS)
    for c in columns:
        if c not in asbestos.COLUMNS:
            raise CliError(f"unknown column {c!r}; expected one of {', '.join(asbestos.COLUMNS)}")
    rows = asbestos.TABLE1_ROWS if args.what == "table1" else asbestos.TABLE2_ROWS
    reference = asbestos.REFERENCE_TABLE1 if args.what == "table1" else asbestos.REFERENCE_TABLE2
    progress = _progress if args.verbose else None
    profiles = asbestos.build_table(rows, columns, _config(args), args.jobs, progress)
    if args.format == "json":
        text = json.dumps(asbestos.profiles_as_dict(profiles, rows), indent=2, sort_keys=True) + "\n"
    elif args.format == "csv":
        text = asbestos.render_csv(profiles, rows)
    elif args.format == "markdown":
        text = asbestos.render_markdown(profiles, rows)
    else:
        text = asbestos.render_text(profiles, rows)
    sys.stdout.write(text)
    limited = any(e.status == str(Status.LIMIT) for p in profiles.values() for e in p.entries.values())
    if args.check:
        code = _report([str(m) for m in asbestos.compare(profiles, reference)])
        if code:
            return code
    return EXIT_LIMIT if limited else EXIT_OK


# ---------------------------------------------------------------------------
# hull
# ---------------------------------------------------------------------------


def hull_rows(scn: Scenario, quantities: list[str], target: str | None, config: SolverConfig) -> list[list]:
    """Realm vertices, linear slices and the target's min/max witness images."""
    realm = scn.realm()
    for q in quantities:
        if q not in realm.names:
            raise CliError(f"unknown quantity {q!r}; available: {', '.join(realm.names)}")
    sub = np.array([realm.row(q) for q in quantities], dtype=float)
    rows: list[list] = []
    for j in range(realm.n_cells):
        rows.append(["vertex", f"c{j + 1}", *[_num(v) for v in sub[:, j]], ""])
    system = scn.system()
    basis = np.vstack([sub, np.ones(realm.n_cells)])
    for r in system.linear_eq:
        row = np.array([float(x) for x in r.coeffs])
        coef, *_ = np.linalg.lstsq(basis.T, row, rcond=None)
        if np.abs(basis.T @ coef - row).max() > 1e-9:
            continue
        k = len(quantities)
        if np.allclose(coef[:k], 0):
            continue
        rhs = float(r.rhs) - coef[k]
        rows.append(["slice", r.label, *[_num(c) for c in coef[:k]], _num(rhs)])
    if target is None:
        target = next(iter(scn.targets), quantities[-1])
    spec = scn.targets.get(target)
    tgt = compile_target(spec, realm) if spec is not None else Linear(realm.row(target))
    ok, _ = check_coherence(system, config)
    if not ok:
        raise CliError("incoherent: no probability distribution satisfies all assertions", EXIT_INCOHERENT)
    res = bounds(system, tgt, config)
    for label, w in (("min", res.witness_min), ("max", res.witness_max)):
        if w is not None:
            rows.append(["endpoint", label, *[_num(v) for v in sub @ w], ""])
    return rows


def _num(x: float) -> str:
    x = float(x)
    if abs(x) < 1e-12:
        x = 0.0
    return repr(round(x, 12))


def cmd_hull(args) -> int:
    scn = _load(args.scenario)
    realm = scn.realm()
    quantities = args.quantities.split(",") if args.quantities else list(realm.names)
    if len(quantities) > 3:
        raise CliError(
            f"{len(quantities)} quantities cannot be drawn; choose at most three with --quantities, "
            f"e.g. --quantities {','.join(realm.names[:3])}"
        )
    rows = hull_rows(scn, quantities, args.target, _config(args))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "label", *quantities, "rhs"])
    w.writerows(rows)
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_export(args) -> int:
    try:
        doc = builtin_document(args.name)
    except ScenarioError as exc:
        raise CliError(str(exc)) from None
    _emit(dumps(doc), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gap", type=float, help="branch-and-bound gap tolerance (default 1e-4)")
    p.add_argument("--tol", type=float, help="linear feasibility tolerance (default 1e-9)")
    p.add_argument("--time-limit", type=float, help="seconds per branch-and-bound search")
    p.add_argument("--node-limit", type=int, help="nodes per branch-and-bound search")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prevision", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)
    formats = ("text", "markdown", "csv", "json")

    p = sub.add_parser("bounds", help="bound every target of a scenario document")
    p.add_argument("scenario", help="scenario file, or a built-in name")
    p.add_argument("--target", action="append", help="restrict to this target (repeatable)")
    p.add_argument("--format", choices=formats, default="text")
    p.add_argument("--solver", choices=("auto", "lp", "global"), default="auto",
                   help="lp refuses product constraints; global and auto pick the route per target")
    _solver_flags(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("check", help="decide whether the assertions are coherent")
    p.add_argument("scenario")
    p.add_argument("--format", choices=("text", "json"), default="text")
    _solver_flags(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("reproduce", help="regenerate the worked examples or the accuracy tables")
    p.add_argument("what", choices=("table1", "table2", "examples"))
    p.add_argument("--check", action="store_true", help="compare with the reference values")
    p.add_argument("--columns", nargs="+", help=f"subset of {', '.join(asbestos.COLUMNS)}")
    p.add_argument("--jobs", type=int, default=1, help="solve columns in parallel processes")
    p.add_argument("--format", choices=formats, default="text")
    p.add_argument("-v", "--verbose", action="store_true", help="report each cell on stderr as it is solved")
    _solver_flags(p)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("hull", help="CSV geometry: realm vertices, slices and bound endpoints")
    p.add_argument("scenario")
    p.add_argument("--quantities", help="comma-separated quantity names (at most three)")
    p.add_argument("--target", help="target whose bounds give the segment endpoints")
    p.add_argument("-o", "--output")
    _solver_flags(p)
    p.set_defaults(func=cmd_hull)

    p = sub.add_parser("export-scenario", help="write a built-in scenario as a JSON document")
    p.add_argument("name", help=f"one of {', '.join(BUILTIN + asbestos.COLUMNS)}")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
