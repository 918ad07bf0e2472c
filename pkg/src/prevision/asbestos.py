"""Median-diagnosis accuracy of three B-readers screening for asbestosis.

Atoms: ``F`` (fibrosis present) and ``D1, D2, D3`` (positive reading by each
reader).  ``D*`` is the median diagnosis (at least two positive readings) and
``S*`` a split positive decision (exactly two).  Every scenario asserts
``P(D*) = .12`` and ``P(S* D*) = .0504``.

Columns:

* ``TM82``, ``TM90``: readers conditionally independent given F and given
  not-F, with ``P(Di|F)`` = .82 or .90.  The three probabilities determine
  every cell, so each entry is a point value.
* ``CondExFIC82``, ``CondExFIC90``: conditional exchangeability, the
  seventeen orderings of conditional probabilities and ``P(Di|F)`` = p.
* ``CondExBnd``: as above but ``P(Di|F)`` and ``P(not Di|not F)`` only
  within [.82, .90].
* ``CondExBPlus``: ``CondExBnd`` plus ``P(F|Di) >= .5``.
"""
from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np
from scipy.optimize import brentq

from .assertions import (
    ConditionalOrdering,
    ConditionalPrevisionEq,
    ConditionalPrevisionInterval,
    Exchangeability,
    PrevisionEq,
    compile_assertions,
    iid_cell_masses,
)
from .bounds import BoundsResult, Solver, SolverConfig, Status, bounds
from .events import Realm, atom, conjunction, enumerate_realm, negate, threshold
from .targets import DifferenceOf, PrevisionOf, compile_target, evaluate_target

log = logging.getLogger(__name__)

F, D1, D2, D3 = (atom(n) for n in ("F", "D1", "D2", "D3"))
nF, nD1, nD2, nD3 = (negate(e) for e in (F, D1, D2, D3))
D_STAR = threshold([D1, D2, D3], 2)
S_STAR = conjunction(D_STAR, negate(threshold([D1, D2, D3], 3)))
nD_STAR = negate(D_STAR)

P_D_STAR = Fraction("0.12")
P_SPLIT = Fraction("0.0504")

# Presentation order of the realm columns, one (F, D1, D2, D3) string per column.
COLUMN_ORDER = (
    "0000", "1000", "0100", "0010", "0001", "1100", "1010", "1001",
    "0011", "0101", "0110", "1011", "1101", "1110", "0111", "1111",
)

COLUMNS = ("TM82", "CondExFIC82", "TM90", "CondExFIC90", "CondExBnd", "CondExBPlus")


def build_realm() -> Realm:
    return enumerate_realm(
        ("F", "D1", "D2", "D3"),
        (F, D1, D2, D3, D_STAR, S_STAR),
        order=[int(s, 2) for s in COLUMN_ORDER],
        names=("F", "D1", "D2", "D3", "D*", "S*"),
    )


def base_assertions() -> list:
    return [
        Exchangeability((D1, D2, D3), F),
        Exchangeability((D1, D2, D3), nF),
        PrevisionEq(D_STAR, P_D_STAR),
        PrevisionEq(conjunction(S_STAR, D_STAR), P_SPLIT),
    ]


def _c(*events):
    return events[0] if len(events) == 1 else conjunction(*events)


HALF = Fraction(1, 2)


def fic_inequalities() -> list[ConditionalOrdering]:
    """The seventeen orderings of conditional reading probabilities."""
    pairs = [
        # one chain through F and not-F
        ((D3, _c(nD2, nD1, nF)), (D3, _c(nD1, nF))),
        ((D3, _c(nD1, nF)), (D3, nF)),
        ((D3, nF), (D3, F)),
        ((D3, F), (D3, _c(D1, F))),
        ((D3, _c(D1, F)), (D3, _c(D2, D1, F))),
        # second reader
        ((D2, _c(nD1, nF)), (D2, _c(nD1, F))),
        ((D2, _c(nD1, F)), (D2, F)),
        ((D2, nF), (D2, _c(D1, nF))),
        ((D2, _c(D1, nF)), (D2, _c(D1, F))),
        # third reader after mixed first readings
        ((D3, _c(nD2, nD1, F)), (D3, _c(nD1, F))),
        ((D3, _c(nD1, F)), (D3, _c(nD1, D2, F))),
        ((D3, _c(nD2, D1, nF)), (D3, _c(D1, nF))),
        ((D3, _c(D1, nF)), (D3, _c(D2, D1, nF))),
        # split readings, centred on one half
        ((D3, _c(nD1, nF)), (D3, _c(nD1, D2, nF))),
        ((D3, _c(nD1, D2, nF)), HALF),
        (HALF, (D3, _c(nD2, D1, F))),
        ((D3, _c(nD2, D1, F)), (D3, _c(D1, F))),
    ]
    return [ConditionalOrdering(lhs, rhs) for lhs, rhs in pairs]


# ---------------------------------------------------------------------------
# Targets
# ---------------------------------------------------------------------------

TABLE1_ROWS: dict[str, tuple[str, PrevisionOf]] = {
    "p": ("p = P(Di|F)", PrevisionOf(D1, F)),
    "one_minus_pf": ("1-pf = P(~Di|~F)", PrevisionOf(nD1, nF)),
    "ppv_ind": ("PV+ind = P(F|Di)", PrevisionOf(F, D1)),
    "npv_ind": ("PV-ind = P(~F|~Di)", PrevisionOf(nF, nD1)),
    "sens_star": ("P(D*|F)", PrevisionOf(D_STAR, F)),
    "spec_star": ("P(~D*|~F)", PrevisionOf(nD_STAR, nF)),
    "ppv": ("PV+ = P(F|D*)", PrevisionOf(F, D_STAR)),
    "npv": ("PV- = P(~F|~D*)", PrevisionOf(nF, nD_STAR)),
    "prevalence": ("P(F)", PrevisionOf(F)),
}


def _diff(a: str, b: str) -> DifferenceOf:
    return DifferenceOf(TABLE1_ROWS[a][1], TABLE1_ROWS[b][1])


TABLE2_ROWS: dict[str, tuple[str, DifferenceOf]] = {
    "d_sens": ("P(D*|F)-P(Di|F)", _diff("sens_star", "p")),
    "d_spec": ("P(~D*|~F)-P(~Di|~F)", _diff("spec_star", "one_minus_pf")),
    "d_ppv": ("P(F|D*)-P(F|Di)", _diff("ppv", "ppv_ind")),
    "d_npv": ("P(~F|~D*)-P(~F|~Di)", _diff("npv", "npv_ind")),
}

ALL_ROWS = {**TABLE1_ROWS, **TABLE2_ROWS}

# Published values.  Points are floats, intervals are pairs.
REFERENCE_TABLE1: dict[str, dict[str, object]] = {
    "TM82": {"p": .82, "one_minus_pf": .958, "ppv_ind": .734, "npv_ind": .974, "sens_star": .914,
             "spec_star": .995, "ppv": .961, "npv": .987, "prevalence": .126},
    "CondExFIC82": {"p": .82, "one_minus_pf": (.797, .992), "ppv_ind": (.0, .932), "npv_ind": (.973, 1.0),
                    "sens_star": (.820, .915), "spec_star": (.880, .995), "ppv": (.0, .961),
                    "npv": (.979, 1.0), "prevalence": (.0, .127)},
    "TM90": {"p": .90, "one_minus_pf": .894, "ppv_ind": .466, "npv_ind": .989, "sens_star": .972,
             "spec_star": .968, "ppv": .761, "npv": .997, "prevalence": .094},
    "CondExFIC90": {"p": .90, "one_minus_pf": (.797, .956), "ppv_ind": (.0, .657), "npv_ind": (.988, 1.0),
                    "sens_star": (.900, .972), "spec_star": (.880, .969), "ppv": (.0, .762),
                    "npv": (.990, 1.0), "prevalence": (.0, .094)},
    "CondExBnd": {"p": (.82, .90), "one_minus_pf": (.82, .90), "ppv_ind": (.0, .506), "npv_ind": (.975, 1.0),
                  "sens_star": (.82, .972), "spec_star": (.880, .972), "ppv": (.0, .793),
                  "npv": (.979, 1.0), "prevalence": (.0, .111)},
    "CondExBPlus": {"p": (.82, .846), "one_minus_pf": (.898, .90), "ppv_ind": (.50, .506),
                    "npv_ind": (.975, .981), "sens_star": (.852, .898), "spec_star": (.969, .972),
                    "ppv": (.772, .793), "npv": (.981, .988), "prevalence": (.105, .111)},
}

REFERENCE_TABLE2: dict[str, dict[str, object]] = {
    "TM82": {"d_sens": .094, "d_spec": .037, "d_ppv": .227, "d_npv": .014},
    "CondExFIC82": {"d_sens": (.0, .095), "d_spec": (.0, .088), "d_ppv": (.0, .299), "d_npv": (.0, .015)},
    "TM90": {"d_sens": .072, "d_spec": .075, "d_ppv": .294, "d_npv": .008},
    "CondExFIC90": {"d_sens": (.0, .072), "d_spec": (.0, .088), "d_ppv": (.0, .295), "d_npv": (.0, .009)},
    "CondExBnd": {"d_sens": (.0, .095), "d_spec": (.0, .088), "d_ppv": (.0, .299), "d_npv": (.0, .012)},
    "CondExBPlus": {"d_sens": (.032, .055), "d_spec": (.069, .073), "d_ppv": (.272, .293), "d_npv": (.005, .009)},
}

# Entries marked as assertions rather than results.
STARRED = {
    "TM82": {"p", "one_minus_pf", "ppv", "npv"},
    "CondExFIC82": {"p"},
    "TM90": {"p", "one_minus_pf", "ppv", "npv"},
    "CondExFIC90": {"p"},
    "CondExBnd": set(),
    "CondExBPlus": set(),
}

POINT_TOL = 0.005
INTERVAL_TOL = 0.01


def tolerance(column: str) -> float:
    return POINT_TOL if column.startswith("TM") else INTERVAL_TOL


# ---------------------------------------------------------------------------
# Conditional independence
# ---------------------------------------------------------------------------


def at_least_two(x: float) -> float:
    return 3 * x**2 - 2 * x**3


def exactly_two(x: float) -> float:
    return 3 * x**2 * (1 - x)


@dataclass(frozen=True)
class Entry:
    """One table cell: a point (lower == upper) or an interval."""

    lower: float
    upper: float
    status: str = "optimal"
    starred: bool = False
    lower_attained: bool = True
    upper_attained: bool = True
    gap: float = 0.0
    seconds: float = 0.0

    @property
    def is_point(self) -> bool:
        return self.lower == self.upper

    @classmethod
    def point(cls, value: float, starred: bool = False) -> "Entry":
        return cls(float(value), float(value), starred=starred)


@dataclass
class AccuracyProfile:
    column: str
    entries: dict[str, Entry] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Entry:
        return self.entries[key]

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def value(self, key: str) -> float:
        e = self.entries[key]
        if not e.is_point:
            raise ValueError(f"{key} is an interval in column {self.column}")
        return e.lower


@dataclass(frozen=True)
class IndependenceSolution:
    p: float
    pi: float
    p_f: float
    q: np.ndarray
    profile: AccuracyProfile


def tm_independence_solution(
    p: float, pd_star: float = float(P_D_STAR), psd: float = float(P_SPLIT), column: str | None = None
) -> IndependenceSolution:
    """Prevalence and false-positive rate making iid readers match ``P(D*)`` and ``P(S*D*)``.

    With ``pi = P(F)`` and ``pf = P(Di|~F)``:
    ``pi*B(p) + (1-pi)*B(pf) = pd_star`` and ``pi*T(p) + (1-pi)*T(pf) = psd``.
    ``pi`` is eliminated through the first equation and the second is solved
    for ``pf`` in (0, p).
    """
    if not 0 < p < 1:
        raise ValueError("p must lie strictly between 0 and 1")
    bp, tp = at_least_two(p), exactly_two(p)

    def pi_of(x):
        return (pd_star - at_least_two(x)) / (bp - at_least_two(x))

    def resid(x):
        pi = pi_of(x)
        return pi * tp + (1 - pi) * exactly_two(x) - psd

    grid = np.linspace(1e-9, p - 1e-9, 2001)
    roots = []
    vals = [resid(x) for x in grid]
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0 or fa * fb < 0:
            x = brentq(resid, a, b, xtol=1e-15) if fa != 0 else a
            if 0 < pi_of(x) < 1:
                roots.append(x)
    if not roots:
        raise ValueError(f"no independence solution with 0 < P(F) < 1 and 0 < pf < {p}")
    if len(roots) > 1:
        log.warning("several independence solutions for p=%s; using pf=%s", p, roots[0])
    pf = roots[0]
    pi = pi_of(pf)
    realm = build_realm()
    q = iid_cell_masses(p, ("D1", "D2", "D3"), realm, given="F", given_prob=pi, theta_else=pf)
    q = np.asarray(q, dtype=float)
    name = column or f"TM{round(p * 100)}"
    starred = STARRED.get(name, {"p"})
    profile = AccuracyProfile(name)
    for key, (_, spec) in ALL_ROWS.items():
        profile.entries[key] = Entry.point(evaluate_target(spec, realm, q), key in starred)
    return IndependenceSolution(p, pi, pf, q, profile)


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------


@dataclass
class AsbestosScenario:
    column: str
    assertions: list
    targets: dict = field(default_factory=lambda: {k: spec for k, (_, spec) in ALL_ROWS.items()})
    inputs: dict = field(default_factory=dict)  # starred key -> asserted value
    independence_p: float | None = None

    def realm(self) -> Realm:
        return build_realm()

    def system(self):
        return compile_assertions(self.assertions, build_realm())


def _each_reader(make) -> list:
    return [make(d) for d in (D1, D2, D3)]


def scenario(column: str) -> AsbestosScenario:
    if column not in COLUMNS:
        raise ValueError(f"unknown column {column!r}; expected one of {', '.join(COLUMNS)}")
    base = base_assertions()
    if column.startswith("TM"):
        p = Fraction(column[2:]) / 100
        return AsbestosScenario(
            column,
            base + _each_reader(lambda d: ConditionalPrevisionEq(d, F, p)),
            independence_p=float(p),
        )
    ordered = base + fic_inequalities()
    if column.startswith("CondExFIC"):
        p = Fraction(column[-2:]) / 100
        return AsbestosScenario(
            column, ordered + _each_reader(lambda d: ConditionalPrevisionEq(d, F, p)), inputs={"p": float(p)}
        )
    lo, hi = Fraction("0.82"), Fraction("0.90")
    bnd = ordered + _each_reader(lambda d: ConditionalPrevisionInterval(d, F, lo, hi))
    bnd += _each_reader(lambda d: ConditionalPrevisionInterval(negate(d), nF, lo, hi))
    if column == "CondExBPlus":
        bnd += _each_reader(lambda d: ConditionalPrevisionInterval(F, d, HALF, 1))
    return AsbestosScenario(column, bnd)


def _entry(res: BoundsResult, seconds: float) -> Entry:
    return Entry(
        res.lower, res.upper, str(res.status), False,
        res.lower_attained, res.upper_attained, res.certified_gap, seconds,
    )


def solve_scenario(
    scn: AsbestosScenario,
    keys: Iterable[str] | None = None,
    config: SolverConfig = SolverConfig(),
    progress: Callable[[str, str, Entry], None] | None = None,
) -> AccuracyProfile:
    keys = list(keys or scn.targets)
    if scn.independence_p is not None:
        full = tm_independence_solution(scn.independence_p, column=scn.column).profile
        out = AccuracyProfile(scn.column, {k: full[k] for k in keys})
        if progress:
            for k in keys:
                progress(scn.column, k, out[k])
        return out
    realm = build_realm()
    system = scn.system()
    solver = Solver(system, config) if system.has_bilinear else None
    out = AccuracyProfile(scn.column)
    for key in keys:
        if key in scn.inputs:
            entry = Entry.point(scn.inputs[key], starred=True)
        else:
            t0 = time.perf_counter()
            res = bounds(system, compile_target(scn.targets[key], realm), config, solver)
            entry = _entry(res, time.perf_counter() - t0)
        out.entries[key] = entry
        if progress:
            progress(scn.column, key, entry)
    return out


def _solve_column(args):
    column, keys, config = args
    return solve_scenario(scenario(column), keys, config)


def build_table(
    rows: dict,
    columns: Iterable[str] = COLUMNS,
    config: SolverConfig = SolverConfig(),
    jobs: int = 1,
    progress: Callable[[str, str, Entry], None] | None = None,
) -> dict[str, AccuracyProfile]:
    columns = list(columns)
    keys = list(rows)
    if jobs > 1 and len(columns) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            profiles = list(pool.map(_solve_column, [(c, keys, config) for c in columns]))
        if progress:
            for prof in profiles:
                for k in keys:
                    progress(prof.column, k, prof[k])
        return {p.column: p for p in profiles}
    return {c: solve_scenario(scenario(c), keys, config, progress) for c in columns}


def table1(columns: Iterable[str] = COLUMNS, config: SolverConfig = SolverConfig(), jobs: int = 1, progress=None):
    return build_table(TABLE1_ROWS, columns, config, jobs, progress)


def table2(columns: Iterable[str] = COLUMNS, config: SolverConfig = SolverConfig(), jobs: int = 1, progress=None):
    return build_table(TABLE2_ROWS, columns, config, jobs, progress)


# ---------------------------------------------------------------------------
# Comparison and rendering
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Mismatch:
    column: str
    key: str
    expected: object
    got: Entry
    tol: float

    def __str__(self) -> str:
        return (
            f"{self.column} {self.key}: expected {format_expected(self.expected)}, "
            f"got {format_entry(self.got)} (tol {self.tol})"
        )


def compare(profiles: dict[str, AccuracyProfile], reference: dict[str, dict[str, object]]) -> list[Mismatch]:
    bad = []
    for column, prof in profiles.items():
        tol = tolerance(column)
        for key, entry in prof.entries.items():
            exp = reference.get(column, {}).get(key)
            if exp is None:
                continue
            lo, hi = (exp, exp) if isinstance(exp, float) else exp
            if entry.status in (str(Status.INFEASIBLE), str(Status.UNBOUNDED_DENOMINATOR)):
                bad.append(Mismatch(column, key, exp, entry, tol))
            elif abs(entry.lower - lo) > tol or abs(entry.upper - hi) > tol:
                bad.append(Mismatch(column, key, exp, entry, tol))
    return bad


def _num(x: float) -> str:
    if np.isnan(x):
        return "nan"
    s = f"{x:.3f}"
    if s == "-0.000":
        s = "0.000"
    return s[1:] if s.startswith("0.") else s.replace("-0.", "-.")


def format_entry(e: Entry) -> str:
    star = "*" if e.starred else ""
    if e.is_point:
        return _num(e.lower) + star
    return f"({_num(e.lower)}, {_num(e.upper)}){star}"


def format_expected(exp) -> str:
    if isinstance(exp, float):
        return _num(exp)
    return f"({_num(exp[0])}, {_num(exp[1])})"


def _grid(profiles, rows):
    columns = list(profiles)
    header = ["Probability"] + columns
    body = []
    for key, (label, _) in rows.items():
        if not any(key in profiles[c] for c in columns):
            continue
        body.append([label] + [format_entry(profiles[c][key]) if key in profiles[c] else "" for c in columns])
    return header, body


def render_text(profiles, rows) -> str:
    header, body = _grid(profiles, rows)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    for r in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


def render_markdown(profiles, rows) -> str:
    header, body = _grid(profiles, rows)
    body = [[c.replace("|", "\\|") for c in r] for r in body]
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in body]
    return "\n".join(lines) + "\n"


def render_csv(profiles, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["column", "key", "label", "lower", "upper", "status", "starred",
                "lower_attained", "upper_attained", "certified_gap"])
    for column, prof in profiles.items():
        for key, (label, _) in rows.items():
            if key not in prof:
                continue
            e = prof[key]
            w.writerow([column, key, label, repr(e.lower), repr(e.upper), e.status, int(e.starred),
                        int(e.lower_attained), int(e.upper_attained), repr(e.gap)])
    return buf.getvalue()


def profiles_as_dict(profiles, rows) -> dict:
    out = {}
    for column, prof in profiles.items():
        out[column] = {
            key: {
                "label": rows[key][0],
                "lower": e.lower,
                "upper": e.upper,
                "status": e.status,
                "starred": e.starred,
                "lower_attained": e.lower_attained,
                "upper_attained": e.upper_attained,
                "certified_gap": e.gap,
            }
            for key, e in prof.entries.items()
            if key in rows
        }
    return out
