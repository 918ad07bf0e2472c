"""Lower and upper coherent bounds on previsions over a constraint system.

Three routes:

* linear systems, linear targets: two LPs (``lp_bounds``);
* linear systems, conditional targets: the normalisation substitution
  ``r = t*q`` with ``den.r = 1`` turns the ratio into one LP per direction;
* anything with products (bilinear constraints, ratio differences): spatial
  branch-and-bound, wrapped in a parametric root search for ratios.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Union

import numpy as np

from .assertions import ConstraintSystem
from .bnb import QuadForm, SearchResult, checked, make_program, solve_lp
from .perspective import perspective_program

log = logging.getLogger(__name__)


class Status(str, Enum):
    OPTIMAL = "optimal"
    GAP_CLOSED = "gap-closed-to-tolerance"
    LIMIT = "limit-reached"
    INFEASIBLE = "infeasible"
    UNBOUNDED_DENOMINATOR = "unbounded-denominator"

    def __str__(self) -> str:
        return self.value


class SystemError_(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    feas_tol: float = 1e-9
    bilinear_tol: float = 1e-8
    relative_tol: float = 1e-6
    gap_tol: float = 1e-4
    node_limit: int = 20000
    time_limit: float = 300.0
    multistart: int = 4
    seed: int = 0
    max_parametric_steps: int = 40
    relaxation: str = "reduced"
    rescale: bool = True

    def __post_init__(self):
        for name in ("feas_tol", "bilinear_tol", "relative_tol", "gap_tol", "time_limit"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


# ---------------------------------------------------------------------------
# Targets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Linear:
    row: np.ndarray


@dataclass(frozen=True)
class Conditional:
    num: np.ndarray
    den: np.ndarray


@dataclass(frozen=True)
class Difference:
    first: Union[Linear, Conditional]
    second: Union[Linear, Conditional]


Target = Union[Linear, Conditional, Difference]


def _as_ratio(t: Union[Linear, Conditional], n: int) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(t, Linear):
        return _vec(t.row), np.ones(n)
    return _vec(t.num), _vec(t.den)


def _vec(row) -> np.ndarray:
    return np.array([float(x) for x in np.asarray(row).tolist()], dtype=float)


def target_value(target: Target, q) -> float:
    q = np.asarray(q, dtype=float)
    if isinstance(target, Linear):
        return float(_vec(target.row) @ q)
    if isinstance(target, Conditional):
        den = float(_vec(target.den) @ q)
        return float(_vec(target.num) @ q) / den if den > 0 else float("nan")
    return target_value(target.first, q) - target_value(target.second, q)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------


@dataclass
class BoundsResult:
    """Coherent interval for a target.

    ``lower``/``upper`` are attained by the witnesses.  ``certified_gap`` bounds
    how far the true infimum/supremum can lie outside ``[lower, upper]``.
    ``lower_attained``/``upper_attained`` say whether the endpoint is reached
    by a witness with every conditioning event of positive probability.
    """

    lower: float
    upper: float
    status: Status
    witness_min: np.ndarray | None = None
    witness_max: np.ndarray | None = None
    certified_gap: float = 0.0
    lower_attained: bool = True
    upper_attained: bool = True
    nodes: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.status not in (Status.INFEASIBLE, Status.UNBOUNDED_DENOMINATOR)

    def as_dict(self) -> dict:
        def vec(w):
            return None if w is None else [float(x) for x in w]

        return {
            "lower": self.lower,
            "upper": self.upper,
            "status": str(self.status),
            "certified_gap": self.certified_gap,
            "lower_attained": self.lower_attained,
            "upper_attained": self.upper_attained,
            "witness_min": vec(self.witness_min),
            "witness_max": vec(self.witness_max),
        }


def _infeasible() -> BoundsResult:
    return BoundsResult(float("nan"), float("nan"), Status.INFEASIBLE, lower_attained=False, upper_attained=False)


def _undefined() -> BoundsResult:
    return BoundsResult(
        float("nan"), float("nan"), Status.UNBOUNDED_DENOMINATOR, lower_attained=False, upper_attained=False
    )


# ---------------------------------------------------------------------------
# Linear programming routes
# ---------------------------------------------------------------------------


def _check_dims(system: ConstraintSystem, *rows) -> None:
    for r in rows:
        if len(np.asarray(r)) != system.n_cells:
            raise SystemError_(f"target row of length {len(r)} on a system with {system.n_cells} cells")


def lp_bounds(system: ConstraintSystem, target: Linear, config: SolverConfig = SolverConfig()) -> BoundsResult:
    if system.has_bilinear:
        raise SystemError_("lp_bounds cannot handle bilinear constraints; use global_bounds")
    _check_dims(system, target.row)
    a_eq, b_eq, a_ub, b_ub, _ = system.matrices()
    c = _vec(target.row)
    bounds = [(0, None)] * system.n_cells
    lo = checked(solve_lp(c, a_ub, b_ub, a_eq, b_eq, bounds))
    if lo is None:
        return _infeasible()
    hi = checked(solve_lp(-c, a_ub, b_ub, a_eq, b_eq, bounds))
    wmin, wmax = _clean(lo.x), _clean(hi.x)
    return BoundsResult(float(c @ wmin), float(c @ wmax), Status.OPTIMAL, wmin, wmax)


def _clean(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.where(np.abs(q) < 1e-15, 0.0, q)


def _fractional_lp(system: ConstraintSystem, num, den, sense: float):
    """Optimise ``num.q / den.q`` over a linear system via ``r = t q``, ``den.r = 1``.

    Returns ``(value, q)`` or ``None`` when no feasible q has ``den.q > 0``.
    """
    a_eq, b_eq, a_ub, b_ub, _ = system.matrices()
    n = system.n_cells
    eq = np.vstack([np.hstack([a_eq, -b_eq[:, None]]), np.append(den, 0.0)[None, :]])
    beq = np.append(np.zeros(len(b_eq)), 1.0)
    ub = np.hstack([a_ub, -b_ub[:, None]]) if len(b_ub) else None
    bub = np.zeros(len(b_ub)) if len(b_ub) else None
    res = solve_lp(np.append(-sense * num, 0.0), ub, bub, eq, beq, [(0, None)] * (n + 1))
    if res.status in (2, 3):
        return None
    checked(res)
    r, t = res.x[:n], res.x[n]
    q = _clean(r / t)
    return float(num @ q) / float(den @ q), q


def _linear_conditional(system, num, den) -> BoundsResult:
    feas = lp_bounds(system, Linear(den))
    if not feas.feasible:
        return feas
    if feas.upper <= 0:
        return _undefined()
    lo = _fractional_lp(system, num, den, -1.0)
    hi = _fractional_lp(system, num, den, 1.0)
    if lo is None or hi is None:
        return _undefined()
    return BoundsResult(lo[0], hi[0], Status.OPTIMAL, lo[1], hi[1])


# ---------------------------------------------------------------------------
# Global routes
# ---------------------------------------------------------------------------


class Solver:
    """Caches the branch-and-bound relaxation of one system across many targets."""

    def __init__(self, system: ConstraintSystem, config: SolverConfig = SolverConfig()):
        self.system = system
        self.config = config
        self._matrices = system.matrices()
        self.program = make_program(*self._matrices, config.relaxation, **self._tol())
        self._rescaled: dict[bytes, object] = {}

    def _tol(self) -> dict:
        c = self.config
        return {"feas_tol": c.feas_tol, "bil_tol": c.bilinear_tol, "rel_tol": c.relative_tol}

    def rescaled(self, den: np.ndarray):
        """Rescaled program for ratios over ``den`` (None when it does not apply)."""
        key = np.asarray(den, float).tobytes()
        if key not in self._rescaled:
            self._rescaled[key] = (
                perspective_program(*self._matrices, den, self.config.relaxation, **self._tol())
                if self.config.rescale
                else None
            )
        return self._rescaled[key]

    def maximise(self, objective: QuadForm, program=None, **kw) -> SearchResult:
        c = self.config
        return (program or self.program).maximise(
            objective,
            gap_tol=kw.pop("gap_tol", c.gap_tol),
            node_limit=c.node_limit,
            time_limit=c.time_limit,
            multistart=c.multistart,
            seed=c.seed,
            **kw,
        )

    # -- linear targets ------------------------------------------------------
    def linear(self, row, search: bool = False) -> BoundsResult:
        """Bounds on ``row.q``; ``search=True`` uses branch-and-bound even without product rows."""
        row = _vec(row)
        _check_dims(self.system, row)
        if not self.system.has_bilinear and not search:
            return lp_bounds(self.system, Linear(row), self.config)
        hi = self.maximise(QuadForm.of(row))
        if hi.incumbent is None:
            return self._no_witness(hi)
        lo = self.maximise(QuadForm.of(-row))
        return self._combine(-lo.incumbent, hi.incumbent, lo, hi, lo.witness, hi.witness)

    def _no_witness(self, res: SearchResult) -> BoundsResult:
        if res.status == "infeasible":
            return _infeasible()
        out = BoundsResult(float("nan"), float("nan"), Status.LIMIT, lower_attained=False, upper_attained=False)
        out.notes.append("no feasible point found before the search limit")
        return out

    def _combine(self, lower, upper, lo_res, hi_res, wmin, wmax, gap_lo=None, gap_hi=None) -> BoundsResult:
        gap_lo = lo_res.gap if gap_lo is None else gap_lo
        gap_hi = hi_res.gap if gap_hi is None else gap_hi
        limited = lo_res.status == "limit" or hi_res.status == "limit"
        return BoundsResult(
            lower,
            upper,
            Status.LIMIT if limited else Status.GAP_CLOSED,
            wmin,
            wmax,
            certified_gap=max(gap_lo, gap_hi),
            nodes=lo_res.nodes + hi_res.nodes,
        )

    # -- ratios --------------------------------------------------------------
    def ratio(self, num: QuadForm, den: QuadForm) -> BoundsResult:
        """Bounds on ``num(q)/den(q)`` over feasible q with ``den(q) > 0``."""
        top = self.maximise(den)
        if top.incumbent is None:
            return self._no_witness(top)
        if top.upper <= self.config.feas_tol:
            return _undefined()
        if top.incumbent <= self.config.feas_tol:
            out = self._no_witness(SearchResult("limit", None, None, top.upper, top.nodes, 0))
            out.notes.append("could not find a feasible point with positive denominator")
            return out
        if num.is_linear and den.is_linear:
            persp = self.rescaled(den.linear)
            if persp is not None and not np.any(num.linear[~persp.support]):
                res = self._rescaled_ratio(persp, num.linear)
                res.nodes += top.nodes
                return res
        start = top.witness
        dmin = max(0.0, -self.maximise(-den).upper)
        hi, hi_res, hi_gap = self._sup_ratio(num, den, start, dmin)
        lo, lo_res, lo_gap = self._sup_ratio(-num, den, start, dmin)
        res = self._combine(-lo[0], hi[0], lo_res, hi_res, lo[1], hi[1], lo_gap, hi_gap)
        res.nodes += top.nodes
        return res

    def _rescaled_ratio(self, persp, num) -> BoundsResult:
        obj = persp.lift(num)
        hi = self.maximise(QuadForm.of(obj), program=persp.program)
        lo = self.maximise(QuadForm.of(-obj), program=persp.program)
        if hi.witness is None or lo.witness is None:
            return self._no_witness(hi if hi.witness is None else lo)
        res = self._combine(-lo.incumbent, hi.incumbent, lo, hi, persp.to_q(lo.witness), persp.to_q(hi.witness))
        tol = self.config.feas_tol
        res.lower_attained = persp.scale(lo.witness) > tol
        res.upper_attained = persp.scale(hi.witness) > tol
        for end, ok in (("lower", res.lower_attained), ("upper", res.upper_attained)):
            if not ok:
                res.notes.append(f"{end} bound is approached only as the conditioning probability tends to 0")
        return res

    def _sup_ratio(self, num: QuadForm, den: QuadForm, start, dmin: float):
        """Parametric (Dinkelbach) search for ``sup num/den``.

        Each step maximises ``num - lam*den`` globally.  A witness with a
        positive parametric value has a ratio above ``lam`` and becomes the new
        ``lam``; the search stops when the certified maximum is within the gap
        tolerance of zero.  Returns ``((value, witness), last search, gap)``.
        When the denominator is bounded below by ``dmin`` the gap is in ratio
        units; otherwise it is the certified parametric value itself.
        """
        cfg = self.config
        sub_gap = cfg.gap_tol * max(dmin, 1e-2)
        best_q = start
        lam = num.value(start) / den.value(start)
        res = None
        for _ in range(cfg.max_parametric_steps):
            res = self.maximise(num - lam * den, gap_tol=sub_gap)
            q = res.witness
            improved = False
            if q is not None and res.incumbent > 0:
                d = den.value(q)
                if d > cfg.feas_tol:
                    val = num.value(q) / d
                    if val > lam + 1e-12:
                        lam, best_q, improved = val, q, True
            if not improved or res.upper <= sub_gap:
                break
        gap_g = max(0.0, res.upper) if res is not None else 0.0
        gap = gap_g / dmin if dmin > 1e-6 else gap_g
        return (lam, best_q), res, gap


def _ratio_forms(target: Target, n: int) -> tuple[QuadForm, QuadForm]:
    if isinstance(target, (Linear, Conditional)):
        num, den = _as_ratio(target, n)
        return QuadForm.of(num), QuadForm.of(den)
    n1, d1 = _as_ratio(target.first, n)
    n2, d2 = _as_ratio(target.second, n)
    if np.array_equal(d1, d2):
        return QuadForm.of(n1 - n2), QuadForm.of(d1)
    num = QuadForm.product(n1, d2) - QuadForm.product(n2, d1)
    return num, QuadForm.product(d1, d2)


def global_bounds(system: ConstraintSystem, target: Target, config: SolverConfig = SolverConfig()) -> BoundsResult:
    """Certified bounds via branch-and-bound; agrees with ``lp_bounds`` on linear systems."""
    if isinstance(target, Linear) and not system.has_bilinear:
        return lp_bounds(system, target, config)
    return bounds(system, target, config)


def conditional_bounds(system: ConstraintSystem, target: Conditional, config: SolverConfig = SolverConfig()) -> BoundsResult:
    _check_dims(system, target.num, target.den)
    num, den = _vec(target.num), _vec(target.den)
    if np.any(den < 0):
        raise SystemError_("conditioning rows must be non-negative")
    if np.any((den == 0) & (num != 0)):
        raise SystemError_("target row has mass outside its conditioning event")
    if not system.has_bilinear:
        return _linear_conditional(system, num, den)
    return Solver(system, config).ratio(QuadForm.of(num), QuadForm.of(den))


def bounds(system: ConstraintSystem, target: Target, config: SolverConfig = SolverConfig(), solver: Solver | None = None) -> BoundsResult:
    """Dispatch any target to the cheapest sound route."""
    n = system.n_cells
    if isinstance(target, Linear):
        if not system.has_bilinear:
            return lp_bounds(system, target, config)
        return (solver or Solver(system, config)).linear(target.row)
    if isinstance(target, Conditional):
        if solver is None or not system.has_bilinear:
            return conditional_bounds(system, target, config)
        return solver.ratio(QuadForm.of(_vec(target.num)), QuadForm.of(_vec(target.den)))
    num, den = _ratio_forms(target, n)
    if num.is_linear and den.is_linear and not system.has_bilinear:
        return _linear_conditional(system, num.linear, den.linear)
    return (solver or Solver(system, config)).ratio(num, den)


def check_coherence(system: ConstraintSystem, config: SolverConfig = SolverConfig()) -> tuple[bool, np.ndarray | None]:
    """Feasibility of the full system, with a witness q when feasible."""
    if not system.has_bilinear:
        a_eq, b_eq, a_ub, b_ub, _ = system.matrices()
        res = checked(solve_lp(np.zeros(system.n_cells), a_ub, b_ub, a_eq, b_eq, [(0, None)] * system.n_cells))
        if res is None:
            return False, None
        return True, _clean(res.x)
    solver = Solver(system, config)
    res = solver.maximise(QuadForm.of(np.zeros(system.n_cells)))
    if res.witness is None:
        if res.status == "limit":
            raise RuntimeError("coherence undecided: search limit reached")
        return False, None
    return True, res.witness
