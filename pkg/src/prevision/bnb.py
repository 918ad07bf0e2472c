"""Spatial branch-and-bound for linear programs with bilinear constraints.

The feasible set is ``{q >= 0 : A_eq q = b_eq, A_ub q <= b_ub,
(a.q)(b.q) <= (u.q)(v.q) for each product row}`` and the objective is a
quadratic form built from products of linear forms.

Two relaxations share one best-bound search loop:

``ReducedProgram`` (default)
    Writes ``q = q0 + N y`` over the null space of the equality rows, lifts
    every product ``y_k y_l`` to its own variable with a McCormick envelope on
    the y-box, and adds the pairwise products ``q_i q_j >= 0`` of the sign
    constraints.  Every product of linear forms is then linear in the lifted
    variables.  Branching splits the y-coordinate carrying the largest
    envelope violation.

``FormProgram``
    One box per distinct linear form appearing in a product and one McCormick
    envelope per product of forms; branching splits a form's box.  It is
    markedly slower near degenerate optima and is kept as an independent
    cross-check.
"""
from __future__ import annotations

import heapq
import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import least_squares, linprog, minimize

log = logging.getLogger(__name__)

# products below this size are rounding noise for the relative check
_REL_FLOOR = 1e-14

_HIGHS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def solve_lp(c, a_ub, b_ub, a_eq, b_eq, bounds):
    """Minimise ``c.x`` with HiGHS; empty constraint blocks are dropped.

    Tight tolerances occasionally leave HiGHS without a verdict (status 4);
    such problems are retried with default settings and then the other
    HiGHS algorithms.
    """
    kw = dict(
        A_ub=a_ub if a_ub is not None and len(a_ub) else None,
        b_ub=b_ub if b_ub is not None and len(b_ub) else None,
        A_eq=a_eq if a_eq is not None and len(a_eq) else None,
        b_eq=b_eq if b_eq is not None and len(b_eq) else None,
        bounds=bounds,
    )
    res = linprog(c, method="highs", options=_HIGHS, **kw)
    for method, options in (("highs", {}), ("highs-ds", {}), ("highs-ipm", {})):
        if res.status != 4:
            break
        log.debug("HiGHS returned no verdict; retrying with %s %s", method, options)
        res = linprog(c, method=method, options=options, **kw)
    return res


class LPFailure(RuntimeError):
    """HiGHS returned neither an optimum nor a proof of infeasibility."""


def checked(res):
    """The LP result when optimal, None when infeasible; raises otherwise."""
    if res.status == 0:
        return res
    if res.status == 2:
        return None
    raise LPFailure(f"LP solve failed: {res.message}")


@dataclass
class QuadForm:
    """``linear . q + sum(w * (f . q) * (g . q))``."""

    linear: np.ndarray
    terms: list = field(default_factory=list)  # (w, f, g)

    @classmethod
    def of(cls, row) -> "QuadForm":
        return cls(np.asarray(row, dtype=float), [])

    @classmethod
    def product(cls, f, g, w: float = 1.0) -> "QuadForm":
        f = np.asarray(f, dtype=float)
        return cls(np.zeros_like(f), [(w, f, np.asarray(g, dtype=float))])

    def value(self, q) -> float:
        q = np.asarray(q, dtype=float)
        v = float(self.linear @ q)
        for w, f, g in self.terms:
            v += w * float(f @ q) * float(g @ q)
        return v

    def gradient(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        out = self.linear.copy()
        for w, f, g in self.terms:
            out += w * (f * float(g @ q) + g * float(f @ q))
        return out

    def __add__(self, other: "QuadForm") -> "QuadForm":
        return QuadForm(self.linear + other.linear, self.terms + other.terms)

    def __mul__(self, k: float) -> "QuadForm":
        return QuadForm(self.linear * k, [(w * k, f, g) for w, f, g in self.terms])

    __rmul__ = __mul__

    def __sub__(self, other: "QuadForm") -> "QuadForm":
        return self + (-1.0) * other

    def __neg__(self) -> "QuadForm":
        return (-1.0) * self

    @property
    def is_linear(self) -> bool:
        return not any(w != 0 for w, _, _ in self.terms)


@dataclass
class SearchResult:
    status: str  # "optimal", "limit", "infeasible"
    incumbent: float | None
    witness: np.ndarray | None
    upper: float  # certified bound on the maximum
    nodes: int
    seconds: float

    @property
    def gap(self) -> float:
        if self.incumbent is None:
            return float("inf")
        return max(0.0, self.upper - self.incumbent)


class _Program:
    """Feasibility checks, local polish and the best-bound search loop."""

    def __init__(self, a_eq, b_eq, a_ub, b_ub, bilinear, feas_tol=1e-9, bil_tol=1e-8, rel_tol=1e-6):
        self.n = a_eq.shape[1]
        self.a_eq, self.b_eq = a_eq, b_eq
        self.a_ub, self.b_ub = a_ub, b_ub
        self.bil = bilinear
        self.feas_tol, self.bil_tol, self.rel_tol = feas_tol, bil_tol, rel_tol
        self.linear_feasible = True

    # -- feasibility -------------------------------------------------------
    def violation(self, q) -> tuple[float, float, float]:
        """Linear, absolute bilinear and relative bilinear violation at ``q``.

        The relative figure divides each product row's gap by the size of its
        terms, so points that satisfy a row only because every factor is
        nearly zero do not count as feasible.
        """
        lin = max(0.0, -float(q.min()))
        if len(self.b_eq):
            lin = max(lin, float(np.abs(self.a_eq @ q - self.b_eq).max()))
        if len(self.b_ub):
            lin = max(lin, float((self.a_ub @ q - self.b_ub).max()))
        bil = rel = 0.0
        for a, b, u, v in self.bil:
            lhs, rhs = float(a @ q) * float(b @ q), float(u @ q) * float(v @ q)
            gap = lhs - rhs
            if gap <= 0:
                continue
            bil = max(bil, gap)
            rel = max(rel, gap / max(abs(lhs), abs(rhs), _REL_FLOOR))
        return lin, bil, rel

    def is_feasible(self, q) -> bool:
        lin, bil, rel = self.violation(q)
        return lin <= self.feas_tol and bil <= self.bil_tol and rel <= self.rel_tol

    def clean(self, q) -> np.ndarray:
        """Clip tiny negatives and re-project onto the linear equalities."""
        q = np.where(q < 0, 0.0, q)
        if len(self.b_eq):
            r = self.a_eq @ q - self.b_eq
            if np.abs(r).max() > 0:
                q2 = q - np.linalg.lstsq(self.a_eq, r, rcond=None)[0]
                if q2.min() >= 0:
                    q = q2
        return q

    def restore(self, start, max_nfev: int = 200) -> np.ndarray:
        """Least-squares pull of ``start`` towards the feasible set.

        Linearised product rows are often inconsistent far from the feasible
        set, which stops SQP at once; minimising the squared violations first
        gives it a usable starting point.
        """
        a_eq, b_eq, a_ub, b_ub, bil = self.a_eq, self.b_eq, self.a_ub, self.b_ub, self.bil

        def residual(q):
            parts = [a_eq @ q - b_eq, np.maximum(0.0, a_ub @ q - b_ub)]
            if len(bil):
                f = np.einsum("rkn,n->rk", bil, q)
                parts.append(np.maximum(0.0, f[:, 0] * f[:, 1] - f[:, 2] * f[:, 3]))
            return np.concatenate(parts)

        def jac(q):
            active = (a_ub @ q - b_ub > 0)[:, None]
            parts = [a_eq, np.where(active, a_ub, 0.0)]
            if len(bil):
                f = np.einsum("rkn,n->rk", bil, q)
                g = (bil[:, 0] * f[:, 1:2] + bil[:, 1] * f[:, 0:1]
                     - bil[:, 2] * f[:, 3:4] - bil[:, 3] * f[:, 2:3])
                on = (f[:, 0] * f[:, 1] - f[:, 2] * f[:, 3] > 0)[:, None]
                parts.append(np.where(on, g, 0.0))
            return np.vstack(parts)

        x0 = np.clip(start, 0.0, None)
        if len(residual(x0)) == 0:
            return x0
        try:
            res = least_squares(residual, x0, jac=jac, bounds=(0.0, np.inf), xtol=1e-15, ftol=1e-15,
                                gtol=1e-15, max_nfev=max_nfev)
        except (ValueError, np.linalg.LinAlgError):
            return x0
        return self.clean(res.x)

    def polish(self, objective: QuadForm, start, maxiter: int = 200):
        """Local maximisation from ``start``; returns a feasible point or None."""
        start = np.clip(start, 0.0, None)
        if not self.is_feasible(start):
            start = self.restore(start)
        fallback = start if self.is_feasible(start) else None
        cons = []
        if len(self.b_eq):
            cons.append({"type": "eq", "fun": lambda q: self.a_eq @ q - self.b_eq, "jac": lambda q: self.a_eq})
        if len(self.b_ub):
            cons.append({"type": "ineq", "fun": lambda q: self.b_ub - self.a_ub @ q, "jac": lambda q: -self.a_ub})
        if len(self.bil):
            bil = self.bil

            def g(q):
                return np.array([(u @ q) * (v @ q) - (a @ q) * (b @ q) for a, b, u, v in bil])

            def gj(q):
                return np.array(
                    [u * (v @ q) + v * (u @ q) - a * (b @ q) - b * (a @ q) for a, b, u, v in bil]
                )

            cons.append({"type": "ineq", "fun": g, "jac": gj})
        try:
            res = minimize(
                lambda q: -objective.value(q),
                np.clip(start, 0, None),
                jac=lambda q: -objective.gradient(q),
                method="SLSQP",
                bounds=[(0, None)] * self.n,
                constraints=cons,
                options={"maxiter": maxiter, "ftol": 1e-14},
            )
        except (ValueError, np.linalg.LinAlgError):
            return fallback
        q = self.clean(res.x)
        if self.is_feasible(q) and (fallback is None or objective.value(q) >= objective.value(fallback)):
            return q
        return fallback

    # -- hooks for the relaxations ------------------------------------------
    def root_box(self):
        raise NotImplementedError

    def relax(self, objective: QuadForm, lo, hi):
        """Solve the node relaxation; returns ``(bound, x)`` or None if infeasible."""
        raise NotImplementedError

    def point(self, x) -> np.ndarray:
        raise NotImplementedError

    def branch(self, x, lo, hi):
        """``(coordinate, split point)`` or ``(None, None)`` when the envelope is exact."""
        raise NotImplementedError

    def prepare(self, objective: QuadForm) -> None:
        """Register objective products before the search starts."""

    # -- search ------------------------------------------------------------
    def maximise(
        self,
        objective: QuadForm,
        gap_tol: float = 1e-4,
        node_limit: int = 20000,
        time_limit: float = 120.0,
        multistart: int = 4,
        seed: int = 0,
        polish_every: int = 16,
    ) -> SearchResult:
        """Certified global maximum of ``objective`` over the feasible set."""
        t0 = time.perf_counter()
        if not self.linear_feasible:
            return SearchResult("infeasible", None, None, -np.inf, 0, 0.0)
        self.prepare(objective)
        rng = np.random.default_rng(seed)
        best_val, best_q = -np.inf, None

        def offer(q):
            nonlocal best_val, best_q
            if q is None:
                return
            val = objective.value(q)
            if val > best_val:
                best_val, best_q = val, q

        lo0, hi0 = self.root_box()
        root = self.relax(objective, lo0, hi0)
        if root is None:
            return SearchResult("infeasible", None, None, -np.inf, 1, time.perf_counter() - t0)
        q0 = self.clean(self.point(root[1]))
        if self.is_feasible(q0):
            offer(q0)
        offer(self.polish(objective, q0))
        for _ in range(multistart):
            offer(self.polish(objective, rng.dirichlet(np.full(self.n, 0.5))))

        counter, nodes, status = 0, 1, "optimal"
        # largest bound among boxes closed by the gap test; part of the certified upper bound
        pruned = -np.inf
        heap = [(-root[0], counter, lo0, hi0, root[1])]
        while heap:
            top = -heap[0][0]
            if best_q is not None and top - best_val <= gap_tol:
                break
            if nodes >= node_limit or time.perf_counter() - t0 > time_limit:
                status = "limit"
                break
            neg, _, lo, hi, x = heapq.heappop(heap)
            k, split = self.branch(x, lo, hi)
            if k is None:
                # the envelope is exact at x; fathom if the point checks out
                q = self.clean(self.point(x))
                if self.is_feasible(q):
                    offer(q)
                    continue
                offer(self.polish(objective, q))
                k = int(np.argmax(hi - lo))
                if hi[k] - lo[k] <= 1e-12:
                    log.warning("dropping an unresolved node of width %.1e", hi[k] - lo[k])
                    pruned = max(pruned, -neg)
                    continue
                split = lo[k] + 0.5 * (hi[k] - lo[k])
            for side in (0, 1):
                clo, chi = lo.copy(), hi.copy()
                if side == 0:
                    chi[k] = split
                else:
                    clo[k] = split
                try:
                    child = self.relax(objective, clo, chi)
                except LPFailure as exc:
                    # keep the box under its parent's bound; it is split again later
                    log.debug("%s; keeping the parent bound", exc)
                    child = (-neg, x)
                nodes += 1
                if child is None:
                    continue
                bound, cx = child
                if best_q is not None and bound - best_val <= gap_tol:
                    pruned = max(pruned, bound)
                    continue
                q = self.clean(self.point(cx))
                if self.is_feasible(q):
                    offer(q)
                elif nodes % polish_every == 0:
                    offer(self.polish(objective, q))
                counter += 1
                heapq.heappush(heap, (-bound, counter, clo, chi, cx))
        upper = max(best_val, pruned, -heap[0][0] if heap else -np.inf)
        if best_q is None and status != "limit":
            status = "infeasible"
        return SearchResult(
            status,
            None if best_q is None else float(best_val),
            best_q,
            float(upper),
            nodes,
            time.perf_counter() - t0,
        )


# ---------------------------------------------------------------------------
# Reduced-space relaxation
# ---------------------------------------------------------------------------


class ReducedProgram(_Program):
    def __init__(self, a_eq, b_eq, a_ub, b_ub, bilinear, feas_tol=1e-9, bil_tol=1e-8, rel_tol=1e-6, rlt=True):
        super().__init__(a_eq, b_eq, a_ub, b_ub, bilinear, feas_tol, bil_tol, rel_tol)
        n = self.n
        start = checked(solve_lp(np.zeros(n), a_ub, b_ub, a_eq, b_eq, [(0, None)] * n))
        if start is None:
            self.linear_feasible = False
            return
        self.q0 = start.x
        self.N = null_space(a_eq) if len(b_eq) else np.eye(n)
        d = self.d = self.N.shape[1]
        self.pairs = [(k, l) for k in range(d) for l in range(k, d)]
        self._pair_index = {p: i for i, p in enumerate(self.pairs)}
        self.nvar = d + len(self.pairs)
        self._pk = np.array([k for k, _ in self.pairs], dtype=int)
        self._pl = np.array([l for _, l in self.pairs], dtype=int)

        rows, rhs = [np.hstack([-self.N, np.zeros((n, len(self.pairs)))])], [self.q0]
        if len(b_ub):
            rows.append(np.hstack([a_ub @ self.N, np.zeros((len(b_ub), len(self.pairs)))]))
            rhs.append(b_ub - a_ub @ self.q0)
        self._n_linear_rows = sum(len(r) for r in rhs)
        for a, b, u, v in bilinear:
            cl, vl = self.lift(a, b)
            cr, vr = self.lift(u, v)
            rows.append((vl - vr)[None, :])
            rhs.append(np.array([cr - cl]))
        if rlt:
            for i in range(n):
                for j in range(i, n):
                    c, v = self._lift_raw(self.q0[i], self.N[i], self.q0[j], self.N[j])
                    rows.append(-v[None, :])
                    rhs.append(np.array([c]))
        self._static = np.vstack(rows)
        self._static_rhs = np.concatenate(rhs)
        self._box = self._tighten()

    def _lift_raw(self, f0, fN, g0, gN):
        """Product of two affine functions of y as ``(constant, coefficients over (y, Y))``."""
        d = self.d
        v = np.zeros(self.nvar)
        v[:d] = f0 * gN + g0 * fN
        outer = np.outer(fN, gN)
        sym = outer + outer.T
        v[d:] = np.where(self._pk == self._pl, outer[self._pk, self._pl], sym[self._pk, self._pl])
        return f0 * g0, v

    def lift(self, f, g):
        f, g = np.asarray(f, float), np.asarray(g, float)
        return self._lift_raw(f @ self.q0, f @ self.N, g @ self.q0, g @ self.N)

    def _envelopes(self, lo, hi):
        k, l = self._pk, self._pl
        lk, uk, ll, ul = lo[k], hi[k], lo[l], hi[l]
        m, d = len(self.pairs), self.d
        idx = np.arange(m)
        rows = np.zeros((4 * m, self.nvar))
        rhs = np.empty(4 * m)
        for blk, (a, b, sign, r) in enumerate(
            ((lk, ll, 1.0, lk * ll), (uk, ul, 1.0, uk * ul), (uk, ll, -1.0, -uk * ll), (lk, ul, -1.0, -lk * ul))
        ):
            # sign=+1: a*y_l + b*y_k - Y <= a*b ; sign=-1: Y - a*y_l - b*y_k <= -a*b
            R = rows[blk * m:(blk + 1) * m]
            np.add.at(R, (idx, l), sign * a)
            np.add.at(R, (idx, k), sign * b)
            R[idx, d + idx] = -sign
            rhs[blk * m:(blk + 1) * m] = r
        return rows, rhs

    def _solve(self, cost, lo, hi, static_only=False):
        env, env_rhs = self._envelopes(lo, hi)
        a_ub = np.vstack([self._static, env])
        b_ub = np.concatenate([self._static_rhs, env_rhs])
        bounds = [(lo[k], hi[k]) for k in range(self.d)] + [(None, None)] * len(self.pairs)
        return checked(solve_lp(cost, a_ub, b_ub, None, None, bounds))

    def _tighten(self):
        """Root y-box: bounds from the sign constraints, then two OBBT sweeps."""
        d = self.d
        lo, hi = np.full(d, -np.inf), np.full(d, np.inf)
        nl = self._n_linear_rows
        for k in range(d):
            c = np.zeros(d)
            c[k] = 1.0
            a = self._static[:nl, :d]
            r1 = checked(solve_lp(c, a, self._static_rhs[:nl], None, None, [(None, None)] * d))
            r2 = checked(solve_lp(-c, a, self._static_rhs[:nl], None, None, [(None, None)] * d))
            if r1 is None or r2 is None:
                self.linear_feasible = False
                return lo, hi
            lo[k], hi[k] = r1.fun, -r2.fun
        for _ in range(2):
            for k in range(d):
                for sign in (1.0, -1.0):
                    c = np.zeros(self.nvar)
                    c[k] = sign
                    res = self._solve(c, lo, hi)
                    if res is None:
                        self.linear_feasible = False
                        return lo, hi
                    if sign > 0:
                        lo[k] = max(lo[k], res.fun)
                    else:
                        hi[k] = min(hi[k], -res.fun)
            hi = np.maximum(lo, hi)
        return lo, hi

    def root_box(self):
        return self._box[0].copy(), self._box[1].copy()

    def _cost(self, objective: QuadForm):
        const = float(objective.linear @ self.q0)
        cost = np.zeros(self.nvar)
        cost[: self.d] = objective.linear @ self.N
        for w, f, g in objective.terms:
            c, v = self.lift(f, g)
            const += w * c
            cost += w * v
        return const, cost

    def relax(self, objective, lo, hi):
        const, cost = self._cost(objective)
        res = self._solve(-cost, lo, hi)
        if res is None:
            return None
        return const - float(res.fun), res.x

    def point(self, x):
        return self.q0 + self.N @ x[: self.d]

    def branch(self, x, lo, hi):
        d = self.d
        if d == 0:
            return None, None
        y, Y = x[:d], x[d:]
        viol = np.abs(Y - y[self._pk] * y[self._pl])
        width = hi - lo
        score = np.zeros(d)
        np.add.at(score, self._pk, viol)
        np.add.at(score, self._pl, viol)
        score *= width
        k = int(np.argmax(score))
        if score[k] <= 1e-14:
            return None, None
        return k, lo[k] + 0.5 * width[k]

    def maximise(self, objective: QuadForm, **kw) -> SearchResult:
        if self.linear_feasible and self.d == 0:
            q = self.clean(self.q0)
            if self.is_feasible(q):
                v = objective.value(q)
                return SearchResult("optimal", v, q, v, 1, 0.0)
            return SearchResult("infeasible", None, None, -np.inf, 1, 0.0)
        return super().maximise(objective, **kw)


# ---------------------------------------------------------------------------
# Form-space relaxation
# ---------------------------------------------------------------------------


class FormProgram(_Program):
    def __init__(self, a_eq, b_eq, a_ub, b_ub, bilinear, feas_tol=1e-9, bil_tol=1e-8, rel_tol=1e-6):
        super().__init__(a_eq, b_eq, a_ub, b_ub, bilinear, feas_tol, bil_tol, rel_tol)
        self._form_key: dict[bytes, int] = {}
        self.forms = np.zeros((0, self.n))
        self.lo = np.zeros(0)
        self.hi = np.zeros(0)
        self._prod_key: dict[tuple[int, int], int] = {}
        self.prods: list[tuple[int, int]] = []
        self.rows: list[tuple[int, int]] = []  # z[left] <= z[right]
        for a, b, u, v in bilinear:
            left, right = self.product_index(a, b), self.product_index(u, v)
            if left != right:
                self.rows.append((left, right))
        self._tighten()

    def form_index(self, f) -> int:
        f = np.ascontiguousarray(f, dtype=float)
        key = f.tobytes()
        idx = self._form_key.get(key)
        if idx is None:
            idx = len(self.forms)
            self._form_key[key] = idx
            lo, hi = self._linear_range(f)
            self.forms = np.vstack([self.forms, f[None, :]])
            self.lo = np.append(self.lo, lo)
            self.hi = np.append(self.hi, hi)
        return idx

    def product_index(self, f, g) -> int:
        i, j = sorted((self.form_index(f), self.form_index(g)))
        idx = self._prod_key.get((i, j))
        if idx is None:
            idx = len(self.prods)
            self._prod_key[(i, j)] = idx
            self.prods.append((i, j))
        return idx

    def _linear_range(self, f) -> tuple[float, float]:
        bounds = [(0, None)] * self.n
        lo = checked(solve_lp(f, self.a_ub, self.b_ub, self.a_eq, self.b_eq, bounds))
        if lo is None:
            self.linear_feasible = False
            return 0.0, 0.0
        hi = checked(solve_lp(-f, self.a_ub, self.b_ub, self.a_eq, self.b_eq, bounds))
        return float(lo.fun), float(-hi.fun)

    def _tighten(self) -> None:
        if not self.rows or not self.linear_feasible:
            return
        m = len(self.prods)
        for _ in range(2):
            for k in range(len(self.forms)):
                for sign in (1.0, -1.0):
                    res = self._solve(np.concatenate([sign * self.forms[k], np.zeros(m)]), self.lo, self.hi)
                    if res is None:
                        self.linear_feasible = False
                        return
                    if sign > 0:
                        self.lo[k] = max(self.lo[k], res.fun)
                    else:
                        self.hi[k] = min(self.hi[k], -res.fun)
        self.hi = np.maximum(self.lo, self.hi)

    def _solve(self, cost, lo, hi):
        n, m = self.n, len(self.prods)
        blocks, rhs = [], []
        if len(self.b_ub):
            blocks.append(np.hstack([self.a_ub, np.zeros((len(self.b_ub), m))]))
            rhs.append(self.b_ub)
        nf = len(self.forms)
        if nf:
            f = np.hstack([self.forms, np.zeros((nf, m))])
            blocks += [f, -f]
            rhs += [hi, -lo]
        if self.rows:
            r = np.zeros((len(self.rows), n + m))
            for k, (left, right) in enumerate(self.rows):
                r[k, n + left] += 1.0
                r[k, n + right] -= 1.0
            blocks.append(r)
            rhs.append(np.zeros(len(self.rows)))
        zb = []
        if m:
            ii = np.array([p[0] for p in self.prods])
            jj = np.array([p[1] for p in self.prods])
            fi, fj = self.forms[ii], self.forms[jj]
            li, ui, lj, uj = lo[ii], hi[ii], lo[jj], hi[jj]
            eye = np.eye(m)
            blocks += [
                np.hstack([li[:, None] * fj + lj[:, None] * fi, -eye]),
                np.hstack([ui[:, None] * fj + uj[:, None] * fi, -eye]),
                np.hstack([-(ui[:, None] * fj + lj[:, None] * fi), eye]),
                np.hstack([-(li[:, None] * fj + uj[:, None] * fi), eye]),
            ]
            rhs += [li * lj, ui * uj, -ui * lj, -li * uj]
            corners = np.stack([li * lj, li * uj, ui * lj, ui * uj])
            zb = list(zip(corners.min(axis=0), corners.max(axis=0)))
        a_eq = np.hstack([self.a_eq, np.zeros((len(self.b_eq), m))])
        res = solve_lp(cost, np.vstack(blocks) if blocks else None, np.concatenate(rhs) if rhs else None,
                       a_eq, self.b_eq, [(0, None)] * n + zb)
        return checked(res)

    def prepare(self, objective: QuadForm) -> None:
        for w, f, g in objective.terms:
            self.product_index(f, g)

    def root_box(self):
        return self.lo.copy(), self.hi.copy()

    def relax(self, objective, lo, hi):
        n = self.n
        cost = np.concatenate([-objective.linear, np.zeros(len(self.prods))])
        for w, f, g in objective.terms:
            cost[n + self.product_index(f, g)] -= w
        res = self._solve(cost, lo, hi)
        if res is None:
            return None
        return -float(res.fun), res.x

    def point(self, x):
        return x[: self.n]

    def branch(self, x, lo, hi):
        n = self.n
        if not self.prods:
            return None, None
        xf = self.forms @ x[:n]
        ii = np.array([p[0] for p in self.prods])
        jj = np.array([p[1] for p in self.prods])
        viol = np.abs(x[n:] - xf[ii] * xf[jj])
        width = hi - lo
        score = np.zeros(len(self.forms))
        np.add.at(score, ii, viol * (width[ii] > 1e-10))
        np.add.at(score, jj, viol * (width[jj] > 1e-10))
        k = int(np.argmax(score))
        if score[k] <= 1e-12:
            return None, None
        return k, lo[k] + 0.5 * width[k]


def make_program(a_eq, b_eq, a_ub, b_ub, bilinear, method: str = "reduced", **tol):
    if method == "reduced":
        return ReducedProgram(a_eq, b_eq, a_ub, b_ub, bilinear, **tol)
    if method == "forms":
        return FormProgram(a_eq, b_eq, a_ub, b_ub, bilinear, **tol)
    raise ValueError(f"unknown relaxation {method!r}")
