"""Brute-force bounds by scanning a lattice on the probability simplex.

Independent of the LP and branch-and-bound code paths, so it is used to
cross-check them on small realms. Constraint rows are scaled to integers and
tested exactly at each lattice point q = k / steps. Equality rows are
therefore only met at lattice points that satisfy them exactly, so their
values should be multiples of 1/steps.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb, lcm

import numpy as np

from . import kernels
from .assertions import ConstraintSystem
from .bounds import Conditional, Linear

# the scan refuses anything bigger than this many lattice points
MAX_POINTS = 2 * 10**9


@dataclass(frozen=True)
class GridResult:
    lower: float
    upper: float
    argmin: np.ndarray
    argmax: np.ndarray
    count: int


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    return Fraction(float(x)).limit_denominator(10**6)


def _scale(rows, steps: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer rows A, b with A @ k (op) b equivalent to row @ (k/steps) (op) rhs."""
    A, B = [], []
    for coeffs, rhs in rows:
        fr = [_frac(c) for c in coeffs] + [_frac(rhs)]
        den = lcm(*(f.denominator for f in fr))
        A.append([int(f * den) for f in fr[:-1]])
        B.append(int(fr[-1] * den * steps))
    return np.array(A, dtype=np.int64).reshape(len(A), n), np.array(B, dtype=np.int64)


def _int_form(row) -> np.ndarray:
    fr = [_frac(c) for c in row]
    den = lcm(*(f.denominator for f in fr))
    return np.array([int(f * den) for f in fr], dtype=np.int64)


def lattice_size(n: int, steps: int, eliminated: bool) -> int:
    free = n - 2 if eliminated else n - 1
    return comb(steps + max(free, 0), max(free, 0))


def grid_bounds(system: ConstraintSystem, target, steps: int = 1000) -> GridResult | None:
    """Min and max of a Linear or Conditional target over feasible lattice points.

    Conditional targets only count points with a positive denominator.
    Returns None when no lattice point is feasible.
    """
    n = system.n_cells
    if isinstance(target, Linear):
        num, den = _int_form(target.row), np.ones(n, dtype=np.int64)
    elif isinstance(target, Conditional):
        num, den = _int_form(target.num), _int_form(target.den)
    else:
        raise TypeError("grid_bounds handles Linear and Conditional targets")

    a_eq, b_eq = _scale([(r.coeffs, r.rhs) for r in system.linear_eq], steps, n)
    a_ub, b_ub = _scale([(r.coeffs, r.rhs) for r in system.linear_ineq], steps, n)

    perm = np.arange(n)
    elim = -1
    for i, row in enumerate(a_eq):
        distinct = np.flatnonzero(row != row[0])
        if n >= 2 and len(distinct):
            # move a pair with different coefficients to the last two slots
            j = int(distinct[0])
            rest = [c for c in range(n) if c not in (0, j)]
            perm = np.array(rest + [0, j])
            elim = i
            break
    if lattice_size(n, steps, elim >= 0) > MAX_POINTS:
        raise ValueError(f"lattice too large for {n} cells at {steps} steps; add an equality row or coarsen")

    bil = np.zeros((len(system.bilinear_ineq), 4, n), dtype=np.int64)
    for r, b in enumerate(system.bilinear_ineq):
        for s, form in enumerate((b.a, b.b, b.u, b.v)):
            bil[r, s] = _int_form(form)
    # lhs and rhs forms are scaled independently, so rebalance the products
    for r, b in enumerate(system.bilinear_ineq):
        # _int_form(f) = f * s_f, so lhs carries s_a s_b and rhs s_u s_v
        sa, sb, su, sv = (_int_scale(f) for f in (b.a, b.b, b.u, b.v))
        left, right = sa * sb, su * sv
        m = lcm(left, right)
        bil[r, 0] *= m // left
        bil[r, 2] *= m // right
    bound = max([1, *np.abs(a_eq).ravel(), *np.abs(a_ub).ravel(), *np.abs(bil).ravel(), *np.abs(num), *np.abs(den)])
    if (bound * steps * n) ** 2 * 4 >= 2**63:
        raise ValueError("coefficients too large for exact 64-bit lattice arithmetic")

    c = lambda x: np.ascontiguousarray(x[..., perm], dtype=np.int64)  # noqa: E731
    count, ln, ld, hn, hd, klo, khi = kernels.grid_extrema(
        int(steps), c(a_eq), np.ascontiguousarray(b_eq), c(a_ub), np.ascontiguousarray(b_ub),
        c(bil), c(num), c(den), int(elim),
    )
    if count == 0:
        return None
    inv = np.argsort(perm)
    return GridResult(ln / ld, hn / hd, np.asarray(klo)[inv] / steps, np.asarray(khi)[inv] / steps, int(count))


def _int_scale(row) -> int:
    return lcm(*(_frac(c).denominator for c in row))
