"""Rescaled formulation for ratio objectives ``num.q / den.q``.

Cells where ``den`` is positive (the support S) are rescaled to
``r = q_S / s`` with ``s = den.q``, so that ``den_S . r = 1``; the other cells
keep their values.  The variable vector is ``x = (r, q_C, s, 1)``.

A product of two linear forms that each live inside S or inside its
complement picks up one factor of ``s`` per S-form, so a product row whose
sides carry the same number of S-forms is again a product row in ``x`` after
dividing by the common power of ``s``.  Linear rows touching both S and its
complement become ``s * (a_S . r) + a_C . q_C <= b``, a product row with the
constant coordinate.  The ratio itself is the linear form ``num_S . r``.

Points with ``s = 0`` are limits of feasible points with a vanishing
denominator; they give the closure of the ratio's range.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bnb import make_program


@dataclass
class Perspective:
    program: object
    support: np.ndarray  # bool mask of S
    n: int

    @property
    def n_s(self) -> int:
        return int(self.support.sum())

    def lift(self, row) -> np.ndarray:
        """Ratio objective ``row.q / den.q`` as a linear form in x (row must vanish off S)."""
        x = np.zeros(self.n + 2)
        x[: self.n_s] = np.asarray(row, float)[self.support]
        return x

    def scale(self, x) -> float:
        return float(x[self.n])

    def to_q(self, x) -> np.ndarray:
        q = np.zeros(self.n)
        ns = self.n_s
        q[self.support] = self.scale(x) * x[:ns]
        q[~self.support] = x[ns:self.n]
        return q


def _split(row, support):
    return row[support], row[~support]


def _kind(row, support) -> str:
    inside = np.any(row[support] != 0)
    outside = np.any(row[~support] != 0)
    if inside and outside:
        return "mixed"
    if inside:
        return "S"
    if outside:
        return "C"
    return "zero"


def perspective_program(a_eq, b_eq, a_ub, b_ub, bilinear, den, method="reduced", **tol):
    """Build the rescaled program, or return None when some product row does not fit."""
    den = np.asarray(den, float)
    n = len(den)
    support = den > 0
    if not support.any() or np.any(den < 0):
        return None
    ns = int(support.sum())
    m = n + 2
    i_s, i_one = n, n + 1

    def place(f_s=None, f_c=None, s=0.0, one=0.0):
        x = np.zeros(m)
        if f_s is not None:
            x[:ns] = f_s
        if f_c is not None:
            x[ns:n] = f_c
        x[i_s] = s
        x[i_one] = one
        return x

    den_s = den[support]
    eq_rows, eq_rhs, ub_rows, ub_rhs, prods = [], [], [], [], []
    e_s, e_one = place(s=1.0), place(one=1.0)

    def linear_row(a, b, sink_rows, sink_rhs, equality):
        a_s, a_c = _split(a, support)
        if not np.any(a_s):
            sink_rows.append(place(f_c=a_c))
            sink_rhs.append(b)
            return
        # a_s proportional to den_s: a_s . r is the constant k
        k = a_s @ den_s / (den_s @ den_s)
        if np.allclose(a_s, k * den_s, rtol=0, atol=1e-12):
            sink_rows.append(place(f_c=a_c, s=k))
            sink_rhs.append(b)
            return
        if b == 0 and not np.any(a_c):
            sink_rows.append(place(f_s=a_s))
            sink_rhs.append(0.0)
            return
        # s * (a_s . r) <= 1 * (b - a_c . q_c)
        left = (e_s, place(f_s=a_s))
        right = (e_one, place(f_c=-a_c, one=b))
        prods.append((*left, *right))
        if equality:
            prods.append((*right, *left))

    for a, b in zip(a_eq, b_eq):
        linear_row(a, float(b), eq_rows, eq_rhs, True)
    for a, b in zip(a_ub, b_ub):
        linear_row(a, float(b), ub_rows, ub_rhs, False)

    def form(f):
        f_s, f_c = _split(f, support)
        return place(f_s=f_s) if np.any(f_s) else place(f_c=f_c)

    for row in bilinear:
        a, b, u, v = row
        kinds = [_kind(f, support) for f in (a, b, u, v)]
        if "mixed" in kinds:
            return None
        left_zero = "zero" in kinds[:2]
        right_zero = "zero" in kinds[2:]
        if left_zero and right_zero:
            continue
        k_left = kinds[:2].count("S")
        k_right = kinds[2:].count("S")
        if not (left_zero or right_zero) and k_left != k_right:
            return None
        prods.append(tuple(form(f) for f in (a, b, u, v)))

    eq_rows.append(place(f_s=den_s))
    eq_rhs.append(1.0)
    eq_rows.append(e_one)
    eq_rhs.append(1.0)
    a_eq2 = np.array(eq_rows)
    a_ub2 = np.array(ub_rows) if ub_rows else np.zeros((0, m))
    bil = np.array(prods) if prods else np.zeros((0, 4, m))
    program = make_program(a_eq2, np.array(eq_rhs), a_ub2, np.array(ub_rhs), bil, method, **tol)
    return Perspective(program, support, n)
