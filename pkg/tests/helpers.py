"""Shared hypothesis strategies for small constraint systems."""
from fractions import Fraction

import numpy as np
from hypothesis import strategies as st

from prevision.assertions import BilinearRow, ConstraintSystem, LinearRow


def _row(data, n, values):
    return np.array(data.draw(st.lists(st.sampled_from(values), min_size=n, max_size=n)), dtype=object)


def _subset(data, n, nonempty=True):
    row = _row(data, n, [0, 1])
    if nonempty:
        row[data.draw(st.integers(0, n - 1))] = 1
    return row


@st.composite
def small_systems(draw, min_cells=2, max_cells=5, bilinear=0):
    """Random linear systems on at most five cells whose lattice oracle stays cheap.

    Systems with four or more cells carry one equality with distinct
    coefficients so the oracle can scan one coordinate fewer. Values are
    multiples of 1/20 so lattice points meet the equalities exactly.
    """
    data = draw(st.data())
    n = draw(st.integers(min_cells, max_cells))
    system = ConstraintSystem.simplex(n)
    n_eq = draw(st.integers(1 if n >= 4 else 0, 2))
    for _ in range(n_eq):
        row = _subset(data, n)
        if n >= 4 and len(set(row.tolist())) == 1:
            row[0] = 0
            row[1] = 1
        system.linear_eq.append(LinearRow(row, Fraction(draw(st.integers(0, 20)), 20)))
    for _ in range(draw(st.integers(0, 3))):
        row = _row(data, n, [-2, -1, 0, 1, 2])
        system.linear_ineq.append(LinearRow(row, Fraction(draw(st.integers(-5, 10)), 10)))
    for _ in range(bilinear):
        forms = [_subset(data, n) for _ in range(4)]
        system.bilinear_ineq.append(BilinearRow(*forms))
    return system


@st.composite
def ratio_rows(draw, n):
    """(num, den) 0/1 rows with num inside den."""
    data = draw(st.data())
    den = _subset(data, n)
    num = np.array([d * x for d, x in zip(den, _subset(data, n, nonempty=False))], dtype=object)
    return num, den
