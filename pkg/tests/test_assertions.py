from fractions import Fraction
from itertools import permutations, product
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prevision.asbestos import (
    COLUMN_ORDER,
    D1,
    D2,
    D3,
    F,
    base_assertions,
    build_realm,
    nD1,
    nD2,
    nF,
)
from prevision.assertions import (
    CompileError,
    ConditionalOrdering,
    ConditionalPrevisionEq,
    ConditionalPrevisionInterval,
    Exchangeability,
    PrevisionEq,
    PrevisionInterval,
    SumDistribution,
    compile_assertions,
    iid_cell_masses,
    string_probability,
    sum_distribution,
)
from prevision.events import atom, conjunction, enumerate_realm, indicator_row

E1, E2 = atom("E1"), atom("E2")
E3 = 1 + 2 * E1 * E2 - E1 - E2
REALM2 = enumerate_realm(["E1", "E2"], [E1, E2, E3], names=["E1", "E2", "E3"])


def as_int(rows):
    return sorted(tuple(int(x) for x in r.coeffs) + (r.rhs,) for r in rows)


def paper_col(bits: str) -> int:
    """1-based column number of an (F, D1, D2, D3) bit string."""
    return COLUMN_ORDER.index(bits) + 1


def support(row) -> list[int]:
    return [j + 1 for j in np.flatnonzero(np.asarray(row, dtype=float))]


def test_two_prevision_rows_plus_total():
    s = compile_assertions([PrevisionEq(E1, 0.7), PrevisionEq(E2, 0.2)], REALM2)
    assert as_int(s.linear_eq) == sorted([
        (1, 1, 1, 1, 1), (0, 0, 1, 1, Fraction(7, 10)), (0, 1, 0, 1, Fraction(1, 5))
    ])
    assert not s.linear_ineq and not s.bilinear_ineq


def test_exchangeable_pair_gives_middle_cells_equal():
    s = compile_assertions([Exchangeability((E1, E2)), PrevisionEq(E1, 0.7)], REALM2)
    rows = {tuple(int(x) for x in r.coeffs): r.rhs for r in s.linear_eq}
    assert rows[(1, 1, 1, 1)] == 1
    assert rows[(0, 0, 1, 1)] == Fraction(7, 10)
    assert rows[(0, -1, 1, 0)] == 0
    assert len(rows) == 3


def test_conditional_exchangeability_in_paper_order():
    realm = build_realm()
    s = compile_assertions([Exchangeability((D1, D2, D3), F)], realm)
    pairs = {tuple(support(r.coeffs)) for r in s.linear_eq[1:]}
    groups = [["1100", "1010", "1001"], ["1110", "1101", "1011"]]
    cols = [sorted(paper_col(b) for b in g) for g in groups]
    assert cols == [[6, 7, 8], [12, 13, 14]]
    assert pairs == {(6, 7), (7, 8), (12, 13), (13, 14)}
    s = compile_assertions([Exchangeability((D1, D2, D3), nF)], realm)
    pairs = {tuple(support(r.coeffs)) for r in s.linear_eq[1:]}
    assert pairs == {(3, 4), (4, 5), (9, 10), (10, 11)}


def test_base_system_has_eleven_linear_restrictions():
    s = compile_assertions(base_assertions(), build_realm())
    assert len(s.linear_eq) == 11
    assert not s.linear_ineq


def test_ordering_with_different_conditions_is_bilinear():
    realm = build_realm()
    a = ConditionalOrdering((D3, conjunction(nD2, nD1, nF)), (D3, conjunction(nD1, nF)))
    s = compile_assertions([a], realm)
    (row,) = s.bilinear_ineq
    assert support(row.a) == [5]
    assert support(row.b) == [1, 4, 5, 9]
    assert support(row.u) == [5, 9]
    assert support(row.v) == [1, 5]


def test_ordering_with_shared_condition_stays_linear():
    realm = build_realm()
    s = compile_assertions([ConditionalOrdering((D2, F), (D3, F))], realm)
    assert not s.bilinear_ineq and len(s.linear_ineq) == 1
    s = compile_assertions([ConditionalOrdering((D2, F), 0.5), ConditionalOrdering("1/2", (D3, nF))], realm)
    assert not s.bilinear_ineq and len(s.linear_ineq) == 2


def test_compile_errors():
    with pytest.raises(CompileError):
        PrevisionInterval(E1, 0.6, 0.5)
    with pytest.raises(CompileError):
        Exchangeability((E1,))
    with pytest.raises(CompileError):
        ConditionalPrevisionEq(E1, E1 + E2, 0.5)
    with pytest.raises(CompileError):
        compile_assertions([PrevisionEq(atom("Z"), 0.5)], REALM2)
    with pytest.raises(CompileError):
        ConditionalOrdering(0.2, 0.3)


def test_string_probability_examples():
    assert string_probability(SumDistribution((0.25, 0.5, 0.25)), 1) == 0.25
    binom = SumDistribution.binomial(3, Fraction(1, 2))
    assert string_probability(binom, 2) == Fraction(1, 8)
    dist = SumDistribution((Fraction(1, 10), Fraction(2, 10), Fraction(3, 10), Fraction(4, 10)))
    assert string_probability(dist, 2) == Fraction(1, 10)
    with pytest.raises(CompileError):
        string_probability(dist, 4)


def test_iid_cell_masses_examples():
    realm = enumerate_realm(["E1", "E2"], [E1, E2])
    q = iid_cell_masses(Fraction(1, 2), ["E1", "E2"], realm)
    assert q.tolist() == [Fraction(1, 4)] * 4
    names = ["A", "B", "C"]
    realm3 = enumerate_realm(names, [atom(n) for n in names])
    q = iid_cell_masses(1, names, realm3)
    assert q.tolist() == [0] * 7 + [1]
    realm = build_realm()
    q = iid_cell_masses(0.82, ["D1", "D2", "D3"], realm, given="F", given_prob=0.126, theta_else=0.042)
    d_star_f = indicator_row(conjunction(realm.quantities[4], F), realm).astype(float) @ q
    assert d_star_f / 0.126 == pytest.approx(0.914, abs=5e-4)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_iid_masses_satisfy_exchangeability(theta, pi, theta_else):
    realm = build_realm()
    q = iid_cell_masses(theta, ["D1", "D2", "D3"], realm, given="F", given_prob=pi, theta_else=theta_else)
    s = compile_assertions([Exchangeability((D1, D2, D3), F), Exchangeability((D1, D2, D3), nF)], realm)
    assert s.violation(q) <= 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.data())
def test_string_identity_on_symmetrised_q(n, data):
    names = [f"E{i}" for i in range(n)]
    realm = enumerate_realm(names, [atom(x) for x in names])
    raw = np.array(data.draw(st.lists(st.floats(0.01, 1), min_size=2**n, max_size=2**n)))
    raw /= raw.sum()
    cfg = realm.configurations()
    index = {tuple(c): j for j, c in enumerate(cfg.tolist())}
    q = np.zeros_like(raw)
    for j, c in enumerate(cfg.tolist()):
        orbit = {tuple(c[i] for i in p) for p in permutations(range(n))}
        q[j] = np.mean([raw[index[o]] for o in orbit])
    dist = sum_distribution(q, realm, names)
    for bits in product((0, 1), repeat=n):
        k = sum(bits)
        assert q[index[bits]] == pytest.approx(string_probability(dist, k), abs=1e-12)
        assert dist.probs[k] == pytest.approx(comb(n, k) * q[index[bits]], abs=1e-12)
    system = compile_assertions([Exchangeability(tuple(atom(x) for x in names))], realm)
    assert system.violation(q) <= 1e-12


def random_q(data, n):
    w = np.array(data.draw(st.lists(st.floats(0.001, 1), min_size=n, max_size=n)))
    return w / w.sum()


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_bilinear_row_agrees_with_ratio_comparison(data):
    realm = build_realm()
    q = random_q(data, realm.n_cells)
    events = [F, D1, D2, D3, nF, nD1, nD2]
    pick = lambda: data.draw(st.sampled_from(events))  # noqa: E731
    ta, ga, tc, gc = pick(), conjunction(pick(), pick()), pick(), pick()
    s = compile_assertions([ConditionalOrdering((ta, ga), (tc, gc))], realm)
    r = lambda e: indicator_row(e, realm).astype(float) @ q  # noqa: E731
    if r(ga) <= 0 or r(gc) <= 0:
        return
    lhs, rhs = r(conjunction(ta, ga)) / r(ga), r(conjunction(tc, gc)) / r(gc)
    if abs(lhs - rhs) < 1e-9:
        return
    if s.bilinear_ineq:
        (b,) = s.bilinear_ineq
        f = [np.asarray(x, dtype=float) @ q for x in (b.a, b.b, b.u, b.v)]
        holds = f[0] * f[1] <= f[2] * f[3]
    else:
        (row,) = s.linear_ineq
        holds = np.asarray(row.coeffs, dtype=float) @ q <= float(row.rhs)
    assert holds == (lhs <= rhs)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_compile_is_sound(data):
    realm = build_realm()
    q = random_q(data, realm.n_cells)
    r = lambda e: float(indicator_row(e, realm).astype(float) @ q)  # noqa: E731
    pfd = r(conjunction(D1, F)) / r(F)
    lo = data.draw(st.floats(0, 1))
    assertions = [
        PrevisionEq(D1, r(D1)),
        PrevisionInterval(D2, min(lo, r(D2)), max(lo, r(D2))),
        ConditionalPrevisionEq(D1, F, pfd),
        ConditionalPrevisionInterval(D3, nF, 0, r(conjunction(D3, nF)) / r(nF)),
    ]
    s = compile_assertions(assertions, realm)
    assert s.violation(q) <= 1e-9
