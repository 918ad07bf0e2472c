import numpy as np
import pytest
from helpers import ratio_rows, small_systems
from hypothesis import HealthCheck, assume, given, settings, strategies as st

from prevision.assertions import (
    BilinearRow,
    ConstraintSystem,
    Exchangeability,
    LinearRow,
    PrevisionEq,
    compile_assertions,
    iid_cell_masses,
)
from prevision.bounds import (
    Conditional,
    Difference,
    Linear,
    Solver,
    SolverConfig,
    Status,
    SystemError_,
    bounds,
    check_coherence,
    conditional_bounds,
    global_bounds,
    lp_bounds,
)
from prevision.events import atom, conjunction, enumerate_realm, indicator_row, threshold
from prevision.oracle import grid_bounds

E1, E2 = atom("E1"), atom("E2")
E3 = (1 + 2 * E1 * E2 - E1 - E2).as_event()
REALM = enumerate_realm(["E1", "E2"], [E1, E2, E3], names=["E1", "E2", "E3"])
ROW3 = indicator_row(E3, REALM)


def system_of(*assertions):
    return compile_assertions(list(assertions), REALM)


def test_lp_bounds_two_previsions():
    res = lp_bounds(system_of(PrevisionEq(E1, 0.7), PrevisionEq(E2, 0.2)), Linear(ROW3))
    assert res.status == Status.OPTIMAL
    assert res.lower == pytest.approx(0.1, abs=1e-12) and res.upper == pytest.approx(0.5, abs=1e-12)
    assert ROW3.astype(float) @ res.witness_min == pytest.approx(0.1, abs=1e-12)
    assert ROW3.astype(float) @ res.witness_max == pytest.approx(0.5, abs=1e-12)


def test_lp_bounds_with_exchangeability():
    res = lp_bounds(system_of(Exchangeability((E1, E2)), PrevisionEq(E1, 0.7)), Linear(ROW3))
    assert (res.lower, res.upper) == pytest.approx((0.4, 1.0), abs=1e-12)


def test_forced_point_mass():
    res = lp_bounds(system_of(PrevisionEq(E1, 1), PrevisionEq(E2, 1)), Linear(ROW3))
    assert (res.lower, res.upper) == pytest.approx((1.0, 1.0), abs=1e-12)


def test_incoherent_assertions():
    s = system_of(PrevisionEq(E1, 0.7), PrevisionEq(E1, 0.2))
    assert lp_bounds(s, Linear(ROW3)).status == Status.INFEASIBLE
    assert check_coherence(s) == (False, None)


def test_lp_refuses_products():
    s = system_of(PrevisionEq(E1, 0.7))
    s.bilinear_ineq.append(BilinearRow(*np.eye(4, dtype=int)))
    with pytest.raises(SystemError_):
        lp_bounds(s, Linear(ROW3))


def test_conditional_on_itself_is_one():
    s = system_of(PrevisionEq(E1, 0.7), PrevisionEq(E2, 0.2))
    r1 = indicator_row(E1, REALM)
    res = conditional_bounds(s, Conditional(r1, r1))
    assert (res.lower, res.upper) == pytest.approx((1, 1), abs=1e-12)


def test_conditional_matches_lattice_scan():
    s = system_of(PrevisionEq(E1, 0.7), PrevisionEq(E2, 0.2))
    target = Conditional(indicator_row(conjunction(E1, E3), REALM), ROW3)
    res = conditional_bounds(s, target)
    grid = grid_bounds(s, target, steps=1000)
    # P(E1 E3) = q4 and P(E3) = q1 + q4 with q4 = .2 - q2 ranging over [0, .2]
    assert grid.lower == pytest.approx(0.0, abs=1e-12)
    assert grid.upper == pytest.approx(0.2 / 0.5, abs=1e-12)
    assert res.lower == pytest.approx(grid.lower, abs=2e-3)
    assert res.upper == pytest.approx(grid.upper, abs=2e-3)


def test_undefined_conditional():
    s = system_of(PrevisionEq(E1, 0))
    r1 = indicator_row(E1, REALM)
    res = conditional_bounds(s, Conditional(r1, r1))
    assert res.status == Status.UNBOUNDED_DENOMINATOR


def test_mass_outside_condition_rejected():
    s = system_of(PrevisionEq(E1, 0.5))
    with pytest.raises(SystemError_):
        conditional_bounds(s, Conditional(ROW3, indicator_row(E1, REALM)))


def product_system():
    s = ConstraintSystem.simplex(4)
    e = np.eye(4, dtype=int)
    s.linear_eq.append(LinearRow(e[0], 0.3))
    s.bilinear_ineq.append(BilinearRow(e[0], e[1], e[2], e[3]))
    return s


def test_product_row_against_lattice():
    # q1 = .3 and .3 q2 <= q3 q4: the largest q2 solves .3 x = ((.7 - x) / 2)^2
    s = product_system()
    row = np.array([0, 1, 0, 0])
    res = global_bounds(s, Linear(row))
    grid = grid_bounds(s, Linear(row), steps=1000)
    exact = ((1.4 + 1.2) - np.sqrt((1.4 + 1.2) ** 2 - 4 * 0.49)) / 2
    assert grid.upper == pytest.approx(exact, abs=2e-3)
    assert res.upper == pytest.approx(exact, abs=1e-4)
    assert res.lower == pytest.approx(0.0, abs=1e-9)
    assert res.status in (Status.OPTIMAL, Status.GAP_CLOSED)


def test_plain_product_row_max():
    s = ConstraintSystem.simplex(4)
    s.bilinear_ineq.append(BilinearRow(*np.eye(4, dtype=int)))
    res = global_bounds(s, Linear(np.array([1, 0, 0, 0])))
    grid = grid_bounds(s, Linear(np.array([1, 0, 0, 0])), steps=200)
    assert res.upper == pytest.approx(grid.upper, abs=2e-3)


def test_global_witnesses_are_feasible():
    s = product_system()
    res = global_bounds(s, Linear(np.array([0, 1, 0, 0])))
    for w in (res.witness_min, res.witness_max):
        assert s.violation(w) <= 1e-8


def test_difference_target_linear_system():
    s = system_of(PrevisionEq(E1, 0.7), PrevisionEq(E2, 0.2))
    r1, r2 = indicator_row(E1, REALM), indicator_row(E2, REALM)
    res = bounds(s, Difference(Linear(ROW3), Linear(r2)))
    assert (res.lower, res.upper) == pytest.approx((-0.1, 0.3), abs=1e-9)
    cond = Difference(Conditional(indicator_row(conjunction(E3, E1), REALM), r1), Linear(r2))
    res = bounds(s, cond)
    assert (res.lower, res.upper) == pytest.approx((-0.2, 0.2 / 0.7 - 0.2), abs=1e-9)


def test_coherence_of_product_system():
    ok, w = check_coherence(product_system())
    assert ok and product_system().violation(w) <= 1e-8
    s = product_system()
    s.linear_eq.append(LinearRow(np.array([0, 1, 0, 0]), 0.6))
    ok, w = check_coherence(s)
    assert not ok


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(gap_tol=0)


# -- properties ------------------------------------------------------------

SLOW = settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@SLOW
@given(small_systems(), st.data())
def test_lp_and_branch_and_bound_agree(system, data):
    n = system.n_cells
    row = np.array(data.draw(st.lists(st.integers(-3, 3), min_size=n, max_size=n)))
    lp = lp_bounds(system, Linear(row))
    bb = Solver(system, SolverConfig(gap_tol=1e-11)).linear(row, search=True)
    if lp.status == Status.INFEASIBLE:
        assert bb.status == Status.INFEASIBLE
        return
    assert bb.lower == pytest.approx(lp.lower, abs=1e-9)
    assert bb.upper == pytest.approx(lp.upper, abs=1e-9)


@SLOW
@given(small_systems(), st.data())
def test_conditional_bounds_against_lattice(system, data):
    num, den = data.draw(ratio_rows(system.n_cells))
    target = Conditional(num, den)
    res = conditional_bounds(system, target)
    grid = grid_bounds(system, target, steps=1000)
    if res.status == Status.INFEASIBLE:
        assert grid is None
        return
    assume(grid is not None and res.status == Status.OPTIMAL)
    assert res.lower <= grid.lower + 1e-9 and grid.upper <= res.upper + 1e-9
    assert res.lower == pytest.approx(grid.lower, abs=2e-3)
    assert res.upper == pytest.approx(grid.upper, abs=2e-3)


@SLOW
@given(small_systems(), st.data())
def test_added_constraints_never_widen(system, data):
    n = system.n_cells
    row = np.array(data.draw(st.lists(st.integers(-2, 2), min_size=n, max_size=n)))
    before = lp_bounds(system, Linear(row))
    assume(before.status == Status.OPTIMAL)
    extra = system.copy()
    cut = np.array(data.draw(st.lists(st.integers(-2, 2), min_size=n, max_size=n)))
    extra.linear_ineq.append(LinearRow(cut, float(cut @ before.witness_max) + data.draw(st.floats(0, 0.5))))
    after = lp_bounds(extra, Linear(row))
    assert after.status == Status.OPTIMAL
    assert after.lower >= before.lower - 1e-9 and after.upper <= before.upper + 1e-9


@SLOW
@given(small_systems(), st.data())
def test_relabelling_cells_keeps_bounds(system, data):
    n = system.n_cells
    perm = data.draw(st.permutations(range(n)))
    row = np.array(data.draw(st.lists(st.integers(-2, 2), min_size=n, max_size=n)))
    a = lp_bounds(system, Linear(row))
    b = lp_bounds(system.permuted(perm), Linear(row[list(perm)]))
    assert a.status == b.status
    if a.status == Status.OPTIMAL:
        assert (a.lower, a.upper) == pytest.approx((b.lower, b.upper), abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 4), st.integers(0, 20), st.data())
def test_iid_values_fall_inside_bounds(n, k, data):
    names = [f"E{i}" for i in range(n)]
    events = [atom(x) for x in names]
    realm = enumerate_realm(names, events)
    theta = k / 20
    s = compile_assertions([Exchangeability(tuple(events)), PrevisionEq(events[0], theta)], realm)
    q = iid_cell_masses(theta, names, realm).astype(float)
    m = data.draw(st.integers(1, n))
    target = indicator_row(threshold(events, m), realm)
    res = lp_bounds(s, Linear(target))
    value = target.astype(float) @ q
    assert res.lower - 1e-9 <= value <= res.upper + 1e-9
