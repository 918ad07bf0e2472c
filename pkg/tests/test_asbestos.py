import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prevision import asbestos
from prevision.asbestos import (
    COLUMN_ORDER,
    Entry,
    at_least_two,
    build_realm,
    exactly_two,
    format_entry,
    scenario,
    solve_scenario,
    tm_independence_solution,
)
from prevision.bounds import Status
from prevision.events import indicator_row


def test_realm_follows_printed_column_order():
    realm = build_realm()
    cfg = realm.configurations()
    assert ["".join(map(str, c)) for c in cfg.tolist()] == list(COLUMN_ORDER)
    assert realm.n_cells == 16
    assert realm.row("D*").tolist() == [int(sum(int(b) for b in s[1:]) >= 2) for s in COLUMN_ORDER]
    assert realm.row("S*").tolist() == [int(sum(int(b) for b in s[1:]) == 2) for s in COLUMN_ORDER]


def test_median_polynomials():
    for x in np.linspace(0, 1, 11):
        assert at_least_two(x) == pytest.approx(exactly_two(x) + x**3)


@pytest.mark.parametrize("p", [0.82, 0.90])
def test_independence_solution_meets_both_assertions(p):
    sol = tm_independence_solution(p)
    realm = build_realm()
    q = sol.q
    assert q.min() >= 0 and q.sum() == pytest.approx(1.0, abs=1e-12)
    d_star = indicator_row(asbestos.D_STAR, realm).astype(float)
    split = indicator_row(asbestos.S_STAR, realm).astype(float)
    assert d_star @ q == pytest.approx(0.12, abs=1e-12)
    assert split @ q == pytest.approx(0.0504, abs=1e-12)
    system = scenario(f"TM{round(p * 100)}").system()
    assert system.violation(q) <= 1e-12
    assert sol.profile.value("p") == pytest.approx(p)
    assert 0 < sol.p_f < p


@settings(max_examples=30, deadline=None)
@given(st.floats(0.55, 0.99))
def test_independence_solution_is_consistent(p):
    try:
        sol = tm_independence_solution(p)
    except ValueError:
        return
    assert sol.pi * at_least_two(p) + (1 - sol.pi) * at_least_two(sol.p_f) == pytest.approx(0.12, abs=1e-9)
    assert sol.pi * exactly_two(p) + (1 - sol.pi) * exactly_two(sol.p_f) == pytest.approx(0.0504, abs=1e-9)
    assert sol.profile.value("prevalence") == pytest.approx(sol.pi, abs=1e-12)
    assert sol.profile.value("one_minus_pf") == pytest.approx(1 - sol.p_f, abs=1e-12)


def test_independence_rejects_bad_p():
    with pytest.raises(ValueError):
        tm_independence_solution(1.2)


def test_unknown_column():
    with pytest.raises(ValueError, match="unknown column"):
        scenario("TM75")


def test_product_rows_only_where_expected():
    assert not scenario("TM82").system().has_bilinear
    for column in ("CondExFIC82", "CondExBnd", "CondExBPlus"):
        assert scenario(column).system().has_bilinear


def test_fast_cells_of_the_tightest_column():
    prof = solve_scenario(scenario("CondExBPlus"), ["p", "prevalence"])
    assert prof["p"].lower == pytest.approx(0.82, abs=1e-3)
    assert prof["p"].upper == pytest.approx(0.846, abs=0.01)
    assert prof["prevalence"].lower == pytest.approx(0.105, abs=0.01)
    assert prof["prevalence"].upper == pytest.approx(0.111, abs=0.01)


def test_fixed_inputs_are_starred_points():
    prof = solve_scenario(scenario("CondExFIC82"), ["p"])
    assert prof["p"].is_point and prof["p"].starred
    assert format_entry(prof["p"]) == ".820*"


def test_formatting():
    assert format_entry(Entry(-1e-12, 0.5)) == "(.000, .500)"
    assert format_entry(Entry(0.9999, 1.0)) == "(1.000, 1.000)"
    assert format_entry(Entry.point(0.734)) == ".734"


def test_compare_flags_mismatches():
    prof = asbestos.AccuracyProfile("CondExBnd", {
        "p": Entry(0.82, 0.90),
        "ppv": Entry(0.0, 0.85),
        "npv": Entry(float("nan"), float("nan"), status=str(Status.INFEASIBLE)),
    })
    bad = asbestos.compare({"CondExBnd": prof}, asbestos.REFERENCE_TABLE1)
    assert sorted(m.key for m in bad) == ["npv", "ppv"]


def test_renderers_are_deterministic():
    sol = tm_independence_solution(0.82)
    profiles = {"TM82": sol.profile}
    rows = asbestos.TABLE1_ROWS
    for render in (asbestos.render_text, asbestos.render_markdown, asbestos.render_csv):
        assert render(profiles, rows) == render(profiles, rows)
    assert asbestos.render_csv(profiles, rows).splitlines()[0].startswith("column,key,label,lower,upper")
    assert ".734" in asbestos.render_text(profiles, rows)


def test_markdown_escapes_bars_in_labels():
    profiles = {"TM82": tm_independence_solution(0.82).profile}
    lines = asbestos.render_markdown(profiles, asbestos.TABLE2_ROWS).splitlines()
    assert all(line.replace("\\|", "").count("|") == 3 for line in lines)
