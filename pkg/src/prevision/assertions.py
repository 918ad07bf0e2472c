"""Compile prevision assertions into constraints on the cell-probability vector q.

Every prevision of a quantity ``X`` over a realm is the linear functional
``row(X) . q``.  Conditional assertions are multiplied through by the
probability of the conditioning event, which keeps them linear; orderings of
conditional previsions with different conditioning events become products of
two linear forms.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Sequence, Union

import numpy as np

from .events import EventAlgebraError, Expr, Realm, as_fraction, const, indicator_row


class CompileError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Assertions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrevisionEq:
    expr: Expr
    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", as_fraction(self.value))


@dataclass(frozen=True)
class PrevisionInterval:
    expr: Expr
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", as_fraction(self.lo))
        object.__setattr__(self, "hi", as_fraction(self.hi))
        if self.lo > self.hi:
            raise CompileError(f"interval lower end {self.lo} exceeds upper end {self.hi}")


@dataclass(frozen=True)
class ConditionalPrevisionEq:
    target: Expr
    given: Expr
    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", as_fraction(self.value))
        _require_event(self.given)


@dataclass(frozen=True)
class ConditionalPrevisionInterval:
    target: Expr
    given: Expr
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", as_fraction(self.lo))
        object.__setattr__(self, "hi", as_fraction(self.hi))
        _require_event(self.given)
        if self.lo > self.hi:
            raise CompileError(f"interval lower end {self.lo} exceeds upper end {self.hi}")


@dataclass(frozen=True)
class Exchangeability:
    events: tuple[Expr, ...]
    given: Expr | None = None

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        if len(self.events) < 2:
            raise CompileError("exchangeability needs at least two events")
        for e in self.events:
            if e.op != "atom":
                raise CompileError(f"exchangeability is declared over atoms, got {e}")
        if len({e.name for e in self.events}) != len(self.events):
            raise CompileError("exchangeable events must be distinct atoms")
        if self.given is not None:
            _require_event(self.given)


Side = Union[tuple[Expr, Expr], Fraction]


@dataclass(frozen=True)
class ConditionalOrdering:
    """``P(lhs) <= P(rhs)``; each side is ``(target, given)`` or a constant."""

    lhs: Side
    rhs: Side

    def __post_init__(self):
        object.__setattr__(self, "lhs", _side(self.lhs))
        object.__setattr__(self, "rhs", _side(self.rhs))
        if isinstance(self.lhs, Fraction) and isinstance(self.rhs, Fraction):
            raise CompileError("an ordering needs at least one conditional prevision")


Assertion = Union[
    PrevisionEq,
    PrevisionInterval,
    ConditionalPrevisionEq,
    ConditionalPrevisionInterval,
    Exchangeability,
    ConditionalOrdering,
]


def _side(s):
    if isinstance(s, tuple):
        target, given = s
        _require_event(given)
        return (target, given)
    return as_fraction(s)


def _require_event(e: Expr) -> None:
    if not isinstance(e, Expr) or not e.event:
        raise CompileError(f"conditioning expression must be an event, got {e}")


# ---------------------------------------------------------------------------
# Constraint system
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearRow:
    coeffs: np.ndarray  # exact entries
    rhs: Fraction
    label: str = ""


@dataclass(frozen=True)
class BilinearRow:
    """``(a.q) * (b.q) <= (u.q) * (v.q)``."""

    a: np.ndarray
    b: np.ndarray
    u: np.ndarray
    v: np.ndarray
    label: str = ""


@dataclass
class ConstraintSystem:
    """Linear and bilinear constraints on q; ``q >= 0`` is implicit.

    ``linear_eq[0]`` is always the total-probability row ``sum(q) = 1``.
    """

    n_cells: int
    linear_eq: list[LinearRow] = field(default_factory=list)
    linear_ineq: list[LinearRow] = field(default_factory=list)
    bilinear_ineq: list[BilinearRow] = field(default_factory=list)

    @classmethod
    def simplex(cls, n_cells: int) -> "ConstraintSystem":
        ones = np.ones(n_cells, dtype=np.int64)
        return cls(n_cells, [LinearRow(ones, Fraction(1), "total probability")])

    def copy(self) -> "ConstraintSystem":
        return ConstraintSystem(
            self.n_cells, list(self.linear_eq), list(self.linear_ineq), list(self.bilinear_ineq)
        )

    def extended(self, other: "ConstraintSystem") -> "ConstraintSystem":
        """Union of constraints; ``other``'s total-probability row is not repeated."""
        if other.n_cells != self.n_cells:
            raise CompileError("systems live on different partitions")
        return ConstraintSystem(
            self.n_cells,
            self.linear_eq + other.linear_eq[1:],
            self.linear_ineq + other.linear_ineq,
            self.bilinear_ineq + other.bilinear_ineq,
        )

    @property
    def has_bilinear(self) -> bool:
        return bool(self.bilinear_ineq)

    def permuted(self, perm: Sequence[int]) -> "ConstraintSystem":
        """Relabel cells: new cell ``k`` is old cell ``perm[k]``."""
        p = list(perm)

        def lin(r):
            return LinearRow(r.coeffs[p], r.rhs, r.label)

        def bil(r):
            return BilinearRow(r.a[p], r.b[p], r.u[p], r.v[p], r.label)

        return ConstraintSystem(
            self.n_cells,
            [lin(r) for r in self.linear_eq],
            [lin(r) for r in self.linear_ineq],
            [bil(r) for r in self.bilinear_ineq],
        )

    def matrices(self):
        """Float arrays ``(A_eq, b_eq, A_ub, b_ub, bilinear)`` for the solvers.

        ``bilinear`` has shape (m, 4, n): the a, b, u, v rows of each product row.
        """
        n = self.n_cells
        a_eq = np.array([_f(r.coeffs) for r in self.linear_eq], dtype=float).reshape(-1, n)
        b_eq = np.array([float(r.rhs) for r in self.linear_eq], dtype=float)
        a_ub = np.array([_f(r.coeffs) for r in self.linear_ineq], dtype=float).reshape(-1, n)
        b_ub = np.array([float(r.rhs) for r in self.linear_ineq], dtype=float)
        bil = np.array(
            [[_f(r.a), _f(r.b), _f(r.u), _f(r.v)] for r in self.bilinear_ineq], dtype=float
        ).reshape(-1, 4, n)
        return a_eq, b_eq, a_ub, b_ub, bil

    def violation(self, q, relative_bilinear: bool = False) -> float:
        """Largest constraint violation at ``q`` (simplex constraints included).

        With ``relative_bilinear`` the product rows are measured relative to the
        magnitude of their terms, which makes the check invariant under scaling
        of the cells that a product row involves.
        """
        q = np.asarray(q, dtype=float)
        a_eq, b_eq, a_ub, b_ub, bil = self.matrices()
        worst = max(0.0, -float(q.min()))
        if len(b_eq):
            worst = max(worst, float(np.abs(a_eq @ q - b_eq).max()))
        if len(b_ub):
            worst = max(worst, float((a_ub @ q - b_ub).max()))
        for a, b, u, v in bil:
            lhs = (a @ q) * (b @ q)
            rhs = (u @ q) * (v @ q)
            gap = lhs - rhs
            if relative_bilinear:
                scale_ = max(abs(lhs), abs(rhs))
                gap = gap / scale_ if scale_ > 1e-300 else 0.0
            worst = max(worst, gap)
        return worst

    def is_satisfied_exactly(self, q: Sequence) -> bool:
        """Exact check for rational ``q`` (Fractions or ints)."""
        q = [Fraction(x) for x in q]
        if any(x < 0 for x in q):
            return False

        def dot(c):
            return sum((Fraction(ci) * qi for ci, qi in zip(c.tolist(), q)), Fraction(0))

        if any(dot(r.coeffs) != r.rhs for r in self.linear_eq):
            return False
        if any(dot(r.coeffs) > r.rhs for r in self.linear_ineq):
            return False
        return all(dot(r.a) * dot(r.b) <= dot(r.u) * dot(r.v) for r in self.bilinear_ineq)


def _f(row: np.ndarray) -> list[float]:
    return [float(x) for x in row.tolist()]


def _exact(row: np.ndarray) -> np.ndarray:
    return np.array([Fraction(x) for x in row.tolist()], dtype=object)


def _combine(*terms: tuple[object, np.ndarray]) -> np.ndarray:
    """Exact linear combination of rows, kept as int64 when integral."""
    out = None
    for c, row in terms:
        c = as_fraction(c)
        part = _exact(row) * c
        out = part if out is None else out + part
    if all(Fraction(x).denominator == 1 for x in out.tolist()):
        return np.array([int(x) for x in out.tolist()], dtype=np.int64)
    return out


# ---------------------------------------------------------------------------
# Compilation
# ---------------------------------------------------------------------------


def compile_assertions(assertions: Sequence[Assertion], realm: Realm) -> ConstraintSystem:
    system = ConstraintSystem.simplex(realm.n_cells)

    def row(expr: Expr) -> np.ndarray:
        try:
            return indicator_row(expr, realm)
        except EventAlgebraError as exc:
            raise CompileError(str(exc)) from exc

    for k, a in enumerate(assertions):
        tag = f"#{k + 1} {type(a).__name__}"
        if isinstance(a, PrevisionEq):
            system.linear_eq.append(LinearRow(row(a.expr), a.value, f"{tag} P({a.expr}) = {a.value}"))
        elif isinstance(a, PrevisionInterval):
            r = row(a.expr)
            system.linear_ineq.append(LinearRow(_combine((-1, r)), -a.lo, f"{tag} P({a.expr}) >= {a.lo}"))
            system.linear_ineq.append(LinearRow(r, a.hi, f"{tag} P({a.expr}) <= {a.hi}"))
        elif isinstance(a, ConditionalPrevisionEq):
            joint, cond = row(a.target * a.given), row(a.given)
            system.linear_eq.append(
                LinearRow(
                    _combine((1, joint), (-a.value, cond)),
                    Fraction(0),
                    f"{tag} P({a.target} | {a.given}) = {a.value}",
                )
            )
        elif isinstance(a, ConditionalPrevisionInterval):
            joint, cond = row(a.target * a.given), row(a.given)
            system.linear_ineq.append(
                LinearRow(
                    _combine((a.lo, cond), (-1, joint)),
                    Fraction(0),
                    f"{tag} P({a.target} | {a.given}) >= {a.lo}",
                )
            )
            system.linear_ineq.append(
                LinearRow(
                    _combine((1, joint), (-a.hi, cond)),
                    Fraction(0),
                    f"{tag} P({a.target} | {a.given}) <= {a.hi}",
                )
            )
        elif isinstance(a, Exchangeability):
            system.linear_eq.extend(_exchangeability_rows(a, realm, tag))
        elif isinstance(a, ConditionalOrdering):
            _compile_ordering(a, row, system, tag)
        else:
            raise CompileError(f"unknown assertion {a!r}")
    return system


def _exchangeability_rows(a: Exchangeability, realm: Realm, tag: str) -> list[LinearRow]:
    names = [e.name for e in a.events]
    missing = set(names) - set(realm.atoms)
    if missing:
        raise CompileError(f"exchangeable atoms {sorted(missing)} are not in the realm")
    if a.given is not None:
        if a.given.atoms() & set(names):
            raise CompileError("the conditioning event must not involve the exchangeable atoms")
        given = indicator_row(a.given, realm)
    else:
        given = np.ones(realm.n_cells, dtype=np.int64)
    env = realm.environment()
    bits = np.stack([env[n] for n in names], axis=1)
    n = len(names)
    cond = f" | {a.given}" if a.given is not None else ""
    rows = []
    for k in range(1, n):
        strings = []
        for ones in combinations(range(n), k):
            s = np.zeros(n, dtype=np.int64)
            s[list(ones)] = 1
            strings.append(s)
        # canonical order: read each string as a binary number, first atom MSB
        strings.sort(key=lambda s: int("".join(map(str, s)), 2))
        masks = [np.all(bits == s, axis=1).astype(np.int64) * given for s in strings]
        for s0, s1, m0, m1 in zip(strings, strings[1:], masks, masks[1:]):
            label = f"{tag} exch({','.join(names)}{cond}) {''.join(map(str, s1))}={''.join(map(str, s0))}"
            rows.append(LinearRow(m1 - m0, Fraction(0), label))
    return rows


def _compile_ordering(a: ConditionalOrdering, row, system: ConstraintSystem, tag: str) -> None:
    lhs, rhs = a.lhs, a.rhs
    label = f"{tag} {_side_str(lhs)} <= {_side_str(rhs)}"
    if isinstance(rhs, Fraction):
        target, given = lhs
        coeffs = _combine((1, row(target * given)), (-rhs, row(given)))
        system.linear_ineq.append(LinearRow(coeffs, Fraction(0), label))
        return
    if isinstance(lhs, Fraction):
        target, given = rhs
        coeffs = _combine((lhs, row(given)), (-1, row(target * given)))
        system.linear_ineq.append(LinearRow(coeffs, Fraction(0), label))
        return
    (ta, ga), (tc, gc) = lhs, rhs
    rb, rd = row(ga), row(gc)
    if np.array_equal(rb, rd):
        coeffs = _combine((1, row(ta * ga)), (-1, row(tc * ga)))
        system.linear_ineq.append(LinearRow(coeffs, Fraction(0), label))
        return
    system.bilinear_ineq.append(BilinearRow(row(ta * ga), rd, row(tc * gc), rb, label))


def _side_str(s) -> str:
    if isinstance(s, Fraction):
        return str(s)
    return f"P({s[0]} | {s[1]})"


# ---------------------------------------------------------------------------
# Exchangeable sums and product measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SumDistribution:
    """Distribution of the number of successes among N exchangeable events."""

    probs: tuple

    def __post_init__(self):
        probs = tuple(self.probs)
        object.__setattr__(self, "probs", probs)
        if len(probs) < 2:
            raise CompileError("need P(S_N = K) for K = 0..N with N >= 1")
        if any(p < 0 for p in probs):
            raise CompileError("sum probabilities must be non-negative")
        s = sum(probs)
        if abs(float(s) - 1.0) > 1e-9:
            raise CompileError(f"sum probabilities add to {s}, not 1")

    @property
    def N(self) -> int:
        return len(self.probs) - 1

    @classmethod
    def binomial(cls, n: int, theta) -> "SumDistribution":
        return cls(tuple(comb(n, k) * theta**k * (1 - theta) ** (n - k) for k in range(n + 1)))


def string_probability(dist: SumDistribution, k: int):
    """Probability of any single ordered string with ``k`` successes."""
    if not 0 <= k <= dist.N:
        raise CompileError(f"K={k} outside 0..{dist.N}")
    p = dist.probs[k]
    if isinstance(p, (Fraction, int)):
        return Fraction(p) / comb(dist.N, k)
    return p / comb(dist.N, k)


def sum_distribution(q, realm: Realm, events: Sequence[str]) -> SumDistribution:
    """Distribution of the count of occurring ``events`` under cell masses ``q``."""
    env = realm.environment()
    counts = sum(env[e] for e in events)
    q = np.asarray(q)
    return SumDistribution(tuple(q[counts == k].sum() for k in range(len(events) + 1)))


def iid_cell_masses(
    theta,
    events: Sequence[str],
    realm: Realm,
    given: str | None = None,
    given_prob=None,
    theta_else=None,
) -> np.ndarray:
    """Product-measure cell masses for iid ``events``.

    With ``given`` (an atom name), the events are iid with success probability
    ``theta`` when that atom occurs (probability ``given_prob``) and
    ``theta_else`` when it does not.  Exact when the inputs are Fractions.
    """
    for t in (theta, theta_else, given_prob):
        if t is not None and not 0 <= t <= 1:
            raise CompileError(f"probability {t} outside [0, 1]")
    free = set(realm.atoms) - set(events) - ({given} if given else set())
    if free:
        raise CompileError(f"atoms {sorted(free)} are neither iid events nor the conditioning atom")
    env = realm.environment()
    k = sum(env[e] for e in events)
    n = len(events)

    def product(th):
        return [th**int(ki) * (1 - th) ** (n - int(ki)) for ki in k]

    if given is None:
        masses = product(theta)
    else:
        if given_prob is None or theta_else is None:
            raise CompileError("conditional product measure needs given_prob and theta_else")
        g = env[given]
        on, off = product(theta), product(theta_else)
        masses = [given_prob * a if gi else (1 - given_prob) * b for gi, a, b in zip(g, on, off)]
    exact = all(isinstance(m, (Fraction, int)) for m in masses)
    return np.array(masses, dtype=object if exact else float)


def prevision(expr: Expr, realm: Realm, q) -> float:
    return float(np.dot(indicator_row(expr, realm).astype(float), np.asarray(q, dtype=float)))


ONE = const(1)
