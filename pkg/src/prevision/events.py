"""Atomic events, arithmetic event expressions and realm enumeration.

Events are numbers: an event takes the value 1 when it occurs and 0 when it
does not, so derived events and quantities are ordinary arithmetic over the
atoms.  ``E1 == E2`` for instance is ``1 + 2*E1*E2 - E1 - E2``.

Every expression is evaluated exactly (Python ints, or Fractions when a
non-integral constant appears) across all ``2**n`` atom configurations.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_ATOMS = 20


class EventAlgebraError(ValueError):
    """Malformed expression, undeclared atom or invalid realm request."""


def as_fraction(value) -> Fraction:
    """Convert ints, Fractions, decimal strings and floats to an exact Fraction.

    Floats go through ``repr`` so that ``0.7`` becomes ``7/10`` rather than
    the binary approximation.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"cannot interpret {value!r} as a rational number")


@dataclass(frozen=True)
class Expr:
    """Node of an event/quantity expression tree.

    ``op`` is one of ``atom``, ``const``, ``neg`` (1 - x), ``prod``, ``sum``,
    ``scale`` and ``ge`` (threshold indicator of a linear combination).
    ``event`` marks expressions that must take only the values 0 and 1; the
    flag is checked by enumeration when a realm is built.
    """

    op: str
    args: tuple["Expr", ...] = ()
    value: Fraction | None = None
    coeffs: tuple[Fraction, ...] = ()
    name: str | None = None
    event: bool = False

    # -- construction helpers -------------------------------------------
    def as_event(self) -> "Expr":
        return Expr(self.op, self.args, self.value, self.coeffs, self.name, True)

    def __add__(self, other) -> "Expr":
        return Expr("sum", (self, _lift(other)))

    __radd__ = __add__

    def __sub__(self, other) -> "Expr":
        return Expr("sum", (self, scale(-1, _lift(other))))

    def __rsub__(self, other) -> "Expr":
        return Expr("sum", (_lift(other), scale(-1, self)))

    def __mul__(self, other) -> "Expr":
        if isinstance(other, Expr):
            return Expr("prod", (self, other), event=self.event and other.event)
        return scale(other, self)

    __rmul__ = __mul__

    def __neg__(self) -> "Expr":
        return scale(-1, self)

    def __invert__(self) -> "Expr":
        return negate(self)

    # -- inspection -------------------------------------------------------
    def atoms(self) -> frozenset[str]:
        if self.op == "atom":
            return frozenset((self.name,))
        out: frozenset[str] = frozenset()
        for a in self.args:
            out |= a.atoms()
        return out

    def evaluate(self, env: Mapping[str, np.ndarray]) -> np.ndarray:
        """Vectorised exact evaluation; ``env`` maps atom names to 0/1 arrays."""
        op = self.op
        if op == "atom":
            try:
                return env[self.name]
            except KeyError:
                raise EventAlgebraError(f"undeclared atom {self.name!r}") from None
        if op == "const":
            size = len(next(iter(env.values()))) if env else 1
            return _full(size, self.value)
        if op == "neg":
            return 1 - self.args[0].evaluate(env)
        if op == "prod":
            out = self.args[0].evaluate(env)
            for a in self.args[1:]:
                out = out * a.evaluate(env)
            return out
        if op == "sum":
            out = self.args[0].evaluate(env)
            for a in self.args[1:]:
                out = out + a.evaluate(env)
            return out
        if op == "scale":
            return _mul_const(self.args[0].evaluate(env), self.value)
        if op == "ge":
            total = 0
            for c, a in zip(self.coeffs, self.args):
                total = total + _mul_const(a.evaluate(env), c)
            return (np.asarray(total) >= self.value).astype(np.int64)
        raise EventAlgebraError(f"unknown expression op {op!r}")

    def __str__(self) -> str:
        op = self.op
        if op == "atom":
            return self.name
        if op == "const":
            return str(self.value)
        if op == "neg":
            return f"not {self.args[0]}"
        if op == "prod":
            return "(" + " * ".join(map(str, self.args)) + ")"
        if op == "sum":
            return "(" + " + ".join(map(str, self.args)) + ")"
        if op == "scale":
            return f"{self.value}*{self.args[0]}"
        terms = " + ".join(f"{c}*{a}" for c, a in zip(self.coeffs, self.args))
        return f"[{terms} >= {self.value}]"


def _full(size: int, value: Fraction) -> np.ndarray:
    if value.denominator == 1:
        return np.full(size, int(value), dtype=np.int64)
    return np.array([value] * size, dtype=object)


def _mul_const(arr: np.ndarray, c: Fraction) -> np.ndarray:
    if c.denominator == 1:
        return arr * int(c)
    return np.asarray(arr, dtype=object) * c


def _lift(x) -> Expr:
    return x if isinstance(x, Expr) else const(x)


def atom(name: str) -> Expr:
    if not name or not isinstance(name, str):
        raise EventAlgebraError("atom names must be non-empty strings")
    return Expr("atom", name=name, event=True)


def const(value) -> Expr:
    v = as_fraction(value)
    return Expr("const", value=v, event=v in (0, 1))


def scale(c, expr: Expr) -> Expr:
    return Expr("scale", (expr,), value=as_fraction(c))


def negate(expr: Expr) -> Expr:
    if not expr.event:
        raise EventAlgebraError(f"negate() needs an event, got quantity {expr}")
    return Expr("neg", (expr,), event=True)


def conjunction(a: Expr, b: Expr, *more: Expr) -> Expr:
    terms = (a, b) + more
    for t in terms:
        if not t.event:
            raise EventAlgebraError(f"conjunction() needs events, got quantity {t}")
    return Expr("prod", terms, event=True)


def disjunction(a: Expr, b: Expr) -> Expr:
    return negate(conjunction(negate(a), negate(b)))


def threshold(terms: Iterable[tuple[object, Expr]] | Iterable[Expr], at_least) -> Expr:
    """Indicator that ``sum(c_i * x_i) >= at_least``.

    ``terms`` may be bare expressions (unit coefficients) or ``(c, x)`` pairs.
    """
    coeffs, args = [], []
    for t in terms:
        if isinstance(t, Expr):
            c, x = 1, t
        else:
            c, x = t
        coeffs.append(as_fraction(c))
        args.append(x)
    if not args:
        raise EventAlgebraError("threshold() needs at least one term")
    return Expr("ge", tuple(args), value=as_fraction(at_least), coeffs=tuple(coeffs), event=True)


def total(exprs: Sequence[Expr]) -> Expr:
    if len(exprs) == 1:
        return exprs[0]
    return Expr("sum", tuple(exprs))


# ---------------------------------------------------------------------------
# Realm
# ---------------------------------------------------------------------------


def configuration_bits(n_atoms: int) -> np.ndarray:
    """Canonical configuration table, shape (2**n, n); first atom is the MSB."""
    idx = np.arange(2**n_atoms, dtype=np.int64)
    shifts = np.arange(n_atoms - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] >> shifts[None, :]) & 1


@dataclass(frozen=True)
class Realm:
    """All possible values of a quantity vector, one column per configuration.

    ``order[j]`` is the canonical configuration index shown in presentation
    column ``j``; ``values[i, j]`` is quantity ``i`` on that column.
    """

    atoms: tuple[str, ...]
    quantities: tuple[Expr, ...]
    names: tuple[str, ...]
    order: tuple[int, ...]
    values: np.ndarray = field(repr=False, compare=False)

    @property
    def n_cells(self) -> int:
        return len(self.order)

    def configurations(self) -> np.ndarray:
        """Atom values per presentation column, shape (n_cells, n_atoms)."""
        return configuration_bits(len(self.atoms))[list(self.order)]

    def environment(self) -> dict[str, np.ndarray]:
        cfg = self.configurations()
        return {name: cfg[:, k] for k, name in enumerate(self.atoms)}

    def column(self, j: int) -> tuple:
        return tuple(self.values[:, j].tolist())

    def row(self, name: str) -> np.ndarray:
        return self.values[self.names.index(name)]

    def position_of(self, assignment: Mapping[str, int]) -> int:
        """Presentation column holding the given full atom assignment."""
        idx = 0
        for a in self.atoms:
            idx = (idx << 1) | int(assignment[a])
        return self.order.index(idx)

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["quantity"] + [f"c{j + 1}" for j in range(self.n_cells)])
        for name, row in zip(self.names, self.values):
            w.writerow([name] + [str(v) for v in row.tolist()])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def enumerate_realm(
    atoms: Sequence[str],
    quantities: Sequence[Expr],
    order: Sequence[int] | None = None,
    names: Sequence[str] | None = None,
    max_atoms: int = MAX_ATOMS,
) -> Realm:
    atoms = tuple(atoms)
    if len(set(atoms)) != len(atoms):
        raise EventAlgebraError("atom names must be unique")
    if not atoms:
        raise EventAlgebraError("at least one atom is required")
    if len(atoms) > max_atoms:
        raise EventAlgebraError(
            f"{len(atoms)} atoms exceeds the realm limit of {max_atoms} (2**n columns)"
        )
    size = 2 ** len(atoms)
    if order is None:
        order = tuple(range(size))
    else:
        order = tuple(int(i) for i in order)
        if len(order) != size or sorted(order) != list(range(size)):
            raise EventAlgebraError(
                f"column order must be a permutation of 0..{size - 1}"
            )
    names = tuple(names) if names is not None else tuple(str(q) for q in quantities)
    if len(names) != len(quantities):
        raise EventAlgebraError("one name per quantity is required")

    declared = set(atoms)
    for q in quantities:
        missing = q.atoms() - declared
        if missing:
            raise EventAlgebraError(f"undeclared atom(s) {sorted(missing)} in {q}")

    cfg = configuration_bits(len(atoms))[list(order)]
    env = {name: cfg[:, k] for k, name in enumerate(atoms)}
    rows = []
    for name, q in zip(names, quantities):
        row = _normalise(q.evaluate(env), size)
        if q.event and not _is_binary(row):
            raise EventAlgebraError(f"event {name!r} takes values outside {{0, 1}}")
        rows.append(row)
    exact = any(r.dtype == object for r in rows)
    values = np.array(rows, dtype=object if exact else np.int64).reshape(len(rows), size)
    return Realm(atoms, tuple(quantities), names, order, values)


def indicator_row(expr: Expr, realm: Realm) -> np.ndarray:
    """Coefficients ``a`` with ``prevision(expr) = a . q`` over the realm's columns."""
    missing = expr.atoms() - set(realm.atoms)
    if missing:
        raise EventAlgebraError(f"expression uses atoms {sorted(missing)} not in the realm")
    row = _normalise(expr.evaluate(realm.environment()), realm.n_cells)
    if expr.event and not _is_binary(row):
        raise EventAlgebraError(f"event {expr} takes values outside {{0, 1}}")
    return row


def _normalise(arr, size: int) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.ndim == 0:
        arr = np.full(size, arr.item(), dtype=arr.dtype)
    if arr.dtype == object:
        vals = [Fraction(v) for v in arr.tolist()]
        if all(v.denominator == 1 for v in vals):
            return np.array([int(v) for v in vals], dtype=np.int64)
        return np.array(vals, dtype=object)
    return arr.astype(np.int64)


def _is_binary(row: np.ndarray) -> bool:
    return all(v in (0, 1) for v in np.unique(row).tolist())
