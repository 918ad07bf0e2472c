"""Scenario documents: JSON files describing atoms, quantities, assertions and targets.

Expressions are strings over atom and quantity names::

    not E1                     E1 and E2 or not E3
    1 + 2*E1*E2 - E1 - E2      D1 + D2 + D3 >= 2
    E1 == E2                   atleast(2, D1, D2, D3)

Prefix forms ``not(x)``, ``and(x, y, ...)``, ``or(x, y, ...)``,
``sum(x, y, ...)`` and ``atleast(k, x, ...)`` are accepted too.  Numbers may
be decimals or ratios (``63/1250``) and are read exactly.

See ``data/scenario.schema.json`` for the document layout.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .assertions import (
    ConditionalOrdering,
    ConditionalPrevisionEq,
    ConditionalPrevisionInterval,
    ConstraintSystem,
    Exchangeability,
    PrevisionEq,
    PrevisionInterval,
    compile_assertions,
)
from .events import (
    EventAlgebraError,
    Expr,
    Realm,
    as_fraction,
    atom,
    conjunction,
    const,
    disjunction,
    enumerate_realm,
    indicator_row,
    negate,
    scale,
    threshold,
    total,
)
from .targets import DifferenceOf, PrevisionOf, TargetSpec


class ScenarioError(ValueError):
    """Malformed document or expression."""


def schema() -> dict:
    return json.loads(resources.files("prevision").joinpath("data/scenario.schema.json").read_text())


# ---------------------------------------------------------------------------
# Expression parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:/\d+)?|\.\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_']*)|(?P<op>>=|<=|==|[-+*(),~]))"
)
_KEYWORDS = {"not", "and", "or", "sum", "atleast"}


def _tokenize(text: str) -> list[tuple[str, str]]:
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ScenarioError(f"unexpected character at {pos} in {text!r}")
        kind = m.lastgroup
        out.append((kind, m.group(kind)))
        pos = m.end()
    out.append(("end", ""))
    return out


class _Parser:
    def __init__(self, text: str, names: dict[str, Expr]):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.names = names

    def peek(self) -> tuple[str, str]:
        return self.toks[self.i]

    def take(self, value: str | None = None) -> tuple[str, str]:
        tok = self.toks[self.i]
        if value is not None and tok[1] != value:
            raise ScenarioError(f"expected {value!r} but found {tok[1] or 'end'!r} in {self.text!r}")
        self.i += 1
        return tok

    def parse(self) -> Expr:
        e = self.disj()
        if self.peek()[0] != "end":
            raise ScenarioError(f"trailing input {self.peek()[1]!r} in {self.text!r}")
        return e

    def disj(self) -> Expr:
        e = self.conj()
        while self.peek() == ("name", "or"):
            self.take()
            e = disjunction(_event(e), _event(self.conj()))
        return e

    def conj(self) -> Expr:
        e = self.neg()
        while self.peek() == ("name", "and"):
            self.take()
            e = conjunction(_event(e), _event(self.neg()))
        return e

    def neg(self) -> Expr:
        if self.peek() in (("name", "not"), ("op", "~")) and self.toks[self.i + 1][1] != "(":
            self.take()
            return negate(_event(self.neg()))
        return self.compare()

    def compare(self) -> Expr:
        left = self.sum()
        kind, op = self.peek()
        if op not in (">=", "<=", "=="):
            return left
        self.take()
        right = self.sum()
        diff = left - right
        if op == ">=":
            return threshold([(1, diff)], 0)
        if op == "<=":
            return threshold([(-1, diff)], 0)
        return conjunction(threshold([(1, diff)], 0), threshold([(-1, diff)], 0))

    def sum(self) -> Expr:
        e = self.product()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.product()
            e = e + rhs if op == "+" else e - rhs
        return e

    def product(self) -> Expr:
        e = self.unary()
        while self.peek()[1] == "*":
            self.take()
            e = _times(e, self.unary())
        return e

    def unary(self) -> Expr:
        kind, value = self.peek()
        if value == "-":
            self.take()
            e = self.unary()
            return const(-e.value) if e.op == "const" else -e
        if kind == "num":
            self.take()
            return const(as_fraction(value))
        if value == "(":
            self.take()
            e = self.disj()
            self.take(")")
            return e
        if kind == "name":
            self.take()
            if value in _KEYWORDS:
                return self.call(value)
            if value not in self.names:
                raise ScenarioError(f"unknown name {value!r} in {self.text!r}")
            return self.names[value]
        if value == "~":
            self.take()
            return self.call("not")
        raise ScenarioError(f"unexpected {value or 'end'!r} in {self.text!r}")

    def args(self) -> list[Expr]:
        self.take("(")
        out = [self.disj()]
        while self.peek()[1] == ",":
            self.take()
            out.append(self.disj())
        self.take(")")
        return out

    def call(self, fn: str) -> Expr:
        args = self.args()
        if fn == "not":
            if len(args) != 1:
                raise ScenarioError("not() takes one argument")
            return negate(_event(args[0]))
        if fn in ("and", "or"):
            if len(args) < 2:
                raise ScenarioError(f"{fn}() needs at least two arguments")
            if fn == "and":
                return conjunction(*(_event(a) for a in args))
            out = _event(args[0])
            for a in args[1:]:
                out = disjunction(out, _event(a))
            return out
        if fn == "sum":
            return total(args)
        # atleast(k, x, ...)
        k = args[0]
        if k.op != "const" or len(args) < 2:
            raise ScenarioError("atleast() needs a numeric threshold and at least one term")
        terms = [(a.value, a.args[0]) if a.op == "scale" else a for a in args[1:]]
        return threshold(terms, k.value)


def _times(a: Expr, b: Expr) -> Expr:
    # numeric factors become scale nodes so printed output parses back to the same tree
    if a.op == "const" and not b.op == "const":
        return b if a.value == 1 else scale(a.value, b)
    if b.op == "const" and not a.op == "const":
        return a if b.value == 1 else scale(b.value, a)
    return a * b


def _event(e: Expr) -> Expr:
    if e.event:
        return e
    raise ScenarioError(f"logical operators need events; {e} is not known to be 0/1 valued")


def parse_expression(text: str, names: dict[str, Expr]) -> Expr:
    if not isinstance(text, str) or not text.strip():
        raise ScenarioError("expression must be a non-empty string")
    try:
        return _Parser(text, names).parse()
    except EventAlgebraError as exc:
        raise ScenarioError(f"{exc} in {text!r}") from None


def to_source(e: Expr, names: dict[Expr, str] | None = None) -> str:
    """Expression string that parses back to an equivalent expression.

    Subexpressions found in ``names`` are written as that name.
    """
    names = names or {}
    if e in names:
        return names[e]

    def src(x: Expr) -> str:
        return to_source(x, names)

    def coef(c: Fraction, x: Expr) -> str:
        return src(x) if c == 1 else f"({c} * {src(x)})"

    op = e.op
    if op == "atom":
        return e.name
    if op == "const":
        return str(e.value)
    if op == "neg":
        return f"not {src(e.args[0])}" if e.args[0].op == "atom" or e.args[0] in names else f"not ({src(e.args[0])})"
    if op == "prod":
        joiner = " and " if e.event and all(a.event for a in e.args) else " * "
        return "(" + joiner.join(src(a) for a in e.args) + ")"
    if op == "sum":
        return "(" + " + ".join(src(a) for a in e.args) + ")"
    if op == "scale":
        return coef(e.value, e.args[0]) if e.value != 1 else f"(1 * {src(e.args[0])})"
    terms = ", ".join(coef(c, a) for c, a in zip(e.coeffs, e.args))
    return f"atleast({e.value}, {terms})"


# ---------------------------------------------------------------------------
# Documents
# ---------------------------------------------------------------------------


@dataclass
class Scenario:
    atoms: tuple[str, ...]
    quantities: dict[str, Expr]
    assertions: list
    targets: dict[str, TargetSpec]
    order: tuple[int, ...] | None = None
    title: str = ""
    meta: dict = field(default_factory=dict)

    def realm(self) -> Realm:
        names = list(self.quantities)
        return enumerate_realm(self.atoms, [self.quantities[n] for n in names], self.order, names)

    def system(self) -> ConstraintSystem:
        return compile_assertions(self.assertions, self.realm())


def _names(atoms) -> dict[str, Expr]:
    return {a: atom(a) for a in atoms}


def _mark_event(e: Expr, atoms) -> Expr:
    """Flag expressions that only take the values 0 and 1 as events."""
    if e.event:
        return e
    try:
        row = indicator_row(e, enumerate_realm(atoms, [const(0)]))
    except EventAlgebraError:
        return e
    vals = set(row.tolist())
    return e.as_event() if vals <= {0, 1} else e


def _number(v, where: str) -> Fraction:
    try:
        return as_fraction(v)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ScenarioError(f"{where}: {v!r} is not a number") from None


def load_document(doc: dict) -> Scenario:
    """Build a scenario from an already-decoded JSON document."""
    try:
        jsonschema.validate(doc, schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise ScenarioError(f"invalid document at {path or 'top level'}: {exc.message}") from None
    atoms = tuple(doc["atoms"])
    if len(set(atoms)) != len(atoms):
        raise ScenarioError("atom names must be unique")
    for a in atoms:
        if a in _KEYWORDS:
            raise ScenarioError(f"{a!r} is reserved")
    names = _names(atoms)
    quantities: dict[str, Expr] = {}
    raw_q = doc.get("quantities") or [{"name": a, "expr": a} for a in atoms]
    for item in raw_q:
        name = item["name"]
        if name in _KEYWORDS or (name in names and name not in atoms):
            raise ScenarioError(f"quantity name {name!r} is reserved or repeated")
        expr = _mark_event(parse_expression(item["expr"], names), atoms)
        if name in atoms and expr != names[name]:
            raise ScenarioError(f"quantity {name!r} shadows an atom")
        quantities[name] = expr
        names[name] = expr

    def ex(s: str) -> Expr:
        return _mark_event(parse_expression(s, names), atoms)

    def side(s):
        if isinstance(s, dict):
            return (ex(s["target"]), ex(s["given"]))
        return _number(s, "ordering bound")

    assertions = []
    for k, a in enumerate(doc.get("assertions", [])):
        where = f"assertion {k}"
        try:
            t = a["type"]
            if t == "prevision":
                assertions.append(PrevisionEq(ex(a["expr"]), _number(a["value"], where)))
            elif t == "prevision_interval":
                assertions.append(PrevisionInterval(ex(a["expr"]), _number(a["lower"], where), _number(a["upper"], where)))
            elif t == "conditional":
                assertions.append(ConditionalPrevisionEq(ex(a["target"]), ex(a["given"]), _number(a["value"], where)))
            elif t == "conditional_interval":
                assertions.append(
                    ConditionalPrevisionInterval(
                        ex(a["target"]), ex(a["given"]), _number(a["lower"], where), _number(a["upper"], where)
                    )
                )
            elif t == "exchangeable":
                given = ex(a["given"]) if a.get("given") else None
                assertions.append(Exchangeability(tuple(ex(e) for e in a["events"]), given))
            elif t == "ordering":
                assertions.append(ConditionalOrdering(side(a["lhs"]), side(a["rhs"])))
        except ScenarioError:
            raise
        except (EventAlgebraError, ValueError) as exc:
            raise ScenarioError(f"{where}: {exc}") from None

    def spec(s) -> PrevisionOf:
        return PrevisionOf(ex(s["expr"]), ex(s["given"]) if s.get("given") else None)

    targets: dict[str, TargetSpec] = {}
    for t in doc.get("targets", []):
        if t["name"] in targets:
            raise ScenarioError(f"duplicate target name {t['name']!r}")
        if t.get("kind", "prevision") == "difference":
            targets[t["name"]] = DifferenceOf(spec(t["first"]), spec(t["second"]))
        else:
            targets[t["name"]] = spec(t)

    order = doc.get("order")
    if order is not None:
        order = tuple(int(s, 2) if isinstance(s, str) else int(s) for s in order)
    scn = Scenario(atoms, quantities, assertions, targets, order, doc.get("title", ""), doc.get("meta", {}))
    try:
        scn.realm()
    except EventAlgebraError as exc:
        raise ScenarioError(str(exc)) from None
    return scn


def load(path: str | Path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from None
    return load_document(doc)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def _num_out(v) -> str:
    return str(as_fraction(v))


def _spec_doc(s: PrevisionOf, names) -> dict:
    out = {"expr": to_source(s.expr, names)}
    if s.given is not None:
        out["given"] = to_source(s.given, names)
    return out


def _assertion_doc(a, names) -> dict:
    def to_source_(e):
        return to_source(e, names)

    if isinstance(a, PrevisionEq):
        return {"type": "prevision", "expr": to_source_(a.expr), "value": _num_out(a.value)}
    if isinstance(a, PrevisionInterval):
        return {"type": "prevision_interval", "expr": to_source_(a.expr), "lower": _num_out(a.lo), "upper": _num_out(a.hi)}
    if isinstance(a, ConditionalPrevisionEq):
        return {"type": "conditional", "target": to_source_(a.target), "given": to_source_(a.given),
                "value": _num_out(a.value)}
    if isinstance(a, ConditionalPrevisionInterval):
        return {"type": "conditional_interval", "target": to_source_(a.target), "given": to_source_(a.given),
                "lower": _num_out(a.lo), "upper": _num_out(a.hi)}
    if isinstance(a, Exchangeability):
        out = {"type": "exchangeable", "events": [to_source_(e) for e in a.events]}
        if a.given is not None:
            out["given"] = to_source_(a.given)
        return out
    if isinstance(a, ConditionalOrdering):
        def side(s):
            if isinstance(s, Fraction):
                return _num_out(s)
            return {"target": to_source_(s[0]), "given": to_source_(s[1])}

        return {"type": "ordering", "lhs": side(a.lhs), "rhs": side(a.rhs)}
    raise TypeError(f"cannot export {type(a).__name__}")


def to_document(
    atoms,
    quantities: dict[str, Expr],
    assertions,
    targets: dict[str, TargetSpec],
    order=None,
    title: str = "",
    meta: dict | None = None,
) -> dict:
    doc: dict[str, Any] = {}
    if title:
        doc["title"] = title
    doc["atoms"] = list(atoms)
    doc["quantities"] = []
    names: dict[Expr, str] = {}
    for n, e in quantities.items():
        doc["quantities"].append({"name": n, "expr": to_source(e, names)})
        names.setdefault(e, n)
    if order is not None:
        width = len(atoms)
        doc["order"] = [format(i, f"0{width}b") for i in order]
    doc["assertions"] = [_assertion_doc(a, names) for a in assertions]
    doc["targets"] = []
    for name, t in targets.items():
        if isinstance(t, DifferenceOf):
            doc["targets"].append({"name": name, "kind": "difference",
                                   "first": _spec_doc(t.first, names), "second": _spec_doc(t.second, names)})
        else:
            doc["targets"].append({"name": name, **_spec_doc(t, names)})
    if meta:
        doc["meta"] = meta
    return doc


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Built-in documents
# ---------------------------------------------------------------------------

BUILTIN = ("example1", "example2")


def builtin_document(name: str) -> dict:
    """Bundled example documents plus one per asbestos column."""
    if name in BUILTIN:
        return json.loads(resources.files("prevision").joinpath(f"data/{name}.json").read_text())
    from . import asbestos

    if name in asbestos.COLUMNS:
        scn = asbestos.scenario(name)
        realm = asbestos.build_realm()
        quantities = dict(zip(("F", "D1", "D2", "D3", "Dstar", "Sstar"), realm.quantities))
        meta = {}
        if scn.independence_p is not None:
            meta["independence"] = {"given": "F", "events": ["D1", "D2", "D3"], "p": str(Fraction(str(scn.independence_p)))}
        if scn.inputs:
            meta["inputs"] = {k: str(Fraction(str(v))) for k, v in scn.inputs.items()}
        return to_document(realm.atoms, quantities, scn.assertions, scn.targets, realm.order, name, meta)
    raise ScenarioError(f"unknown built-in scenario {name!r}")
