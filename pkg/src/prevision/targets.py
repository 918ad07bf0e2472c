"""Symbolic targets: previsions, conditional previsions and their differences."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .events import Expr, Realm, conjunction, indicator_row
from .bounds import Conditional, Difference, Linear, Target


@dataclass(frozen=True)
class PrevisionOf:
    """``P(expr)`` or, with ``given``, ``P(expr | given)``."""

    expr: Expr
    given: Expr | None = None

    def __str__(self) -> str:
        if self.given is None:
            return f"P({self.expr})"
        return f"P({self.expr} | {self.given})"


@dataclass(frozen=True)
class DifferenceOf:
    first: PrevisionOf
    second: PrevisionOf

    def __str__(self) -> str:
        return f"{self.first} - {self.second}"


TargetSpec = Union[PrevisionOf, DifferenceOf]


def _numerator(spec: PrevisionOf) -> Expr:
    e = spec.expr
    if e.event:
        return conjunction(e, spec.given)
    return e * spec.given


def compile_target(spec: TargetSpec, realm: Realm) -> Target:
    if isinstance(spec, DifferenceOf):
        return Difference(compile_target(spec.first, realm), compile_target(spec.second, realm))
    if spec.given is None:
        return Linear(indicator_row(spec.expr, realm))
    return Conditional(indicator_row(_numerator(spec), realm), indicator_row(spec.given, realm))


def evaluate_target(spec: TargetSpec, realm: Realm, q) -> float:
    """Value of the target at cell masses ``q`` (nan when a denominator vanishes)."""
    q = np.asarray(q, dtype=float)
    if isinstance(spec, DifferenceOf):
        return evaluate_target(spec.first, realm, q) - evaluate_target(spec.second, realm, q)
    num = float(indicator_row(spec.expr if spec.given is None else _numerator(spec), realm).astype(float) @ q)
    if spec.given is None:
        return num
    den = float(indicator_row(spec.given, realm).astype(float) @ q)
    return num / den if den > 0 else float("nan")
