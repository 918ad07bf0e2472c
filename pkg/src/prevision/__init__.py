"""Coherent bounds on previsions from probability assertions."""
from .events import (
    EventAlgebraError,
    Expr,
    Realm,
    atom,
    conjunction,
    const,
    disjunction,
    enumerate_realm,
    indicator_row,
    negate,
    threshold,
)
from .assertions import (
    CompileError,
    ConditionalOrdering,
    ConditionalPrevisionEq,
    ConditionalPrevisionInterval,
    ConstraintSystem,
    Exchangeability,
    PrevisionEq,
    PrevisionInterval,
    SumDistribution,
    compile_assertions,
    iid_cell_masses,
    string_probability,
)
from .bounds import (
    BoundsResult,
    Conditional,
    Difference,
    Linear,
    SolverConfig,
    Status,
    bounds,
    check_coherence,
    conditional_bounds,
    global_bounds,
    lp_bounds,
)
from .targets import DifferenceOf, PrevisionOf, compile_target, evaluate_target

__version__ = "0.1.0"
