"""Independent verdict computation by naive fixed-point labeling.

This is the slow, obviously-correct reference: it materializes the whole
reachable transition system (`kernel.semantics.unwrap`, which shares no code
with the compiled engine) and labels states by iterating Boolean fixpoints.
The search-based checkers in `algorithms` are validated against this module.
"""

from __future__ import annotations

from typing import List

from ..kernel.expr import eval_expr
from ..kernel.semantics import ExplicitModel
from .formulas import Property


def sat_vector(em: ExplicitModel, expr) -> List[bool]:
    return [bool(eval_expr(expr, s.values, {})) for s in em.states]


def globally_fixpoint(em: ExplicitModel, holds: List[bool]) -> List[bool]:
    """States from which some maximal run stays inside ``holds`` forever.

    Greatest fixpoint of X = holds ∧ ∃-pre(X).  Because of serial closure
    every state has a successor, so maximal runs are exactly infinite runs.
    """
    alive = list(holds)
    changed = True
    while changed:
        changed = False
        for sid in range(len(em.states)):
            if alive[sid] and not any(alive[j] for _, j in em.trans[sid]):
                alive[sid] = False
                changed = True
    return alive


def oracle_verdict(em: ExplicitModel, prop: Property) -> bool:
    """Truth value of ``prop`` on the unwrapped model."""
    if prop.kind == "invariant":
        p = sat_vector(em, prop.expr)
        return all(p)
    if prop.kind == "reach":
        p = sat_vector(em, prop.expr)
        return any(p)
    if prop.kind == "liveness":
        # A<> p  ==  no maximal run stays in !p forever
        notp = [not v for v in sat_vector(em, prop.expr)]
        alive = globally_fixpoint(em, notp)
        return not any(alive[i] for i in em.init)
    if prop.kind == "exists-globally":
        p = sat_vector(em, prop.expr)
        if prop.mode == "finite-run":
            return any(p[i] for i in em.init)
        alive = globally_fixpoint(em, p)
        return any(alive[i] for i in em.init)
    if prop.kind == "leads-to":
        p = sat_vector(em, prop.expr)
        notq = [not v for v in sat_vector(em, prop.rhs)]
        evade = globally_fixpoint(em, notq)
        return not any(pi and ei for pi, ei in zip(p, evade))
    raise ValueError(f"unknown property kind {prop.kind!r}")
