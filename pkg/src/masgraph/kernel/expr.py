"""Elaborated expression / statement IR and its reference evaluator.

This is what the elaborator lowers surface expressions into: all variable
references are resolved to flat *slots* (ints indexing the global state
vector), record/array paths become affine index forms, functions are inlined,
and enum literals are ordinals.  Select variables and quantifier binders remain
as named :class:`Local` nodes; they are bound through an environment dict at
evaluation time (the compiled engine expands them away instead).

Semantics pinned here and mirrored bit-for-bit by the bytecode engine:

* ``&&  ||`` (and ``forall/exists``) short-circuit left to right;
* integer division truncates toward zero, ``%`` takes the dividend's sign;
* division/modulo by zero and out-of-range array indices raise
  :class:`~masgraph.errors.EvaluationFault`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

from ..errors import EvaluationFault
from .types import ScalarType


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Local:
    """A select binding or quantifier binder, resolved through the env."""

    name: str


@dataclass(frozen=True)
class IndexTerm:
    """One dynamic array subscript of a reference, in affine form.

    The resolved slot contribution is ``coef * (value - lo)`` with the runtime
    check ``lo <= value <= hi``.
    """

    expr: "Expr"
    lo: int
    hi: int
    coef: int


@dataclass(frozen=True)
class Ref:
    """A (possibly dynamically indexed) scalar slot reference.

    ``slot = base + sum(term contributions)``.  Static references have no
    terms.  ``path`` is the display name used in diagnostics and printing.
    """

    base: int
    terms: Tuple[IndexTerm, ...] = ()
    path: str = ""
    span: Optional[object] = field(default=None, compare=False)

    def resolve(self, state: Sequence[int], env: Dict[str, int]) -> int:
        slot = self.base
        for t in self.terms:
            v = eval_expr(t.expr, state, env)
            if v < t.lo or v > t.hi:
                raise EvaluationFault(
                    f"index {v} outside [{t.lo},{t.hi}] in '{self.path}'",
                    span=self.span,
                )
            slot += t.coef * (v - t.lo)
        return slot


@dataclass(frozen=True)
class Unary:
    op: str  # '-' | '!'
    a: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # + - * / % == != < <= > >=
    a: "Expr"
    b: "Expr"
    span: Optional[object] = field(default=None, compare=False)


@dataclass(frozen=True)
class Nary:
    """Short-circuit conjunction/disjunction, op in {'&&', '||'}."""

    op: str
    items: Tuple["Expr", ...]


@dataclass(frozen=True)
class Ternary:
    cond: "Expr"
    then: "Expr"
    els: "Expr"


@dataclass(frozen=True)
class Quant:
    """Bounded quantifier over an explicit value domain (declaration order)."""

    kind: str  # 'forall' | 'exists'
    var: str
    domain: Tuple[int, ...]
    body: "Expr"


Expr = Union[Const, Local, Ref, Unary, Binary, Nary, Ternary, Quant]


@dataclass(frozen=True)
class Assign:
    target: Ref
    expr: Expr
    span: Optional[object] = field(default=None, compare=False)


@dataclass(frozen=True)
class IfStmt:
    cond: Expr
    then: Tuple["Stmt", ...]
    els: Tuple["Stmt", ...] = ()


Stmt = Union[Assign, IfStmt]


def c_div(a: int, b: int, span=None) -> int:
    if b == 0:
        raise EvaluationFault("division by zero", span=span)
    q = abs(a) // abs(b)
    return -q if (a < 0) != (b < 0) else q


def c_mod(a: int, b: int, span=None) -> int:
    if b == 0:
        raise EvaluationFault("modulo by zero", span=span)
    return a - b * c_div(a, b)


def eval_expr(e: Expr, state: Sequence[int], env: Dict[str, int]) -> int:
    """Evaluate ``e`` against a flat state vector and a binder environment."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Ref):
        return state[e.resolve(state, env)]
    if isinstance(e, Local):
        return env[e.name]
    if isinstance(e, Unary):
        v = eval_expr(e.a, state, env)
        return -v if e.op == "-" else (0 if v else 1)
    if isinstance(e, Binary):
        a = eval_expr(e.a, state, env)
        b = eval_expr(e.b, state, env)
        op = e.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return c_div(a, b, e.span)
        if op == "%":
            return c_mod(a, b, e.span)
        if op == "==":
            return int(a == b)
        if op == "!=":
            return int(a != b)
        if op == "<":
            return int(a < b)
        if op == "<=":
            return int(a <= b)
        if op == ">":
            return int(a > b)
        if op == ">=":
            return int(a >= b)
        raise AssertionError(f"bad op {op}")
    if isinstance(e, Nary):
        if e.op == "&&":
            for it in e.items:
                if not eval_expr(it, state, env):
                    return 0
            return 1
        for it in e.items:
            if eval_expr(it, state, env):
                return 1
        return 0
    if isinstance(e, Ternary):
        if eval_expr(e.cond, state, env):
            return eval_expr(e.then, state, env)
        return eval_expr(e.els, state, env)
    if isinstance(e, Quant):
        env2 = dict(env)
        if e.kind == "forall":
            for v in e.domain:
                env2[e.var] = v
                if not eval_expr(e.body, state, env2):
                    return 0
            return 1
        for v in e.domain:
            env2[e.var] = v
            if eval_expr(e.body, state, env2):
                return 1
        return 0
    raise AssertionError(f"bad expr node {e!r}")


def exec_stmts(
    stmts: Sequence[Stmt],
    state: List[int],
    env: Dict[str, int],
    slot_bounds: Sequence[Tuple[int, int]],
    on_range_fault=None,
) -> None:
    """Execute an update sequence in place, range-checking every store.

    ``on_range_fault(assign, slot, value)`` may raise a contextualized
    RangeFault; by default a bare EvaluationFault-style message is raised.
    """
    from ..errors import RangeFault

    for st in stmts:
        if isinstance(st, Assign):
            slot = st.target.resolve(state, env)
            v = eval_expr(st.expr, state, env)
            lo, hi = slot_bounds[slot]
            if v < lo or v > hi:
                if on_range_fault is not None:
                    on_range_fault(st, slot, v)
                raise RangeFault(
                    f"value {v} outside [{lo},{hi}] assigned to '{st.target.path}'",
                    span=st.span,
                )
            state[slot] = v
        elif isinstance(st, IfStmt):
            if eval_expr(st.cond, state, env):
                exec_stmts(st.then, state, env, slot_bounds, on_range_fault)
            else:
                exec_stmts(st.els, state, env, slot_bounds, on_range_fault)
        else:
            raise AssertionError(f"bad stmt {st!r}")


def subst_locals(e: Expr, binding: Dict[str, int]) -> Expr:
    """Substitute constants for the given Local names (used when expanding
    selects and quantifiers)."""
    if isinstance(e, Const):
        return e
    if isinstance(e, Local):
        if e.name in binding:
            return Const(binding[e.name])
        return e
    if isinstance(e, Ref):
        terms = tuple(
            IndexTerm(subst_locals(t.expr, binding), t.lo, t.hi, t.coef)
            for t in e.terms
        )
        return Ref(e.base, terms, e.path, e.span)
    if isinstance(e, Unary):
        return Unary(e.op, subst_locals(e.a, binding))
    if isinstance(e, Binary):
        return Binary(e.op, subst_locals(e.a, binding), subst_locals(e.b, binding), e.span)
    if isinstance(e, Nary):
        return Nary(e.op, tuple(subst_locals(it, binding) for it in e.items))
    if isinstance(e, Ternary):
        return Ternary(
            subst_locals(e.cond, binding),
            subst_locals(e.then, binding),
            subst_locals(e.els, binding),
        )
    if isinstance(e, Quant):
        inner = {k: v for k, v in binding.items() if k != e.var}
        return Quant(e.kind, e.var, e.domain, subst_locals(e.body, inner))
    raise AssertionError(f"bad expr node {e!r}")


def subst_stmt_locals(st: Stmt, binding: Dict[str, int]) -> Stmt:
    if isinstance(st, Assign):
        tgt = subst_locals(st.target, binding)
        return Assign(tgt, subst_locals(st.expr, binding), st.span)
    return IfStmt(
        subst_locals(st.cond, binding),
        tuple(subst_stmt_locals(s, binding) for s in st.then),
        tuple(subst_stmt_locals(s, binding) for s in st.els),
    )


def expr_slots(e: Expr) -> set:
    """All slots a read of ``e`` may touch (dynamic indices widen to the whole
    affine span — sound over-approximation used by the abstraction rewriter)."""
    out: set = set()
    _collect_slots(e, out)
    return out


def _ref_span(r: Ref) -> set:
    """Every slot the affine form can resolve to.

    Constant in-range terms contribute exactly; anything else (including a
    constant that would fault) widens over the term's whole range.
    """
    combos = [0]
    for t in r.terms:
        if isinstance(t.expr, Const) and t.lo <= t.expr.value <= t.hi:
            combos = [c + t.coef * (t.expr.value - t.lo) for c in combos]
        else:
            combos = [c + t.coef * k for c in combos for k in range(t.hi - t.lo + 1)]
    return {r.base + c for c in combos}


def _ref_slots(r: Ref, out: set) -> None:
    for t in r.terms:
        _collect_slots(t.expr, out)
    out |= _ref_span(r)


def _collect_slots(e: Expr, out: set) -> None:
    if isinstance(e, (Const, Local)):
        return
    if isinstance(e, Ref):
        _ref_slots(e, out)
        return
    if isinstance(e, Unary):
        _collect_slots(e.a, out)
        return
    if isinstance(e, Binary):
        _collect_slots(e.a, out)
        _collect_slots(e.b, out)
        return
    if isinstance(e, Nary):
        for it in e.items:
            _collect_slots(it, out)
        return
    if isinstance(e, Ternary):
        _collect_slots(e.cond, out)
        _collect_slots(e.then, out)
        _collect_slots(e.els, out)
        return
    if isinstance(e, Quant):
        _collect_slots(e.body, out)
        return
    raise AssertionError(f"bad expr node {e!r}")


def stmt_read_slots(st: Stmt) -> set:
    out: set = set()
    if isinstance(st, Assign):
        _collect_slots(st.expr, out)
        for t in st.target.terms:
            _collect_slots(t.expr, out)
    else:
        _collect_slots(st.cond, out)
        for s in st.then:
            out |= stmt_read_slots(s)
        for s in st.els:
            out |= stmt_read_slots(s)
    return out


def stmt_write_slots(st: Stmt) -> set:
    """Slots a statement may write (dynamic targets widen, as above)."""
    out: set = set()
    if isinstance(st, Assign):
        out |= _ref_span(st.target)
    else:
        for s in st.then:
            out |= stmt_write_slots(s)
        for s in st.els:
            out |= stmt_write_slots(s)
    return out
