"""Variable-removal and merge abstraction over elaborated models.

An abstraction spec names state variables to remove (optionally only within a
set of locations of their owning agent), fresh *merge* variables defined by an
expression over the original state, and a direction:

* ``over``  — guards that read a removed variable get a fresh select binding
  per read, so every concrete behaviour (and possibly more) survives;
* ``under`` — such guards are expanded into a conjunction over the removed
  variable's whole domain, and any edge whose effect on kept variables cannot
  be written without knowing a removed value is dropped, so only behaviours
  that exist for *every* valuation survive.

Removed slots are not physically deleted: they are pinned to their declared
initial value (writes dropped, reads rewritten), which collapses all states
that differed only in removed values.  Merge slots are appended to the state
vector and their updates are recomputed on every edge that wrote one of the
defining expression's variables — as an exact increment when the definition is
affine, otherwise by substituting the written values through the definition.

``erasure`` builds the matching concrete-to-abstract state map (pin removed
slots, append merge values), and ``simulation_check`` verifies transition
containment of two unwrapped models along that map.  ``check_with_abstraction``
runs the under/over pair against a property and combines the two verdicts into
a conclusive answer where the directions allow it.
"""

from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

from .checking.algorithms import check_property
from .checking.formulas import Property, Verdict
from .errors import (
    ModelTypeError,
    RangeFault,
    ScopeBoundaryFault,
    TruncatedModel,
)
from .kernel import expr as K
from .kernel import types as T
from .kernel.engine import make_engine
from .kernel.expr import (
    eval_expr,
    expr_slots,
    stmt_write_slots,
    subst_locals,
    subst_stmt_locals,
)
from .kernel.model import (
    AgentInstance,
    Edge,
    GlobalState,
    MASGraph,
    Select,
    Sync,
)
from .kernel.semantics import ExplicitModel
from .lang import ast as A
from .lang.queries import elaborate_query
from .lang.typecheck import ModelContext, _ctx_elab, instance_name

# Expanding an `under` guard multiplies it out over every removed value the
# guard reads; beyond this many combinations the spec is considered abusive.
_EXPANSION_CAP = 1 << 14


# --------------------------------------------------------------------------
# spec objects


@dataclass(frozen=True)
class MergeSpec:
    """One fresh variable with its defining expression over concrete slots."""

    name: str
    typ: T.ScalarType
    expr: K.Expr
    slot: int  # assigned slot id in the abstract state vector
    init: int


@dataclass
class AbstractionSpec:
    direction: str  # 'under' | 'over'
    dead: FrozenSet[int]  # slots removed everywhere
    # agent ordinal -> (location ordinals, slots) removed only inside those locations
    scoped: Dict[int, Tuple[FrozenSet[int], FrozenSet[int]]]
    merges: Tuple[MergeSpec, ...] = ()
    rewrites: Dict[str, Property] = field(default_factory=dict)
    name: str = "<abs>"

    @property
    def removed_slots(self) -> FrozenSet[int]:
        out = set(self.dead)
        for _, slots in self.scoped.values():
            out |= slots
        return frozenset(out)


@dataclass(frozen=True)
class ConclusiveVerdict:
    """Combined outcome of the under/over abstraction runs.

    ``outcome`` is True (established), False (refuted) or None (inconclusive);
    ``evidence`` holds the abstract Verdicts in the order they were produced.
    """

    outcome: Optional[bool]
    evidence: Tuple[Verdict, ...]
    reason: str = ""

    @property
    def exit_code(self) -> int:
        if self.outcome is not None:
            return 0
        return 3 if "memout" in self.reason else 2


# --------------------------------------------------------------------------
# spec elaboration


def _render_segs(head: str, segs: Sequence) -> str:
    out = head
    for s in segs:
        out += f".{s}" if isinstance(s, str) else f"[{s}]"
    return out


def _prefix_slots(m: MASGraph, prefix: str) -> List[int]:
    names = m.slots.names
    return [
        i
        for i in range(len(names))
        if names[i] == prefix
        or names[i].startswith(prefix + ".")
        or names[i].startswith(prefix + "[")
    ]


def _target_instances(mctx: ModelContext, head: str, args: Tuple[int, ...], span):
    """Instances an abstraction path head refers to, or None for a shared var."""
    by_template = [i for i in mctx.instances.values() if i.template == head]
    if args:
        if not by_template:
            raise ModelTypeError(f"no instances of template {head!r}", span)
        iname = instance_name(head, args, by_template[0].ptypes)
        info = mctx.instances.get(iname)
        if info is None:
            raise ModelTypeError(f"no instance named {iname!r}", span)
        return [info]
    if head in mctx.instances:
        return [mctx.instances[head]]
    if by_template:
        return by_template
    return None


def _resolve_removed(mctx: ModelContext, path: A.AbsPath) -> List[int]:
    m = mctx.graph
    targets = _target_instances(mctx, path.head, path.head_args, path.span)
    if targets is not None:
        if not path.segs or not isinstance(path.segs[0], str):
            raise ModelTypeError(
                f"{path.render()!r}: removal must name a variable of the agent",
                path.span,
            )
        out: List[int] = []
        for info in targets:
            if path.segs[0] not in info.locals:
                raise ModelTypeError(
                    f"agent {info.name!r} has no variable {path.segs[0]!r}",
                    path.span,
                )
            prefix = _render_segs(f"{info.name}.{path.segs[0]}", path.segs[1:])
            slots = _prefix_slots(m, prefix)
            if not slots:
                raise ModelTypeError(
                    f"{prefix!r} does not name any state slot", path.span
                )
            out.extend(slots)
        return out
    if path.head not in mctx.globals:
        raise ModelTypeError(
            f"unknown variable {path.head!r} in removal path", path.span
        )
    prefix = _render_segs(path.head, path.segs)
    slots = _prefix_slots(m, prefix)
    if not slots:
        raise ModelTypeError(f"{prefix!r} does not name any state slot", path.span)
    return slots


def elaborate_abstraction(adoc: A.AbsDocument, mctx: ModelContext) -> AbstractionSpec:
    """Resolve a parsed ``.abs`` document against an elaborated model."""
    m = mctx.graph
    removed: set = set()
    for p in adoc.removed:
        removed.update(_resolve_removed(mctx, p))

    # scope clauses: agent ordinal -> set of location ordinals
    scope_locs: Dict[int, set] = {}
    for item in adoc.scope:
        targets = _target_instances(mctx, item.agent, item.agent_args, item.span)
        if targets is None:
            raise ModelTypeError(
                f"unknown agent {item.agent!r} in scope clause", item.span
            )
        for info in targets:
            agent = m.agents[info.ordinal]
            if item.location not in agent.locations:
                raise ModelTypeError(
                    f"agent {info.name!r} has no location {item.location!r}",
                    item.span,
                )
            scope_locs.setdefault(info.ordinal, set()).add(
                agent.loc_ordinal(item.location)
            )

    # A scope clause binds the removals of *that agent's own variables* to the
    # listed locations; everything else (shared variables, locals of agents
    # without scope clauses) is removed globally.
    dead: set = set()
    scoped: Dict[int, Tuple[FrozenSet[int], FrozenSet[int]]] = {}
    by_agent: Dict[int, set] = {}
    for s in removed:
        owner = m.slots.owners[s]
        ai = m.agent_index(owner) if owner is not None else None
        if ai is not None and ai in scope_locs:
            by_agent.setdefault(ai, set()).add(s)
        else:
            dead.add(s)
    for ai in scope_locs:
        if ai not in by_agent:
            raise ScopeBoundaryFault(
                f"scope clause names agent {m.agents[ai].name!r} but the spec "
                f"removes none of its variables; the scope cannot attach to "
                f"anything"
            )
    for ai, slots in by_agent.items():
        scoped[ai] = (frozenset(scope_locs[ai]), frozenset(slots))

    # merges
    elab = _ctx_elab(mctx)
    width = m.state_width()
    merges: List[MergeSpec] = []
    init_vals = list(m.slots.inits)
    scoped_slots: set = set()
    for _, ss in scoped.values():
        scoped_slots |= ss
    for i, decl in enumerate(adoc.merges):
        tgt = decl.target
        # A dotted target (e.g. ``box[1].lid.stuck``) is allowed; the rendered
        # path simply becomes the merge variable's name, placing the folded
        # value next to the structure it summarises.
        name = tgt.render()
        if (
            name in m.slots.index
            or name in mctx.globals
            or name in mctx.consts
            or name in mctx.instances
            or any(mg.name == name for mg in merges)
        ):
            raise ModelTypeError(
                f"merge target {name!r} collides with an existing name", decl.span
            )
        typ = elab.resolve_type(decl.type, {})
        if not T.is_scalar(typ):
            raise ModelTypeError("merge variables must be scalar", decl.span)
        ker = mctx.lower_query_expr(decl.expr)
        if any(s < m.n_agents for s in expr_slots(ker)):
            raise ModelTypeError(
                "merge expressions cannot test locations (location changes "
                "would not retrigger the merge update)",
                decl.span,
            )
        if expr_slots(ker) & scoped_slots:
            raise ModelTypeError(
                f"merge {name!r} reads a variable removed under a scope; "
                f"scope resets would change the merge value without an "
                f"update",
                decl.span,
            )
        try:
            init = eval_expr(ker, init_vals, {})
        except Exception as exc:
            raise ModelTypeError(
                f"merge {name!r} cannot be evaluated on the initial state: {exc}",
                decl.span,
            )
        lo, hi = typ.bounds()
        if init < lo or init > hi:
            raise ModelTypeError(
                f"initial value {init} of merge {name!r} outside {typ}", decl.span
            )
        merges.append(MergeSpec(name, typ, ker, width + i, init))

    # rewrites, lowered with the merge names visible as shared scalars
    rewrites: Dict[str, Property] = {}
    if adoc.rewrites:
        saved = dict(mctx.globals)
        try:
            for mg in merges:
                mctx.globals[mg.name] = (mg.slot, mg.typ)
            for r in adoc.rewrites:
                rewrites[r.prop] = elaborate_query(r.query, mctx)
        finally:
            mctx.globals.clear()
            mctx.globals.update(saved)

    return AbstractionSpec(
        direction=adoc.direction,
        dead=frozenset(dead),
        scoped=scoped,
        merges=tuple(merges),
        rewrites=rewrites,
        name=adoc.name,
    )


# --------------------------------------------------------------------------
# expression utilities (folding, affine forms, read rewriting)


def _fold(e: K.Expr) -> K.Expr:
    """Constant folding; never folds an operation that could fault at runtime."""
    if isinstance(e, (K.Const, K.Local)):
        return e
    if isinstance(e, K.Ref):
        terms = tuple(
            K.IndexTerm(_fold(t.expr), t.lo, t.hi, t.coef) for t in e.terms
        )
        base, keep = e.base, []
        # the [?] markers in the display path line up with the terms; folding
        # a term into the base replaces its marker so they stay aligned
        parts = e.path.split("[?]")
        path = parts[0] if len(parts) == len(terms) + 1 else None
        for i, t in enumerate(terms):
            if isinstance(t.expr, K.Const) and t.lo <= t.expr.value <= t.hi:
                base += t.coef * (t.expr.value - t.lo)
                if path is not None:
                    path += f"[{t.expr.value}]" + parts[i + 1]
            else:
                keep.append(t)  # out-of-range consts keep their runtime fault
                if path is not None:
                    path += "[?]" + parts[i + 1]
        return K.Ref(base, tuple(keep), path if path is not None else e.path,
                     e.span)
    if isinstance(e, K.Unary):
        a = _fold(e.a)
        if isinstance(a, K.Const):
            return K.Const(-a.value if e.op == "-" else (0 if a.value else 1))
        return K.Unary(e.op, a)
    if isinstance(e, K.Binary):
        a, b = _fold(e.a), _fold(e.b)
        if isinstance(a, K.Const) and isinstance(b, K.Const):
            if e.op not in ("/", "%") or b.value != 0:
                return K.Const(eval_expr(K.Binary(e.op, a, b), (), {}))
        return K.Binary(e.op, a, b, e.span)
    if isinstance(e, K.Nary):
        absorb = 0 if e.op == "&&" else 1
        items: List[K.Expr] = []
        for it in e.items:
            f = _fold(it)
            if isinstance(f, K.Const):
                if (f.value != 0) == (absorb != 0):
                    items.append(K.Const(absorb))
                    break  # later items are never evaluated
                continue  # neutral element, drop
            items.append(f)
        if not items:
            return K.Const(1 - absorb)
        if len(items) == 1:
            it = items[0]
            if isinstance(it, K.Const):
                return it
        return K.Nary(e.op, tuple(items))
    if isinstance(e, K.Ternary):
        c = _fold(e.cond)
        if isinstance(c, K.Const):
            return _fold(e.then) if c.value else _fold(e.els)
        return K.Ternary(c, _fold(e.then), _fold(e.els))
    if isinstance(e, K.Quant):
        body = _fold(e.body)
        if isinstance(body, K.Const):
            if not e.domain:
                return K.Const(1 if e.kind == "forall" else 0)
            return K.Const(1 if body.value else 0)
        return K.Quant(e.kind, e.var, e.domain, body)
    raise AssertionError(f"bad expr node {e!r}")


def _affine(e: K.Expr) -> Optional[Tuple[int, Dict[int, int]]]:
    """``e`` as ``const + sum(coef * slot)`` over static slot reads, or None."""
    if isinstance(e, K.Const):
        return e.value, {}
    if isinstance(e, K.Ref):
        if e.terms:
            return None
        return 0, {e.base: 1}
    if isinstance(e, K.Unary) and e.op == "-":
        a = _affine(e.a)
        if a is None:
            return None
        c, m = a
        return -c, {k: -v for k, v in m.items()}
    if isinstance(e, K.Binary) and e.op in ("+", "-", "*"):
        a, b = _affine(e.a), _affine(e.b)
        if a is None or b is None:
            return None
        (ca, ma), (cb, mb) = a, b
        if e.op == "*":
            if ma and mb:
                return None
            if ma:
                (ca, ma), (cb, mb) = (cb, mb), (ca, ma)
            return ca * cb, {k: ca * v for k, v in mb.items()}
        sign = 1 if e.op == "+" else -1
        out = dict(ma)
        for k, v in mb.items():
            out[k] = out.get(k, 0) + sign * v
        return ca + sign * cb, {k: v for k, v in out.items() if v != 0}
    return None


def _affine_expr(c: int, coefs: Dict[int, int], m: MASGraph) -> K.Expr:
    e: Optional[K.Expr] = K.Const(c) if c != 0 else None
    for slot in sorted(coefs):
        ref = K.Ref(slot, (), m.slots.names[slot])
        k = coefs[slot]
        term = ref if k == 1 else K.Binary("*", K.Const(k), ref)
        e = term if e is None else K.Binary("+", e, term)
    return e if e is not None else K.Const(0)


class _MixedCoverage(ModelTypeError):
    """A dynamically indexed reference may land on removed and kept slots
    alike.  Caught internally: when the offending edge has select bindings the
    transformation retries with each binding pinned, which usually turns the
    index into a constant and the coverage into a clean yes/no."""


class _ReadRewriter:
    """Replaces reads of removed slots by fresh Local placeholders.

    The same syntactic reference always maps to the same placeholder, so a
    guard and an update reading the same removed variable stay coupled when
    the placeholders later become select bindings (over) or are expanded
    (under).
    """

    def __init__(self, m: MASGraph, dead_read: FrozenSet[int], taken: set):
        self.m = m
        self.dead = dead_read
        self.taken = taken
        self.vars: Dict[K.Ref, str] = {}
        self.order: List[str] = []
        self.domains: Dict[str, Tuple[int, int]] = {}
        self.display: Dict[str, str] = {}

    def fresh(self, domain: Tuple[int, int], display: str) -> str:
        n = len(self.order)
        name = f"__h{n}"
        while name in self.taken or name in self.domains:
            n += 1
            name = f"__h{n}"
        self.order.append(name)
        self.domains[name] = domain
        self.display[name] = display
        return name

    def _placeholder(self, ref: K.Ref) -> str:
        key = K.Ref(ref.base, ref.terms, ref.path)
        if key in self.vars:
            return self.vars[key]
        span = sorted(K._ref_span(ref))
        lo = min(self.m.slots.bounds[s][0] for s in span)
        hi = max(self.m.slots.bounds[s][1] for s in span)
        name = self.fresh((lo, hi), str(self.m.slots.types[span[0]]))
        self.vars[key] = name
        return name

    def expr(self, e: K.Expr) -> K.Expr:
        if isinstance(e, (K.Const, K.Local)):
            return e
        if isinstance(e, K.Ref):
            terms = tuple(
                K.IndexTerm(self.expr(t.expr), t.lo, t.hi, t.coef)
                for t in e.terms
            )
            r2 = K.Ref(e.base, terms, e.path, e.span)
            span = K._ref_span(r2)
            if span <= self.dead:
                return K.Local(self._placeholder(r2))
            if span & self.dead:
                raise _MixedCoverage(
                    f"reference {e.path!r} covers both removed and kept slots; "
                    f"remove the whole variable instead"
                )
            return r2
        if isinstance(e, K.Unary):
            return K.Unary(e.op, self.expr(e.a))
        if isinstance(e, K.Binary):
            return K.Binary(e.op, self.expr(e.a), self.expr(e.b), e.span)
        if isinstance(e, K.Nary):
            return K.Nary(e.op, tuple(self.expr(it) for it in e.items))
        if isinstance(e, K.Ternary):
            return K.Ternary(self.expr(e.cond), self.expr(e.then), self.expr(e.els))
        if isinstance(e, K.Quant):
            # A removed read indexed by the binder cannot share one placeholder
            # across all binder values, so the quantifier is expanded first and
            # each instance rewritten on its own.  (The placeholder cache still
            # collapses binder-independent reads to a single havoc value.)
            if expr_slots(e.body) & self.dead:
                op = "&&" if e.kind == "forall" else "||"
                items = tuple(
                    self.expr(subst_locals(e.body, {e.var: v}))
                    for v in e.domain
                )
                if not items:
                    return K.Const(1 if e.kind == "forall" else 0)
                return K.Nary(op, items)
            return K.Quant(e.kind, e.var, e.domain, self.expr(e.body))
        raise AssertionError(f"bad expr node {e!r}")


def _placeholder_names(e: K.Expr, names: FrozenSet[str]) -> List[str]:
    found: List[str] = []

    def walk(x):
        if isinstance(x, K.Local):
            if x.name in names and x.name not in found:
                found.append(x.name)
        elif isinstance(x, K.Ref):
            for t in x.terms:
                walk(t.expr)
        elif isinstance(x, K.Unary):
            walk(x.a)
        elif isinstance(x, K.Binary):
            walk(x.a)
            walk(x.b)
        elif isinstance(x, K.Nary):
            for it in x.items:
                walk(it)
        elif isinstance(x, K.Ternary):
            walk(x.cond)
            walk(x.then)
            walk(x.els)
        elif isinstance(x, K.Quant):
            walk(x.body)

    walk(e)
    return found


def _stmt_placeholder_names(st: K.Stmt, names: FrozenSet[str]) -> set:
    if isinstance(st, K.IfStmt):
        out = set(_placeholder_names(st.cond, names))
        for s in list(st.then) + list(st.els):
            out |= _stmt_placeholder_names(s, names)
        return out
    out = set(_placeholder_names(st.expr, names))
    for t in st.target.terms:
        out |= set(_placeholder_names(t.expr, names))
    return out


def _assignments(names: Sequence[str], domains) -> List[Dict[str, int]]:
    ranges = [range(domains[n][0], domains[n][1] + 1) for n in names]
    total = 1
    for r in ranges:
        total *= len(r)
        if total > _EXPANSION_CAP:
            raise ModelTypeError(
                "removed-variable domain too large to expand in an "
                "under-approximation"
            )
    return [dict(zip(names, combo)) for combo in itertools.product(*ranges)]


def _fold_invariant(e: K.Expr, names, domains) -> Optional[K.Expr]:
    """The single folded value of ``e`` over all placeholder assignments,
    or None when the value genuinely depends on a removed variable."""
    used = _placeholder_names(e, frozenset(names))
    if not used:
        return e
    results = {_fold(subst_locals(e, asg)) for asg in _assignments(used, domains)}
    if len(results) == 1:
        return results.pop()
    return None


# --------------------------------------------------------------------------
# update substitution for merge recomputation

_POISON = object()


def _subst_sigma(e: K.Expr, sigma: Dict[int, object]) -> Optional[K.Expr]:
    """Rewrite reads through the symbolic store; None when a read is unresolvable."""
    if isinstance(e, (K.Const, K.Local)):
        return e
    if isinstance(e, K.Ref):
        if not e.terms:
            v = sigma.get(e.base)
            if v is _POISON:
                return None
            return v if v is not None else e
        terms = []
        for t in e.terms:
            t2 = _subst_sigma(t.expr, sigma)
            if t2 is None:
                return None
            terms.append(K.IndexTerm(t2, t.lo, t.hi, t.coef))
        r2 = K.Ref(e.base, tuple(terms), e.path, e.span)
        if K._ref_span(r2) & set(sigma):
            return None  # dynamic read may hit a written slot
        return r2
    if isinstance(e, K.Unary):
        a = _subst_sigma(e.a, sigma)
        return None if a is None else K.Unary(e.op, a)
    if isinstance(e, K.Binary):
        a, b = _subst_sigma(e.a, sigma), _subst_sigma(e.b, sigma)
        return None if a is None or b is None else K.Binary(e.op, a, b, e.span)
    if isinstance(e, K.Nary):
        items = [_subst_sigma(it, sigma) for it in e.items]
        return None if any(i is None for i in items) else K.Nary(e.op, tuple(items))
    if isinstance(e, K.Ternary):
        c = _subst_sigma(e.cond, sigma)
        t = _subst_sigma(e.then, sigma)
        f = _subst_sigma(e.els, sigma)
        return None if None in (c, t, f) else K.Ternary(c, t, f)
    if isinstance(e, K.Quant):
        b = _subst_sigma(e.body, sigma)
        return None if b is None else K.Quant(e.kind, e.var, e.domain, b)
    raise AssertionError(f"bad expr node {e!r}")


def _sigma_after(stmts: Sequence[K.Stmt], sigma: Dict[int, object]) -> Dict[int, object]:
    """Evolve the symbolic store over ``stmts`` (sequential semantics)."""
    sig = dict(sigma)
    for st in stmts:
        if isinstance(st, K.IfStmt):
            cond = _subst_sigma(st.cond, sig)
            cond = _fold(cond) if cond is not None else None
            if cond is None:
                for s in stmt_write_slots(st):
                    sig[s] = _POISON
                continue
            if isinstance(cond, K.Const):
                sig = _sigma_after(st.then if cond.value else st.els, sig)
                continue
            sig_t = _sigma_after(st.then, sig)
            sig_e = _sigma_after(st.els, sig)
            for s in stmt_write_slots(st):
                tv = sig_t.get(s, sig.get(s))
                ev = sig_e.get(s, sig.get(s))
                if tv is None:
                    tv = K.Ref(s, (), "")
                if ev is None:
                    ev = K.Ref(s, (), "")
                if tv is _POISON or ev is _POISON:
                    sig[s] = _POISON
                else:
                    sig[s] = K.Ternary(cond, tv, ev)
            continue
        if st.target.terms:
            span = K._ref_span(st.target)
            if len(span) == 1:
                (slot,) = span
                rhs = _subst_sigma(st.expr, sig)
                sig[slot] = _POISON if rhs is None else rhs
                continue
            for s in span:
                sig[s] = _POISON
            continue
        rhs = _subst_sigma(st.expr, sig)
        if rhs is None:
            sig[st.target.base] = _POISON
        else:
            sig[st.target.base] = rhs
    return sig


def _post_expr(merge_expr: K.Expr, updates: Sequence[K.Stmt]) -> Optional[K.Expr]:
    """The merge definition over the post-state of ``updates``, expressed in
    pre-state reads; None when the update shape defeats substitution."""
    return _subst_sigma(merge_expr, _sigma_after(updates, {}))


# --------------------------------------------------------------------------
# the model transformation


def _anon(e: K.Expr) -> K.Expr:
    """Display-insensitive copy (paths blanked) for structural comparison."""
    if isinstance(e, (K.Const, K.Local)):
        return e
    if isinstance(e, K.Ref):
        return K.Ref(
            e.base,
            tuple(
                K.IndexTerm(_anon(t.expr), t.lo, t.hi, t.coef) for t in e.terms
            ),
            "",
        )
    if isinstance(e, K.Unary):
        return K.Unary(e.op, _anon(e.a))
    if isinstance(e, K.Binary):
        return K.Binary(e.op, _anon(e.a), _anon(e.b))
    if isinstance(e, K.Nary):
        return K.Nary(e.op, tuple(_anon(it) for it in e.items))
    if isinstance(e, K.Ternary):
        return K.Ternary(_anon(e.cond), _anon(e.then), _anon(e.els))
    if isinstance(e, K.Quant):
        return K.Quant(e.kind, e.var, e.domain, _anon(e.body))
    raise AssertionError(f"bad expr node {e!r}")


def _drop_dead_writes(
    stmts: Sequence[K.Stmt],
    dead_write: FrozenSet[int],
    rw: _ReadRewriter,
) -> Tuple[K.Stmt, ...]:
    out: List[K.Stmt] = []
    for st in stmts:
        if isinstance(st, K.IfStmt):
            out.append(
                K.IfStmt(
                    rw.expr(st.cond),
                    _drop_dead_writes(st.then, dead_write, rw),
                    _drop_dead_writes(st.els, dead_write, rw),
                )
            )
            continue
        terms = tuple(
            K.IndexTerm(rw.expr(t.expr), t.lo, t.hi, t.coef)
            for t in st.target.terms
        )
        tgt = K.Ref(st.target.base, terms, st.target.path, st.target.span)
        span = K._ref_span(tgt)
        if span <= dead_write:
            continue
        if span & dead_write:
            raise _MixedCoverage(
                f"assignment to {st.target.path!r} covers both removed and "
                f"kept slots; remove the whole variable instead"
            )
        out.append(K.Assign(tgt, rw.expr(st.expr), st.span))
    return tuple(out)


def _definitely_written(slot: int, updates: Sequence[K.Stmt]) -> bool:
    for st in updates:
        if isinstance(st, K.Assign) and not st.target.terms:
            if st.target.base == slot:
                return True
    return False


def _abstract_edge(
    m: MASGraph,
    spec: AbstractionSpec,
    ai: int,
    agent: AgentInstance,
    e: Edge,
    new_index: int,
) -> Optional[Edge]:
    dead_read = set(spec.dead)
    dead_write = set(spec.dead)
    resets: Tuple[int, ...] = ()
    if ai in spec.scoped:
        locs, slots = spec.scoped[ai]
        src_in = agent.loc_ordinal(e.src) in locs
        dst_in = agent.loc_ordinal(e.target) in locs
        if src_in:
            dead_read |= slots
        if dst_in:
            dead_write |= slots
            if not src_in:
                resets = tuple(sorted(slots))
        if src_in and not dst_in:
            for s in sorted(slots):
                if not _definitely_written(s, e.updates):
                    raise ScopeBoundaryFault(
                        f"variable {m.slots.names[s]!r} leaves its removal "
                        f"scope on edge {e.src}->{e.target} of {agent.name!r} "
                        f"without being rewritten"
                    )
    dead_read_f = frozenset(dead_read)
    dead_write_f = frozenset(dead_write)

    taken = {s.var for s in e.selects}
    rw = _ReadRewriter(m, dead_read_f, taken)

    # merge updates are computed against the *original* update list and run
    # before it, so every read in them still sees the pre-state
    written: set = set()
    for st in e.updates:
        written |= stmt_write_slots(st)
    entries: List[Tuple[MergeSpec, Optional[int], K.Expr]] = []
    for mg in spec.merges:
        if not (written & expr_slots(mg.expr)):
            continue
        post = _post_expr(mg.expr, e.updates)
        rhs: Optional[K.Expr] = None
        source: Optional[int] = None
        if post is not None:
            post = _fold(post)
            ap, a0 = _affine(post), _affine(mg.expr)
            if ap is not None and a0 is not None:
                (cp, mp), (c0, m0) = ap, a0
                diff_c = cp - c0
                diff = {
                    k: mp.get(k, 0) - m0.get(k, 0)
                    for k in set(mp) | set(m0)
                    if mp.get(k, 0) != m0.get(k, 0)
                }
                if not (set(diff) & spec.removed_slots):
                    if diff_c == 0 and not diff:
                        continue  # net effect is zero
                    rhs = _fold(
                        K.Binary(
                            "+",
                            K.Ref(mg.slot, (), mg.name),
                            _affine_expr(diff_c, diff, m),
                        )
                    )
            if rhs is None:
                # A full-root copy makes the post-definition coincide with a
                # sibling merge's definition; that sibling's slot already
                # holds the value (every write reestablishes slot == defining
                # expression), so read it instead of havocking.
                key = _anon(post)
                for mg2 in spec.merges:
                    if mg2.slot != mg.slot and _anon(mg2.expr) == key:
                        rhs = K.Ref(mg2.slot, (), mg2.name)
                        source = mg2.slot
                        break
            if rhs is None:
                rhs = rw.expr(post)
        else:
            # substitution failed; the value is unconstrained here
            if spec.direction == "under":
                return None
            var = rw.fresh(mg.typ.bounds(), str(mg.typ))
            rhs = K.Local(var)
        entries.append((mg, source, rhs))

    # copy entries read their source merge slot at its pre-state value, so
    # anything that reassigns a slot some copy still needs must wait; ties
    # keep declaration order
    merge_upds: List[K.Stmt] = []
    pending = list(entries)
    while pending:
        for idx, (mg, source, rhs) in enumerate(pending):
            needed = any(
                src == mg.slot
                for j, (_, src, _) in enumerate(pending)
                if j != idx
            )
            if not needed:
                merge_upds.append(K.Assign(K.Ref(mg.slot, (), mg.name), rhs))
                pending.pop(idx)
                break
        else:
            # mutual copies: no order reads all pre-states; fall back to havoc
            if spec.direction == "under":
                return None
            for mg, _, _ in pending:
                var = rw.fresh(mg.typ.bounds(), str(mg.typ))
                merge_upds.append(
                    K.Assign(K.Ref(mg.slot, (), mg.name), K.Local(var))
                )
            pending = []

    guard = rw.expr(e.guard) if e.guard is not None else None
    sync = e.sync
    if sync is not None and sync.terms:
        sync = Sync(
            sync.channel,
            sync.base,
            tuple(
                K.IndexTerm(rw.expr(t.expr), t.lo, t.hi, t.coef)
                for t in sync.terms
            ),
            sync.direction,
        )
    user = _drop_dead_writes(e.updates, dead_write_f, rw)

    selects = e.selects
    if rw.order:
        names = frozenset(rw.order)
        if spec.direction == "over":
            # A placeholder nobody but the guard reads does not need to fan
            # the edge out: the edge is enabled iff *some* havoc value passes,
            # which is an existential right in the guard.  Only placeholders
            # whose value flows into the effect become select bindings.
            effect_reads: set = set()
            if sync is not None:
                for t in sync.terms:
                    effect_reads.update(_placeholder_names(t.expr, names))
            for st in list(merge_upds) + list(user):
                effect_reads |= _stmt_placeholder_names(st, names)
            if guard is not None:
                for v in reversed(
                    [v for v in _placeholder_names(guard, names)
                     if v not in effect_reads]
                ):
                    lo, hi = rw.domains[v]
                    guard = K.Quant("exists", v, tuple(range(lo, hi + 1)), guard)
            selects = e.selects + tuple(
                Select(v, rw.display[v], tuple(range(rw.domains[v][0], rw.domains[v][1] + 1)))
                for v in rw.order
                if v in effect_reads
            )
        else:
            if guard is not None:
                used = _placeholder_names(guard, names)
                if used:
                    parts = tuple(
                        _fold(subst_locals(guard, asg))
                        for asg in _assignments(used, rw.domains)
                    )
                    guard = _fold(K.Nary("&&", parts))
            if sync is not None:
                terms2 = []
                for t in sync.terms:
                    inv = _fold_invariant(t.expr, names, rw.domains)
                    if inv is None:
                        return None
                    terms2.append(K.IndexTerm(inv, t.lo, t.hi, t.coef))
                sync = Sync(sync.channel, sync.base, tuple(terms2), sync.direction)
            fixed: List[K.Stmt] = []
            for st in list(merge_upds) + list(user):
                st2 = _stmt_invariant(st, names, rw.domains)
                if st2 is None:
                    return None
                fixed.append(st2)
            merge_upds = fixed[: len(merge_upds)]
            user = tuple(fixed[len(merge_upds):])

    reset_upds = tuple(
        K.Assign(K.Ref(s, (), m.slots.names[s]), K.Const(m.slots.inits[s]))
        for s in resets
    )
    return Edge(
        src=e.src,
        target=e.target,
        selects=selects,
        guard=guard,
        sync=sync,
        updates=tuple(merge_upds) + user + reset_upds,
        index=new_index,
        name=e.name,
    )


def _stmt_invariant(st: K.Stmt, names, domains) -> Optional[K.Stmt]:
    if isinstance(st, K.IfStmt):
        cond = _fold_invariant(st.cond, names, domains)
        if cond is None:
            return None
        then = []
        for s in st.then:
            s2 = _stmt_invariant(s, names, domains)
            if s2 is None:
                return None
            then.append(s2)
        els = []
        for s in st.els:
            s2 = _stmt_invariant(s, names, domains)
            if s2 is None:
                return None
            els.append(s2)
        return K.IfStmt(cond, tuple(then), tuple(els))
    rhs = _fold_invariant(st.expr, names, domains)
    if rhs is None:
        return None
    terms = []
    for t in st.target.terms:
        inv = _fold_invariant(t.expr, names, domains)
        if inv is None:
            return None
        terms.append(K.IndexTerm(inv, t.lo, t.hi, t.coef))
    return K.Assign(
        K.Ref(st.target.base, tuple(terms), st.target.path, st.target.span),
        rhs,
        st.span,
    )


def _pin_bindings(e: Edge) -> List[Edge]:
    """One select-free copy of ``e`` per binding, in binding order."""
    total = 1
    for s in e.selects:
        total *= len(s.domain)
        if total > _EXPANSION_CAP:
            raise ModelTypeError(
                f"select bindings of edge {e.src}->{e.target} are too many "
                f"to pin one by one"
            )
    out: List[Edge] = []
    for env in e.bindings():
        out.append(
            dataclasses.replace(
                e,
                selects=(),
                guard=_fold(subst_locals(e.guard, env))
                if e.guard is not None
                else None,
                sync=dataclasses.replace(
                    e.sync,
                    terms=tuple(
                        K.IndexTerm(subst_locals(t.expr, env), t.lo, t.hi, t.coef)
                        for t in e.sync.terms
                    ),
                )
                if e.sync is not None
                else None,
                updates=tuple(subst_stmt_locals(st, env) for st in e.updates),
            )
        )
    return out


def abstract_model(m: MASGraph, spec: AbstractionSpec) -> MASGraph:
    """The under- or over-approximating model induced by ``spec``."""
    for s in spec.removed_slots:
        if s < m.n_agents:
            raise ModelTypeError("cannot remove an agent's location")

    slots = dataclasses.replace(
        m.slots,
        names=list(m.slots.names),
        types=list(m.slots.types),
        bounds=list(m.slots.bounds),
        inits=list(m.slots.inits),
        owners=list(m.slots.owners),
        kinds=list(m.slots.kinds),
        index=dict(m.slots.index),
    )
    for mg in spec.merges:
        if mg.slot != len(slots):
            raise ModelTypeError(
                f"merge {mg.name!r} was elaborated against a different model"
            )
        lo, hi = mg.typ.bounds()
        slots.add(mg.name, mg.typ, lo, hi, mg.init, None, "merge")

    agents: List[AgentInstance] = []
    for ai, agent in enumerate(m.agents):
        edges: List[Edge] = []
        for e in agent.edges:
            try:
                variants = [_abstract_edge(m, spec, ai, agent, e, 0)]
            except _MixedCoverage:
                if not e.selects:
                    raise
                variants = [
                    _abstract_edge(m, spec, ai, agent, pinned, 0)
                    for pinned in _pin_bindings(e)
                ]
            for e2 in variants:
                if e2 is not None:
                    edges.append(dataclasses.replace(e2, index=len(edges)))
        agents.append(dataclasses.replace(agent, edges=tuple(edges)))

    return MASGraph(
        agents=tuple(agents),
        slots=slots,
        channels=m.channels,
        name=f"{m.name}[{spec.direction}]",
        doc=None,
    )


# --------------------------------------------------------------------------
# the state map and simulation checking


def erasure(m: MASGraph, spec: AbstractionSpec) -> Callable[[GlobalState], GlobalState]:
    """Concrete-to-abstract map: pin removed slots, append merge values."""
    inits = m.slots.inits

    def h(gs: GlobalState) -> GlobalState:
        vals = list(gs.values)
        for s in spec.dead:
            vals[s] = inits[s]
        for ai, (locs, slots) in spec.scoped.items():
            if gs.values[ai] in locs:
                for s in slots:
                    vals[s] = inits[s]
        for mg in spec.merges:
            v = eval_expr(mg.expr, gs.values, {})
            lo, hi = mg.typ.bounds()
            if v < lo or v > hi:
                raise RangeFault(
                    f"merge {mg.name!r} evaluates to {v}, outside {mg.typ}"
                )
            vals.append(v)
        return GlobalState(tuple(vals))

    return h


@dataclass(frozen=True)
class SimulationReport:
    ok: bool
    direction: str
    message: str = ""
    # (concrete state, label or None, expected abstract target) of the failure
    witness: Optional[tuple] = None

    def __bool__(self) -> bool:
        return self.ok


def simulation_check(
    concrete: ExplicitModel,
    abstract: ExplicitModel,
    h: Callable[[GlobalState], GlobalState],
    direction: str,
) -> SimulationReport:
    """Transition containment along ``h`` over two fully unwrapped models.

    ``over``: every concrete transition has an abstract counterpart between
    the mapped states.  ``under``: every abstract transition out of a mapped
    state is matched by some concrete transition.  Serial self-loops on the
    universally quantified side are skipped — they only exist to make the
    successor relation total — but still count as matches on the other side.
    """
    if concrete.truncated or abstract.truncated:
        raise TruncatedModel(
            "simulation_check needs fully unwrapped models on both sides"
        )
    aindex = {s: i for i, s in enumerate(abstract.states)}

    for i, s in enumerate(concrete.states):
        hs = h(s)
        ai = aindex.get(hs)
        if ai is None:
            if direction == "under":
                # the under model explores a subset; states outside it
                # impose no must-transitions
                continue
            return SimulationReport(
                False, direction, f"image state {hs} is not abstract-reachable",
                witness=(s, None, hs),
            )
        asuccs = {abstract.states[j] for _, j in abstract.trans[ai]}
        if direction == "over":
            for lbl, j in concrete.trans[i]:
                if lbl.kind == "serial":
                    continue
                ht = h(concrete.states[j])
                if ht not in asuccs:
                    return SimulationReport(
                        False, direction,
                        f"concrete step {lbl.pretty(concrete.graph)} from "
                        f"state {i} has no abstract counterpart",
                        witness=(s, lbl, ht),
                    )
        else:
            csuccs = {h(concrete.states[j]) for _, j in concrete.trans[i]}
            for albl, aj in abstract.trans[ai]:
                if albl.kind == "serial":
                    continue
                at = abstract.states[aj]
                if at not in csuccs:
                    return SimulationReport(
                        False, direction,
                        f"abstract step {albl.pretty(abstract.graph)} from "
                        f"image of state {i} has no concrete counterpart",
                        witness=(s, albl, at),
                    )
    return SimulationReport(True, direction)


# --------------------------------------------------------------------------
# conclusiveness pairing


def _formula_for(spec: AbstractionSpec, prop: Property) -> Property:
    if prop.name in spec.rewrites:
        return spec.rewrites[prop.name]
    if expr_slots(prop.expr) & spec.removed_slots:
        raise ModelTypeError(
            f"property {prop.name!r} reads removed variables; give the spec "
            f"a rewrite clause for it"
        )
    if prop.rhs is not None and expr_slots(prop.rhs) & spec.removed_slots:
        raise ModelTypeError(
            f"property {prop.name!r} reads removed variables; give the spec "
            f"a rewrite clause for it"
        )
    return prop


def check_with_abstraction(
    m: MASGraph,
    spec_pair: Tuple[Optional[AbstractionSpec], Optional[AbstractionSpec]],
    prop: Property,
    max_states: Optional[int] = None,
    engine: str = "auto",
) -> ConclusiveVerdict:
    """Combine a (must spec, may spec) pair into one conclusive verdict.

    Truth transfers by formula polarity.  For a universal property (A[]) the
    may model simulates every concrete behaviour, so a satisfied run there
    establishes the property, while the must model's behaviours all exist
    concretely, so a counterexample there refutes it.  For E[] the roles
    swap: a witness lasso in the must model exists concretely (establish),
    and its absence from the may model is definitive (refute).  The proving
    side runs first; either side may be None, making the check one-sided.
    Anything else — including a memory-budget stop — is inconclusive.
    """
    if prop.kind not in ("invariant", "exists-globally"):
        raise ModelTypeError(
            f"abstraction checking supports invariant and exists-globally "
            f"properties, not {prop.kind}"
        )
    must_spec, may_spec = spec_pair
    if must_spec is not None and must_spec.direction != "under":
        raise ModelTypeError("first spec of the pair must have direction under")
    if may_spec is not None and may_spec.direction != "over":
        raise ModelTypeError("second spec of the pair must have direction over")
    universal = prop.kind == "invariant"
    proving = may_spec if universal else must_spec
    refuting = must_spec if universal else may_spec

    def run(spec: AbstractionSpec) -> Verdict:
        ag = abstract_model(m, spec)
        return check_property(
            make_engine(ag, engine),
            _formula_for(spec, prop),
            max_states=max_states,
            mode=f"abstract-{spec.direction}",
        )

    evidence: List[Verdict] = []
    if proving is not None:
        v = run(proving)
        evidence.append(v)
        if v.conclusive and v.satisfied:
            return ConclusiveVerdict(
                True, tuple(evidence),
                f"satisfied on the {proving.direction} model",
            )
    if refuting is not None:
        v = run(refuting)
        evidence.append(v)
        if v.conclusive and v.satisfied is False:
            return ConclusiveVerdict(
                False, tuple(evidence),
                f"falsified on the {refuting.direction} model",
            )
    reason = "abstraction inconclusive"
    if any(v.reason == "memout" for v in evidence):
        reason = "memout during abstraction checking"
    return ConclusiveVerdict(None, tuple(evidence), reason)
