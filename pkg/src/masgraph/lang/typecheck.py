"""Elaboration of parsed model documents into executable agent networks.

This module owns name resolution, type resolution, constant folding, function
inlining, select/quantifier domains and the slot layout of the flat state
vector: one location slot per agent (in system order), then shared variables
in declaration order, then each agent's locals in declaration order.

Functions are inlined at call sites (the language has no loops, so this always
terminates once recursion is rejected).  Value-returning functions must be
pure; calling an impure function from a guard raises SideEffectInGuard.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..errors import ModelTypeError, SideEffectInGuard, UnknownChannel
from ..kernel import expr as K
from ..kernel import model as M
from ..kernel import types as T
from . import ast as A


def type_width(t: T.Type) -> int:
    """Number of scalar slots occupied by a value of type ``t``."""
    if T.is_scalar(t):
        return 1
    if isinstance(t, T.RecordType):
        return sum(type_width(ft) for _, ft in t.fields)
    if isinstance(t, T.ArrayType):
        return len(T.index_values(t.index)) * type_width(t.elem)
    raise TypeError(f"no width for {t!r}")


def instance_name(template: str, values: Tuple[int, ...], ptypes=()) -> str:
    """Canonical agent-instance name, shared by system expansion and queries."""
    if not values:
        return template
    parts = []
    for i, v in enumerate(values):
        pt = ptypes[i] if i < len(ptypes) else None
        if isinstance(pt, T.EnumType):
            parts.append(pt.labels[v])
        else:
            parts.append(str(v))
    return f"{template}({','.join(parts)})"


# --------------------------------------------------------------------------
# surface-level substitution (function inlining)


def _subst_expr(e: A.SurfExpr, sub: Dict[str, A.SurfExpr]) -> A.SurfExpr:
    if isinstance(e, (A.EInt, A.EBool)):
        return e
    if isinstance(e, A.EName):
        return sub.get(e.name, e)
    if isinstance(e, A.EField):
        return A.EField(_subst_expr(e.base, sub), e.field, span=e.span)
    if isinstance(e, A.EIndex):
        return A.EIndex(_subst_expr(e.base, sub), _subst_expr(e.index, sub), span=e.span)
    if isinstance(e, A.ECall):
        return A.ECall(e.name, tuple(_subst_expr(a, sub) for a in e.args), span=e.span)
    if isinstance(e, A.EUnary):
        return A.EUnary(e.op, _subst_expr(e.operand, sub), span=e.span)
    if isinstance(e, A.EBinary):
        return A.EBinary(e.op, _subst_expr(e.left, sub), _subst_expr(e.right, sub), span=e.span)
    if isinstance(e, A.ETernary):
        return A.ETernary(
            _subst_expr(e.cond, sub), _subst_expr(e.then, sub), _subst_expr(e.els, sub),
            span=e.span,
        )
    if isinstance(e, A.EQuant):
        inner = {k: v for k, v in sub.items() if k != e.var}
        return A.EQuant(e.kind, e.var, e.type, _subst_expr(e.body, inner), span=e.span)
    raise TypeError(f"cannot substitute in {e!r}")


def _subst_stmt(s: A.SurfStmt, sub: Dict[str, A.SurfExpr]):
    if isinstance(s, A.SAssign):
        return A.SAssign(_subst_expr(s.target, sub), _subst_expr(s.value, sub), span=s.span)
    if isinstance(s, A.SCall):
        return A.SCall(s.name, tuple(_subst_expr(a, sub) for a in s.args), span=s.span)
    if isinstance(s, A.SReturn):
        return A.SReturn(_subst_expr(s.value, sub), span=s.span)
    if isinstance(s, A.SIf):
        return A.SIf(
            _subst_expr(s.cond, sub),
            tuple(_subst_stmt(x, sub) for x in s.then),
            tuple(_subst_stmt(x, sub) for x in s.els),
            span=s.span,
        )
    if isinstance(s, A.SSwitch):
        return A.SSwitch(
            _subst_expr(s.subject, sub),
            tuple(
                (None if lb is None else _subst_expr(lb, sub),
                 tuple(_subst_stmt(x, sub) for x in body))
                for lb, body in s.cases
            ),
            span=s.span,
        )
    raise TypeError(f"cannot substitute in {s!r}")


def _assigned_names(stmts) -> set:
    """Names whose assignment targets are rooted at a plain identifier."""
    out = set()

    def root(e):
        while isinstance(e, (A.EField, A.EIndex)):
            e = e.base
        return e.name if isinstance(e, A.EName) else None

    def walk(ss):
        for s in ss:
            if isinstance(s, A.SAssign):
                r = root(s.target)
                if r:
                    out.add(r)
            elif isinstance(s, A.SIf):
                walk(s.then)
                walk(s.els)
            elif isinstance(s, A.SSwitch):
                for _, body in s.cases:
                    walk(body)

    walk(stmts)
    return out


# --------------------------------------------------------------------------
# elaboration context


@dataclass
class InstanceInfo:
    name: str
    template: str
    ordinal: int  # agent index == location slot index
    params: Dict[str, int]
    ptypes: Tuple[T.Type, ...]
    locals: Dict[str, Tuple[int, T.Type]]  # var name -> (slot base, type)


@dataclass
class ModelContext:
    """Everything downstream passes need besides the kernel graph itself."""

    graph: M.MASGraph
    doc: A.ModelDocument
    consts: Dict[str, int] = field(default_factory=dict)
    types: Dict[str, T.Type] = field(default_factory=dict)
    enum_labels: Dict[str, Tuple[T.EnumType, int]] = field(default_factory=dict)
    functions: Dict[str, A.DFunc] = field(default_factory=dict)
    templates: Dict[str, A.DTemplate] = field(default_factory=dict)
    globals: Dict[str, Tuple[int, T.Type]] = field(default_factory=dict)
    instances: Dict[str, InstanceInfo] = field(default_factory=dict)
    var_types: Dict[str, T.Type] = field(default_factory=dict)  # declared shapes

    def lower_query_expr(self, e: A.SurfExpr) -> K.Expr:
        low = _Lower(self, ctx="query")
        return low.expr(e)


class Elaborator:
    def __init__(self, doc: A.ModelDocument):
        self.doc = doc
        self.consts: Dict[str, int] = {}
        self.types: Dict[str, T.Type] = {}
        self.enum_labels: Dict[str, Tuple[T.EnumType, int]] = {}
        self.channels: Dict[str, M.ChannelDecl] = {}
        self.functions: Dict[str, A.DFunc] = {}
        self.templates: Dict[str, A.DTemplate] = {}
        self.global_decls: List[Tuple[str, T.Type, object]] = []  # name, type, init
        self.system: Optional[A.DSystem] = None
        self._names: set = set()  # one shared declaration namespace
        self._chan_base = 0
        self._fn_impure: Dict[str, bool] = {}

    # -- shared helpers ----------------------------------------------------

    def _declare(self, name: str, what: str, span):
        if name in self._names:
            raise ModelTypeError(f"duplicate declaration of {name!r} ({what})", span)
        self._names.add(name)

    def const_eval(self, e: A.SurfExpr, env: Dict[str, int]) -> int:
        if isinstance(e, A.EInt):
            return e.value
        if isinstance(e, A.EBool):
            return int(e.value)
        if isinstance(e, A.EName):
            if e.name in env:
                return env[e.name]
            if e.name in self.consts:
                return self.consts[e.name]
            if e.name in self.enum_labels:
                return self.enum_labels[e.name][1]
            raise ModelTypeError(f"{e.name!r} is not a constant", e.span)
        if isinstance(e, A.EUnary):
            v = self.const_eval(e.operand, env)
            return -v if e.op == "-" else int(not v)
        if isinstance(e, A.EBinary):
            a = self.const_eval(e.left, env)
            if e.op == "&&":
                return int(bool(a) and bool(self.const_eval(e.right, env)))
            if e.op == "||":
                return int(bool(a) or bool(self.const_eval(e.right, env)))
            if e.op == "imply":
                return int(not a or bool(self.const_eval(e.right, env)))
            b = self.const_eval(e.right, env)
            if e.op in ("/", "%") and b == 0:
                raise ModelTypeError("division by zero in constant expression", e.span)
            return {
                "+": lambda: a + b, "-": lambda: a - b, "*": lambda: a * b,
                "/": lambda: K.c_div(a, b), "%": lambda: K.c_mod(a, b),
                "==": lambda: int(a == b), "!=": lambda: int(a != b),
                "<": lambda: int(a < b), "<=": lambda: int(a <= b),
                ">": lambda: int(a > b), ">=": lambda: int(a >= b),
            }[e.op]()
        if isinstance(e, A.ETernary):
            return (
                self.const_eval(e.then, env)
                if self.const_eval(e.cond, env)
                else self.const_eval(e.els, env)
            )
        raise ModelTypeError("expression is not compile-time constant", getattr(e, "span", None))

    def resolve_type(self, te: A.TypeExpr, env: Dict[str, int]) -> T.Type:
        if isinstance(te, A.TBool):
            return T.BOOL
        if isinstance(te, A.TIntRange):
            lo = self.const_eval(te.lo, env)
            hi = self.const_eval(te.hi, env)
            if lo > hi:
                raise ModelTypeError(f"empty integer range int[{lo},{hi}]", te.span)
            return T.IntType(lo, hi)
        if isinstance(te, A.TInt):
            raise ModelTypeError(
                "unbounded 'int' is only allowed for constants", te.span
            )
        if isinstance(te, A.TName):
            t = self.types.get(te.name)
            if t is None:
                raise ModelTypeError(f"unknown type {te.name!r}", te.span)
            return t
        raise ModelTypeError(f"not a type: {te!r}", getattr(te, "span", None))

    def resolve_index(self, te: A.TypeExpr, env: Dict[str, int]):
        """Array/channel dimension -> scalar index type."""
        if isinstance(te, A.TSize):
            n = self.const_eval(te.size, env)
            if n < 1:
                raise ModelTypeError(f"array size must be positive, got {n}", te.span)
            return T.IntType(0, n - 1)
        if isinstance(te, A.TName) and te.name not in self.types:
            # a constant used as an element count
            if te.name in self.consts:
                n = self.consts[te.name]
                if n < 1:
                    raise ModelTypeError(
                        f"array size must be positive, got {n}", te.span
                    )
                return T.IntType(0, n - 1)
        t = self.resolve_type(te, env)
        if isinstance(t, T.BoolType):
            return T.IntType(0, 1)
        if not isinstance(t, (T.IntType, T.EnumType)):
            raise ModelTypeError("array index type must be scalar", te.span)
        return t

    def var_type(self, te: A.TypeExpr, decl: A.Declarator, env: Dict[str, int]) -> T.Type:
        t = self.resolve_type(te, env)
        for d in reversed(decl.dims):
            t = T.ArrayType(t, self.resolve_index(d, env))
        return t

    def check_fits(self, t: T.Type, value: int, span, what: str):
        lo, hi = t.bounds()
        if not lo <= value <= hi:
            raise ModelTypeError(
                f"{what}: value {value} outside {t} range [{lo},{hi}]", span
            )

    def structured_init(self, t: T.Type, init, env, span, what: str):
        """Surface initializer -> nested int tuple matching flatten order."""
        if init is None:
            return T.default_init(t)
        if T.is_scalar(t):
            if isinstance(init, tuple):
                raise ModelTypeError(f"{what}: initializer list for scalar {t}", span)
            v = self.const_eval(init, env)
            self.check_fits(t, v, span, what)
            return v
        if not isinstance(init, tuple):
            raise ModelTypeError(f"{what}: {t} needs an initializer list", span)
        if isinstance(t, T.RecordType):
            if len(init) != len(t.fields):
                raise ModelTypeError(
                    f"{what}: initializer has {len(init)} elements, "
                    f"{t} has {len(t.fields)} fields", span
                )
            return tuple(
                self.structured_init(ft, sub, env, span, f"{what}.{fn}")
                for (fn, ft), sub in zip(t.fields, init)
            )
        n = len(T.index_values(t.index))
        if len(init) != n:
            raise ModelTypeError(
                f"{what}: initializer has {len(init)} elements, array has {n}", span
            )
        return tuple(
            self.structured_init(t.elem, sub, env, span, f"{what}[{i}]")
            for i, sub in enumerate(init)
        )

    def fn_impure(self, name: str, _seen=None) -> bool:
        """True when the function (transitively) performs assignments."""
        if name in self._fn_impure:
            return self._fn_impure[name]
        seen = _seen or set()
        if name in seen:
            return False  # recursion is rejected separately, at inline time
        seen = seen | {name}
        f = self.functions[name]
        impure = False

        def walk_expr(e):
            nonlocal impure
            if isinstance(e, A.ECall):
                if e.name in self.functions and self.fn_impure(e.name, seen):
                    impure = True
                for a in e.args:
                    walk_expr(a)
            elif isinstance(e, A.EUnary):
                walk_expr(e.operand)
            elif isinstance(e, A.EBinary):
                walk_expr(e.left), walk_expr(e.right)
            elif isinstance(e, A.ETernary):
                walk_expr(e.cond), walk_expr(e.then), walk_expr(e.els)
            elif isinstance(e, A.EQuant):
                walk_expr(e.body)
            elif isinstance(e, (A.EField, A.EIndex)):
                walk_expr(e.base)
                if isinstance(e, A.EIndex):
                    walk_expr(e.index)

        def walk(ss):
            nonlocal impure
            for s in ss:
                if isinstance(s, A.SAssign):
                    impure = True
                elif isinstance(s, A.SCall):
                    impure = True  # statement call = effect position
                elif isinstance(s, A.SReturn):
                    walk_expr(s.value)
                elif isinstance(s, A.SIf):
                    walk_expr(s.cond), walk(s.then), walk(s.els)
                elif isinstance(s, A.SSwitch):
                    walk_expr(s.subject)
                    for _, body in s.cases:
                        walk(body)

        walk(f.body)
        self._fn_impure[name] = impure
        return impure

    # -- pass 1: collect declarations --------------------------------------

    def collect(self):
        for d in self.doc.decls:
            if isinstance(d, A.DConst):
                self._declare(d.name, "constant", d.span)
                v = self.const_eval(d.value, {})
                if not isinstance(d.type, A.TInt):
                    t = self.resolve_type(d.type, {})
                    if not T.is_scalar(t):
                        raise ModelTypeError("constants must be scalar", d.span)
                    self.check_fits(t, v, d.span, f"const {d.name}")
                self.consts[d.name] = v
            elif isinstance(d, A.DTypedef):
                self._declare(d.name, "type", d.span)
                if d.enum is not None:
                    et = T.EnumType(d.name, d.enum)
                    for i, lb in enumerate(d.enum):
                        self._declare(lb, "enum label", d.span)
                        self.enum_labels[lb] = (et, i)
                    self.types[d.name] = et
                elif d.record is not None:
                    fields = []
                    fnames = set()
                    for f in d.record:
                        if f.declarator.name in fnames:
                            raise ModelTypeError(
                                f"duplicate field {f.declarator.name!r} in {d.name}",
                                f.span,
                            )
                        fnames.add(f.declarator.name)
                        fields.append(
                            (f.declarator.name, self.var_type(f.type, f.declarator, {}))
                        )
                    self.types[d.name] = T.RecordType(d.name, tuple(fields))
                else:
                    self.types[d.name] = self.resolve_type(d.alias, {})
            elif isinstance(d, A.DChan):
                self._declare(d.name, "channel", d.span)
                shape = tuple(
                    self.resolve_index(dim, {}).bounds() for dim in d.dims
                )
                self.channels[d.name] = M.ChannelDecl(d.name, self._chan_base, shape)
                self._chan_base += self.channels[d.name].count
            elif isinstance(d, A.DFunc):
                self._declare(d.name, "function", d.span)
                self.functions[d.name] = d
            elif isinstance(d, A.DVar):
                self._declare(d.declarator.name, "variable", d.span)
                t = self.var_type(d.type, d.declarator, {})
                self.global_decls.append((d.declarator.name, t, d.init, d.span))
            elif isinstance(d, A.DTemplate):
                self._declare(d.name, "template", d.span)
                seen = set()
                for loc in d.locations:
                    if loc.name in seen:
                        raise ModelTypeError(
                            f"duplicate location {loc.name!r} in {d.name}", loc.span
                        )
                    seen.add(loc.name)
                inits = [l for l in d.locations if l.init]
                if len(inits) != 1:
                    raise ModelTypeError(
                        f"template {d.name} must declare exactly one init location",
                        d.span,
                    )
                self.templates[d.name] = d
            elif isinstance(d, A.DSystem):
                if self.system is not None:
                    raise ModelTypeError("more than one system line", d.span)
                self.system = d
        if self.system is None:
            raise ModelTypeError("missing system line", None)

    # -- pass 2: system expansion ------------------------------------------

    def expand_system(self) -> List[Tuple[str, A.DTemplate, Dict[str, int], Tuple]]:
        out = []
        names = set()

        def add(tname, span, values):
            tpl = self.templates.get(tname)
            if tpl is None:
                raise ModelTypeError(f"unknown template {tname!r}", span)
            ptypes = tuple(
                self.resolve_type(p.type, {}) for p in tpl.params
            )
            for pt, v, p in zip(ptypes, values, tpl.params):
                if not T.is_scalar(pt):
                    raise ModelTypeError("template parameters must be scalar", p.span)
                self.check_fits(pt, v, span, f"{tname} parameter {p.name}")
            nm = instance_name(tname, values, ptypes)
            if nm in names:
                raise ModelTypeError(f"duplicate agent instance {nm}", span)
            names.add(nm)
            out.append((nm, tpl, dict(zip((p.name for p in tpl.params), values)), ptypes))

        for item in self.system.items:
            if isinstance(item, A.ECall):
                tpl = self.templates.get(item.name)
                if tpl is None:
                    raise ModelTypeError(f"unknown template {item.name!r}", item.span)
                if len(item.args) != len(tpl.params):
                    raise ModelTypeError(
                        f"{item.name} takes {len(tpl.params)} parameters, "
                        f"got {len(item.args)}", item.span
                    )
                values = tuple(self.const_eval(a, {}) for a in item.args)
                add(item.name, item.span, values)
            elif isinstance(item, A.EName):
                tpl = self.templates.get(item.name)
                if tpl is None:
                    raise ModelTypeError(f"unknown template {item.name!r}", item.span)
                if not tpl.params:
                    add(item.name, item.span, ())
                else:
                    ptypes = [self.resolve_type(p.type, {}) for p in tpl.params]
                    for pt, p in zip(ptypes, tpl.params):
                        if not T.is_scalar(pt):
                            raise ModelTypeError(
                                "template parameters must be scalar", p.span
                            )
                    for combo in itertools.product(*(pt.values() for pt in ptypes)):
                        add(item.name, item.span, tuple(combo))
            else:
                raise ModelTypeError("system items must be template instantiations",
                                     getattr(item, "span", None))
        return out

    # -- pass 3: slots and lowering ----------------------------------------

    def elaborate(self) -> ModelContext:
        self.collect()
        expansion = self.expand_system()

        slots = M.SlotTable()
        # location slots first, in system order
        for nm, tpl, _, _ in expansion:
            n = len(tpl.locations)
            init_ord = next(i for i, l in enumerate(tpl.locations) if l.init)
            slots.add(nm, T.IntType(0, n - 1), 0, n - 1, init_ord, nm, "loc")

        ctx = ModelContext(graph=None, doc=self.doc)
        ctx.consts = self.consts
        ctx.types = self.types
        ctx.enum_labels = self.enum_labels
        ctx.functions = self.functions
        ctx.templates = self.templates

        # shared variables
        for name, t, init, span in self.global_decls:
            base = len(slots)
            sinit = self.structured_init(t, init, {}, span, name)
            for (path, st), v in zip(T.flatten(name, t), T.flatten_init(t, sinit)):
                lo, hi = st.bounds()
                slots.add(path, st, lo, hi, v, None, "shared")
            ctx.globals[name] = (base, t)
            ctx.var_types[name] = t

        # agent locals
        infos: List[InstanceInfo] = []
        for ordinal, (nm, tpl, params, ptypes) in enumerate(expansion):
            info = InstanceInfo(nm, tpl.name, ordinal, params, ptypes, {})
            local_names = set(p.name for p in tpl.params)
            for v in tpl.decls:
                if v.declarator.name in local_names:
                    raise ModelTypeError(
                        f"duplicate declaration of {v.declarator.name!r} in {tpl.name}",
                        v.span,
                    )
                local_names.add(v.declarator.name)
                t = self.var_type(v.type, v.declarator, params)
                base = len(slots)
                sinit = self.structured_init(
                    t, v.init, params, v.span, f"{nm}.{v.declarator.name}"
                )
                prefix = f"{nm}.{v.declarator.name}"
                for (path, st), val in zip(T.flatten(prefix, t), T.flatten_init(t, sinit)):
                    lo, hi = st.bounds()
                    slots.add(path, st, lo, hi, val, nm, "local")
                info.locals[v.declarator.name] = (base, t)
                ctx.var_types[prefix] = t
            for loc in tpl.locations:
                if loc.name in local_names:
                    raise ModelTypeError(
                        f"{tpl.name}: location {loc.name!r} collides with a variable",
                        loc.span,
                    )
            infos.append(info)
            ctx.instances[nm] = info

        # lower templates against the finished slot table
        agents = []
        for info, (nm, tpl, params, _) in zip(infos, expansion):
            low = _Lower(ctx, ctx="guard", elab=self, instance=info)
            init_cond = low.expr(tpl.require) if tpl.require is not None else None
            loc_names = tuple(l.name for l in tpl.locations)
            committed = frozenset(l.name for l in tpl.locations if l.committed)
            edges = []
            for i, e in enumerate(tpl.edges):
                edges.append(self.lower_edge(ctx, info, e, i, loc_names))
            agents.append(
                M.AgentInstance(
                    name=nm,
                    template=tpl.name,
                    locations=loc_names,
                    init_loc=next(i for i, l in enumerate(tpl.locations) if l.init),
                    committed=committed,
                    edges=tuple(edges),
                    init_cond=init_cond,
                )
            )

        graph = M.MASGraph(
            agents=tuple(agents),
            slots=slots,
            channels=self.channels,
            name=self.doc.name,
            doc=self.doc,
        )
        ctx.graph = graph
        return ctx

    def lower_edge(self, ctx, info, e: A.EdgeDecl, index: int, loc_names) -> M.Edge:
        if e.src not in loc_names:
            raise ModelTypeError(f"unknown source location {e.src!r}", e.span)
        if e.dst not in loc_names:
            raise ModelTypeError(f"unknown target location {e.dst!r}", e.span)
        selects = []
        binders = []
        for sname, ste in e.selects:
            st = self.resolve_type(ste, info.params)
            if not T.is_scalar(st):
                raise ModelTypeError("select variable must have scalar type", e.span)
            if sname in binders:
                raise ModelTypeError(f"duplicate select variable {sname!r}", e.span)
            binders.append(sname)
            selects.append(M.Select(sname, str(st), tuple(st.values())))

        glow = _Lower(ctx, ctx="guard", elab=self, instance=info, binders=binders)
        guard = glow.expr(e.guard) if e.guard is not None else None

        sync = None
        if e.sync is not None:
            ch = self.channels.get(e.sync.channel)
            if ch is None:
                raise UnknownChannel(
                    f"unknown channel {e.sync.channel!r}", e.sync.span
                )
            if len(e.sync.indices) != len(ch.shape):
                raise ModelTypeError(
                    f"channel {ch.name} has {len(ch.shape)} dimensions, "
                    f"got {len(e.sync.indices)}", e.sync.span
                )
            base = ch.base
            terms = []
            coef = ch.count
            for (lo, hi), ie in zip(ch.shape, e.sync.indices):
                coef //= (hi - lo + 1)
                ik = glow.expr(ie)
                if isinstance(ik, K.Const):
                    if not lo <= ik.value <= hi:
                        raise ModelTypeError(
                            f"channel index {ik.value} outside [{lo},{hi}]",
                            e.sync.span,
                        )
                    base += coef * (ik.value - lo)
                else:
                    terms.append(K.IndexTerm(ik, lo, hi, coef))
            sync = M.Sync(ch.name, base, tuple(terms), e.sync.direction)

        ulow = _Lower(ctx, ctx="update", elab=self, instance=info, binders=binders)
        updates = tuple(ulow.stmts(e.updates))
        return M.Edge(
            src=e.src,
            target=e.dst,
            selects=tuple(selects),
            guard=guard,
            sync=sync,
            updates=updates,
            index=index,
        )


# --------------------------------------------------------------------------
# expression / statement lowering


@dataclass
class _Cursor:
    base: int
    terms: List[K.IndexTerm]
    type: T.Type
    path: str


class _Lower:
    """Lowers surface expressions to kernel form against a ModelContext.

    ``ctx`` is 'guard', 'update' or 'query'; guards and queries reject
    side-effecting calls.  In query mode, agent-qualified names
    (``Voter(1).marked``) resolve to location atoms or local variables.
    """

    def __init__(self, mctx: ModelContext, ctx: str, elab: Elaborator = None,
                 instance: InstanceInfo = None, binders=None):
        self.m = mctx
        self.ctx = ctx
        self.elab = elab
        self.instance = instance
        self.binders = list(binders or [])
        self.inline_stack: List[str] = []

    # convenience accessors (elaborator when lowering a model, context after)
    @property
    def consts(self):
        return self.m.consts

    @property
    def functions(self):
        return self.m.functions

    def _const_eval(self, e, env=None):
        elab = self.elab or _ctx_elab(self.m)
        params = self.instance.params if self.instance else {}
        return elab.const_eval(e, {**params, **(env or {})})

    def _resolve_type(self, te):
        elab = self.elab or _ctx_elab(self.m)
        return elab.resolve_type(te, self.instance.params if self.instance else {})

    def _fn_impure(self, name):
        elab = self.elab or _ctx_elab(self.m)
        return elab.fn_impure(name)

    # -- name & reference resolution ---------------------------------------

    def _var_cursor(self, name: str, span) -> Optional[_Cursor]:
        if self.instance and name in self.instance.locals:
            base, t = self.instance.locals[name]
            return _Cursor(base, [], t, f"{self.instance.name}.{name}")
        if name in self.m.globals:
            base, t = self.m.globals[name]
            return _Cursor(base, [], t, name)
        return None

    def _agent_head(self, e) -> Optional[InstanceInfo]:
        if self.ctx != "query":
            return None
        if isinstance(e, A.EName):
            return self.m.instances.get(e.name)
        if isinstance(e, A.ECall) and e.name in self.m.templates:
            try:
                values = tuple(self._const_eval(a) for a in e.args)
            except ModelTypeError:
                return None
            tpl = self.m.templates[e.name]
            elab = self.elab or _ctx_elab(self.m)
            ptypes = tuple(elab.resolve_type(p.type, {}) for p in tpl.params)
            nm = instance_name(e.name, values, ptypes)
            inst = self.m.instances.get(nm)
            if inst is None:
                raise ModelTypeError(f"no agent instance {nm}", e.span)
            return inst
        return None

    def ref(self, e: A.SurfExpr) -> _Cursor:
        if isinstance(e, A.EName):
            if e.name in self.binders:
                raise ModelTypeError(
                    f"{e.name!r} is a binding, not a variable", e.span
                )
            cur = self._var_cursor(e.name, e.span)
            if cur is None:
                raise ModelTypeError(f"{e.name!r} is not a variable", e.span)
            return cur
        if isinstance(e, A.EField):
            head = self._agent_head(e.base)
            if head is not None:
                agent = self.m.graph.agents[head.ordinal]
                if e.field in agent.locations:
                    raise ModelTypeError(
                        f"location {head.name}.{e.field} is not a value", e.span
                    )
                if e.field in head.locals:
                    base, t = head.locals[e.field]
                    return _Cursor(base, [], t, f"{head.name}.{e.field}")
                raise ModelTypeError(
                    f"{head.name} has no location or variable {e.field!r}", e.span
                )
            cur = self.ref(e.base)
            if not isinstance(cur.type, T.RecordType):
                raise ModelTypeError(f"{cur.path} is not a record", e.span)
            off = 0
            for fn, ft in cur.type.fields:
                if fn == e.field:
                    cur.base += off
                    cur.type = ft
                    cur.path += f".{e.field}"
                    return cur
                off += type_width(ft)
            raise ModelTypeError(f"{cur.type} has no field {e.field!r}", e.span)
        if isinstance(e, A.EIndex):
            cur = self.ref(e.base)
            if not isinstance(cur.type, T.ArrayType):
                raise ModelTypeError(f"{cur.path} is not an array", e.span)
            idx = cur.type.index
            lo, hi = (0, 1) if isinstance(idx, T.BoolType) else idx.bounds()
            w = type_width(cur.type.elem)
            ik = self.expr(e.index)
            if isinstance(ik, K.Const):
                if not lo <= ik.value <= hi:
                    raise ModelTypeError(
                        f"index {ik.value} outside [{lo},{hi}] for {cur.path}", e.span
                    )
                cur.base += w * (ik.value - lo)
                if isinstance(idx, T.EnumType):
                    cur.path += f"[{idx.labels[ik.value]}]"
                else:
                    cur.path += f"[{ik.value}]"
            else:
                cur.terms.append(K.IndexTerm(ik, lo, hi, w))
                cur.path += "[?]"
            cur.type = cur.type.elem
            return cur
        raise ModelTypeError("expected a variable reference", getattr(e, "span", None))

    def _scalar_ref(self, e) -> K.Ref:
        cur = self.ref(e)
        if not T.is_scalar(cur.type):
            raise ModelTypeError(
                f"{cur.path} has aggregate type {cur.type}; expected a scalar",
                getattr(e, "span", None),
            )
        return K.Ref(cur.base, tuple(cur.terms), cur.path, getattr(e, "span", None))

    # -- expressions --------------------------------------------------------

    def expr(self, e: A.SurfExpr) -> K.Expr:
        if isinstance(e, A.EInt):
            return K.Const(e.value)
        if isinstance(e, A.EBool):
            return K.Const(int(e.value))
        if isinstance(e, A.EName):
            if e.name in self.binders:
                return K.Local(e.name)
            if self.instance and e.name in self.instance.params:
                return K.Const(self.instance.params[e.name])
            if self.instance and e.name in self.instance.locals:
                return self._scalar_ref(e)
            if e.name in self.consts:
                return K.Const(self.consts[e.name])
            if e.name in self.m.enum_labels:
                return K.Const(self.m.enum_labels[e.name][1])
            if e.name in self.m.globals:
                return self._scalar_ref(e)
            raise ModelTypeError(f"unknown name {e.name!r}", e.span)
        if isinstance(e, (A.EField, A.EIndex)):
            if isinstance(e, A.EField):
                head = self._agent_head(e.base)
                if head is not None:
                    agent = self.m.graph.agents[head.ordinal]
                    if e.field in agent.locations:
                        ord_ = agent.loc_ordinal(e.field)
                        loc_ref = K.Ref(head.ordinal, (), head.name, e.span)
                        return K.Binary("==", loc_ref, K.Const(ord_), e.span)
            return self._scalar_ref(e)
        if isinstance(e, A.ECall):
            if e.name in self.m.templates and self.ctx == "query":
                raise ModelTypeError(
                    f"agent reference {e.name}(...) must select a location "
                    "or variable", e.span
                )
            return self._inline_value_call(e)
        if isinstance(e, A.EUnary):
            return K.Unary(e.op, self.expr(e.operand))
        if isinstance(e, A.EBinary):
            if e.op in ("&&", "||"):
                return K.Nary(e.op, (self.expr(e.left), self.expr(e.right)))
            if e.op == "imply":
                return K.Nary("||", (K.Unary("!", self.expr(e.left)), self.expr(e.right)))
            return K.Binary(e.op, self.expr(e.left), self.expr(e.right), e.span)
        if isinstance(e, A.ETernary):
            return K.Ternary(self.expr(e.cond), self.expr(e.then), self.expr(e.els))
        if isinstance(e, A.EQuant):
            t = self._resolve_type(e.type)
            if not T.is_scalar(t):
                raise ModelTypeError("quantifier domain must be scalar", e.span)
            self.binders.append(e.var)
            try:
                body = self.expr(e.body)
            finally:
                self.binders.pop()
            return K.Quant(e.kind, e.var, tuple(t.values()), body)
        raise ModelTypeError(f"cannot lower {e!r}", getattr(e, "span", None))

    def _inline_value_call(self, e: A.ECall) -> K.Expr:
        f = self.functions.get(e.name)
        if f is None:
            raise ModelTypeError(f"unknown function {e.name!r}", e.span)
        if e.name in self.inline_stack:
            raise ModelTypeError(
                f"recursive call of {e.name!r} is not allowed", e.span
            )
        if f.ret is None or self._fn_impure(e.name):
            if self.ctx in ("guard", "query"):
                where = "guard" if self.ctx == "guard" else "property"
                raise SideEffectInGuard(
                    f"call of side-effecting function {e.name!r} in a {where}",
                    e.span,
                )
            raise ModelTypeError(
                f"side-effecting function {e.name!r} used in an expression", e.span
            )
        if len(e.args) != len(f.params):
            raise ModelTypeError(
                f"{e.name} takes {len(f.params)} arguments, got {len(e.args)}",
                e.span,
            )
        if _assigned_names(f.body) & {p.name for p in f.params}:
            raise ModelTypeError(
                f"{e.name}: assignment to a parameter is not allowed", e.span
            )
        sub = dict(zip((p.name for p in f.params), e.args))
        body = _returnify(list(f.body), e.name, e.span)
        self.inline_stack.append(e.name)
        try:
            return self.expr(_subst_expr(body, sub))
        finally:
            self.inline_stack.pop()

    # -- statements ---------------------------------------------------------

    def stmts(self, ss) -> List[K.Stmt]:
        out: List[K.Stmt] = []
        for s in ss:
            out.extend(self.stmt(s))
        return out

    def stmt(self, s: A.SurfStmt) -> List[K.Stmt]:
        if isinstance(s, A.SAssign):
            target = self._scalar_ref(s.target)
            return [K.Assign(target, self.expr(s.value), s.span)]
        if isinstance(s, A.SCall):
            return self._inline_void_call(s)
        if isinstance(s, A.SIf):
            return [
                K.IfStmt(
                    self.expr(s.cond),
                    tuple(self.stmts(s.then)),
                    tuple(self.stmts(s.els)),
                )
            ]
        if isinstance(s, A.SSwitch):
            subject = self.expr(s.subject)
            default: Tuple[K.Stmt, ...] = ()
            arms = []
            for label, body in s.cases:
                if label is None:
                    default = tuple(self.stmts(body))
                else:
                    arms.append((self.expr(label), tuple(self.stmts(body))))
            chain: Tuple[K.Stmt, ...] = default
            for label_k, body_k in reversed(arms):
                chain = (
                    K.IfStmt(K.Binary("==", subject, label_k, s.span), body_k, chain),
                )
            return list(chain)
        if isinstance(s, A.SReturn):
            raise ModelTypeError("'return' outside a value function", s.span)
        raise ModelTypeError(f"cannot lower {s!r}", getattr(s, "span", None))

    def _inline_void_call(self, s: A.SCall) -> List[K.Stmt]:
        f = self.functions.get(s.name)
        if f is None:
            raise ModelTypeError(f"unknown function {s.name!r}", s.span)
        if f.ret is not None:
            raise ModelTypeError(
                f"result of {s.name!r} is discarded; call it in an expression",
                s.span,
            )
        if s.name in self.inline_stack:
            raise ModelTypeError(
                f"recursive call of {s.name!r} is not allowed", s.span
            )
        if len(s.args) != len(f.params):
            raise ModelTypeError(
                f"{s.name} takes {len(f.params)} arguments, got {len(s.args)}",
                s.span,
            )
        if _assigned_names(f.body) & {p.name for p in f.params}:
            raise ModelTypeError(
                f"{s.name}: assignment to a parameter is not allowed", s.span
            )
        sub = dict(zip((p.name for p in f.params), s.args))
        for st in f.body:
            if isinstance(st, A.SReturn):
                raise ModelTypeError(
                    f"'return' in void function {s.name!r}", st.span
                )
        self.inline_stack.append(s.name)
        try:
            return self.stmts([_subst_stmt(st, sub) for st in f.body])
        finally:
            self.inline_stack.pop()


def _returnify(stmts: List[A.SurfStmt], fname: str, span) -> A.SurfExpr:
    """Convert a pure function body into a single expression."""
    if not stmts:
        raise ModelTypeError(
            f"{fname}: control can reach the end without returning", span
        )
    s, rest = stmts[0], stmts[1:]
    if isinstance(s, A.SReturn):
        return s.value
    if isinstance(s, A.SIf):
        return A.ETernary(
            s.cond,
            _returnify(list(s.then) + rest, fname, span),
            _returnify(list(s.els) + rest, fname, span),
            span=s.span,
        )
    if isinstance(s, A.SSwitch):
        default_body = None
        arms = []
        for label, body in s.cases:
            if label is None:
                default_body = list(body)
            else:
                arms.append((label, list(body)))
        out = _returnify(
            (default_body if default_body is not None else []) + rest, fname, span
        )
        for label, body in reversed(arms):
            out = A.ETernary(
                A.EBinary("==", s.subject, label, span=s.span),
                _returnify(body + rest, fname, span),
                out,
                span=s.span,
            )
        return out
    raise ModelTypeError(
        f"{fname}: side effect in a value function", getattr(s, "span", None)
    )


def _ctx_elab(mctx: ModelContext) -> Elaborator:
    """A minimal elaborator view over a finished context (query lowering)."""
    e = Elaborator(mctx.doc)
    e.consts = mctx.consts
    e.types = mctx.types
    e.enum_labels = mctx.enum_labels
    e.functions = mctx.functions
    e.templates = mctx.templates
    return e


def elaborate(doc: A.ModelDocument) -> ModelContext:
    """Elaborate a parsed model document into a ModelContext."""
    return Elaborator(doc).elaborate()
