"""Pretty printers for the three text formats.

The printers emit canonical text: ``print(parse(print(parse(s))))`` equals
``print(parse(s))`` for every well-formed input, and parsing the printed text
reproduces the AST modulo source spans.
"""

from __future__ import annotations

from . import ast as A

# precedence levels; higher binds tighter
_BIN_PREC = {
    "imply": 1,
    "||": 3, "&&": 4,
    "==": 5, "!=": 5,
    "<": 6, "<=": 6, ">": 6, ">=": 6,
    "+": 7, "-": 7,
    "*": 8, "/": 8, "%": 8,
}
_TERNARY_PREC = 2
_UNARY_PREC = 9


def _prec(e: A.SurfExpr) -> int:
    if isinstance(e, A.EBinary):
        return _BIN_PREC[e.op]
    if isinstance(e, A.ETernary):
        return _TERNARY_PREC
    if isinstance(e, A.EUnary):
        return _UNARY_PREC
    if isinstance(e, A.EQuant):
        return 0
    return 10


def fmt_expr(e: A.SurfExpr, ctx: int = 0) -> str:
    p = _prec(e)
    if isinstance(e, A.EInt):
        s = str(e.value)
    elif isinstance(e, A.EBool):
        s = "true" if e.value else "false"
    elif isinstance(e, A.EName):
        s = e.name
    elif isinstance(e, A.EField):
        s = f"{fmt_expr(e.base, 10)}.{e.field}"
    elif isinstance(e, A.EIndex):
        s = f"{fmt_expr(e.base, 10)}[{fmt_expr(e.index)}]"
    elif isinstance(e, A.ECall):
        s = f"{e.name}({', '.join(fmt_expr(a) for a in e.args)})"
    elif isinstance(e, A.EUnary):
        s = f"{e.op}{fmt_expr(e.operand, _UNARY_PREC)}"
    elif isinstance(e, A.EBinary):
        # left associative except imply (right associative)
        if e.op == "imply":
            s = f"{fmt_expr(e.left, p + 1)} imply {fmt_expr(e.right, p)}"
        else:
            s = f"{fmt_expr(e.left, p)} {e.op} {fmt_expr(e.right, p + 1)}"
    elif isinstance(e, A.ETernary):
        s = (
            f"{fmt_expr(e.cond, _TERNARY_PREC + 1)} ? {fmt_expr(e.then)}"
            f" : {fmt_expr(e.els, _TERNARY_PREC)}"
        )
    elif isinstance(e, A.EQuant):
        s = f"{e.kind} ({e.var} : {fmt_type(e.type)}) {fmt_expr(e.body, 1)}"
    else:
        raise TypeError(f"cannot print {e!r}")
    return f"({s})" if p < ctx else s


def fmt_type(t: A.TypeExpr) -> str:
    if isinstance(t, A.TBool):
        return "bool"
    if isinstance(t, A.TInt):
        return "int"
    if isinstance(t, A.TIntRange):
        return f"int[{fmt_expr(t.lo)},{fmt_expr(t.hi)}]"
    if isinstance(t, A.TName):
        return t.name
    if isinstance(t, A.TSize):
        return fmt_expr(t.size)
    raise TypeError(f"cannot print {t!r}")


def _fmt_init(v) -> str:
    if isinstance(v, tuple):
        return "{" + ", ".join(_fmt_init(x) for x in v) + "}"
    return fmt_expr(v)


def _fmt_declarator(d: A.Declarator) -> str:
    return d.name + "".join(f"[{fmt_type(t)}]" for t in d.dims)


def _fmt_stmt(s: A.SurfStmt, indent: str) -> list:
    out = []
    if isinstance(s, A.SAssign):
        out.append(f"{indent}{fmt_expr(s.target, 10)} = {fmt_expr(s.value)};")
    elif isinstance(s, A.SCall):
        args = ", ".join(fmt_expr(a) for a in s.args)
        out.append(f"{indent}{s.name}({args});")
    elif isinstance(s, A.SReturn):
        out.append(f"{indent}return {fmt_expr(s.value)};")
    elif isinstance(s, A.SIf):
        out.append(f"{indent}if ({fmt_expr(s.cond)}) {{")
        for st in s.then:
            out.extend(_fmt_stmt(st, indent + "    "))
        if s.els:
            out.append(f"{indent}}} else {{")
            for st in s.els:
                out.extend(_fmt_stmt(st, indent + "    "))
        out.append(f"{indent}}}")
    elif isinstance(s, A.SSwitch):
        out.append(f"{indent}switch ({fmt_expr(s.subject)}) {{")
        for label, body in s.cases:
            head = "default:" if label is None else f"case {fmt_expr(label)}:"
            out.append(f"{indent}{head}")
            for st in body:
                out.extend(_fmt_stmt(st, indent + "    "))
        out.append(f"{indent}}}")
    else:
        raise TypeError(f"cannot print {s!r}")
    return out


def _fmt_edge(e: A.EdgeDecl, indent: str) -> list:
    out = [f"{indent}edge {e.src} -> {e.dst} {{"]
    inner = indent + "    "
    if e.selects:
        sel = ", ".join(f"{n} : {fmt_type(t)}" for n, t in e.selects)
        out.append(f"{inner}select {sel};")
    if e.guard is not None:
        out.append(f"{inner}guard {fmt_expr(e.guard)};")
    if e.sync is not None:
        idx = "".join(f"[{fmt_expr(x)}]" for x in e.sync.indices)
        out.append(f"{inner}sync {e.sync.channel}{idx}{e.sync.direction};")
    if e.updates:
        ups = []
        for u in e.updates:
            if isinstance(u, A.SAssign):
                ups.append(f"{fmt_expr(u.target, 10)} = {fmt_expr(u.value)}")
            else:
                ups.append(f"{u.name}({', '.join(fmt_expr(a) for a in u.args)})")
        out.append(f"{inner}update {', '.join(ups)};")
    out.append(f"{indent}}}")
    return out


def print_model(doc: A.ModelDocument) -> str:
    out = []
    for d in doc.decls:
        if isinstance(d, A.DConst):
            out.append(f"const {fmt_type(d.type)} {d.name} = {fmt_expr(d.value)};")
        elif isinstance(d, A.DTypedef):
            if d.record is not None:
                out.append("typedef struct {")
                for f in d.record:
                    out.append(f"    {fmt_type(f.type)} {_fmt_declarator(f.declarator)};")
                out.append(f"}} {d.name};")
            elif d.enum is not None:
                out.append(f"typedef enum {{ {', '.join(d.enum)} }} {d.name};")
            else:
                out.append(f"typedef {fmt_type(d.alias)} {d.name};")
        elif isinstance(d, A.DChan):
            dims = "".join(f"[{fmt_type(t)}]" for t in d.dims)
            out.append(f"chan {d.name}{dims};")
        elif isinstance(d, A.DVar):
            init = "" if d.init is None else f" = {_fmt_init(d.init)}"
            out.append(f"{fmt_type(d.type)} {_fmt_declarator(d.declarator)}{init};")
        elif isinstance(d, A.DFunc):
            ret = "void" if d.ret is None else fmt_type(d.ret)
            ps = ", ".join(
                f"{'const ' if p.const else ''}{fmt_type(p.type)} {p.name}"
                for p in d.params
            )
            out.append(f"{ret} {d.name}({ps}) {{")
            for st in d.body:
                out.extend(_fmt_stmt(st, "    "))
            out.append("}")
        elif isinstance(d, A.DTemplate):
            ps = ", ".join(
                f"{'const ' if p.const else ''}{fmt_type(p.type)} {p.name}"
                for p in d.params
            )
            head = f"template {d.name}({ps})" if d.params else f"template {d.name}"
            out.append(head + " {")
            for v in d.decls:
                init = "" if v.init is None else f" = {_fmt_init(v.init)}"
                out.append(f"    {fmt_type(v.type)} {_fmt_declarator(v.declarator)}{init};")
            if d.require is not None:
                out.append(f"    require {fmt_expr(d.require)};")
            for loc in d.locations:
                mods = ("init " if loc.init else "") + ("committed " if loc.committed else "")
                out.append(f"    {mods}location {loc.name};")
            for e in d.edges:
                out.extend(_fmt_edge(e, "    "))
            out.append("}")
        elif isinstance(d, A.DSystem):
            out.append(f"system {', '.join(fmt_expr(i) for i in d.items)};")
        else:
            raise TypeError(f"cannot print {d!r}")
        out.append("")
    return "\n".join(out).rstrip() + "\n"


def fmt_query(q: A.QueryEntry) -> str:
    fin = "finite " if q.mode == "finite-run" else ""
    if q.kind == "invariant":
        body = f"A[] {fmt_expr(q.expr)}"
    elif q.kind == "reach":
        body = f"E<> {fmt_expr(q.expr)}"
    elif q.kind == "liveness":
        body = f"A<> {fmt_expr(q.expr)}"
    elif q.kind == "exists-globally":
        body = f"{fin}E[] {fmt_expr(q.expr)}"
    elif q.kind == "leads-to":
        body = f"{fmt_expr(q.expr, 2)} --> {fmt_expr(q.rhs, 2)}"
    else:
        raise TypeError(f"cannot print {q!r}")
    return body


def print_queries(doc: A.QueryDocument) -> str:
    return "".join(f"{q.name}: {fmt_query(q)};\n" for q in doc.entries)


def _fmt_abs_path(p: A.AbsPath) -> str:
    return p.render()


def print_abs(doc: A.AbsDocument) -> str:
    out = []
    for p in doc.removed:
        out.append(f"remove {_fmt_abs_path(p)};")
    for s in doc.scope:
        args = f"({', '.join(str(a) for a in s.agent_args)})" if s.agent_args else ""
        out.append(f"scope {s.agent}{args}.{s.location};")
    for m in doc.merges:
        out.append(
            f"merge {_fmt_abs_path(m.target)} : {fmt_type(m.type)} = {fmt_expr(m.expr)};"
        )
    out.append(f"direction {doc.direction};")
    for r in doc.rewrites:
        out.append(f"rewrite {r.prop} : {fmt_query(r.query)};")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# closed-graph emission
#
# Re-emits an elaborated (possibly abstraction-transformed) network as model
# text the parser accepts again.  Shared declarations are copied from the
# source document the network was elaborated from; each closed instance
# becomes one parameterless template, so the emitted file re-elaborates into
# an equivalent network regardless of how the original was parameterised.

import re as _re

from ..errors import ModelPrintError
from ..kernel import expr as K
from ..kernel.model import MASGraph
from ..kernel.types import BoolType


def _ident(text: str) -> str:
    return _re.sub(r"_+$", "", _re.sub(r"\W+", "_", text)) or "x"


class _GraphPrinter:
    def __init__(self, m: MASGraph):
        self.m = m
        self.funcs: list = []  # emitted update helpers, in creation order
        self.local_names: dict = {}  # slot -> emitted name within its template
        self.global_renames: dict = {}  # slot -> emitted name, shared scope
        # corner slot -> (array name, index lo, index hi) for template-local
        # arrays that are indexed dynamically and so must stay arrays
        self.groups: dict = {}

    # -- local array reconstruction ----------------------------------------

    def _iter_refs(self, x):
        if isinstance(x, K.Ref):
            yield x
            for t in x.terms:
                yield from self._iter_refs(t.expr)
        elif isinstance(x, K.Unary):
            yield from self._iter_refs(x.a)
        elif isinstance(x, K.Binary):
            yield from self._iter_refs(x.a)
            yield from self._iter_refs(x.b)
        elif isinstance(x, K.Nary):
            for it in x.items:
                yield from self._iter_refs(it)
        elif isinstance(x, K.Ternary):
            yield from self._iter_refs(x.cond)
            yield from self._iter_refs(x.then)
            yield from self._iter_refs(x.els)
        elif isinstance(x, K.Quant):
            yield from self._iter_refs(x.body)

    def _iter_stmt_refs(self, st):
        if isinstance(st, K.Assign):
            yield from self._iter_refs(st.target)
            yield from self._iter_refs(st.expr)
        else:
            yield from self._iter_refs(st.cond)
            for s in st.then:
                yield from self._iter_stmt_refs(s)
            for s in st.els:
                yield from self._iter_stmt_refs(s)

    def scan_agent(self, agent, bares: set, forbidden: set) -> None:
        """Find dynamically indexed locals up front, so both their
        declarations and every reference agree on an array layout."""
        st = self.m.slots
        refs = []
        if agent.init_cond is not None:
            refs.extend(self._iter_refs(agent.init_cond))
        for e in agent.edges:
            if e.guard is not None:
                refs.extend(self._iter_refs(e.guard))
            if e.sync is not None:
                for t in e.sync.terms:
                    refs.extend(self._iter_refs(t.expr))
            for s in e.updates:
                refs.extend(self._iter_stmt_refs(s))
        for r in refs:
            if not r.terms or st.owners[r.base] is None:
                continue
            if len(r.terms) != 1 or r.terms[0].coef != 1:
                raise ModelPrintError(
                    f"cannot rebuild a declaration for {r.path!r}")
            lo, hi = r.terms[0].lo, r.terms[0].hi
            if r.base in self.groups:
                if self.groups[r.base][1:] != (lo, hi):
                    raise ModelPrintError(
                        f"conflicting index ranges for {r.path!r}")
                continue
            members = range(r.base, r.base + hi - lo + 1)
            if not all(st.owners[k] == agent.name and st.kinds[k] == "local"
                       and st.bounds[k] == st.bounds[r.base] for k in members):
                raise ModelPrintError(
                    f"{r.path!r} does not cover a uniform local array")
            root = r.path.split("[?]")[0]
            if root.startswith(agent.name + "."):
                root = root[len(agent.name) + 1:]
            name = _ident(root)
            while name in bares or name in forbidden:
                name += "_"
            bares.add(name)
            self.groups[r.base] = (name, lo, hi)
            for k in members:
                self.local_names[k] = f"{name}[{lo + (k - r.base)}]"

    # -- expressions -------------------------------------------------------

    def expr(self, e, ctx: int = 0) -> str:
        if isinstance(e, K.Const):
            return f"({e.value})" if e.value < 0 else str(e.value)
        if isinstance(e, K.Local):
            return e.name
        if isinstance(e, K.Ref):
            return self.ref(e)
        if isinstance(e, K.Unary):
            inner = self.expr(e.a, _UNARY_PREC)
            return self._wrap(f"{e.op}{inner}", _UNARY_PREC, ctx)
        if isinstance(e, K.Binary):
            p = _BIN_PREC[e.op]
            text = f"{self.expr(e.a, p)} {e.op} {self.expr(e.b, p + 1)}"
            return self._wrap(text, p, ctx)
        if isinstance(e, K.Nary):
            p = _BIN_PREC[e.op]
            text = f" {e.op} ".join(self.expr(it, p + 1) for it in e.items)
            return self._wrap(text, p, ctx)
        if isinstance(e, K.Ternary):
            text = (f"{self.expr(e.cond, _TERNARY_PREC + 1)} ? "
                    f"{self.expr(e.then, _TERNARY_PREC + 1)} : "
                    f"{self.expr(e.els, _TERNARY_PREC)}")
            return self._wrap(text, _TERNARY_PREC, ctx)
        if isinstance(e, K.Quant):
            lo, hi = self._contiguous(e.domain, f"binder {e.var}")
            text = (f"{e.kind}({e.var} : int[{lo}, {hi}]) "
                    f"{self.expr(e.body)}")
            return f"({text})"  # greedy body; parens make placement free
        raise ModelPrintError(f"cannot print expression node {e!r}")

    @staticmethod
    def _wrap(text: str, prec: int, ctx: int) -> str:
        return f"({text})" if prec < ctx else text

    @staticmethod
    def _contiguous(domain, what) -> tuple:
        if not domain or tuple(domain) != tuple(
                range(domain[0], domain[0] + len(domain))):
            raise ModelPrintError(f"{what} has a non-contiguous domain {domain}")
        return domain[0], domain[-1]

    def ref(self, r: K.Ref) -> str:
        if not r.terms:
            name = self.local_names.get(r.base)
            if name is None:
                name = self.global_renames.get(r.base)
            if name is None:
                name = self.m.slots.names[r.base]
            return name
        if self.m.slots.owners[r.base] is not None:
            grp = self.groups.get(r.base)
            if grp is None:
                raise ModelPrintError(
                    f"dynamic reference into template local {r.path!r}")
            return f"{grp[0]}[{self.expr(r.terms[0].expr)}]"
        parts = r.path.split("[?]")
        if len(parts) != len(r.terms) + 1:
            raise ModelPrintError(
                f"display path {r.path!r} lost track of its {len(r.terms)} "
                f"dynamic indexes")
        out = parts[0]
        for t, tail in zip(r.terms, parts[1:]):
            out += f"[{self.expr(t.expr)}]" + tail
        return out

    # -- statements --------------------------------------------------------

    def stmt_lines(self, st, indent: str) -> list:
        if isinstance(st, K.Assign):
            return [f"{indent}{self.ref(st.target)} = {self.expr(st.expr)};"]
        if isinstance(st, K.IfStmt):
            out = [f"{indent}if ({self.expr(st.cond)}) {{"]
            for s in st.then:
                out.extend(self.stmt_lines(s, indent + "    "))
            if st.els:
                out.append(f"{indent}}} else {{")
                for s in st.els:
                    out.extend(self.stmt_lines(s, indent + "    "))
            out.append(f"{indent}}}")
            return out
        raise ModelPrintError(f"cannot print statement node {st!r}")

    # -- edges -------------------------------------------------------------

    def sync_text(self, s) -> str:
        ch = self.m.channels[s.channel]
        off = s.base - ch.base
        terms = list(s.terms)
        strides = []
        w = 1
        for lo, hi in reversed(ch.shape):
            strides.append((w, lo, hi))
            w *= hi - lo + 1
        strides.reverse()
        parts = []
        for w, lo, hi in strides:
            n = hi - lo + 1
            t = next((t for t in terms
                      if t.coef == w and (t.lo, t.hi) == (lo, hi)), None)
            if t is not None:
                terms.remove(t)
                parts.append(f"[{self.expr(t.expr)}]")
            else:
                digit = lo + (off // w) % n
                off -= w * (digit - lo)
                parts.append(f"[({digit})]" if digit < 0 else f"[{digit}]")
        if terms or off != 0:
            raise ModelPrintError(
                f"cannot decode channel index of {s.channel!r}")
        return f"{s.channel}{''.join(parts)}{s.direction}"

    def edge_lines(self, agent, e) -> list:
        clauses = []
        if e.selects:
            items = []
            for s in e.selects:
                lo, hi = self._contiguous(s.domain, f"select {s.var}")
                items.append(f"{s.var} : int[{lo}, {hi}]")
            clauses.append(f"select {', '.join(items)};")
        if e.guard is not None:
            clauses.append(f"guard {self.expr(e.guard)};")
        if e.sync is not None:
            clauses.append(f"sync {self.sync_text(e.sync)};")
        if e.updates:
            if any(isinstance(st, K.IfStmt) for st in e.updates):
                clauses.append(f"update {self._update_func(e)};")
            else:
                clauses.append("update " + ", ".join(
                    f"{self.ref(st.target)} = {self.expr(st.expr)}"
                    for st in e.updates) + ";")
        head = f"    edge {e.src} -> {e.target}"
        if not clauses:
            return [head + " { }"]
        if sum(len(c) for c in clauses) < 60:
            return [head + " { " + " ".join(clauses) + " }"]
        return [head + " {"] + [f"        {c}" for c in clauses] + ["    }"]

    def _update_func(self, e) -> str:
        """Conditional updates move into a helper; the update clause itself
        only takes assignments and calls."""
        bound = {s.var for s in e.selects}

        def frees(x) -> set:
            if isinstance(x, K.Local):
                return {x.name}
            if isinstance(x, K.Ref):
                return set().union(*(frees(t.expr) for t in x.terms), set())
            if isinstance(x, K.Unary):
                return frees(x.a)
            if isinstance(x, K.Binary):
                return frees(x.a) | frees(x.b)
            if isinstance(x, K.Nary):
                return set().union(*(frees(it) for it in x.items), set())
            if isinstance(x, K.Ternary):
                return frees(x.cond) | frees(x.then) | frees(x.els)
            if isinstance(x, K.Quant):
                return frees(x.body) - {x.var}
            return set()

        def stmt_frees(st) -> set:
            if isinstance(st, K.Assign):
                return frees(st.target) | frees(st.expr)
            out = frees(st.cond)
            for s in list(st.then) + list(st.els):
                out |= stmt_frees(s)
            return out

        free: set = set()
        for st in e.updates:
            free |= stmt_frees(st)
        args = sorted(free & bound)
        if free - bound:
            raise ModelPrintError(
                f"update statements reference unknown names {free - bound}")
        domains = {s.var: s.domain for s in e.selects}
        params = ", ".join(
            "const int[{}, {}] {}".format(*self._contiguous(domains[v], v), v)
            for v in args)
        name = f"__upd{len(self.funcs)}"
        body = [f"void {name}({params}) {{"]
        for st in e.updates:
            body.extend(self.stmt_lines(st, "    "))
        body.append("}")
        self.funcs.append("\n".join(body))
        return f"{name}({', '.join(args)})"


def print_graph(m: MASGraph, base_doc: A.ModelDocument = None) -> str:
    """Model text for a closed network.

    ``base_doc`` supplies the shared declarations (types, variables,
    channels); it defaults to the document the network was elaborated from.
    """
    doc = base_doc if base_doc is not None else m.doc
    if not isinstance(doc, A.ModelDocument):
        raise ModelPrintError(
            "graph emission needs the source document for its declarations")
    gp = _GraphPrinter(m)

    header = []
    for d in doc.decls:
        if isinstance(d, (A.DTemplate, A.DSystem, A.DFunc)):
            continue
        header.append(print_model(A.ModelDocument((d,), name=doc.name)).rstrip())

    # a re-declared name must not capture references to anything global
    st = m.slots
    forbidden: set = set()
    for name in st.names:
        forbidden.add(_re.split(r"[\[.]", name, 1)[0])
    for d in doc.decls:
        if isinstance(d, (A.DConst, A.DTypedef, A.DChan)):
            forbidden.add(d.name)

    # merge slots may be named after the paths they replaced; flatten those
    # names into identifiers and reroute every reference through the new name
    merges = []
    for k in range(len(st.names)):
        if st.kinds[k] == "merge":
            name = _ident(st.names[k])
            while name in forbidden:
                name += "_"
            forbidden.add(name)
            if name != st.names[k]:
                gp.global_renames[k] = name
            lo, hi = st.bounds[k]
            merges.append(f"int[{lo}, {hi}] {name} = {st.inits[k]};")

    bodies = []
    names_used: set = set()
    tnames = []
    for ai, a in enumerate(m.agents):
        tn = _ident(a.name)
        while tn in names_used:
            tn += "_"
        names_used.add(tn)
        tnames.append(tn)

        lines = [f"template {tn}() {{"]
        agent_bares: set = set()
        gp.scan_agent(a, agent_bares, forbidden)
        grouped = {k for corner, (_, lo, hi) in gp.groups.items()
                   for k in range(corner, corner + hi - lo + 1)}
        for k in range(len(st.names)):
            if st.owners[k] != a.name or st.kinds[k] != "local":
                continue
            lo, hi = st.bounds[k]
            is_bool = isinstance(st.types[k], BoolType)
            if k in grouped:
                if k not in gp.groups:
                    continue  # covered by its corner's declaration
                name, ilo, ihi = gp.groups[k]
                inits = [st.inits[j] for j in range(k, k + ihi - ilo + 1)]
                vals = ", ".join(("true" if v else "false") if is_bool
                                 else str(v) for v in inits)
                elem = "bool" if is_bool else f"int[{lo}, {hi}]"
                lines.append(f"    {elem} {name}[int[{ilo}, {ihi}]]"
                             f" = {{ {vals} }};")
                continue
            bare = _ident(st.names[k][len(a.name) + 1:])
            while bare in agent_bares or bare in forbidden:
                bare += "_"
            agent_bares.add(bare)
            gp.local_names[k] = bare
            if is_bool:
                val = "true" if st.inits[k] else "false"
                lines.append(f"    bool {bare} = {val};")
            else:
                # enum locals come back as their backing integer range
                lines.append(f"    int[{lo}, {hi}] {bare} = {st.inits[k]};")
        if a.init_cond is not None:
            lines.append(f"    require {gp.expr(a.init_cond)};")
        lines.append(f"    init location {a.locations[a.init_loc]};")
        plain = [l for i, l in enumerate(a.locations)
                 if i != a.init_loc and l not in a.committed]
        if plain:
            lines.append(f"    location {', '.join(plain)};")
        comm = [l for l in a.locations if l in a.committed]
        if comm:
            lines.append(f"    committed location {', '.join(comm)};")
        for e in a.edges:
            lines.extend(gp.edge_lines(a, e))
        lines.append("}")
        bodies.append("\n".join(lines))

    parts = [f"// emitted from {m.name}", ""]
    parts.extend(header)
    if merges:
        parts.append("// summary variables introduced by merging")
        parts.extend(merges)
        parts.append("")
    if gp.funcs:
        parts.extend(gp.funcs)
        parts.append("")
    parts.extend(bodies)
    parts.append("")
    parts.append(f"system {', '.join(tnames)};")
    return "\n".join(parts) + "\n"
