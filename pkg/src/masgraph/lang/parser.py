"""Hand-rolled lexer and recursive-descent parsers for the three text formats.

* ``parse_model``   — agent-network model files (``.masg``)
* ``parse_queries`` — property files (``.q``)
* ``parse_abs``     — abstraction spec files (``.abs``)

Alias operators (``and``/``or``/``not``) are normalized at parse time, so
printing always emits the symbolic forms and the print/parse composition is a
fixpoint.
"""

from __future__ import annotations

from typing import List, Optional, Tuple

from ..errors import ModelSyntaxError
from . import ast as A

_PUNCT = [
    "-->", "<=", ">=", "==", "!=", "&&", "||", "->", "<>",
    "<", ">", "=", "!", "?", ":", ";", ",", ".", "(", ")",
    "[", "]", "{", "}", "+", "-", "*", "/", "%",
]

_KEYWORDS = {
    "const", "typedef", "struct", "enum", "chan", "void", "template",
    "location", "init", "committed", "edge", "select", "guard", "sync",
    "update", "require", "system", "if", "else", "switch", "case", "default",
    "return", "true", "false", "forall", "exists", "imply", "and", "or",
    "not", "bool", "int", "remove", "scope", "merge", "direction", "under",
    "over", "rewrite", "finite",
}


class Token:
    __slots__ = ("kind", "text", "line", "column")

    def __init__(self, kind, text, line, column):
        self.kind = kind  # 'ident' | 'int' | 'punct' | 'eof'
        self.text = text
        self.line = line
        self.column = column

    def __repr__(self):
        return f"Token({self.kind},{self.text!r},{self.line}:{self.column})"


def tokenize(src: str, filename: str = "<input>") -> List[Token]:
    toks: List[Token] = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if src.startswith("//", i):
            j = src.find("\n", i)
            i = n if j < 0 else j
            continue
        if src.startswith("/*", i):
            j = src.find("*/", i + 2)
            if j < 0:
                raise ModelSyntaxError("unterminated comment", line, col, filename)
            seg = src[i : j + 2]
            nl = seg.count("\n")
            if nl:
                line += nl
                col = len(seg) - seg.rfind("\n")
            else:
                col += len(seg)
            i = j + 2
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            toks.append(Token("int", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(Token("ident", src[i:j], line, col))
            col += j - i
            i = j
            continue
        for p in _PUNCT:
            if src.startswith(p, i):
                toks.append(Token("punct", p, line, col))
                i += len(p)
                col += len(p)
                break
        else:
            raise ModelSyntaxError(f"unexpected character {c!r}", line, col, filename)
    toks.append(Token("eof", "", line, col))
    return toks


class _P:
    """Shared parser machinery."""

    def __init__(self, src: str, filename: str):
        self.toks = tokenize(src, filename)
        self.pos = 0
        self.filename = filename

    # -- token plumbing ----------------------------------------------------

    def peek(self, k=0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, text: str, k=0) -> bool:
        t = self.peek(k)
        return t.text == text and t.kind in ("punct", "ident")

    def at_kind(self, kind: str) -> bool:
        return self.peek().kind == kind

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def expect(self, text: str) -> Token:
        t = self.peek()
        if not self.at(text):
            self.err(f"expected {text!r}, found {t.text!r}")
        return self.next()

    def ident(self) -> Token:
        t = self.peek()
        if t.kind != "ident":
            self.err(f"expected identifier, found {t.text!r}")
        return self.next()

    def span(self) -> A.Span:
        t = self.peek()
        return A.Span(t.line, t.column)

    def err(self, msg: str):
        t = self.peek()
        raise ModelSyntaxError(msg, t.line, t.column, self.filename)

    # -- expressions -------------------------------------------------------

    def expr(self) -> A.SurfExpr:
        return self._imply()

    def _imply(self) -> A.SurfExpr:
        sp = self.span()
        left = self._ternary()
        if self.at("imply"):
            self.next()
            right = self._imply()  # right associative
            return A.EBinary("imply", left, right, span=sp)
        return left

    def _ternary(self) -> A.SurfExpr:
        sp = self.span()
        cond = self._or()
        if self.accept("?"):
            then = self.expr()
            self.expect(":")
            els = self._ternary()
            return A.ETernary(cond, then, els, span=sp)
        return cond

    def _binchain(self, sub, ops, aliases=None):
        sp = self.span()
        e = sub()
        while True:
            t = self.peek()
            op = t.text
            if aliases and op in aliases:
                op = aliases[op]
            if op in ops:
                self.next()
                e = A.EBinary(op, e, sub(), span=sp)
            else:
                return e

    def _or(self):
        return self._binchain(self._and, ("||",), {"or": "||"})

    def _and(self):
        return self._binchain(self._eq, ("&&",), {"and": "&&"})

    def _eq(self):
        return self._binchain(self._rel, ("==", "!="))

    def _rel(self):
        return self._binchain(self._add, ("<", "<=", ">", ">="))

    def _add(self):
        return self._binchain(self._mul, ("+", "-"))

    def _mul(self):
        return self._binchain(self._unary, ("*", "/", "%"))

    def _unary(self) -> A.SurfExpr:
        sp = self.span()
        if self.at("!") or self.at("not"):
            self.next()
            return A.EUnary("!", self._unary(), span=sp)
        if self.at("-"):
            self.next()
            return A.EUnary("-", self._unary(), span=sp)
        return self._postfix()

    def _postfix(self) -> A.SurfExpr:
        e = self._primary()
        while True:
            sp = self.span()
            if self.accept("."):
                e = A.EField(e, self.ident().text, span=sp)
            elif self.accept("["):
                idx = self.expr()
                self.expect("]")
                e = A.EIndex(e, idx, span=sp)
            else:
                return e

    def _primary(self) -> A.SurfExpr:
        t = self.peek()
        sp = A.Span(t.line, t.column)
        if t.kind == "int":
            self.next()
            return A.EInt(int(t.text), span=sp)
        if self.at("true"):
            self.next()
            return A.EBool(True, span=sp)
        if self.at("false"):
            self.next()
            return A.EBool(False, span=sp)
        if self.at("forall") or self.at("exists"):
            kind = self.next().text
            self.expect("(")
            var = self.ident().text
            self.expect(":")
            ty = self.type_expr()
            self.expect(")")
            body = self.expr()
            return A.EQuant(kind, var, ty, body, span=sp)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if t.kind == "ident":
            self.next()
            if self.at("("):
                self.next()
                args = []
                if not self.at(")"):
                    args.append(self.expr())
                    while self.accept(","):
                        args.append(self.expr())
                self.expect(")")
                return A.ECall(t.text, tuple(args), span=sp)
            return A.EName(t.text, span=sp)
        self.err(f"expected expression, found {t.text!r}")

    # -- types -------------------------------------------------------------

    def type_expr(self) -> A.TypeExpr:
        t = self.peek()
        sp = A.Span(t.line, t.column)
        if self.accept("bool"):
            return A.TBool(span=sp)
        if self.at("int"):
            self.next()
            if self.accept("["):
                lo = self.expr()
                self.expect(",")
                hi = self.expr()
                self.expect("]")
                return A.TIntRange(lo, hi, span=sp)
            return A.TInt(span=sp)
        name = self.ident().text
        return A.TName(name, span=sp)

    def dim_type(self) -> A.TypeExpr:
        """An array dimension: an index type, or an element count expression.

        A bare identifier is kept as TName; the elaborator decides whether it
        names an index type or an integer constant (= element count).
        """
        t = self.peek()
        if self.at("bool") or self.at("int"):
            return self.type_expr()
        if t.kind == "ident" and self.at("]", 1):
            return self.type_expr()
        sp = A.Span(t.line, t.column)
        return A.TSize(self.expr(), span=sp)


# --------------------------------------------------------------------------
# model documents


class ModelParser(_P):
    def parse(self) -> A.ModelDocument:
        decls = []
        while not self.at_kind("eof"):
            decls.append(self.decl())
        return A.ModelDocument(tuple(decls), name=self.filename)

    def decl(self) -> A.Decl:
        sp = self.span()
        if self.at("const"):
            self.next()
            ty = self.type_expr()
            name = self.ident().text
            self.expect("=")
            v = self.expr()
            self.expect(";")
            return A.DConst(ty, name, v, span=sp)
        if self.at("typedef"):
            return self.typedef()
        if self.at("chan"):
            self.next()
            name = self.ident().text
            dims = []
            while self.accept("["):
                dims.append(self.dim_type())
                self.expect("]")
            self.expect(";")
            return A.DChan(name, tuple(dims), span=sp)
        if self.at("template"):
            return self.template()
        if self.at("system"):
            self.next()
            items = [self._postfix()]
            while self.accept(","):
                items.append(self._postfix())
            self.expect(";")
            return A.DSystem(tuple(items), span=sp)
        if self.at("void") or self._looks_like_function():
            return self.function()
        return self.vardecl()

    def _looks_like_function(self) -> bool:
        # type IDENT '(' — distinguish functions from variables
        save = self.pos
        try:
            self.type_expr()
            ok = self.peek().kind == "ident" and self.at("(", 1)
        except ModelSyntaxError:
            ok = False
        self.pos = save
        return ok

    def typedef(self) -> A.DTypedef:
        sp = self.span()
        self.expect("typedef")
        if self.at("struct"):
            self.next()
            self.expect("{")
            fields = []
            while not self.at("}"):
                fsp = self.span()
                fty = self.type_expr()
                decl = self.declarator()
                self.expect(";")
                fields.append(A.RecordField(fty, decl, span=fsp))
            self.expect("}")
            name = self.ident().text
            self.expect(";")
            return A.DTypedef(name, record=tuple(fields), span=sp)
        if self.at("enum"):
            self.next()
            self.expect("{")
            labels = [self.ident().text]
            while self.accept(","):
                labels.append(self.ident().text)
            self.expect("}")
            name = self.ident().text
            self.expect(";")
            return A.DTypedef(name, enum=tuple(labels), span=sp)
        ty = self.type_expr()
        name = self.ident().text
        self.expect(";")
        return A.DTypedef(name, alias=ty, span=sp)

    def declarator(self) -> A.Declarator:
        sp = self.span()
        name = self.ident().text
        dims = []
        while self.accept("["):
            dims.append(self.dim_type())
            self.expect("]")
        return A.Declarator(name, tuple(dims), span=sp)

    def vardecl(self) -> A.DVar:
        sp = self.span()
        ty = self.type_expr()
        decl = self.declarator()
        init = None
        if self.accept("="):
            init = self.initializer()
        self.expect(";")
        return A.DVar(ty, decl, init, span=sp)

    def initializer(self):
        if self.accept("{"):
            items = [self.initializer()]
            while self.accept(","):
                items.append(self.initializer())
            self.expect("}")
            return tuple(items)
        return self.expr()

    def params(self) -> Tuple[A.Param, ...]:
        self.expect("(")
        out = []
        if not self.at(")"):
            while True:
                sp = self.span()
                is_const = self.accept("const")
                ty = self.type_expr()
                name = self.ident().text
                out.append(A.Param(ty, name, const=is_const, span=sp))
                if not self.accept(","):
                    break
        self.expect(")")
        return tuple(out)

    def function(self) -> A.DFunc:
        sp = self.span()
        if self.accept("void"):
            ret = None
        else:
            ret = self.type_expr()
        name = self.ident().text
        params = self.params()
        body = self.block()
        return A.DFunc(ret, name, params, body, span=sp)

    def block(self) -> Tuple[A.SurfStmt, ...]:
        self.expect("{")
        out = []
        while not self.at("}"):
            out.append(self.stmt())
        self.expect("}")
        return tuple(out)

    def stmt(self) -> A.SurfStmt:
        sp = self.span()
        if self.at("if"):
            self.next()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.block() if self.at("{") else (self.stmt(),)
            els: Tuple[A.SurfStmt, ...] = ()
            if self.accept("else"):
                els = self.block() if self.at("{") else (self.stmt(),)
            return A.SIf(cond, then, els, span=sp)
        if self.at("switch"):
            self.next()
            self.expect("(")
            subject = self.expr()
            self.expect(")")
            self.expect("{")
            cases = []
            while not self.at("}"):
                if self.accept("default"):
                    self.expect(":")
                    label = None
                else:
                    self.expect("case")
                    label = self.expr()
                    self.expect(":")
                body = []
                while not (self.at("case") or self.at("default") or self.at("}")):
                    body.append(self.stmt())
                cases.append((label, tuple(body)))
            self.expect("}")
            return A.SSwitch(subject, tuple(cases), span=sp)
        if self.at("return"):
            self.next()
            v = self.expr()
            self.expect(";")
            return A.SReturn(v, span=sp)
        # assignment or call
        e = self._postfix()
        if self.accept("="):
            v = self.expr()
            self.expect(";")
            return A.SAssign(e, v, span=sp)
        self.expect(";")
        if not isinstance(e, A.ECall):
            raise ModelSyntaxError(
                "expected assignment or call statement", sp.line, sp.column, self.filename
            )
        return A.SCall(e.name, e.args, span=sp)

    def template(self) -> A.DTemplate:
        sp = self.span()
        self.expect("template")
        name = self.ident().text
        params = self.params() if self.at("(") else ()
        self.expect("{")
        decls: List[A.DVar] = []
        locations: List[A.LocDecl] = []
        edges: List[A.EdgeDecl] = []
        require = None
        while not self.at("}"):
            if self.at("require"):
                self.next()
                require = self.expr()
                self.expect(";")
            elif self.at("init") or self.at("committed") or self.at("location"):
                lsp = self.span()
                is_init = self.accept("init")
                is_committed = self.accept("committed")
                if not is_init:
                    is_init = self.accept("init")  # allow either order
                self.expect("location")
                names = [self.ident().text]
                while self.accept(","):
                    names.append(self.ident().text)
                self.expect(";")
                for nm in names:
                    locations.append(
                        A.LocDecl(nm, init=is_init, committed=is_committed, span=lsp)
                    )
            elif self.at("edge"):
                edges.append(self.edge())
            else:
                decls.append(self.vardecl())
        self.expect("}")
        return A.DTemplate(
            name, params, tuple(decls), require, tuple(locations), tuple(edges), span=sp
        )

    def edge(self) -> A.EdgeDecl:
        sp = self.span()
        self.expect("edge")
        src = self.ident().text
        self.expect("->")
        dst = self.ident().text
        self.expect("{")
        selects: Tuple[Tuple[str, A.TypeExpr], ...] = ()
        guard = None
        sync = None
        updates: Tuple[A.SurfStmt, ...] = ()
        while not self.at("}"):
            if self.at("select"):
                self.next()
                items = []
                while True:
                    nm = self.ident().text
                    self.expect(":")
                    ty = self.type_expr()
                    items.append((nm, ty))
                    if not self.accept(","):
                        break
                self.expect(";")
                selects = tuple(items)
            elif self.at("guard"):
                self.next()
                guard = self.expr()
                self.expect(";")
            elif self.at("sync"):
                ssp = self.span()
                self.next()
                ch = self.ident().text
                idxs = []
                while self.accept("["):
                    idxs.append(self.expr())
                    self.expect("]")
                if self.accept("!"):
                    d = "!"
                elif self.accept("?"):
                    d = "?"
                else:
                    self.err("expected '!' or '?' after channel")
                self.expect(";")
                sync = A.SyncDecl(ch, tuple(idxs), d, span=ssp)
            elif self.at("update"):
                self.next()
                ups: List[A.SurfStmt] = []
                while True:
                    usp = self.span()
                    e = self._postfix()
                    if self.accept("="):
                        v = self.expr()
                        ups.append(A.SAssign(e, v, span=usp))
                    elif isinstance(e, A.ECall):
                        ups.append(A.SCall(e.name, e.args, span=usp))
                    else:
                        self.err("expected assignment or call in update")
                    if not self.accept(","):
                        break
                self.expect(";")
                updates = tuple(ups)
            else:
                self.err("expected select/guard/sync/update clause")
        self.expect("}")
        return A.EdgeDecl(src, dst, selects, guard, sync, updates, span=sp)


# --------------------------------------------------------------------------
# query documents


class QueryParser(_P):
    def parse(self) -> A.QueryDocument:
        entries = []
        i = 0
        while not self.at_kind("eof"):
            name = None
            if self.peek().kind == "ident" and self.at(":", 1):
                name = self.next().text
                self.next()
            if name is None:
                name = f"q{i}"
            entries.append(self.query(name))
            self.expect(";")
            i += 1
        return A.QueryDocument(tuple(entries), name=self.filename)

    def query(self, name: str) -> A.QueryEntry:
        sp = self.span()
        mode = "maximal"
        if self.at("finite"):
            self.next()
            mode = "finite-run"
            if not (self.at("E") and (self.at("[", 1) or self.at("<>", 1))):
                self.err("'finite' only applies to E[] queries")
        t = self.peek()
        if t.kind == "ident" and t.text in ("A", "E"):
            if self.at("[", 1) and self.at("]", 2):
                self.next(), self.next(), self.next()
                e = self.expr()
                kind = "invariant" if t.text == "A" else "exists-globally"
                if kind == "invariant" and mode != "maximal":
                    self.err("'finite' only applies to E[] queries")
                return A.QueryEntry(name, kind, e, mode=mode, span=sp)
            if self.at("<>", 1):
                self.next(), self.next()
                e = self.expr()
                kind = "liveness" if t.text == "A" else "reach"
                if mode != "maximal":
                    self.err("'finite' only applies to E[] queries")
                return A.QueryEntry(name, kind, e, span=sp)
        lhs = self.expr()
        self.expect("-->")
        rhs = self.expr()
        return A.QueryEntry(name, "leads-to", lhs, rhs=rhs, span=sp)


# --------------------------------------------------------------------------
# abstraction documents


class AbsParser(_P):
    def parse(self) -> A.AbsDocument:
        removed: List[A.AbsPath] = []
        scope: List[A.ScopeItem] = []
        merges: List[A.MergeDecl] = []
        rewrites: List[A.RewriteDecl] = []
        direction = None
        while not self.at_kind("eof"):
            if self.at("remove"):
                self.next()
                removed.append(self.abs_path())
                while self.accept(","):
                    removed.append(self.abs_path())
                self.expect(";")
            elif self.at("scope"):
                self.next()
                scope.append(self.scope_item())
                while self.accept(","):
                    scope.append(self.scope_item())
                self.expect(";")
            elif self.at("merge"):
                sp = self.span()
                self.next()
                target = self.abs_path()
                self.expect(":")
                ty = self.type_expr()
                self.expect("=")
                e = self.expr()
                self.expect(";")
                merges.append(A.MergeDecl(target, ty, e, span=sp))
            elif self.at("direction"):
                self.next()
                if self.accept("under"):
                    direction = "under"
                elif self.accept("over"):
                    direction = "over"
                else:
                    self.err("expected 'under' or 'over'")
                self.expect(";")
            elif self.at("rewrite"):
                sp = self.span()
                self.next()
                prop = self.ident().text
                self.expect(":")
                q = QueryParser.query(self, prop)
                self.expect(";")
                rewrites.append(A.RewriteDecl(prop, q, span=sp))
            else:
                self.err("expected remove/scope/merge/direction/rewrite clause")
        if direction is None:
            self.err("abstraction spec must declare a direction")
        return A.AbsDocument(
            tuple(removed), tuple(scope), tuple(merges), direction, tuple(rewrites),
            name=self.filename,
        )

    def _int_arg(self) -> int:
        neg = self.accept("-")
        t = self.peek()
        if t.kind != "int":
            self.err("expected integer")
        self.next()
        return -int(t.text) if neg else int(t.text)

    def abs_path(self) -> A.AbsPath:
        sp = self.span()
        head = self.ident().text
        args: Tuple[int, ...] = ()
        if self.accept("("):
            lst = [self._int_arg()]
            while self.accept(","):
                lst.append(self._int_arg())
            self.expect(")")
            args = tuple(lst)
        segs: List = []
        while True:
            if self.accept("."):
                segs.append(self.ident().text)
            elif self.accept("["):
                segs.append(self._int_arg())
                self.expect("]")
            else:
                break
        return A.AbsPath(head, args, tuple(segs), span=sp)

    def scope_item(self) -> A.ScopeItem:
        sp = self.span()
        agent = self.ident().text
        args: Tuple[int, ...] = ()
        if self.accept("("):
            lst = [self._int_arg()]
            while self.accept(","):
                lst.append(self._int_arg())
            self.expect(")")
            args = tuple(lst)
        self.expect(".")
        loc = self.ident().text
        return A.ScopeItem(agent, args, loc, span=sp)


def parse_model(src: str, name: str = "<model>") -> A.ModelDocument:
    return ModelParser(src, name).parse()


def parse_queries(src: str, name: str = "<queries>") -> A.QueryDocument:
    return QueryParser(src, name).parse()


def parse_abs(src: str, name: str = "<abs>") -> A.AbsDocument:
    return AbsParser(src, name).parse()
