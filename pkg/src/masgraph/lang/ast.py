"""Surface syntax trees for the three text formats (model / query / abstraction).

Nodes compare structurally with spans excluded, so the parser round-trip
property is literally ``parse(print(parse(src))) == parse(src)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union


@dataclass(frozen=True)
class Span:
    line: int
    column: int

    def __str__(self):
        return f"{self.line}:{self.column}"


def _span_field():
    return field(default=None, compare=False, repr=False)


# --------------------------------------------------------------------------
# expressions


@dataclass(frozen=True)
class EName:
    name: str
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class EInt:
    value: int
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class EBool:
    value: bool
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class EField:
    base: "SurfExpr"
    field: str
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class EIndex:
    base: "SurfExpr"
    index: "SurfExpr"
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class ECall:
    name: str
    args: Tuple["SurfExpr", ...]
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class EUnary:
    op: str  # '-' | '!'
    operand: "SurfExpr"
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class EBinary:
    op: str  # arithmetic, comparison, '&&', '||', 'imply'
    left: "SurfExpr"
    right: "SurfExpr"
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class ETernary:
    cond: "SurfExpr"
    then: "SurfExpr"
    els: "SurfExpr"
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class EQuant:
    kind: str  # 'forall' | 'exists'
    var: str
    type: "TypeExpr"
    body: "SurfExpr"
    span: Optional[Span] = _span_field()


SurfExpr = Union[EName, EInt, EBool, EField, EIndex, ECall, EUnary, EBinary, ETernary, EQuant]


# --------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class TName:
    name: str
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class TBool:
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class TIntRange:
    lo: SurfExpr
    hi: SurfExpr
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class TInt:
    """Unbounded 'int' — only legal for consts and function locals."""

    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class TSize:
    """Array dimension given as an element count (``x[3]``), indices 0..n-1."""

    size: SurfExpr
    span: Optional[Span] = _span_field()


TypeExpr = Union[TName, TBool, TIntRange, TInt, TSize]


@dataclass(frozen=True)
class Declarator:
    """``name[dim]...`` — each dim is an index type expression."""

    name: str
    dims: Tuple[TypeExpr, ...] = ()
    span: Optional[Span] = _span_field()


# --------------------------------------------------------------------------
# statements (function bodies and edge updates)


@dataclass(frozen=True)
class SAssign:
    target: SurfExpr
    value: SurfExpr
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class SCall:
    name: str
    args: Tuple[SurfExpr, ...]
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class SIf:
    cond: SurfExpr
    then: Tuple["SurfStmt", ...]
    els: Tuple["SurfStmt", ...] = ()
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class SSwitch:
    subject: SurfExpr
    cases: Tuple[Tuple[Optional[SurfExpr], Tuple["SurfStmt", ...]], ...]
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class SReturn:
    value: SurfExpr
    span: Optional[Span] = _span_field()


SurfStmt = Union[SAssign, SCall, SIf, SSwitch, SReturn]


# --------------------------------------------------------------------------
# declarations


@dataclass(frozen=True)
class DConst:
    type: TypeExpr
    name: str
    value: SurfExpr
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class RecordField:
    type: TypeExpr
    declarator: Declarator
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DTypedef:
    name: str
    # exactly one of the three is set
    alias: Optional[TypeExpr] = None
    record: Optional[Tuple[RecordField, ...]] = None
    enum: Optional[Tuple[str, ...]] = None
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DChan:
    name: str
    dims: Tuple[TypeExpr, ...] = ()
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DVar:
    type: TypeExpr
    declarator: Declarator
    init: Optional[object] = None  # SurfExpr or nested tuple of initializers
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Param:
    type: TypeExpr
    name: str
    const: bool = False
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DFunc:
    ret: Optional[TypeExpr]  # None = void
    name: str
    params: Tuple[Param, ...]
    body: Tuple[SurfStmt, ...]
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class LocDecl:
    name: str
    init: bool = False
    committed: bool = False
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class SyncDecl:
    channel: str
    indices: Tuple[SurfExpr, ...]
    direction: str  # '!' | '?'
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class EdgeDecl:
    src: str
    dst: str
    selects: Tuple[Tuple[str, TypeExpr], ...] = ()
    guard: Optional[SurfExpr] = None
    sync: Optional[SyncDecl] = None
    updates: Tuple[SurfStmt, ...] = ()
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DTemplate:
    name: str
    params: Tuple[Param, ...]
    decls: Tuple[DVar, ...]
    require: Optional[SurfExpr]  # initial condition (g0), default true
    locations: Tuple[LocDecl, ...]
    edges: Tuple[EdgeDecl, ...]
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DSystem:
    items: Tuple[SurfExpr, ...]  # EName (auto-expand params) or ECall
    span: Optional[Span] = _span_field()


Decl = Union[DConst, DTypedef, DChan, DVar, DFunc, DTemplate, DSystem]


@dataclass(frozen=True)
class ModelDocument:
    decls: Tuple[Decl, ...]
    name: str = "<model>"


# --------------------------------------------------------------------------
# queries


@dataclass(frozen=True)
class QueryEntry:
    name: str
    kind: str  # 'invariant' | 'reach' | 'liveness' | 'exists-globally' | 'leads-to'
    expr: SurfExpr
    rhs: Optional[SurfExpr] = None  # leads-to only
    mode: str = "maximal"  # exists-globally only: 'maximal' | 'finite-run'
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class QueryDocument:
    entries: Tuple[QueryEntry, ...]
    name: str = "<queries>"


# --------------------------------------------------------------------------
# abstraction specs


@dataclass(frozen=True)
class AbsPath:
    """A removal/merge path: ``seg(.seg | [const])*``.

    The head segment may carry instance arguments (``Voter(2)``); whether the
    head names a template instance, a shared variable, or a record type is
    resolved by the elaborator.
    """

    head: str
    head_args: Tuple[int, ...] = ()
    segs: Tuple[Union[str, int], ...] = ()  # str = field, int = index
    span: Optional[Span] = _span_field()

    def render(self) -> str:
        out = self.head
        if self.head_args:
            out += "(" + ",".join(str(a) for a in self.head_args) + ")"
        for s in self.segs:
            out += f".{s}" if isinstance(s, str) else f"[{s}]"
        return out


@dataclass(frozen=True)
class ScopeItem:
    agent: str
    agent_args: Tuple[int, ...]
    location: str
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class MergeDecl:
    target: AbsPath  # fresh shared var name, or Type.field
    type: TypeExpr
    expr: SurfExpr
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class RewriteDecl:
    prop: str
    query: QueryEntry
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class AbsDocument:
    removed: Tuple[AbsPath, ...]
    scope: Tuple[ScopeItem, ...]
    merges: Tuple[MergeDecl, ...]
    direction: str  # 'under' | 'over'
    rewrites: Tuple[RewriteDecl, ...] = ()
    name: str = "<abs>"
