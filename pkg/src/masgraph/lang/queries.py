"""Elaboration of parsed query documents against an elaborated model.

Query expressions may mention shared variables, agent locals and location
atoms (``Voter(1).marked``), quantify over scalar types, and call pure model
functions.
"""

from __future__ import annotations

from typing import Tuple

from ..checking.formulas import Property
from . import ast as A
from .printer import fmt_query
from .typecheck import ModelContext


def elaborate_query(q: A.QueryEntry, mctx: ModelContext) -> Property:
    expr = mctx.lower_query_expr(q.expr)
    rhs = mctx.lower_query_expr(q.rhs) if q.rhs is not None else None
    return Property(
        name=q.name,
        kind=q.kind,
        text=fmt_query(q),
        expr=expr,
        rhs=rhs,
        mode=q.mode,
    )


def elaborate_queries(doc: A.QueryDocument, mctx: ModelContext) -> Tuple[Property, ...]:
    return tuple(elaborate_query(q, mctx) for q in doc.entries)
