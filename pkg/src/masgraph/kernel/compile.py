"""Bytecode compilation of a closed agent network.

Every guard, update sequence and channel-index computation becomes a straight
-line stack program over the flat int32 state vector; select bindings and
quantifiers are expanded at compile time (the language has no loops, so all
programs are finite).  One generic interpreter executes the programs, so
nothing here is model-specific code generation — just tables.

Opcodes (int64 triples [op, a, b]):

    PUSH a      LOAD a       LOADD        STORE a      STORED
    ADD SUB MUL DIV MOD      NEG NOT
    EQ NE LT LE GT GE
    JMP a       JZ a         JNZ a        CHECK a b    HALT

Faults are reported by code: 1 division by zero, 2 index out of its domain
(CHECK), 3 stored value outside the slot range (aux = slot id).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import expr as K
from .model import MASGraph, Sync

OP_PUSH = 0
OP_LOAD = 1
OP_LOADD = 2
OP_STORE = 3
OP_STORED = 4
OP_ADD = 5
OP_SUB = 6
OP_MUL = 7
OP_DIV = 8
OP_MOD = 9
OP_NEG = 10
OP_NOT = 11
OP_EQ = 12
OP_NE = 13
OP_LT = 14
OP_LE = 15
OP_GT = 16
OP_GE = 17
OP_JMP = 18
OP_JZ = 19
OP_JNZ = 20
OP_CHECK = 21
OP_HALT = 22

_BINOPS = {
    "+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV, "%": OP_MOD,
    "==": OP_EQ, "!=": OP_NE, "<": OP_LT, "<=": OP_LE, ">": OP_GT, ">=": OP_GE,
}

FAULT_DIV = 1
FAULT_INDEX = 2
FAULT_RANGE = 3


class _Asm:
    def __init__(self):
        self.code: List[List[int]] = []

    def emit(self, op: int, a: int = 0, b: int = 0) -> int:
        self.code.append([op, a, b])
        return len(self.code) - 1

    def here(self) -> int:
        return len(self.code)

    def patch(self, pc: int, a: int):
        self.code[pc][1] = a


def _emit_slot_addr(asm: _Asm, base: int, terms) -> bool:
    """Emit code leaving a slot id on the stack; returns False if the address
    is fully static (nothing emitted, caller should use ``base`` directly)."""
    folded_base = base
    dyn = []
    for t in terms:
        if isinstance(t.expr, K.Const) and t.lo <= t.expr.value <= t.hi:
            folded_base += t.coef * (t.expr.value - t.lo)
        else:
            # An out-of-range *constant* index still goes through the dynamic
            # path: the reference evaluator only faults if the ref is actually
            # reached (shortcut &&/|| may skip it), so the fault has to happen
            # at run time, not here.
            dyn.append(t)
    if not dyn:
        return False, folded_base
    asm.emit(OP_PUSH, folded_base)
    for t in dyn:
        _emit_expr(asm, t.expr)
        asm.emit(OP_CHECK, t.lo, t.hi)
        asm.emit(OP_PUSH, t.lo)
        asm.emit(OP_SUB)
        asm.emit(OP_PUSH, t.coef)
        asm.emit(OP_MUL)
        asm.emit(OP_ADD)
    return True, folded_base


def _emit_expr(asm: _Asm, e: K.Expr):
    if isinstance(e, K.Const):
        asm.emit(OP_PUSH, int(e.value))
    elif isinstance(e, K.Local):
        raise AssertionError(f"unsubstituted binding {e.name!r} at compile time")
    elif isinstance(e, K.Ref):
        dynamic, base = _emit_slot_addr(asm, e.base, e.terms)
        if dynamic:
            asm.emit(OP_LOADD)
        else:
            asm.emit(OP_LOAD, base)
    elif isinstance(e, K.Unary):
        _emit_expr(asm, e.a)
        asm.emit(OP_NEG if e.op == "-" else OP_NOT)
    elif isinstance(e, K.Binary):
        _emit_expr(asm, e.a)
        _emit_expr(asm, e.b)
        asm.emit(_BINOPS[e.op])
    elif isinstance(e, K.Nary):
        jumps = []
        shortcut = OP_JZ if e.op == "&&" else OP_JNZ
        for item in e.items:
            _emit_expr(asm, item)
            jumps.append(asm.emit(shortcut, 0))
        asm.emit(OP_PUSH, 1 if e.op == "&&" else 0)
        end_jump = asm.emit(OP_JMP, 0)
        target = asm.here()
        for pc in jumps:
            asm.patch(pc, target)
        asm.emit(OP_PUSH, 0 if e.op == "&&" else 1)
        asm.patch(end_jump, asm.here())
    elif isinstance(e, K.Ternary):
        _emit_expr(asm, e.cond)
        jz = asm.emit(OP_JZ, 0)
        _emit_expr(asm, e.then)
        jend = asm.emit(OP_JMP, 0)
        asm.patch(jz, asm.here())
        _emit_expr(asm, e.els)
        asm.patch(jend, asm.here())
    elif isinstance(e, K.Quant):
        op = "&&" if e.kind == "forall" else "||"
        items = tuple(
            K.subst_locals(e.body, {e.var: v}) for v in e.domain
        )
        if not items:
            asm.emit(OP_PUSH, 1 if e.kind == "forall" else 0)
        else:
            _emit_expr(asm, K.Nary(op, items))
    else:
        raise AssertionError(f"bad expr node {e!r}")


def _emit_stmts(asm: _Asm, stmts):
    for st in stmts:
        if isinstance(st, K.Assign):
            _emit_expr(asm, st.expr)
            dynamic, base = _emit_slot_addr(asm, st.target.base, st.target.terms)
            if dynamic:
                asm.emit(OP_STORED)
            else:
                asm.emit(OP_STORE, base)
        elif isinstance(st, K.IfStmt):
            _emit_expr(asm, st.cond)
            jz = asm.emit(OP_JZ, 0)
            _emit_stmts(asm, st.then)
            if st.els:
                jend = asm.emit(OP_JMP, 0)
                asm.patch(jz, asm.here())
                _emit_stmts(asm, st.els)
                asm.patch(jend, asm.here())
            else:
                asm.patch(jz, asm.here())
        else:
            raise AssertionError(f"bad stmt node {st!r}")


@dataclass
class CompiledGraph:
    """Flat tables driving the generic interpreter."""

    code: np.ndarray  # (L, 3) int64
    # one row per expanded transition prototype (edge x select binding):
    p_agent: np.ndarray  # int32
    p_src: np.ndarray  # int32 source location ordinal
    p_dst: np.ndarray  # int32 target location ordinal
    p_guard: np.ndarray  # int64 pc, -1 when absent
    p_update: np.ndarray  # int64 pc, -1 when absent
    p_sync: np.ndarray  # int8: -1 internal, 0 sender, 1 receiver
    p_cid: np.ndarray  # int64 pc of the channel-id program, -1 static
    p_cid_static: np.ndarray  # int64 channel id when p_cid == -1
    p_committed: np.ndarray  # int8: source location is committed
    committed: np.ndarray  # (n_agents, max_locs) int8
    slot_lo: np.ndarray  # int64
    slot_hi: np.ndarray  # int64
    n_agents: int
    width: int
    # prototype provenance for diagnostics: (agent, edge index, binding)
    origin: List[Tuple[str, int, Tuple[Tuple[str, int], ...]]] = None


def _compile_guard(asm: _Asm, guard) -> int:
    if guard is None:
        return -1
    pc = asm.here()
    _emit_expr(asm, guard)
    asm.emit(OP_HALT)
    return pc


def compile_graph(m: MASGraph) -> CompiledGraph:
    asm = _Asm()
    p_agent, p_src, p_dst = [], [], []
    p_guard, p_update = [], []
    p_sync, p_cid, p_cid_static, p_committed = [], [], [], []
    origin = []

    for ai, a in enumerate(m.agents):
        for e in a.edges:
            src = a.loc_ordinal(e.src)
            dst = a.loc_ordinal(e.target)
            committed = 1 if e.src in a.committed else 0
            for env in e.bindings():
                guard = K.subst_locals(e.guard, env) if e.guard is not None else None
                updates = tuple(K.subst_stmt_locals(u, env) for u in e.updates)

                gpc = _compile_guard(asm, guard)
                if updates:
                    upc = asm.here()
                    _emit_stmts(asm, updates)
                    asm.emit(OP_HALT)
                else:
                    upc = -1

                if e.sync is None:
                    spc, scid, skind = -1, -1, -1
                else:
                    terms = tuple(
                        K.IndexTerm(K.subst_locals(t.expr, env), t.lo, t.hi, t.coef)
                        for t in e.sync.terms
                    )
                    probe = _Asm()
                    dynamic, folded = _emit_slot_addr(probe, e.sync.base, terms)
                    if dynamic:
                        spc = asm.here()
                        asm.code.extend(probe.code)
                        asm.emit(OP_HALT)
                        scid = -1
                    else:
                        spc, scid = -1, folded
                    skind = 0 if e.sync.direction == "!" else 1

                p_agent.append(ai)
                p_src.append(src)
                p_dst.append(dst)
                p_guard.append(gpc)
                p_update.append(upc)
                p_sync.append(skind)
                p_cid.append(spc)
                p_cid_static.append(scid)
                p_committed.append(committed)
                origin.append((a.name, e.index, tuple(env.items())))

    max_locs = max((len(a.locations) for a in m.agents), default=1)
    committed = np.zeros((m.n_agents, max_locs), dtype=np.int8)
    for ai, a in enumerate(m.agents):
        for li, loc in enumerate(a.locations):
            if loc in a.committed:
                committed[ai, li] = 1

    lo = np.array([b[0] for b in m.slots.bounds], dtype=np.int64)
    hi = np.array([b[1] for b in m.slots.bounds], dtype=np.int64)
    code = (
        np.array(asm.code, dtype=np.int64)
        if asm.code
        else np.zeros((1, 3), dtype=np.int64)
    )
    return CompiledGraph(
        code=code,
        p_agent=np.array(p_agent, dtype=np.int32),
        p_src=np.array(p_src, dtype=np.int32),
        p_dst=np.array(p_dst, dtype=np.int32),
        p_guard=np.array(p_guard, dtype=np.int64),
        p_update=np.array(p_update, dtype=np.int64),
        p_sync=np.array(p_sync, dtype=np.int8),
        p_cid=np.array(p_cid, dtype=np.int64),
        p_cid_static=np.array(p_cid_static, dtype=np.int64),
        p_committed=np.array(p_committed, dtype=np.int8),
        committed=committed,
        slot_lo=lo,
        slot_hi=hi,
        n_agents=m.n_agents,
        width=m.state_width(),
        origin=origin,
    )


def compile_predicate(cg: CompiledGraph, expr: K.Expr) -> int:
    """Append a predicate program to the code table; returns its entry pc."""
    asm = _Asm()
    _emit_expr(asm, expr)
    asm.emit(OP_HALT)
    base = len(cg.code)
    prog = np.array(asm.code, dtype=np.int64)
    # jump targets were emitted relative to this program's start
    reloc = np.isin(prog[:, 0], (OP_JMP, OP_JZ, OP_JNZ))
    prog[reloc, 1] += base
    cg.code = np.vstack([cg.code, prog])
    return base
