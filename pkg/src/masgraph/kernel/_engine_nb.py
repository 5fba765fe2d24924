"""Compiled engine: jitted interpreters over the bytecode tables.

The interpreter kernels are generic (compiled once per process, not per
model); everything model-specific lives in the `CompiledGraph` arrays.  On a
fault the engine re-runs the offending row through the reference semantics,
which raises the same fault with a readable message.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np
from numba import njit

from ..errors import EvaluationFault, RangeFault
from .compile import compile_graph, compile_predicate
from .engine import TransitionFault, state_vec, vec_state
from .model import MASGraph
from .semantics import enabled, initial_state, step

# fault codes (mirrored from compile.py; numba wants plain ints here)
_F_DIV = 1
_F_INDEX = 2
_F_RANGE = 3

_STACK = 128


@njit(cache=True)
def _run(code, pc, state, stack, slot_lo, slot_hi):
    """Execute one program; returns (top-of-stack value, fault, aux)."""
    sp = 0
    while True:
        op = code[pc, 0]
        a = code[pc, 1]
        b = code[pc, 2]
        if op == 0:  # PUSH
            stack[sp] = a
            sp += 1
        elif op == 1:  # LOAD
            stack[sp] = state[a]
            sp += 1
        elif op == 2:  # LOADD
            stack[sp - 1] = state[stack[sp - 1]]
        elif op == 3:  # STORE
            v = stack[sp - 1]
            sp -= 1
            if v < slot_lo[a] or v > slot_hi[a]:
                return v, _F_RANGE, a
            state[a] = v
        elif op == 4:  # STORED
            idx = stack[sp - 1]
            v = stack[sp - 2]
            sp -= 2
            if v < slot_lo[idx] or v > slot_hi[idx]:
                return v, _F_RANGE, idx
            state[idx] = v
        elif op == 5:  # ADD
            stack[sp - 2] = stack[sp - 2] + stack[sp - 1]
            sp -= 1
        elif op == 6:  # SUB
            stack[sp - 2] = stack[sp - 2] - stack[sp - 1]
            sp -= 1
        elif op == 7:  # MUL
            stack[sp - 2] = stack[sp - 2] * stack[sp - 1]
            sp -= 1
        elif op == 8 or op == 9:  # DIV / MOD (C semantics, truncation)
            d = stack[sp - 1]
            x = stack[sp - 2]
            sp -= 1
            if d == 0:
                return x, _F_DIV, 0
            q = x // d
            if x % d != 0 and (x < 0) != (d < 0):
                q += 1
            stack[sp - 1] = q if op == 8 else x - d * q
        elif op == 10:  # NEG
            stack[sp - 1] = -stack[sp - 1]
        elif op == 11:  # NOT
            stack[sp - 1] = 1 if stack[sp - 1] == 0 else 0
        elif op == 12:
            stack[sp - 2] = 1 if stack[sp - 2] == stack[sp - 1] else 0
            sp -= 1
        elif op == 13:
            stack[sp - 2] = 1 if stack[sp - 2] != stack[sp - 1] else 0
            sp -= 1
        elif op == 14:
            stack[sp - 2] = 1 if stack[sp - 2] < stack[sp - 1] else 0
            sp -= 1
        elif op == 15:
            stack[sp - 2] = 1 if stack[sp - 2] <= stack[sp - 1] else 0
            sp -= 1
        elif op == 16:
            stack[sp - 2] = 1 if stack[sp - 2] > stack[sp - 1] else 0
            sp -= 1
        elif op == 17:
            stack[sp - 2] = 1 if stack[sp - 2] >= stack[sp - 1] else 0
            sp -= 1
        elif op == 18:  # JMP
            pc = a
            continue
        elif op == 19:  # JZ
            sp -= 1
            if stack[sp] == 0:
                pc = a
                continue
        elif op == 20:  # JNZ
            sp -= 1
            if stack[sp] != 0:
                pc = a
                continue
        elif op == 21:  # CHECK
            v = stack[sp - 1]
            if v < a or v > b:
                return v, _F_INDEX, 0
        else:  # HALT
            return (stack[sp - 1] if sp > 0 else 0), 0, 0
        pc += 1


@njit(cache=True)
def _scan_batch(F, code, p_agent, p_src, p_guard, p_sync, p_cid, p_cid_static,
                p_committed, committed, slot_lo, slot_hi):
    """Guard evaluation for a batch: enabled flags, channel ids, counts.

    Returns (en, cids, counts, fault_row, fault_code, fault_aux).  ``counts``
    includes the serial self-loop for rows with nothing enabled.
    """
    n = F.shape[0]
    P = p_agent.shape[0]
    na = committed.shape[0]
    en = np.zeros((n, P), dtype=np.int8)
    cids = np.zeros((n, P), dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    stack = np.zeros(_STACK, dtype=np.int64)

    for i in range(n):
        # the committed filter applies to whole labels: an internal step needs
        # a committed source, a handshake keeps running if either endpoint
        # leaves a committed location
        row_committed = False
        for ai in range(na):
            if committed[ai, F[i, ai]] == 1:
                row_committed = True
                break
        for p in range(P):
            if F[i, p_agent[p]] != p_src[p]:
                continue
            if p_guard[p] >= 0:
                v, f, aux = _run(code, p_guard[p], F[i], stack, slot_lo, slot_hi)
                if f != 0:
                    return en, cids, counts, i, f, aux
                if v == 0:
                    continue
            if p_cid[p] >= 0:
                cid, f, aux = _run(code, p_cid[p], F[i], stack, slot_lo, slot_hi)
                if f != 0:
                    return en, cids, counts, i, f, aux
                cids[i, p] = cid
            else:
                cids[i, p] = p_cid_static[p]
            en[i, p] = 1

        c = 0
        for p in range(P):
            if en[i, p] == 1 and p_sync[p] == -1:
                if not row_committed or p_committed[p] == 1:
                    c += 1
        for s in range(P):
            if en[i, s] == 1 and p_sync[s] == 0:
                for r in range(P):
                    if (
                        en[i, r] == 1
                        and p_sync[r] == 1
                        and cids[i, r] == cids[i, s]
                        and p_agent[r] != p_agent[s]
                    ):
                        if (
                            not row_committed
                            or p_committed[s] == 1
                            or p_committed[r] == 1
                        ):
                            c += 1
        counts[i] = c if c > 0 else 1
    return en, cids, counts, -1, 0, 0


@njit(cache=True)
def _fill_batch(F, out, offsets, en, cids, code, p_agent, p_dst, p_update,
                p_sync, p_committed, committed, slot_lo, slot_hi):
    """Write successor rows; assumes _scan_batch found no fault.

    Order per row: internals in prototype order, then sender-major handshake
    pairs, then (only if nothing else) the serial self-loop.  The committed
    filter must mirror _scan_batch exactly or the offsets are wrong.
    """
    n = F.shape[0]
    P = p_agent.shape[0]
    na = committed.shape[0]
    w = F.shape[1]
    stack = np.zeros(_STACK, dtype=np.int64)

    for i in range(n):
        row_committed = False
        for ai in range(na):
            if committed[ai, F[i, ai]] == 1:
                row_committed = True
                break
        k = offsets[i]
        for p in range(P):
            if en[i, p] == 1 and p_sync[p] == -1:
                if row_committed and p_committed[p] == 0:
                    continue
                for c in range(w):
                    out[k, c] = F[i, c]
                if p_update[p] >= 0:
                    v, f, aux = _run(code, p_update[p], out[k], stack, slot_lo, slot_hi)
                    if f != 0:
                        return i, f, aux
                out[k, p_agent[p]] = p_dst[p]
                k += 1
        for s in range(P):
            if en[i, s] == 1 and p_sync[s] == 0:
                for r in range(P):
                    if (
                        en[i, r] == 1
                        and p_sync[r] == 1
                        and cids[i, r] == cids[i, s]
                        and p_agent[r] != p_agent[s]
                    ):
                        if row_committed and p_committed[s] == 0 and p_committed[r] == 0:
                            continue
                        for c in range(w):
                            out[k, c] = F[i, c]
                        if p_update[s] >= 0:
                            v, f, aux = _run(
                                code, p_update[s], out[k], stack, slot_lo, slot_hi
                            )
                            if f != 0:
                                return i, f, aux
                        if p_update[r] >= 0:
                            v, f, aux = _run(
                                code, p_update[r], out[k], stack, slot_lo, slot_hi
                            )
                            if f != 0:
                                return i, f, aux
                        out[k, p_agent[s]] = p_dst[s]
                        out[k, p_agent[r]] = p_dst[r]
                        k += 1
        if k == offsets[i]:  # deadlocked: serial self-loop
            for c in range(w):
                out[k, c] = F[i, c]
    return -1, 0, 0


@njit(cache=True)
def _pred_batch(S, code, pc, out, slot_lo, slot_hi):
    # predicates are expressions: no stores, so rows can be passed directly
    stack = np.zeros(_STACK, dtype=np.int64)
    for i in range(S.shape[0]):
        v, f, aux = _run(code, pc, S[i], stack, slot_lo, slot_hi)
        if f != 0:
            return i, f
        out[i] = 1 if v != 0 else 0
    return -1, 0


class NumbaEngine:
    """Batch engine over the jitted interpreter kernels."""

    kind = "numba"

    def __init__(self, graph: MASGraph, chunk: int = 4096,
                 rowcap: int = 1 << 21):
        self.graph = graph
        self.cg = compile_graph(graph)
        self.width = self.cg.width
        self.chunk = chunk
        # cap on successor rows materialised per fill, so a high-fanout
        # frontier degrades to more passes instead of one huge allocation
        self.rowcap = rowcap

    def init_vec(self) -> np.ndarray:
        return state_vec(initial_state(self.graph))

    def _raise_row_fault(self, frontier_row: np.ndarray, row: int):
        """Reproduce the fault through the reference semantics for a readable
        error, then wrap it with the frontier position."""
        s = vec_state(frontier_row)
        try:
            for lbl in enabled(s, self.graph):
                step(s, lbl, self.graph)
        except (EvaluationFault, RangeFault) as f:
            raise TransitionFault(row, f) from f
        raise TransitionFault(
            row, EvaluationFault("compiled engine reported a fault that the "
                                 "reference semantics does not reproduce")
        )

    def expand(self, frontier: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        cg = self.cg
        outs = []
        offs = [np.zeros(1, dtype=np.int64)]
        total = 0
        for lo in range(0, len(frontier), self.chunk):
            F = np.ascontiguousarray(frontier[lo : lo + self.chunk])
            en, cids, counts, frow, fcode, faux = _scan_batch(
                F, cg.code, cg.p_agent, cg.p_src, cg.p_guard, cg.p_sync,
                cg.p_cid, cg.p_cid_static, cg.p_committed, cg.committed,
                cg.slot_lo, cg.slot_hi,
            )
            if frow >= 0:
                self._raise_row_fault(F[frow], lo + frow)
            a, n = 0, len(F)
            while a < n:
                b = a + 1
                acc = int(counts[a])
                while b < n and acc + int(counts[b]) <= self.rowcap:
                    acc += int(counts[b])
                    b += 1
                offsets = np.zeros(b - a + 1, dtype=np.int64)
                np.cumsum(counts[a:b], out=offsets[1:])
                out = np.zeros((int(offsets[-1]), self.width), dtype=np.int32)
                frow, fcode, faux = _fill_batch(
                    F[a:b], out, offsets, en[a:b], cids[a:b], cg.code,
                    cg.p_agent, cg.p_dst, cg.p_update, cg.p_sync,
                    cg.p_committed, cg.committed, cg.slot_lo, cg.slot_hi,
                )
                if frow >= 0:
                    self._raise_row_fault(F[a + frow], lo + a + frow)
                outs.append(out)
                offs.append(offsets[1:] + total)
                total += int(offsets[-1])
                a = b
        succs = (
            np.concatenate(outs)
            if outs
            else np.zeros((0, self.width), dtype=np.int32)
        )
        return succs, np.concatenate(offs)

    def compile_pred(self, expr) -> int:
        return compile_predicate(self.cg, expr)

    def eval_pred(self, pc: int, states: np.ndarray) -> np.ndarray:
        out = np.zeros(len(states), dtype=np.uint8)
        S = np.ascontiguousarray(states)
        frow, fcode = _pred_batch(S, self.cg.code, pc, out, self.cg.slot_lo,
                                  self.cg.slot_hi)
        if frow >= 0:
            raise EvaluationFault(
                "fault while evaluating a property atom "
                f"(code {fcode}) in state {vec_state(S[frow])!r}"
            )
        return out.astype(bool)
