"""Search-based property checking over the batch engine interface.

Invariants and reachability run breadth-first with early exit, which makes
counterexamples / witnesses shortest.  The run-quantified kinds (A<>, E[],
leads-to) materialize the reachable graph in CSR form and compute greatest
fixpoints vectorized; serial closure guarantees total successor relations, so
maximal runs coincide with infinite runs and the fixpoints are well defined.

Counterexample labels are reconstructed with the reference semantics by
matching parent/child state pairs; `kernel.semantics.replay` revalidates every
reported trace.
"""

from __future__ import annotations

import resource
import time
from typing import List, Optional

import numpy as np

from ..kernel.engine import TransitionFault, vec_state
from ..kernel.model import GlobalState, MASGraph
from ..kernel.semantics import enabled, step
from .formulas import Property, SearchStats, Trace, Verdict


def _peak_mem_mb() -> float:
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


class _StateStore:
    """Append-only matrix of discovered state rows (int32)."""

    def __init__(self, width: int):
        self.width = width
        self.buf = np.zeros((1024, width), dtype=np.int32)
        self.n = 0

    def append_rows(self, rows: np.ndarray) -> None:
        need = self.n + len(rows)
        if need > len(self.buf):
            cap = max(need, 2 * len(self.buf))
            nb = np.zeros((cap, self.width), dtype=np.int32)
            nb[: self.n] = self.buf[: self.n]
            self.buf = nb
        self.buf[self.n : need] = rows
        self.n = need

    def rows(self, lo: int, hi: int) -> np.ndarray:
        return self.buf[lo:hi]


class Explored:
    """Result of a (possibly partial) breadth-first exploration.

    States are numbered in discovery order, so the CSR rows (when adjacency
    is kept) align with state ids.
    """

    def __init__(self, store, parents, indptr, succs, complete, explored):
        self.store = store
        self.parents = parents  # np.int64, -1 at the root
        self.indptr = indptr
        self.succs = succs
        self.complete = complete
        self.explored = explored

    @property
    def n(self) -> int:
        return self.store.n

    def state(self, sid: int) -> GlobalState:
        return vec_state(self.store.buf[sid])

    def path_to(self, sid: int) -> List[int]:
        out = [sid]
        while self.parents[out[-1]] >= 0:
            out.append(int(self.parents[out[-1]]))
        out.reverse()
        return out


class _Budget(Exception):
    def __init__(self, partial: Explored):
        super().__init__("state budget exceeded")
        self.partial = partial


def _explore(engine, max_states, keep_adjacency, stop_pred=None):
    """BFS from the initial state.

    Returns (Explored, hit_sid): hit_sid is the first state (in discovery
    order) satisfying ``stop_pred``, or None.  Raises _Budget carrying the
    partial exploration when ``max_states`` is exceeded.  TransitionFault
    propagates from the engine with ``.sid`` and ``.partial`` attached.
    """
    w = engine.width
    store = _StateStore(w)
    init = engine.init_vec().reshape(1, w)
    store.append_rows(init)
    visited = {init.tobytes(): 0}
    parent_chunks = [np.full(1, -1, dtype=np.int64)]
    succ_chunks: List[np.ndarray] = []
    off_chunks: List[np.ndarray] = []
    total_edges = 0
    explored = 0

    def snapshot(complete=False, with_adjacency=False):
        parents = np.concatenate(parent_chunks)
        indptr = succs = None
        if with_adjacency:
            indptr = np.concatenate(
                [np.zeros(1, dtype=np.int64)] + off_chunks
            )
            succs = (
                np.concatenate(succ_chunks)
                if succ_chunks
                else np.zeros(0, dtype=np.int64)
            )
        return Explored(store, parents, indptr, succs, complete, explored)

    if stop_pred is not None and bool(engine.eval_pred(stop_pred, init)[0]):
        return snapshot(), 0

    lo, hi = 0, 1
    while lo < hi:
        frontier = store.rows(lo, hi).copy()
        try:
            succs, offsets = engine.expand(frontier)
        except TransitionFault as tf:
            tf.sid = lo + tf.row
            tf.partial = snapshot()
            raise
        explored += hi - lo

        new_rows = []
        new_parents = []
        ids = np.empty(len(succs), dtype=np.int64)
        next_id = store.n
        keys = [succs[k].tobytes() for k in range(len(succs))]
        for i in range(len(frontier)):
            for k in range(int(offsets[i]), int(offsets[i + 1])):
                sid = visited.get(keys[k])
                if sid is None:
                    sid = next_id
                    next_id += 1
                    visited[keys[k]] = sid
                    new_rows.append(succs[k])
                    new_parents.append(lo + i)
                ids[k] = sid
        if keep_adjacency:
            succ_chunks.append(ids)
            off_chunks.append(offsets[1:] + total_edges)
            total_edges += int(offsets[-1])

        if new_rows:
            arr = np.stack(new_rows)
            store.append_rows(arr)
            parent_chunks.append(np.asarray(new_parents, dtype=np.int64))
            if max_states is not None and store.n > max_states:
                raise _Budget(snapshot())
            if stop_pred is not None:
                hits = engine.eval_pred(stop_pred, arr)
                if hits.any():
                    hit = store.n - len(arr) + int(np.argmax(hits))
                    return snapshot(), hit
        lo, hi = hi, store.n

    return snapshot(complete=True, with_adjacency=keep_adjacency), None


# --------------------------------------------------------------------------
# trace reconstruction


def _connect(m: MASGraph, a: GlobalState, b: GlobalState):
    for lbl in enabled(a, m):
        if step(a, lbl, m) == b:
            return lbl
    raise AssertionError("no transition connects the reported states")


def _trace_from_ids(m: MASGraph, ex: Explored, ids: List[int], loop_start=None) -> Trace:
    states = [ex.state(i) for i in ids]
    labels = [_connect(m, states[i], states[i + 1]) for i in range(len(states) - 1)]
    return Trace(states, labels, loop_start)


def _prefix_trace(m: MASGraph, ex: Explored, sid: int) -> Trace:
    return _trace_from_ids(m, ex, ex.path_to(sid))


def _lasso_trace(m: MASGraph, ex: Explored, start: int, alive: np.ndarray) -> Trace:
    """Prefix to ``start`` plus a cycle inside the ``alive`` region."""
    prefix_ids = ex.path_to(start)
    walk = [start]
    seen = {start: 0}
    cur = start
    while True:
        nxt = None
        for k in range(int(ex.indptr[cur]), int(ex.indptr[cur + 1])):
            j = int(ex.succs[k])
            if alive[j]:
                nxt = j
                break
        assert nxt is not None, "alive state without alive successor"
        if nxt in seen:
            walk.append(nxt)
            loop_entry = seen[nxt]
            break
        seen[nxt] = len(walk)
        walk.append(nxt)
        cur = nxt
    full = prefix_ids[:-1] + walk
    loop_start = len(prefix_ids) - 1 + loop_entry
    return _trace_from_ids(m, ex, full, loop_start=loop_start)


# --------------------------------------------------------------------------
# fixpoints on CSR adjacency


def _globally_fixpoint(indptr, succs, holds: np.ndarray) -> np.ndarray:
    """States with some infinite run staying inside ``holds`` (vectorized gfp)."""
    alive = holds.copy()
    while True:
        # any alive successor, per state (no empty rows: serial closure)
        succ_alive = np.maximum.reduceat(
            alive[succs].astype(np.int8), indptr[:-1]
        ).astype(bool)
        nxt = holds & succ_alive
        if (nxt == alive).all():
            return nxt
        alive = nxt


# --------------------------------------------------------------------------
# the checker


def _memout(prop: Property, partial_n: int, explored: int, t0: float, mode: str) -> Verdict:
    return Verdict(
        prop,
        satisfied=None,
        conclusive=False,
        mode=mode,
        reason="memout",
        stats=SearchStats(partial_n, explored, time.perf_counter() - t0, _peak_mem_mb()),
    )


def _attach_fault_trace(m: MASGraph, tf: TransitionFault):
    trace = _prefix_trace(m, tf.partial, tf.sid)
    tf.cause.trace = trace
    raise tf.cause


def check_property(
    engine,
    prop: Property,
    max_states: Optional[int] = None,
    mode: str = "concrete",
    want_trace: bool = True,
) -> Verdict:
    """Check one property; returns a Verdict with stats and optional trace."""
    m = engine.graph
    t0 = time.perf_counter()

    def stats(ex: Explored) -> SearchStats:
        return SearchStats(ex.n, ex.explored, time.perf_counter() - t0, _peak_mem_mb())

    try:
        if prop.kind in ("invariant", "reach"):
            target = engine.compile_pred(
                _negate(prop.expr) if prop.kind == "invariant" else prop.expr
            )
            try:
                ex, hit = _explore(engine, max_states, False, stop_pred=target)
            except _Budget as b:
                return _memout(prop, b.partial.n, b.partial.explored, t0, mode)
            if prop.kind == "invariant":
                sat = hit is None
            else:
                sat = hit is not None
            v = Verdict(prop, sat, mode=mode, stats=stats(ex))
            if hit is not None and want_trace:
                v.trace = _prefix_trace(m, ex, hit)
            return v

        if prop.kind == "exists-globally" and prop.mode == "finite-run":
            # a length-zero run is a finite run, so only the start matters
            init = engine.init_vec().reshape(1, -1)
            p0 = bool(engine.eval_pred(engine.compile_pred(prop.expr), init)[0])
            v = Verdict(
                prop, p0, mode=mode,
                stats=SearchStats(1, 1, time.perf_counter() - t0, _peak_mem_mb()),
            )
            if p0 and want_trace:
                v.trace = Trace([vec_state(init[0])], [])
            return v

        try:
            ex, _ = _explore(engine, max_states, True)
        except _Budget as b:
            return _memout(prop, b.partial.n, b.partial.explored, t0, mode)

        all_rows = ex.store.rows(0, ex.n)
        p = engine.eval_pred(engine.compile_pred(prop.expr), all_rows)

        if prop.kind == "exists-globally":
            alive = _globally_fixpoint(ex.indptr, ex.succs, p)
            sat = bool(alive[0])
            v = Verdict(prop, sat, mode=mode, stats=stats(ex))
            if sat and want_trace:
                v.trace = _lasso_trace(m, ex, 0, alive)
            return v

        if prop.kind == "liveness":
            alive = _globally_fixpoint(ex.indptr, ex.succs, ~p)
            sat = not bool(alive[0])
            v = Verdict(prop, sat, mode=mode, stats=stats(ex))
            if not sat and want_trace:
                v.trace = _lasso_trace(m, ex, 0, alive)
            return v

        if prop.kind == "leads-to":
            q = engine.eval_pred(engine.compile_pred(prop.rhs), all_rows)
            evade = _globally_fixpoint(ex.indptr, ex.succs, ~q)
            bad = p & evade
            sat = not bool(bad.any())
            v = Verdict(prop, sat, mode=mode, stats=stats(ex))
            if not sat and want_trace:
                # earliest discovered violating state gives a short prefix
                s = int(np.argmax(bad))
                v.trace = _lasso_trace(m, ex, s, evade)
            return v

        raise ValueError(f"unknown property kind {prop.kind!r}")
    except TransitionFault as tf:
        _attach_fault_trace(m, tf)


def _negate(expr):
    from ..kernel.expr import Unary

    return Unary("!", expr)
