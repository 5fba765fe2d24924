"""Reference execution semantics (the slow, obviously-correct path).

Everything here interprets the structural model directly over tuple states.
The compiled engine must agree with this module transition-for-transition;
differential tests enforce that.  `unwrap` is what the verdict oracle runs on,
so this module deliberately avoids sharing code with the engine.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..errors import (
    BoundExceeded,
    EvaluationFault,
    InitialConditionViolated,
    RangeFault,
)
from .expr import eval_expr, exec_stmts
from .model import SERIAL, AgentInstance, GlobalState, MASGraph, TransitionLabel


def initial_state(m: MASGraph) -> GlobalState:
    """The single initial state: declared initializers, initial locations.

    Raises InitialConditionViolated when some agent's initial condition is
    false under that valuation.
    """
    values = list(m.slots.inits)
    for i, a in enumerate(m.agents):
        values[i] = a.init_loc
    s = GlobalState(tuple(values))
    for a in m.agents:
        if a.init_cond is not None and not eval_expr(a.init_cond, s.values, {}):
            raise InitialConditionViolated(
                f"initial condition of {a.name} is false in the initial valuation"
            )
    return s


def _guard_holds(m, a, e, values, env):
    try:
        return bool(eval_expr(e.guard, values, env)) if e.guard is not None else True
    except EvaluationFault as f:
        raise EvaluationFault(
            f"while evaluating guard of {a.name} edge {e.src}->{e.target}: {f}",
            context=(a.name, e.index),
        ) from f


def enabled(s: GlobalState, m: MASGraph) -> List[TransitionLabel]:
    """Enabled transitions of ``s`` in a fixed deterministic order.

    Internal transitions come first (agent order, edge order, select bindings
    lexicographic), then channel handshakes (channel id, then sender, then
    receiver discovery order).  If any agent occupies a committed location the
    list keeps only transitions leaving a committed location; an empty result
    (deadlock, committed or otherwise) is the serial self-loop.
    """
    internals = []  # (label, committed)
    sends: Dict[int, list] = {}
    recvs: Dict[int, list] = {}
    any_committed = False
    for ai, a in enumerate(m.agents):
        loc_name = a.locations[s.values[ai]]
        committed_here = loc_name in a.committed
        any_committed = any_committed or committed_here
        for e in a.edges_from(s.values[ai]):
            for env in e.bindings():
                if not _guard_holds(m, a, e, s.values, env):
                    continue
                binding = tuple(env.items())
                if e.sync is None:
                    lbl = TransitionLabel(
                        kind="internal", agent=a.name, edge=e.index, binding=binding
                    )
                    internals.append((lbl, committed_here))
                else:
                    try:
                        cid = e.sync.resolve(s.values, env)
                    except EvaluationFault as f:
                        raise EvaluationFault(
                            f"in sync of {a.name} edge {e.src}->{e.target}: {f}",
                            context=(a.name, e.index),
                        ) from f
                    entry = (ai, a, e, binding, committed_here)
                    bucket = sends if e.sync.direction == "!" else recvs
                    bucket.setdefault(cid, []).append(entry)

    labels: List[Tuple[TransitionLabel, bool]] = list(internals)
    for cid in sorted(set(sends) & set(recvs)):
        for (si, sa, se, sb, sc) in sends[cid]:
            for (ri, ra, re_, rb, rc) in recvs[cid]:
                if si == ri:
                    continue
                lbl = TransitionLabel(
                    kind="handshake",
                    agent=sa.name,
                    edge=se.index,
                    binding=sb,
                    channel=m.channel_name(cid),
                    receiver=ra.name,
                    receiver_edge=re_.index,
                    receiver_binding=rb,
                )
                labels.append((lbl, sc or rc))

    if any_committed:
        labels = [(l, c) for (l, c) in labels if c]
    out = [l for (l, _) in labels]
    return out if out else [SERIAL]


def _agent_edge(m: MASGraph, name: str, edge: int):
    ai = m.agent_index(name)
    a = m.agents[ai]
    return ai, a, a.edges[edge]


def step(s: GlobalState, t: TransitionLabel, m: MASGraph) -> GlobalState:
    """Apply an enabled transition.  For handshakes the sender's update runs
    first and the receiver's second, on the sender's result."""
    if t.kind == "serial":
        return s
    values = list(s.values)

    def run(agent_name, edge_idx, binding):
        ai, a, e = _agent_edge(m, agent_name, edge_idx)
        env = dict(binding)
        try:
            exec_stmts(e.updates, values, env, m.slots.bounds)
        except RangeFault as f:
            raise RangeFault(
                f"in update of {a.name} edge {e.src}->{e.target}: {f}", span=f.span
            ) from f
        values[ai] = a.loc_ordinal(e.target)

    run(t.agent, t.edge, t.binding)
    if t.kind == "handshake":
        run(t.receiver, t.receiver_edge, t.receiver_binding)
    return GlobalState(tuple(values))


@dataclass
class ExplicitModel:
    """A fully materialized (unwrapped) transition system."""

    graph: MASGraph
    states: List[GlobalState]
    init: List[int]
    trans: List[List[Tuple[TransitionLabel, int]]]
    truncated: bool = False
    _index: Dict[GlobalState, int] = field(default_factory=dict)

    def index_of(self, s: GlobalState) -> int:
        return self._index[s]

    def __len__(self):
        return len(self.states)


def unwrap(m: MASGraph, state_bound: Optional[int] = None) -> ExplicitModel:
    """Materialize every reachable state breadth-first.

    Seriality holds by construction (`enabled` never returns an empty list).
    Raises BoundExceeded — carrying the partial, `truncated=True` model — as
    soon as more than ``state_bound`` states have been discovered.
    """
    s0 = initial_state(m)
    states = [s0]
    index = {s0: 0}
    trans: List[List[Tuple[TransitionLabel, int]]] = []
    queue = deque([0])
    em = ExplicitModel(m, states, [0], trans, _index=index)
    while queue:
        sid = queue.popleft()
        while len(trans) <= sid:
            trans.append([])
        s = states[sid]
        out = []
        for lbl in enabled(s, m):
            succ = step(s, lbl, m)
            j = index.get(succ)
            if j is None:
                j = len(states)
                if state_bound is not None and j >= state_bound:
                    em.truncated = True
                    raise BoundExceeded(
                        f"state bound {state_bound} exceeded while unwrapping",
                        partial=em,
                    )
                index[succ] = j
                states.append(succ)
                queue.append(j)
            out.append((lbl, j))
        trans[sid] = out
    return em


def replay(m: MASGraph, start: GlobalState, labels) -> List[GlobalState]:
    """Re-execute a label sequence from ``start``; used to validate traces."""
    out = [start]
    s = start
    for lbl in labels:
        s = step(s, lbl, m)
        out.append(s)
    return out
