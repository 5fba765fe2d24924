"""Structural model objects produced by the elaborator.

The flat state vector layout is::

    [ loc(agent 0), ..., loc(agent n-1), var slot 0, ..., var slot m-1 ]

Each agent's current location is stored as an ordinal in a leading slot, which
lets query location atoms lower to ordinary equality tests and keeps the
compiled engine's state a single int vector.  Variable slots are the scalar
flattening of every declared variable, shared first, then locals in agent
order, all in declaration order — that fixed order *is* the canonical state
encoding (hashing a state hashes the tuple of slot values).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from ..errors import EvaluationFault
from .expr import Expr, IndexTerm, Stmt, eval_expr
from .types import ScalarType


@dataclass(frozen=True)
class Select:
    """A ``select`` binding: nondeterministic choice from a finite domain."""

    var: str
    type_name: str
    domain: Tuple[int, ...]


@dataclass(frozen=True)
class Sync:
    """A channel annotation ``name[i]...!`` / ``name[i]...?``.

    Channel identity is ``base + sum(coef * (index - lo))`` exactly like slot
    references; two edges pair when their resolved ids are equal.
    """

    channel: str
    base: int
    terms: Tuple[IndexTerm, ...]
    direction: str  # '!' | '?'

    def resolve(self, state: Sequence[int], env: Dict[str, int]) -> int:
        cid = self.base
        for t in self.terms:
            v = eval_expr(t.expr, state, env)
            if v < t.lo or v > t.hi:
                raise EvaluationFault(
                    f"channel index {v} outside [{t.lo},{t.hi}] on '{self.channel}'"
                )
            cid += t.coef * (v - t.lo)
        return cid


@dataclass(frozen=True)
class Edge:
    src: str
    target: str
    selects: Tuple[Select, ...] = ()
    guard: Expr = None
    sync: Optional[Sync] = None
    updates: Tuple[Stmt, ...] = ()
    index: int = 0  # ordinal within the owning agent
    name: str = ""  # optional display name (corpus uses e.g. 'cast_honest')

    def bindings(self):
        """All select bindings, lexicographic over the domains in order."""
        if not self.selects:
            return ({},)
        names = [s.var for s in self.selects]
        return tuple(
            dict(zip(names, combo))
            for combo in itertools.product(*(s.domain for s in self.selects))
        )


@dataclass(frozen=True)
class AgentInstance:
    """A closed (fully instantiated) agent graph."""

    name: str
    template: str
    locations: Tuple[str, ...]
    init_loc: int
    committed: frozenset
    edges: Tuple[Edge, ...]
    init_cond: Expr = None

    def edges_from(self, loc_ordinal: int) -> Tuple[Edge, ...]:
        loc = self.locations[loc_ordinal]
        return tuple(e for e in self.edges if e.src == loc)

    def loc_ordinal(self, name: str) -> int:
        return self.locations.index(name)


@dataclass(frozen=True)
class ChannelDecl:
    name: str
    base: int
    shape: Tuple[Tuple[int, int], ...]  # (lo,hi) per dimension

    @property
    def count(self) -> int:
        n = 1
        for lo, hi in self.shape:
            n *= hi - lo + 1
        return n


@dataclass
class SlotTable:
    """Flat slot metadata; index 0..n_agents-1 are the location slots."""

    names: List[str] = field(default_factory=list)
    types: List[ScalarType] = field(default_factory=list)
    bounds: List[Tuple[int, int]] = field(default_factory=list)
    inits: List[int] = field(default_factory=list)
    owners: List[Optional[str]] = field(default_factory=list)
    kinds: List[str] = field(default_factory=list)  # 'loc' | 'shared' | 'local'
    index: Dict[str, int] = field(default_factory=dict)

    def add(self, name, typ, lo, hi, init, owner, kind) -> int:
        if name in self.index:
            raise ValueError(f"duplicate slot {name}")
        sid = len(self.names)
        self.names.append(name)
        self.types.append(typ)
        self.bounds.append((lo, hi))
        self.inits.append(init)
        self.owners.append(owner)
        self.kinds.append(kind)
        self.index[name] = sid
        return sid

    def __len__(self):
        return len(self.names)


@dataclass(frozen=True)
class GlobalState:
    """An immutable point of the unwrapped model: the full slot vector,
    locations first.  Equality/hash over the tuple is the canonical encoding."""

    values: Tuple[int, ...]

    def loc(self, agent_idx: int) -> int:
        return self.values[agent_idx]


@dataclass(frozen=True)
class TransitionLabel:
    """What fired: one agent's edge, a channel handshake, or the serial
    self-loop added at deadlocks."""

    kind: str  # 'internal' | 'handshake' | 'serial'
    agent: Optional[str] = None
    edge: Optional[int] = None
    binding: Tuple[Tuple[str, int], ...] = ()
    channel: Optional[str] = None
    receiver: Optional[str] = None
    receiver_edge: Optional[int] = None
    receiver_binding: Tuple[Tuple[str, int], ...] = ()

    def pretty(self, m: "MASGraph" = None) -> str:
        def bind(b):
            return "[" + ",".join(f"{k}={v}" for k, v in b) + "]" if b else ""

        def ename(agent, edge):
            if m is None:
                return str(edge)
            a = next(x for x in m.agents if x.name == agent)
            e = a.edges[edge]
            return e.name or f"{e.src}->{e.target}"

        if self.kind == "serial":
            return "(serial self-loop)"
        if self.kind == "internal":
            return f"{self.agent}: {ename(self.agent, self.edge)}{bind(self.binding)}"
        return (
            f"{self.agent}: {ename(self.agent, self.edge)}{bind(self.binding)}"
            f" {self.channel}! -> "
            f"{self.receiver}: {ename(self.receiver, self.receiver_edge)}"
            f"{bind(self.receiver_binding)}"
        )


SERIAL = TransitionLabel(kind="serial")


@dataclass
class MASGraph:
    """A closed network of agent graphs over a shared slot table."""

    agents: Tuple[AgentInstance, ...]
    slots: SlotTable
    channels: Dict[str, ChannelDecl]
    name: str = "model"
    doc: object = None  # elaborated source document, when built from text

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def agent_index(self, name: str) -> int:
        for i, a in enumerate(self.agents):
            if a.name == name:
                return i
        raise KeyError(name)

    def channel_name(self, cid: int) -> str:
        for ch in self.channels.values():
            if ch.base <= cid < ch.base + ch.count:
                off = cid - ch.base
                if not ch.shape:
                    return ch.name
                idxs = []
                for lo, hi in reversed(ch.shape):
                    n = hi - lo + 1
                    idxs.append(lo + off % n)
                    off //= n
                return ch.name + "".join(f"[{i}]" for i in reversed(idxs))
        return f"chan#{cid}"

    def state_width(self) -> int:
        return len(self.slots)

    def pretty_state(self, s: GlobalState) -> str:
        locs = ", ".join(
            f"{a.name}@{a.locations[s.values[i]]}" for i, a in enumerate(self.agents)
        )
        return f"<{locs}>"
