"""Property and verdict value types shared by the checkers, CLI and service."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

from ..kernel.expr import Expr
from ..kernel.model import GlobalState, MASGraph, TransitionLabel

#: recognized property kinds
KINDS = ("invariant", "reach", "liveness", "exists-globally", "leads-to")


@dataclass(frozen=True)
class Property:
    """An elaborated property over a particular model's state slots."""

    name: str
    kind: str  # one of KINDS
    text: str  # canonical printed form of the source query
    expr: Expr
    rhs: Optional[Expr] = None  # right side of a leads-to
    mode: str = "maximal"  # 'maximal' | 'finite-run' (E[] only)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown property kind {self.kind!r}")


@dataclass
class Trace:
    """A finite run; a lasso when ``loop_start`` is set.

    ``labels[i]`` takes ``states[i]`` to ``states[i+1]``.  For a lasso the
    final state equals ``states[loop_start]`` and the label list closes the
    cycle.
    """

    states: List[GlobalState]
    labels: List[TransitionLabel]
    loop_start: Optional[int] = None

    def pretty(self, m: MASGraph) -> str:
        out = []
        for i, s in enumerate(self.states):
            mark = ""
            if self.loop_start is not None and i == self.loop_start:
                mark = "  <- loop"
            out.append(f"[{i}] {m.pretty_state(s)}{mark}")
            if i < len(self.labels):
                out.append(f"    --{self.labels[i].pretty(m)}-->")
        return "\n".join(out)


@dataclass
class SearchStats:
    states_stored: int = 0
    states_explored: int = 0
    time_s: float = 0.0
    mem_mb: float = 0.0


@dataclass
class Verdict:
    """Outcome of checking one property.

    ``satisfied`` is None when the check could not decide (out of memory, or
    an inconclusive abstraction round).  ``mode`` records what was checked:
    'concrete', or the abstraction construction that produced the answer.
    """

    prop: Property
    satisfied: Optional[bool]
    conclusive: bool = True
    mode: str = "concrete"
    reason: str = ""
    trace: Optional[Trace] = None
    stats: SearchStats = field(default_factory=SearchStats)

    @property
    def exit_code(self) -> int:
        if self.conclusive:
            return 0
        return 3 if self.reason == "memout" else 2
