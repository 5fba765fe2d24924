"""Successor-set engines behind a common batch interface.

Two implementations exist: the pure-Python reference (`PyEngine`, built
directly on `kernel.semantics`) and the compiled one (`NumbaEngine` in
`_engine_nb`, bytecode interpreted by jitted kernels).  `make_engine` picks
one; the MASGRAPH_ENGINE environment variable ('auto', 'numba', 'python')
sets the default.

The batch interface works on int32 state matrices: ``expand`` maps a frontier
of n rows to the concatenated successor rows plus CSR offsets.  Serial
closure is part of the interface: a row with no enabled transition expands to
itself.
"""

from __future__ import annotations

import os
from typing import Optional, Tuple

import numpy as np

from ..errors import EvaluationFault, RangeFault
from .model import GlobalState, MASGraph
from .semantics import enabled, initial_state, step
from .expr import eval_expr


class TransitionFault(Exception):
    """Wraps an evaluation/range fault with the frontier row it occurred in."""

    def __init__(self, row: int, cause: Exception):
        super().__init__(str(cause))
        self.row = row
        self.cause = cause


def state_vec(s: GlobalState) -> np.ndarray:
    return np.asarray(s.values, dtype=np.int32)


def vec_state(row: np.ndarray) -> GlobalState:
    return GlobalState(tuple(int(x) for x in row))


class PyEngine:
    """Reference engine: per-row interpretation of the structural model."""

    kind = "python"

    def __init__(self, graph: MASGraph):
        self.graph = graph
        self.width = graph.state_width()

    def init_vec(self) -> np.ndarray:
        return state_vec(initial_state(self.graph))

    def expand(self, frontier: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        rows = []
        offsets = np.zeros(len(frontier) + 1, dtype=np.int64)
        for i in range(len(frontier)):
            s = vec_state(frontier[i])
            try:
                succs = [step(s, lbl, self.graph) for lbl in enabled(s, self.graph)]
            except (EvaluationFault, RangeFault) as f:
                raise TransitionFault(i, f) from f
            rows.extend(state_vec(t) for t in succs)
            offsets[i + 1] = len(rows)
        if rows:
            return np.stack(rows).astype(np.int32), offsets
        return np.zeros((0, self.width), dtype=np.int32), offsets

    def compile_pred(self, expr):
        return expr

    def eval_pred(self, handle, states: np.ndarray) -> np.ndarray:
        out = np.zeros(len(states), dtype=bool)
        for i in range(len(states)):
            out[i] = bool(eval_expr(handle, states[i].tolist(), {}))
        return out


def make_engine(graph: MASGraph, kind: Optional[str] = None):
    kind = kind or os.environ.get("MASGRAPH_ENGINE", "auto")
    if kind == "python":
        return PyEngine(graph)
    if kind == "numba":
        from ._engine_nb import NumbaEngine

        return NumbaEngine(graph)
    if kind == "auto":
        try:
            from ._engine_nb import NumbaEngine

            return NumbaEngine(graph)
        except ImportError:
            return PyEngine(graph)
    raise ValueError(f"unknown engine kind {kind!r} (use auto, numba or python)")
