"""Seeded generation of small closed models, queries over them, and graph
surgery helpers.

The differential suites want a steady stream of well-typed models whose
reachable fragment fits in memory, plus formulas phrased over each model's own
vocabulary.  Hand-writing those does not scale, so everything here is driven
by a single ``random.Random`` instance: a seed pins the generated text
exactly, across runs and machines.

Generated models are fault-free by construction — integer domains start at 0,
arithmetic stays in range via ``(x + k) % (hi + 1)``, and every array or
channel index is either a literal in range or a variable of exactly the index
type.  That keeps the generator's output usable for engine-vs-oracle
comparisons without having to special-case aborted runs.
"""

from __future__ import annotations

import dataclasses
import random
from typing import Iterator, List, Optional, Sequence, Tuple

from .errors import BoundExceeded
from .kernel import unwrap
from .kernel.model import MASGraph
from .lang.parser import parse_model
from .lang.typecheck import elaborate

_CMP = ("==", "!=", "<", "<=", ">", ">=")


@dataclasses.dataclass(frozen=True)
class GeneratedModel:
    """Source text plus just enough structure to phrase queries about it."""

    seed: int
    source: str
    # shared integer scalars: (name, type name, hi); every domain is [0, hi]
    int_vars: Tuple[Tuple[str, str, int], ...]
    bool_vars: Tuple[str, ...]
    # arrays: (name, index hi, value hi)
    arrays: Tuple[Tuple[str, int, int], ...]
    # closed instances: (instance name, location names)
    instances: Tuple[Tuple[str, Tuple[str, ...]], ...]


def _int_term(rng: random.Random, scope: Sequence[Tuple[str, str, int]],
              tname: str, hi: int) -> str:
    """An expression of type ``tname`` (domain [0, hi]) that cannot fault."""
    same = [n for n, t, _ in scope if t == tname]
    kind = rng.random()
    if same and kind < 0.30:
        return rng.choice(same)
    if same and kind < 0.75:  # the increment form is what actually moves state
        return f"({rng.choice(same)} + {rng.randint(1, hi)}) % {hi + 1}"
    return str(rng.randint(0, hi))


def _index_term(rng: random.Random, scope: Sequence[Tuple[str, str, int]],
                tname: str, hi: int) -> str:
    """Index expressions are kept exactly typed, so they never go out of range."""
    same = [n for n, t, _ in scope if t == tname]
    if same and rng.random() < 0.6:
        return rng.choice(same)
    return str(rng.randint(0, hi))


def _bool_term(rng: random.Random, scope, bools: Sequence[str]) -> str:
    kind = rng.random()
    if bools and kind < 0.4:
        b = rng.choice(bools)
        return b if rng.random() < 0.5 else f"!{b}"
    if kind < 0.8 or not scope:
        return rng.choice(("true", "false"))
    n, _, hi = rng.choice(list(scope))
    return f"{n} {rng.choice(_CMP)} {rng.randint(0, hi)}"


def _guard_atom(rng: random.Random, scope, bools, arrays) -> str:
    roll = rng.random()
    if bools and roll < 0.2:
        b = rng.choice(bools)
        return b if rng.random() < 0.6 else f"!{b}"
    if arrays and roll < 0.45:
        name, itype, ihi, _, vhi = rng.choice(arrays)
        idx = _index_term(rng, scope, itype, ihi)
        return f"{name}[{idx}] {rng.choice(_CMP)} {rng.randint(0, vhi)}"
    if scope:
        n, _, hi = rng.choice(list(scope))
        return f"{n} {rng.choice(_CMP)} {rng.randint(0, hi)}"
    return "true"


def _quant_atom(rng: random.Random, arrays) -> str:
    name, itype, _, _, vhi = rng.choice(arrays)
    q, op = rng.choice((("forall", "!="), ("exists", "==")))
    return f"({q}(q : {itype}) {name}[q] {op} {rng.randint(0, vhi)})"


def random_model(seed: int) -> GeneratedModel:
    rng = random.Random(seed)
    lines: List[str] = [f"// generated model, seed {seed}", ""]

    # small index/value domains keep the reachable fragment enumerable
    types = [(f"t{i}_t", rng.randint(1, 3)) for i in range(rng.randint(1, 2))]
    for tn, hi in types:
        lines.append(f"typedef int[0, {hi}] {tn};")
    lines.append("")

    int_vars: List[Tuple[str, str, int]] = []
    for i in range(rng.randint(1, 3)):
        tn, hi = rng.choice(types)
        init = f" = {rng.randint(0, hi)}" if rng.random() < 0.3 else ""
        lines.append(f"{tn} g{i}{init};")
        int_vars.append((f"g{i}", tn, hi))
    bool_vars = [f"b{i}" for i in range(rng.randint(0, 2))]
    for b in bool_vars:
        lines.append(f"bool {b};")
    arrays: List[Tuple[str, str, int, str, int]] = []
    if rng.random() < 0.6:
        itn, ihi = rng.choice(types)
        vtn, vhi = rng.choice(types)
        lines.append(f"{vtn} a0[{itn}];")
        arrays.append(("a0", itn, ihi, vtn, vhi))
    channels: List[Tuple[str, str, int]] = []
    for i in range(rng.randint(0, 2)):
        tn, hi = rng.choice(types)
        lines.append(f"chan c{i}[{tn}];")
        channels.append((f"c{i}", tn, hi))
    lines.append("")

    n_templates = rng.randint(1, 3)
    params: List[Optional[Tuple[str, int]]] = []
    n_agents = 0
    for _ in range(n_templates):
        if rng.random() < 0.35:
            tn, hi = rng.choice(types)
            params.append((tn, hi))
            n_agents += hi + 1
        else:
            params.append(None)
            n_agents += 1
    # keep the closed network small enough that most seeds stay enumerable
    for ti in range(n_templates - 1, -1, -1):
        if n_agents <= 6:
            break
        if params[ti] is not None:
            n_agents -= params[ti][1]
            params[ti] = None

    instances: List[Tuple[str, Tuple[str, ...]]] = []
    for ti in range(n_templates):
        tmpl = f"P{ti}"
        par = params[ti]
        head = f"template {tmpl}(const {par[0]} id)" if par else f"template {tmpl}()"
        lines.append(head + " {")

        scope = list(int_vars)
        if par:
            scope.append(("id", par[0], par[1]))
        local: Optional[Tuple[str, str, int]] = None
        if rng.random() < 0.5:
            tn, hi = rng.choice(types)
            local = (f"w{ti}", tn, hi)
            scope.append(local)
            lines.append(f"    {tn} w{ti};")

        n_locs = rng.randint(2, 4)
        locs = tuple(f"l{k}" for k in range(n_locs))
        committed = rng.randrange(1, n_locs) if (n_locs > 1 and rng.random() < 0.15) else None
        lines.append(f"    init location {locs[0]};")
        rest = [l for k, l in enumerate(locs) if k > 0 and k != committed]
        if rest:
            lines.append(f"    location {', '.join(rest)};")
        if committed is not None:
            lines.append(f"    committed location {locs[committed]};")
        lines.append("")

        for ei in range(rng.randint(2, 5)):
            # edge 0 is an unconditional step out of the initial location, so
            # every template can move; later edges mostly chain forward, which
            # keeps the typical seed from collapsing to a handful of states
            if ei == 0:
                src, dst = locs[0], locs[min(1, n_locs - 1)]
            elif rng.random() < 0.55:
                k = rng.randrange(n_locs)
                src, dst = locs[k], locs[(k + 1) % n_locs]
            else:
                src, dst = rng.choice(locs), rng.choice(locs)
            clauses: List[str] = []
            escope = list(scope)
            if rng.random() < 0.25:
                tn, hi = rng.choice(types)
                clauses.append(f"select s : {tn};")
                escope.append(("s", tn, hi))
            if ei > 0 and rng.random() < 0.6:
                atoms = [_guard_atom(rng, escope, bool_vars, arrays)
                         for _ in range(1 if rng.random() < 0.7 else 2)]
                if arrays and rng.random() < 0.15:
                    atoms.append(_quant_atom(rng, arrays))
                clauses.append(f"guard {' && '.join(atoms)};")
            if ei > 0 and channels and rng.random() < 0.45:
                cn, tn, hi = rng.choice(channels)
                idx = _index_term(rng, escope, tn, hi)
                clauses.append(f"sync {cn}[{idx}]{rng.choice('!?')};")
            n_upd = rng.randint(1, 2) if ei == 0 else rng.randint(0, 2)
            if n_upd:
                stmts, used = [], set()
                for _ in range(n_upd):
                    stmts.append(_assign(rng, escope, int_vars, bool_vars,
                                         arrays, local, used))
                stmts = [s for s in stmts if s]
                if stmts:
                    clauses.append(f"update {', '.join(stmts)};")
            if clauses:
                body = " ".join(clauses)
                lines.append(f"    edge {src} -> {dst} {{ {body} }}")
            else:
                lines.append(f"    edge {src} -> {dst} {{ }}")
        lines.append("}")
        lines.append("")

        if par:
            for v in range(par[1] + 1):
                instances.append((f"{tmpl}({v})", locs))
        else:
            instances.append((tmpl, locs))

    lines.append(f"system {', '.join(f'P{k}' for k in range(n_templates))};")
    return GeneratedModel(
        seed=seed,
        source="\n".join(lines) + "\n",
        int_vars=tuple(int_vars),
        bool_vars=tuple(bool_vars),
        arrays=tuple((n, ihi, vhi) for n, _, ihi, _, vhi in arrays),
        instances=tuple(instances),
    )


def _assign(rng: random.Random, scope, int_vars, bool_vars, arrays,
            local, used: set) -> Optional[str]:
    """One update statement with a target not assigned yet on this edge."""
    targets: List[Tuple[str, str]] = [("int", n) for n, _, _ in int_vars]
    targets += [("bool", b) for b in bool_vars]
    if local:
        targets.append(("int", local[0]))
    if arrays:
        targets.append(("cell", arrays[0][0]))
    kind, name = rng.choice(targets)
    if kind == "cell":
        _, itype, ihi, vtype, vhi = arrays[0]
        tgt = f"{name}[{_index_term(rng, scope, itype, ihi)}]"
        rhs = _int_term(rng, scope, vtype, vhi)
    elif kind == "bool":
        tgt = name
        rhs = _bool_term(rng, scope, bool_vars)
    else:
        tn, hi = next((t, h) for n, t, h in scope if n == name)
        tgt = name
        rhs = _int_term(rng, scope, tn, hi)
    if tgt in used:
        return None
    used.add(tgt)
    return f"{tgt} = {rhs}"


_KINDS = ("A[]", "E<>", "E[]", "A<>")


def random_queries(seed: int, gm: GeneratedModel, count: int = 4) -> str:
    """Query source over ``gm``'s own vocabulary; kinds rotate so all four
    temporal forms appear once ``count >= 4``."""
    rng = random.Random(seed)
    out = []
    for i in range(count):
        out.append(f"q{i}: {_KINDS[i % 4]} ({_formula(rng, gm)});")
    return "\n".join(out) + "\n"


def _query_atom(rng: random.Random, gm: GeneratedModel) -> str:
    pool = []
    if gm.instances:
        pool.append("loc")
    if gm.int_vars:
        pool.append("int")
    if gm.bool_vars:
        pool.append("bool")
    if gm.arrays:
        pool.append("cell")
    kind = rng.choice(pool)
    if kind == "loc":
        inst, locs = rng.choice(gm.instances)
        return f"{inst}.{rng.choice(locs)}"
    if kind == "int":
        n, _, hi = rng.choice(gm.int_vars)
        return f"{n} {rng.choice(_CMP)} {rng.randint(0, hi)}"
    if kind == "bool":
        return rng.choice(gm.bool_vars)
    n, ihi, vhi = rng.choice(gm.arrays)
    return f"{n}[{rng.randint(0, ihi)}] == {rng.randint(0, vhi)}"


def _formula(rng: random.Random, gm: GeneratedModel) -> str:
    n = rng.randint(1, 3)
    parts = [_query_atom(rng, gm) for _ in range(n)]
    parts = [f"not {p}" if rng.random() < 0.2 else p for p in parts]
    if n == 1:
        return parts[0]
    op = rng.choice((" and ", " or ", " && ", " || ", " imply "))
    if op == " imply " and n == 3:  # keep implication binary, it reads better
        parts = [f"({parts[0]} and {parts[1]})", parts[2]]
    return op.join(parts)


def state_count(source: str, bound: int = 50_000) -> Optional[int]:
    """Reachable states of ``source``, or None once ``bound`` is exceeded."""
    mctx = elaborate(parse_model(source))
    try:
        return len(unwrap(mctx.graph, state_bound=bound))
    except BoundExceeded:
        return None


def usable_seeds(count: int, *, max_states: int = 50_000,
                 start: int = 0) -> Iterator[Tuple[GeneratedModel, int]]:
    """First ``count`` seeds at or after ``start`` whose model enumerates
    within ``max_states``; yields (model, reachable size)."""
    seed, found = start, 0
    while found < count:
        gm = random_model(seed)
        n = state_count(gm.source, max_states)
        if n is not None:
            yield gm, n
            found += 1
        seed += 1


# ---------------------------------------------------------------------------
# graph surgery — deliberate single-edit mutations for detection tests

def drop_edge(m: MASGraph, agent: str, edge_index: int) -> MASGraph:
    """Remove one edge from one agent (remaining edges are reindexed).

    Away from committed locations this only loses behavior, which makes it a
    handy seed for containment-violation fixtures.
    """
    ai = m.agent_index(agent)
    a = m.agents[ai]
    kept = [e for e in a.edges if e.index != edge_index]
    if len(kept) == len(a.edges):
        raise KeyError(f"{agent} has no edge {edge_index}")
    edges = tuple(dataclasses.replace(e, index=k) for k, e in enumerate(kept))
    a2 = dataclasses.replace(a, edges=edges)
    return dataclasses.replace(
        m, agents=m.agents[:ai] + (a2,) + m.agents[ai + 1:])


def clear_guard(m: MASGraph, agent: str, edge_index: int) -> MASGraph:
    """Make one edge unconditional; away from committed locations the result
    can only gain behavior."""
    ai = m.agent_index(agent)
    a = m.agents[ai]
    for e in a.edges:
        if e.index == edge_index:
            if e.guard is None:
                raise ValueError(f"{agent} edge {edge_index} has no guard")
            e2 = dataclasses.replace(e, guard=None)
            break
    else:
        raise KeyError(f"{agent} has no edge {edge_index}")
    edges = tuple(e2 if e.index == edge_index else e for e in a.edges)
    a2 = dataclasses.replace(a, edges=edges)
    return dataclasses.replace(
        m, agents=m.agents[:ai] + (a2,) + m.agents[ai + 1:])
