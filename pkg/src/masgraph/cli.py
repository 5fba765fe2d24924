"""Command-line front end: one-shot checks, the benchmark matrix, abstract
model emission, and the interactive-service launcher.

``check`` exits with the verdict: 0 conclusive, 2 inconclusive, 3 memory
budget exhausted.  Usage, I/O and parse problems exit 1 via stderr.  The
memory budget (``--mem-budget`` MB, default from ``MASGRAPH_MEM_BUDGET``,
else 2048) is enforced as a cap on stored states derived from the model's
state width, so repeated runs stop at the same point instead of depending
on allocator behaviour.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import pathlib
import sys
from typing import Dict, List, Optional, Sequence, Tuple

from . import corpus
from .abstraction import (
    AbstractionSpec,
    ConclusiveVerdict,
    abstract_model,
    check_with_abstraction,
    elaborate_abstraction,
)
from .checking import Verdict, check_property
from .errors import MasgraphError
from .kernel.engine import make_engine
from .lang.parser import parse_abs, parse_model, parse_queries
from .lang.printer import print_graph
from .lang.queries import elaborate_queries
from .lang.typecheck import ModelContext, elaborate

# Empirical bytes per stored state and slot: int32 row, hash index, frontier
# copies and (for lasso checks) CSR adjacency.  Deliberately padded so a run
# that stays under the cap also stays under the budget in real memory.
_BYTES_PER_SLOT = 32

_DEF_BUDGET_MB = 2048
_ENV_BUDGET = "MASGRAPH_MEM_BUDGET"

CSV_COLUMNS = ("conf", "property", "mode", "sat", "conclusive",
               "states_stored", "states_explored", "time_s", "mem_mb")


def default_budget_mb() -> int:
    raw = os.environ.get(_ENV_BUDGET)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            print(f"warning: ignoring non-numeric {_ENV_BUDGET}={raw!r}",
                  file=sys.stderr)
    return _DEF_BUDGET_MB


def budget_states(budget_mb: int, width: int) -> int:
    """Stored-state cap equivalent to ``budget_mb`` for a given state width."""
    return max(1024, (budget_mb * (1 << 20)) // (_BYTES_PER_SLOT * width))


@dataclasses.dataclass(frozen=True)
class RunSpec:
    """Everything one report row needs; exactly one model source."""

    corpus_cfg: Optional[corpus.Config] = None
    model_path: Optional[str] = None
    variant: str = "deviations"
    prop: Optional[str] = None
    query_path: Optional[str] = None
    abstraction: Optional[str] = None  # corpus spec name, or a file path
    voter: int = 1
    cand: int = 1
    office: int = -1
    budget_mb: int = _DEF_BUDGET_MB
    threads: int = 1
    engine: str = "auto"

    def __post_init__(self):
        if (self.corpus_cfg is None) == (self.model_path is None):
            raise ValueError("exactly one of corpus config / model path")
        if self.prop is not None and self.query_path is not None:
            raise ValueError("give a property name or a query file, not both")
        if self.budget_mb <= 0:
            raise ValueError("memory budget must be positive")
        if self.prop is not None and self.corpus_cfg is None:
            raise ValueError("property names need a corpus config; "
                             "file models take a query file")

    @property
    def conf(self) -> str:
        if self.corpus_cfg is not None:
            c = self.corpus_cfg
            return f"{c.nv},{c.nmo},{c.nec},{c.nc}"
        return pathlib.Path(self.model_path).name


@dataclasses.dataclass
class RunRow:
    """One benchmark/report line; mirrors the CSV column set."""

    conf: str
    property: str
    mode: str
    sat: Optional[bool]
    conclusive: bool
    states_stored: int
    states_explored: int
    time_s: float
    mem_mb: float
    exit_code: int
    trace = None  # counterexample/witness Trace when one was produced

    def csv_values(self) -> Tuple[str, ...]:
        return (self.conf, self.property, self.mode,
                "" if self.sat is None else str(self.sat).lower(),
                str(self.conclusive).lower(),
                str(self.states_stored), str(self.states_explored),
                f"{self.time_s:.2f}", f"{self.mem_mb:.1f}")


def _load_model(spec: RunSpec) -> ModelContext:
    if spec.corpus_cfg is not None:
        doc = corpus.build_model(spec.corpus_cfg,
                                 corpus.MODEL_VARIANTS[spec.variant])
    else:
        text = pathlib.Path(spec.model_path).read_text()
        doc = parse_model(text, name=spec.model_path)
    return elaborate(doc)


def _load_props(spec: RunSpec, mctx: ModelContext):
    if spec.prop is not None:
        doc = corpus.property(spec.prop, spec.corpus_cfg, voter=spec.voter,
                              cand=spec.cand, office=spec.office)
    elif spec.query_path is not None:
        text = pathlib.Path(spec.query_path).read_text()
        doc = parse_queries(text, name=spec.query_path)
    else:
        raise ValueError("nothing to check: give --prop or --queries")
    return elaborate_queries(doc, mctx)


def _load_abstraction(spec: RunSpec, mctx: ModelContext) -> AbstractionSpec:
    if spec.abstraction in corpus.ABSTRACTION_NAMES:
        adoc = corpus.abstraction_spec(spec.abstraction, spec.corpus_cfg,
                                       voter=spec.voter, cand=spec.cand,
                                       office=spec.office)
    else:
        text = pathlib.Path(spec.abstraction).read_text()
        adoc = parse_abs(text, name=spec.abstraction)
    return elaborate_abstraction(adoc, mctx)


def run(spec: RunSpec, mctx: Optional[ModelContext] = None) -> List[RunRow]:
    """Check every query of ``spec`` and return one row per query."""
    if spec.threads != 1:
        print("note: the engine is single-threaded; --threads ignored",
              file=sys.stderr)
    if mctx is None:
        mctx = _load_model(spec)
    props = _load_props(spec, mctx)
    cap = budget_states(spec.budget_mb, mctx.graph.state_width())
    rows: List[RunRow] = []

    abspec = None
    if spec.abstraction is not None:
        abspec = _load_abstraction(spec, mctx)
        pair = (abspec, None) if abspec.direction == "under" else (None, abspec)

    for prop in props:
        if abspec is not None:
            cv = check_with_abstraction(mctx.graph, pair, prop,
                                        max_states=cap, engine=spec.engine)
            row = _row_from_conclusive(spec, prop.name, abspec.name or
                                       str(spec.abstraction), cv)
        else:
            eng = make_engine(mctx.graph,
                              None if spec.engine == "auto" else spec.engine)
            v = check_property(eng, prop, max_states=cap)
            row = _row_from_verdict(spec, prop.name, v)
        rows.append(row)
    return rows


def _row_from_verdict(spec: RunSpec, pname: str, v: Verdict) -> RunRow:
    row = RunRow(spec.conf, pname, v.mode, v.satisfied, v.conclusive,
                 v.stats.states_stored, v.stats.states_explored,
                 v.stats.time_s, v.stats.mem_mb, v.exit_code)
    row.trace = v.trace
    return row


def _row_from_conclusive(spec: RunSpec, pname: str, mode: str,
                         cv: ConclusiveVerdict) -> RunRow:
    stored = sum(v.stats.states_stored for v in cv.evidence)
    explored = sum(v.stats.states_explored for v in cv.evidence)
    time_s = sum(v.stats.time_s for v in cv.evidence)
    mem = max((v.stats.mem_mb for v in cv.evidence), default=0.0)
    row = RunRow(spec.conf, pname, mode, cv.outcome, cv.outcome is not None,
                 stored, explored, time_s, mem, cv.exit_code)
    for v in cv.evidence:
        if v.trace is not None:
            row.trace = v.trace
            break
    return row


# ---------------------------------------------------------------------------
# output

def _emit_text(rows: Sequence[RunRow], mctx: Optional[ModelContext],
               show_trace: bool) -> None:
    for r in rows:
        sat = "-" if r.sat is None else str(r.sat).lower()
        print(f"conf {r.conf}  property {r.property}  mode {r.mode}")
        print(f"  sat={sat}  conclusive={str(r.conclusive).lower()}")
        print(f"  states stored={r.states_stored} explored={r.states_explored}")
        print(f"  time {r.time_s:.2f} s  peak mem {r.mem_mb:.1f} MB")
        if r.trace is not None:
            kind = "lasso" if r.trace.loop_start is not None else "run"
            print(f"  witness: {kind}, {len(r.trace.states)} states"
                  + ("" if show_trace else "  (--trace FILE to save)"))
            if show_trace and mctx is not None:
                print(_indent(r.trace.pretty(mctx.graph), "    "))


def _indent(text: str, pad: str) -> str:
    return "\n".join(pad + ln for ln in text.splitlines())


def _emit_csv(rows: Sequence[RunRow], out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.csv_values())


def _emit_json(rows: Sequence[RunRow], out) -> None:
    payload = []
    for r in rows:
        d = dict(zip(CSV_COLUMNS, r.csv_values()))
        d["sat"] = r.sat
        d["conclusive"] = r.conclusive
        d["states_stored"] = r.states_stored
        d["states_explored"] = r.states_explored
        d["time_s"] = round(r.time_s, 3)
        d["mem_mb"] = round(r.mem_mb, 1)
        payload.append(d)
    json.dump(payload, out, indent=2)
    out.write("\n")


def trace_payload(m, trace) -> dict:
    """JSON-friendly dump of a counterexample/witness run over graph ``m``.

    Labels keep their structured form, so the run can be rebuilt and
    replayed, not just read.
    """
    names = m.slots.names
    steps = []
    prev = None
    for i, s in enumerate(trace.states):
        changed = ([] if prev is None else
                   [names[k] for k in range(len(names))
                    if s.values[k] != prev.values[k]])
        step = {
            "index": i,
            "locations": {a.name: a.locations[s.values[ai]]
                          for ai, a in enumerate(m.agents)},
            "vars": {names[k]: int(s.values[k])
                     for k in range(m.n_agents, len(names))},
            "changed": changed,
        }
        if i < len(trace.labels):
            lbl = trace.labels[i]
            step["label"] = dataclasses.asdict(lbl)
            step["pretty"] = lbl.pretty(m)
        steps.append(step)
        prev = s
    return {"model": m.name, "loop_start": trace.loop_start, "steps": steps}


# ---------------------------------------------------------------------------
# verbs

def _spec_from_args(args, prop: Optional[str] = None,
                    cfg: Optional[corpus.Config] = None,
                    abstraction: Optional[str] = None) -> RunSpec:
    if cfg is None and args.corpus:
        cfg = corpus.Config.parse(args.corpus)
    return RunSpec(
        corpus_cfg=cfg,
        model_path=getattr(args, "model", None),
        variant=args.variant,
        prop=prop if prop is not None else getattr(args, "prop", None),
        query_path=getattr(args, "queries", None),
        abstraction=(abstraction if abstraction is not None
                     else getattr(args, "abstraction", None)),
        voter=args.voter, cand=args.cand, office=args.office,
        budget_mb=args.mem_budget, threads=args.threads, engine=args.engine)


def _cmd_check(args) -> int:
    spec = _spec_from_args(args)
    mctx = _load_model(spec)
    rows = run(spec, mctx)
    if args.format == "csv":
        _emit_csv(rows, sys.stdout)
    elif args.format == "json":
        _emit_json(rows, sys.stdout)
    else:
        _emit_text(rows, mctx, args.show_trace)
    if args.trace:
        for r in rows:
            if r.trace is not None:
                payload = trace_payload(mctx.graph, r.trace)
                payload["conf"] = r.conf
                payload["property"] = r.property
                pathlib.Path(args.trace).write_text(
                    json.dumps(payload, indent=2) + "\n")
                print(f"trace written to {args.trace}", file=sys.stderr)
                break
        else:
            print("no trace to save", file=sys.stderr)
    return max(r.exit_code for r in rows)


_DEFAULT_ABS = {"bstuff": "bstuff_spec", "valvote": "valvote_spec",
                "moblock_under": "moblock_spec",
                "moblock_overover": "moblock_spec"}


def _grid(bounds: corpus.Config) -> List[corpus.Config]:
    return [corpus.Config(nv, nmo, nec, nc)
            for nv in range(1, bounds.nv + 1)
            for nmo in range(1, bounds.nmo + 1)
            for nec in range(1, bounds.nec + 1)
            for nc in range(1, bounds.nc + 1)]


def _cmd_bench(args) -> int:
    if args.configs:
        confs = [corpus.Config.parse(c) for c in args.configs.split(";")]
    else:
        confs = _grid(corpus.Config.parse(args.grid))
    props = args.props.split(",")
    modes = args.modes.split(",")

    rows: List[RunRow] = []
    for cfg in confs:
        for pname in props:
            for mode in modes:
                absname = None
                if mode == "abstract":
                    absname = _DEFAULT_ABS.get(pname)
                    if absname is None:
                        continue
                spec = _spec_from_args(args, prop=pname, cfg=cfg,
                                       abstraction=absname)
                label = f"{spec.conf}/{pname}/{mode}"
                print(f"[bench] {label} ...", file=sys.stderr, flush=True)
                try:
                    rows.extend(run(spec))
                except MasgraphError as exc:
                    # a broken row must not take the matrix down with it
                    print(f"[bench] {label} failed: {exc}", file=sys.stderr)
                    rows.append(RunRow(spec.conf, pname, mode, None, False,
                                       0, 0, 0.0, 0.0, 2))
    out = pathlib.Path(args.out) if args.out else None
    if out:
        with out.open("w") as fh:
            _emit_csv(rows, fh)
        md = out.with_suffix(".md")
        md.write_text(markdown_table(rows))
        print(f"wrote {out} and {md}", file=sys.stderr)
    else:
        _emit_csv(rows, sys.stdout)
        print()
        print(markdown_table(rows))
    return 0


def markdown_table(rows: Sequence[RunRow]) -> str:
    """The CSV rows as a Markdown table, with an explored-state ratio column
    on abstract rows whose concrete sibling also completed."""
    concrete: Dict[Tuple[str, str], RunRow] = {
        (r.conf, r.property): r for r in rows if r.mode == "concrete"}
    head = list(CSV_COLUMNS) + ["ratio_vs_concrete"]
    lines = ["| " + " | ".join(head) + " |",
             "|" + "|".join(" --- " for _ in head) + "|"]
    for r in rows:
        ratio = ""
        sib = concrete.get((r.conf, r.property))
        if (r.mode != "concrete" and r.conclusive and sib is not None
                and sib.conclusive and r.states_explored):
            ratio = f"{sib.states_explored / r.states_explored:.1f}x"
        cells = list(r.csv_values()) + [ratio]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def _cmd_abstract(args) -> int:
    spec = _spec_from_args(args)
    mctx = _load_model(spec)
    abspec = _load_abstraction(spec, mctx)
    am = abstract_model(mctx.graph, abspec)
    text = print_graph(am, mctx.graph.doc)
    if args.out:
        pathlib.Path(args.out).write_text(text)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_simulate(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app()
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------

def _add_model_args(p, with_queries=True):
    p.add_argument("--corpus", metavar="NV,NMO,NEC,NC",
                   help="postal-vote scenario at the given size")
    p.add_argument("--model", metavar="FILE", help="model source file")
    p.add_argument("--variant", default="deviations",
                   choices=sorted(corpus.MODEL_VARIANTS),
                   help="corpus behaviour variant (default: deviations)")
    if with_queries:
        p.add_argument("--prop", metavar="NAME",
                       help=f"corpus property: {', '.join(corpus.PROPERTY_NAMES)}")
        p.add_argument("--queries", metavar="FILE", help="query source file")
    p.add_argument("--voter", type=int, default=1,
                   help="voter the property/abstraction talks about")
    p.add_argument("--cand", type=int, default=1,
                   help="candidate the property talks about")
    p.add_argument("--office", type=int, default=-1,
                   help="office the property talks about (addresses are negative)")
    p.add_argument("--mem-budget", type=int, default=default_budget_mb(),
                   metavar="MB", help=f"memory budget (default ${_ENV_BUDGET} "
                   f"or {_DEF_BUDGET_MB})")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--engine", default="auto",
                   choices=("auto", "python", "numba"))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="masgraph-mc",
        description="Explicit-state checker for networks of guarded-command "
                    "agents, with a postal-voting scenario corpus built in.")
    sub = ap.add_subparsers(dest="verb", required=True)

    pc = sub.add_parser("check", help="check one property/query file")
    _add_model_args(pc)
    pc.add_argument("--abstraction", metavar="NAME|FILE",
                    help=f"one of {', '.join(corpus.ABSTRACTION_NAMES)}, "
                    "or an abstraction file")
    pc.add_argument("--format", default="text", choices=("text", "csv", "json"))
    pc.add_argument("--trace", metavar="FILE", help="save the witness run as JSON")
    pc.add_argument("--show-trace", action="store_true",
                    help="print the witness run")

    pb = sub.add_parser("bench", help="run a (conf x property x mode) matrix")
    _add_model_args(pb, with_queries=False)
    pb.add_argument("--grid", default="2,2,2,3", metavar="NV,NMO,NEC,NC",
                    help="run every config up to these bounds (default 2,2,2,3)")
    pb.add_argument("--configs", metavar="C1;C2;...",
                    help="explicit configs instead of --grid")
    pb.add_argument("--props", default="bstuff,valvote")
    pb.add_argument("--modes", default="concrete,abstract")
    pb.add_argument("--out", metavar="FILE.csv",
                    help="write CSV here and a Markdown table next to it")

    pa = sub.add_parser("abstract", help="emit the reduced model for a spec")
    _add_model_args(pa, with_queries=False)
    pa.add_argument("--abstraction", required=True, metavar="NAME|FILE")
    pa.add_argument("--out", metavar="FILE")

    ps = sub.add_parser("simulate", help="start the interactive HTTP service")
    ps.add_argument("--host", default="127.0.0.1")
    ps.add_argument("--port", type=int, default=8642)

    args = ap.parse_args(argv)
    handlers = {"check": _cmd_check, "bench": _cmd_bench,
                "abstract": _cmd_abstract, "simulate": _cmd_simulate}
    try:
        return handlers[args.verb](args)
    except (MasgraphError, OSError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
