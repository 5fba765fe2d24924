"""Interactive JSON-over-HTTP facade for stepping and checking closed networks.

A session owns one elaborated model, a current state, and the trace that led
there.  Every mutation bumps a monotone *revision*; clients echo the revision
they last saw when firing a transition, and a mismatch is answered with 409
instead of an unintended edge.  Stepping goes through the reference
semantics (`kernel.semantics.enabled` / `step`), never a private copy of the
rules, so whatever a session can reach the kernel can reach and vice versa.

Verification runs in a worker thread off the request path and never touches
the session's current state; clients poll the returned job id.  Counterexample
traces are truncated to a configurable number of steps for transport; the
full run is downloadable as a JSON array of ``{revision, label, changed}``
entries whose first element carries the complete initial valuation, making
the file self-contained.

Endpoints live under ``/api/v1/``.  Errors: 404 unknown session/job, 409
stale revision or empty undo, 422 parse/type problems (with source spans
when available).
"""

from __future__ import annotations

import dataclasses
import os
import threading
import uuid
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict

from . import corpus
from .abstraction import (
    AbstractionSpec,
    abstract_model,
    check_with_abstraction,
    elaborate_abstraction,
)
from .checking import Verdict, check_property
from .cli import budget_states, default_budget_mb, trace_payload
from .errors import MasgraphError
from .kernel import expr as E
from .kernel.engine import make_engine
from .kernel.model import SERIAL, GlobalState, MASGraph, TransitionLabel
from .kernel.semantics import enabled, initial_state, step
from .lang.parser import parse_abs, parse_model, parse_queries
from .lang.queries import elaborate_queries
from .lang.typecheck import ModelContext, elaborate

_ENV_TRACE_CAP = "MASGRAPH_TRACE_CAP"
_DEF_TRACE_CAP = 200


# ---------------------------------------------------------------------------
# sessions


@dataclass
class _TraceStep:
    """One fired transition: the state it produced and the revision at which
    it was appended (monotone along the list even across undo/redo)."""

    state: GlobalState
    label: TransitionLabel
    revision: int


@dataclass
class _Job:
    jid: str
    status: str = "running"  # running | done | failed
    result: Optional[dict] = None
    error: Optional[str] = None
    trace_file: Optional[list] = None


@dataclass
class Session:
    """One interactive model instance.

    The trace always replays from ``initial`` and ``current`` equals its last
    entry (or ``initial`` when empty); both facts are maintained by the
    mutation endpoints, all of which hold ``lock``.
    """

    sid: str
    mctx: ModelContext
    cfg: Optional[corpus.Config]
    initial: GlobalState
    current: GlobalState
    revision: int = 0
    base_revision: int = 0  # revision shown for the trace's initial entry
    trace: List[_TraceStep] = field(default_factory=list)
    bookmarks: Dict[str, Tuple[int, int]] = field(default_factory=dict)
    jobs: Dict[str, _Job] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)
    _enabled_rev: int = -1
    _enabled: List[TransitionLabel] = field(default_factory=list)

    def enabled_labels(self) -> List[TransitionLabel]:
        if self._enabled_rev != self.revision:
            self._enabled = enabled(self.current, self.mctx.graph)
            self._enabled_rev = self.revision
        return self._enabled


# ---------------------------------------------------------------------------
# request bodies


class CreateSession(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model: Optional[str] = None  # model source text
    corpus: Optional[str] = None  # "NV,NMO,NEC,NC"
    variant: Optional[str] = None  # named deviation preset
    deviations: Optional[dict] = None  # individual toggles


class StepRequest(BaseModel):
    index: int
    revision: int


class CheckRequest(BaseModel):
    query: Optional[str] = None  # full query text (exactly one query)
    prop: Optional[str] = None  # named corpus property
    voter: int = 1
    cand: int = 1
    office: int = -1
    abstraction: Optional[str] = None  # corpus name or spec text
    max_states: Optional[int] = None
    engine: str = "auto"


class TraceRequest(BaseModel):
    labels: Optional[List[Optional[dict]]] = None
    steps: Optional[List[dict]] = None


class BookmarkRequest(BaseModel):
    name: str


# ---------------------------------------------------------------------------
# rendering helpers


def _span_json(exc) -> Optional[dict]:
    line = getattr(exc, "line", None)
    if line is not None:
        return {"line": line, "column": getattr(exc, "column", None)}
    sp = getattr(exc, "span", None)
    if sp is not None:
        return {"line": sp.line, "column": sp.column}
    return None


def _unprocessable(exc) -> HTTPException:
    return HTTPException(422, detail={"error": str(exc), "span": _span_json(exc)})


def _expr_text(m: MASGraph, e) -> str:
    """Readable rendering of a kernel expression (display only; fully
    parenthesized composites, so no precedence table to keep in sync)."""

    def at(x):
        t = _expr_text(m, x)
        return t if isinstance(x, (E.Const, E.Local, E.Ref)) else f"({t})"

    if isinstance(e, E.Const):
        return str(e.value)
    if isinstance(e, E.Local):
        return e.name
    if isinstance(e, E.Ref):
        path = e.path or m.slots.names[e.base]
        if not e.terms:
            return path
        parts = path.split("[?]")
        if len(parts) == len(e.terms) + 1:
            out = parts[0]
            for t, tail in zip(e.terms, parts[1:]):
                out += f"[{_expr_text(m, t.expr)}]{tail}"
            return out
        return path
    if isinstance(e, E.Unary):
        return f"{e.op}{at(e.a)}"
    if isinstance(e, E.Binary):
        return f"{at(e.a)} {e.op} {at(e.b)}"
    if isinstance(e, E.Nary):
        return f" {e.op} ".join(at(x) for x in e.items)
    if isinstance(e, E.Ternary):
        return f"{at(e.cond)} ? {at(e.then)} : {at(e.els)}"
    if isinstance(e, E.Quant):
        d = e.domain
        if d and d == tuple(range(d[0], d[-1] + 1)):
            dom = f"int[{d[0]}, {d[-1]}]"
        else:
            dom = "{" + ",".join(str(v) for v in d) + "}"
        return f"{e.kind}({e.var} : {dom}) {at(e.body)}"
    return repr(e)


def _slot_display(m: MASGraph, k: int, value: int):
    """(name, display value) of slot ``k``; location slots show the location
    name under the agent's name."""
    if k < m.n_agents:
        a = m.agents[k]
        return a.name, a.locations[value]
    return m.slots.names[k], int(value)


def _state_json(m: MASGraph, s: GlobalState, prev: Optional[GlobalState] = None) -> dict:
    names = m.slots.names
    changed = []
    if prev is not None:
        changed = [names[k] for k in range(len(names))
                   if s.values[k] != prev.values[k]]
    return {
        "locations": {a.name: a.locations[s.values[i]]
                      for i, a in enumerate(m.agents)},
        "vars": {names[k]: int(s.values[k])
                 for k in range(m.n_agents, len(names))},
        "changed": changed,
    }


def _endpoint_json(m: MASGraph, agent: str, edge_idx: int, binding) -> dict:
    a = m.agents[m.agent_index(agent)]
    e = a.edges[edge_idx]
    return {
        "agent": agent,
        "edge": {"index": edge_idx, "name": e.name,
                 "source": e.src, "target": e.target},
        "select": {k: v for k, v in binding},
        "guard": None if e.guard is None else _expr_text(m, e.guard),
    }


def _transition_json(m: MASGraph, idx: int, lbl: TransitionLabel) -> dict:
    if lbl.kind == "serial":
        return {"index": idx, "kind": "serial", "agent": None,
                "pretty": lbl.pretty(m)}
    d = {"index": idx, "kind": lbl.kind, "pretty": lbl.pretty(m)}
    d.update(_endpoint_json(m, lbl.agent, lbl.edge, lbl.binding))
    if lbl.kind == "handshake":
        d["sync"] = {
            "channel": lbl.channel,
            "receiver": _endpoint_json(m, lbl.receiver, lbl.receiver_edge,
                                       lbl.receiver_binding),
        }
    return d


def _label_json(m: MASGraph, lbl: TransitionLabel) -> dict:
    d = dataclasses.asdict(lbl)
    try:
        d["pretty"] = lbl.pretty(m)
    except Exception:
        pass
    return d


def _label_from_json(d) -> TransitionLabel:
    def bind(pairs):
        return tuple((str(k), int(v)) for k, v in (pairs or ()))

    try:
        kind = d["kind"]
        if kind == "serial":
            return SERIAL
        return TransitionLabel(
            kind=kind,
            agent=d.get("agent"),
            edge=d.get("edge"),
            binding=bind(d.get("binding")),
            channel=d.get("channel"),
            receiver=d.get("receiver"),
            receiver_edge=d.get("receiver_edge"),
            receiver_binding=bind(d.get("receiver_binding")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise HTTPException(422, detail={
            "error": f"malformed transition label: {exc}", "label": d})


def _trace_file(m: MASGraph, states, labels, revisions) -> list:
    """The downloadable trace format: entry 0 carries the full valuation,
    later entries only the fired label and the variables it changed."""
    entries = []
    first = dict(_slot_display(m, k, states[0].values[k])
                 for k in range(len(states[0].values)))
    entries.append({"revision": revisions[0], "label": None, "changed": first})
    for i in range(1, len(states)):
        delta = {}
        for k in range(len(states[i].values)):
            if states[i].values[k] != states[i - 1].values[k]:
                name, val = _slot_display(m, k, states[i].values[k])
                delta[name] = val
        entries.append({
            "revision": revisions[i],
            "label": dataclasses.asdict(labels[i - 1]),
            "changed": delta,
        })
    return entries


def _capped_trace(m: MASGraph, trace, cap: int) -> dict:
    full = trace_payload(m, trace)
    n = len(full["steps"])
    if n > cap:
        full["steps"] = full["steps"][:cap]
        full["truncated"] = True
    else:
        full["truncated"] = False
    full["total_steps"] = n
    return full


def _verdict_json(m: MASGraph, v: Verdict, cap: int) -> dict:
    d = {
        "property": v.prop.name,
        "query": v.prop.text,
        "satisfied": v.satisfied,
        "conclusive": v.conclusive,
        "mode": v.mode,
        "reason": v.reason,
        "exit_code": v.exit_code,
        "stats": dataclasses.asdict(v.stats),
    }
    if v.trace is not None:
        d["trace"] = _capped_trace(m, v.trace, cap)
    return d


# ---------------------------------------------------------------------------
# the application


def create_app(trace_cap: Optional[int] = None) -> FastAPI:
    """Build an isolated application instance (sessions are per-app)."""
    cap = (trace_cap if trace_cap is not None
           else int(os.environ.get(_ENV_TRACE_CAP, str(_DEF_TRACE_CAP))))
    app = FastAPI(title="masgraph interactive service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"],
    )

    sessions: Dict[str, Session] = {}
    registry_lock = threading.Lock()

    def _session(sid: str) -> Session:
        with registry_lock:
            sess = sessions.get(sid)
        if sess is None:
            raise HTTPException(404, detail={"error": f"unknown session {sid!r}"})
        return sess

    def _header(sess: Session) -> dict:
        return {"session": sess.sid, "revision": sess.revision,
                "model": sess.mctx.graph.name,
                "trace_length": len(sess.trace)}

    # -- session lifecycle --------------------------------------------------

    @app.get("/api/v1/health")
    def health():
        return {"ok": True}

    @app.get("/api/v1/corpus")
    def corpus_info():
        flags = [f.name for f in dataclasses.fields(corpus.DeviationSet)
                 if isinstance(f.default, bool)]
        return {
            "configs": [c.key() for c in corpus.DESK_CONFIGS],
            "variants": list(corpus.MODEL_VARIANTS),
            "properties": list(corpus.PROPERTY_NAMES),
            "abstractions": list(corpus.ABSTRACTION_NAMES),
            "deviation_flags": flags,
        }

    @app.post("/api/v1/sessions", status_code=201)
    def create_session(req: CreateSession):
        if (req.model is None) == (req.corpus is None):
            raise HTTPException(422, detail={
                "error": "give exactly one of 'model' (source text) or "
                         "'corpus' (NV,NMO,NEC,NC)"})
        cfg = None
        try:
            if req.corpus is not None:
                cfg = corpus.Config.parse(req.corpus)
                dev = corpus.DeviationSet()
                if req.variant is not None:
                    if req.variant not in corpus.MODEL_VARIANTS:
                        raise ValueError(f"unknown variant {req.variant!r}")
                    dev = corpus.MODEL_VARIANTS[req.variant]
                if req.deviations:
                    kw = dict(req.deviations)
                    if kw.get("honest_voters") is not None:
                        kw["honest_voters"] = frozenset(
                            int(v) for v in kw["honest_voters"])
                    if kw.get("fixed_strategy") is not None:
                        kw["fixed_strategy"] = tuple(
                            int(v) for v in kw["fixed_strategy"])
                    try:
                        dev = dataclasses.replace(dev, **kw)
                    except TypeError as exc:
                        raise ValueError(f"bad deviation toggle: {exc}")
                doc = corpus.build_model(cfg, dev)
            else:
                doc = parse_model(req.model, name="<request>")
            mctx = elaborate(doc)
            s0 = initial_state(mctx.graph)
        except (MasgraphError, ValueError) as exc:
            raise _unprocessable(exc)

        sid = uuid.uuid4().hex[:12]
        sess = Session(sid=sid, mctx=mctx, cfg=cfg, initial=s0, current=s0)
        with registry_lock:
            sessions[sid] = sess
        return {**_header(sess), "state": _state_json(mctx.graph, s0)}

    @app.get("/api/v1/sessions/{sid}")
    def session_info(sid: str):
        sess = _session(sid)
        with sess.lock:
            m = sess.mctx.graph
            return {
                **_header(sess),
                "agents": [a.name for a in m.agents],
                "state": _state_json(m, sess.current),
                "bookmarks": {
                    name: {"length": ln, "revision": rev}
                    for name, (ln, rev) in sess.bookmarks.items()
                },
            }

    @app.delete("/api/v1/sessions/{sid}", status_code=204)
    def delete_session(sid: str):
        with registry_lock:
            if sessions.pop(sid, None) is None:
                raise HTTPException(404, detail={"error": f"unknown session {sid!r}"})

    # -- stepping -----------------------------------------------------------

    @app.get("/api/v1/sessions/{sid}/state")
    def get_state(sid: str):
        sess = _session(sid)
        with sess.lock:
            return {**_header(sess),
                    "state": _state_json(sess.mctx.graph, sess.current)}

    @app.get("/api/v1/sessions/{sid}/enabled")
    def get_enabled(sid: str):
        sess = _session(sid)
        with sess.lock:
            m = sess.mctx.graph
            labels = sess.enabled_labels()
            return {**_header(sess),
                    "transitions": [_transition_json(m, i, l)
                                    for i, l in enumerate(labels)]}

    @app.post("/api/v1/sessions/{sid}/step")
    def step_session(sid: str, req: StepRequest):
        sess = _session(sid)
        with sess.lock:
            if req.revision != sess.revision:
                raise HTTPException(409, detail={
                    "error": "stale revision: the state changed since the "
                             "transition list was produced",
                    "expected": sess.revision, "got": req.revision})
            labels = sess.enabled_labels()
            if not 0 <= req.index < len(labels):
                raise HTTPException(409, detail={
                    "error": f"transition index {req.index} outside the "
                             f"current enabled list (0..{len(labels) - 1})"})
            m = sess.mctx.graph
            lbl = labels[req.index]
            prev = sess.current
            try:
                nxt = step(prev, lbl, m)
            except MasgraphError as exc:
                raise _unprocessable(exc)
            sess.revision += 1
            sess.current = nxt
            sess.trace.append(_TraceStep(nxt, lbl, sess.revision))
            return {**_header(sess), "label": _label_json(m, lbl),
                    "state": _state_json(m, nxt, prev)}

    @app.post("/api/v1/sessions/{sid}/undo")
    def undo(sid: str):
        sess = _session(sid)
        with sess.lock:
            if not sess.trace:
                raise HTTPException(409, detail={"error": "nothing to undo"})
            m = sess.mctx.graph
            prev = sess.current
            sess.trace.pop()
            sess.current = sess.trace[-1].state if sess.trace else sess.initial
            sess.revision += 1
            return {**_header(sess),
                    "state": _state_json(m, sess.current, prev)}

    @app.post("/api/v1/sessions/{sid}/reset")
    def reset(sid: str):
        sess = _session(sid)
        with sess.lock:
            m = sess.mctx.graph
            prev = sess.current
            sess.trace.clear()
            sess.current = sess.initial
            sess.revision += 1
            sess.base_revision = sess.revision
            return {**_header(sess),
                    "state": _state_json(m, sess.current, prev)}

    # -- bookmarks ----------------------------------------------------------

    @app.post("/api/v1/sessions/{sid}/bookmarks", status_code=201)
    def add_bookmark(sid: str, req: BookmarkRequest):
        sess = _session(sid)
        with sess.lock:
            last_rev = (sess.trace[-1].revision if sess.trace
                        else sess.base_revision)
            sess.bookmarks[req.name] = (len(sess.trace), last_rev)
            return {**_header(sess), "bookmark": req.name,
                    "length": len(sess.trace)}

    def _bookmark_valid(sess: Session, ln: int, rev: int) -> bool:
        if ln > len(sess.trace):
            return False
        if ln == 0:
            return rev == sess.base_revision
        return sess.trace[ln - 1].revision == rev

    @app.post("/api/v1/sessions/{sid}/bookmarks/{name}/goto")
    def goto_bookmark(sid: str, name: str):
        sess = _session(sid)
        with sess.lock:
            if name not in sess.bookmarks:
                raise HTTPException(404, detail={
                    "error": f"unknown bookmark {name!r}"})
            ln, rev = sess.bookmarks[name]
            if not _bookmark_valid(sess, ln, rev):
                raise HTTPException(409, detail={
                    "error": f"bookmark {name!r} no longer names a prefix of "
                             "the trace"})
            m = sess.mctx.graph
            prev = sess.current
            del sess.trace[ln:]
            sess.current = sess.trace[-1].state if sess.trace else sess.initial
            sess.revision += 1
            return {**_header(sess),
                    "state": _state_json(m, sess.current, prev)}

    @app.delete("/api/v1/sessions/{sid}/bookmarks/{name}", status_code=204)
    def drop_bookmark(sid: str, name: str):
        sess = _session(sid)
        with sess.lock:
            if sess.bookmarks.pop(name, None) is None:
                raise HTTPException(404, detail={
                    "error": f"unknown bookmark {name!r}"})

    # -- traces -------------------------------------------------------------

    @app.get("/api/v1/sessions/{sid}/trace")
    def session_trace(sid: str):
        sess = _session(sid)
        with sess.lock:
            m = sess.mctx.graph
            states = [sess.initial] + [st.state for st in sess.trace]
            labels = [st.label for st in sess.trace]
            revs = [sess.base_revision] + [st.revision for st in sess.trace]
            body = _trace_file(m, states, labels, revs)
        return JSONResponse(content=body, headers={
            "Content-Disposition": f'attachment; filename="trace-{sid}.json"'})

    @app.post("/api/v1/sessions/{sid}/trace")
    def load_trace(sid: str, payload: Union[List[dict], TraceRequest]):
        sess = _session(sid)
        if isinstance(payload, TraceRequest):
            if payload.labels is not None:
                raw = [l for l in payload.labels if l is not None]
            elif payload.steps is not None:
                raw = [s["label"] for s in payload.steps
                       if s.get("label") is not None]
            else:
                raise HTTPException(422, detail={
                    "error": "give 'labels' or 'steps'"})
        else:
            raw = [e.get("label") for e in payload
                   if e.get("label") is not None]
        labels = [_label_from_json(d) for d in raw]

        m = sess.mctx.graph
        states = [sess.initial]
        cur = sess.initial
        for i, lbl in enumerate(labels):
            if lbl not in enabled(cur, m):
                try:
                    shown = lbl.pretty(m)
                except Exception:
                    shown = lbl.kind
                raise HTTPException(422, detail={
                    "error": f"step {i}: transition is not enabled in the "
                             "state it is fired from",
                    "pretty": shown,
                    "label": dataclasses.asdict(lbl)})
            try:
                cur = step(cur, lbl, m)
            except MasgraphError as exc:
                raise _unprocessable(exc)
            states.append(cur)

        with sess.lock:
            sess.revision += 1
            sess.base_revision = sess.revision
            sess.trace = []
            for st, lbl in zip(states[1:], labels):
                sess.revision += 1
                sess.trace.append(_TraceStep(st, lbl, sess.revision))
            sess.current = states[-1]
            return {**_header(sess),
                    "state": _state_json(m, sess.current)}

    # -- verification -------------------------------------------------------

    def _resolve_property(sess: Session, req: CheckRequest):
        if (req.query is None) == (req.prop is None):
            raise HTTPException(422, detail={
                "error": "give exactly one of 'query' (text) or 'prop' "
                         "(named corpus property)"})
        try:
            if req.prop is not None:
                if sess.cfg is None:
                    raise ValueError(
                        "named properties need a corpus session; send the "
                        "query text instead")
                doc = corpus.property(req.prop, sess.cfg, voter=req.voter,
                                      cand=req.cand, office=req.office)
            else:
                doc = parse_queries(req.query, name="<request>")
            props = elaborate_queries(doc, sess.mctx)
        except (MasgraphError, ValueError, KeyError) as exc:
            msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
            raise HTTPException(422, detail={"error": str(msg),
                                             "span": _span_json(exc)})
        if len(props) != 1:
            raise HTTPException(422, detail={
                "error": f"expected exactly one query, got {len(props)}"})
        return props[0]

    def _resolve_abstraction(sess: Session, req: CheckRequest):
        if req.abstraction is None:
            return None
        try:
            if req.abstraction in corpus.ABSTRACTION_NAMES:
                if sess.cfg is None:
                    raise ValueError(
                        "named abstractions need a corpus session; send the "
                        "spec text instead")
                adoc = corpus.abstraction_spec(
                    req.abstraction, sess.cfg, voter=req.voter,
                    cand=req.cand, office=req.office)
            else:
                adoc = parse_abs(req.abstraction, name="<request>")
            return elaborate_abstraction(adoc, sess.mctx)
        except (MasgraphError, ValueError) as exc:
            raise _unprocessable(exc)

    def _run_job(sess: Session, job: _Job, prop, abspec: Optional[AbstractionSpec],
                 max_states: int, engine_kind: str):
        m = sess.mctx.graph
        try:
            if abspec is not None:
                pair = ((abspec, None) if abspec.direction == "under"
                        else (None, abspec))
                cv = check_with_abstraction(m, pair, prop,
                                            max_states=max_states,
                                            engine=engine_kind)
                ag = abstract_model(m, abspec)
                evid = []
                for v in cv.evidence:
                    vg = ag if v.mode.startswith("abstract") else m
                    evid.append(_verdict_json(vg, v, cap))
                    if v.trace is not None and job.trace_file is None:
                        n = len(v.trace.states)
                        job.trace_file = _trace_file(
                            vg, v.trace.states, v.trace.labels, list(range(n)))
                job.result = {
                    "kind": "conclusive",
                    "outcome": cv.outcome,
                    "conclusive": cv.outcome is not None,
                    "mode": abspec.name or "abstraction",
                    "reason": cv.reason,
                    "exit_code": cv.exit_code,
                    "evidence": evid,
                }
            else:
                eng = make_engine(m, None if engine_kind == "auto"
                                  else engine_kind)
                v = check_property(eng, prop, max_states=max_states)
                job.result = {"kind": "verdict", **_verdict_json(m, v, cap)}
                if v.trace is not None:
                    n = len(v.trace.states)
                    job.trace_file = _trace_file(
                        m, v.trace.states, v.trace.labels, list(range(n)))
            job.status = "done"
        except MasgraphError as exc:
            job.status = "failed"
            job.error = str(exc)

    @app.post("/api/v1/sessions/{sid}/check", status_code=202)
    def check(sid: str, req: CheckRequest):
        sess = _session(sid)
        prop = _resolve_property(sess, req)
        abspec = _resolve_abstraction(sess, req)
        if req.max_states is not None:
            if req.max_states <= 0:
                raise HTTPException(422, detail={
                    "error": "max_states must be positive"})
            max_states = req.max_states
        else:
            max_states = budget_states(default_budget_mb(),
                                       sess.mctx.graph.state_width())
        jid = uuid.uuid4().hex[:12]
        job = _Job(jid)
        with sess.lock:
            sess.jobs[jid] = job
        worker = threading.Thread(
            target=_run_job, args=(sess, job, prop, abspec, max_states,
                                   req.engine),
            daemon=True)
        worker.start()
        return {**_header(sess), "job": jid, "status": job.status}

    def _job(sess: Session, jid: str) -> _Job:
        job = sess.jobs.get(jid)
        if job is None:
            raise HTTPException(404, detail={"error": f"unknown job {jid!r}"})
        return job

    @app.get("/api/v1/sessions/{sid}/jobs/{jid}")
    def job_status(sid: str, jid: str):
        sess = _session(sid)
        job = _job(sess, jid)
        out = {**_header(sess), "job": jid, "status": job.status}
        if job.status == "done":
            out["result"] = job.result
            out["has_trace_file"] = job.trace_file is not None
        elif job.status == "failed":
            out["error"] = job.error
        return out

    @app.get("/api/v1/sessions/{sid}/jobs/{jid}/trace")
    def job_trace(sid: str, jid: str):
        sess = _session(sid)
        job = _job(sess, jid)
        if job.trace_file is None:
            raise HTTPException(404, detail={
                "error": "job has no trace (pending, failed, or no witness)"})
        return JSONResponse(content=job.trace_file, headers={
            "Content-Disposition": f'attachment; filename="trace-{jid}.json"'})

    return app
