"""Smoke test for the abstraction module (identity, merges, scope, simulation)."""
import sys

sys.path.insert(0, "src")

from masgraph.lang.parser import parse_model, parse_queries, parse_abs
from masgraph.lang.typecheck import elaborate
from masgraph.lang.queries import elaborate_queries
from masgraph.kernel.semantics import unwrap
from masgraph.kernel import expr as K
from masgraph.checking.oracle import oracle_verdict
from masgraph.errors import ModelTypeError, ScopeBoundaryFault
from masgraph.abstraction import (
    abstract_model,
    check_with_abstraction,
    elaborate_abstraction,
    erasure,
    simulation_check,
)

VOTING = """
const int NV = 3;
typedef int[0, NV] count_t;
int[0, NV] votes[2];
bool done;
chan cast[2];

template Voter(const int[0, NV - 1] id) {
    int[0, 1] choice;
    init location idle;
    location voting, voted;
    edge idle -> voting { select c : int[0, 1]; update choice = c; }
    edge voting -> voted { sync cast[choice]!; update votes[choice] = votes[choice] + 1; }
}

template Counter() {
    count_t seen;
    init location wait;
    location closing;
    edge wait -> wait { select k : int[0, 1]; sync cast[k]?; update seen = seen + 1; }
    edge wait -> closing { guard seen == NV; update done = true; }
}

system Voter, Counter();
"""

COUNTERS = """
const int N = 3;
int[0, N] sent;
int[0, N] recv;
chan pass;

template Prod() {
    int[0, N] p;
    init location a;
    edge a -> a { guard p < N; sync pass!; update p = p + 1, sent = sent + 1; }
    edge a -> a { guard p < N; update p = p + 1, sent = sent + 1; }
}

template Cons() {
    int[0, N] q;
    init location b;
    edge b -> b { sync pass?; update q = q + 1, recv = recv + 1; }
}

system Prod, Cons;
"""

COUNTER_Q = """
diffok: A[] (sent - recv >= 0);
neverfull: A[] (sent - recv < N);
"""

COUNTER_ABS = """
remove sent, recv;
merge diff : int[0, N] = sent - recv;
rewrite diffok : A[] diff >= 0;
rewrite neverfull : A[] diff < N;
"""

SCOPED = """
int[0, 2] out;

template W() {
    int[0, 2] mem;
    init location s0;
    location s1, s2;
    edge s0 -> s1 { select v : int[0, 2]; update mem = v; }
    edge s1 -> s2 { guard mem > 0; update out = mem; }
    edge s1 -> s0 { guard mem == 0; }
    edge s2 -> s0 { }
}

system W;
"""

SECRET = """
int[0, 3] val;

template P() {
    int[0, 3] secret;
    int[0, 1] tick;
    init location a;
    location b;
    edge a -> a { select s : int[0, 3]; update secret = s, tick = 1 - tick; }
    edge a -> b { update val = secret; }
}

system P;
"""

SECRET_Q = """
bounded: A[] (val <= 3);
noval: A[] (val == 0);
quiet: E[] (val == 0);
"""


def build(model_text):
    mctx = elaborate(parse_model(model_text))
    return mctx, mctx.graph


def specs(mctx, body):
    under = elaborate_abstraction(parse_abs(body + "direction under;"), mctx)
    over = elaborate_abstraction(parse_abs(body + "direction over;"), mctx)
    return under, over


def relation(em, h=None):
    f = h or (lambda s: s)
    out = {}
    for i, s in enumerate(em.states):
        out[f(s)] = {f(em.states[j]) for _, j in em.trans[i]}
    return out


# ---- 1. identity -----------------------------------------------------------
mctx, m = build(VOTING)
em = unwrap(m)
for adoc in ("direction under;", "direction over;"):
    spec = elaborate_abstraction(parse_abs(adoc), mctx)
    am = abstract_model(m, spec)
    aem = unwrap(am)
    h = erasure(m, spec)
    assert len(aem.states) == len(em.states)
    assert relation(em) == relation(aem)
    assert simulation_check(em, aem, h, "over").ok
    assert simulation_check(em, aem, h, "under").ok
print(f"identity ok ({len(em.states)} states)")

# ---- 2. counter merge: exact quotient, conclusive both ways ---------------
mctx, m = build(COUNTERS)
props = {p.name: p for p in elaborate_queries(parse_queries(COUNTER_Q), mctx)}
em = unwrap(m)
under, over = specs(mctx, COUNTER_ABS)
au, ao = abstract_model(m, under), abstract_model(m, over)

# both directions coincide (nothing reads the removed counters): exactness
for am in (au, ao):
    prod = am.agents[0]
    for e in prod.edges:
        assert not any(s.var.startswith("__h") for s in e.selects), e
        first = e.updates[0]
        assert isinstance(first, K.Assign) and first.target.path == "diff", e
aem_u, aem_o = unwrap(au), unwrap(ao)
h = erasure(m, under)
assert simulation_check(em, aem_o, h, "over").ok
assert simulation_check(em, aem_u, h, "under").ok
assert len(aem_u.states) <= len(em.states)

cv = check_with_abstraction(m, (under, over), props["diffok"], engine="python")
assert cv.outcome is True, cv
assert oracle_verdict(em, props["diffok"]) is True
cv = check_with_abstraction(m, (under, over), props["neverfull"], engine="python")
assert cv.outcome is False, cv
assert oracle_verdict(em, props["neverfull"]) is False
print(f"counter merge ok (concrete {len(em.states)}, abstract {len(aem_u.states)})")

# property that reads a removed variable and has no rewrite
try:
    check_with_abstraction(
        m, (under, None),
        elaborate_queries(parse_queries("raw: A[] sent >= 0;"), mctx)[0],
        engine="python")
    raise AssertionError("expected ModelTypeError")
except ModelTypeError:
    pass

# ---- 3. scoped removal ----------------------------------------------------
mctx, m = build(SCOPED)
em = unwrap(m)
under, over = specs(mctx, "remove W.mem;\nscope W.s2, W.s0;\n")
for spec in (under, over):
    am = abstract_model(m, spec)
    aem = unwrap(am)
    assert len(aem.states) < len(em.states), (len(aem.states), len(em.states))
    h = erasure(m, spec)
    ok = simulation_check(em, aem, h, spec.direction)
    assert ok, ok.message
print(f"scoped ok (concrete {len(em.states)}, abstract {len(aem.states)})")

# exit edge s2->s0 does not rewrite mem: scope {s2} alone must fault
bad = elaborate_abstraction(
    parse_abs("remove W.mem;\nscope W.s2;\ndirection over;"), mctx)
try:
    abstract_model(m, bad)
    raise AssertionError("expected ScopeBoundaryFault")
except ScopeBoundaryFault:
    pass

# shared variable under a scope must fault at elaboration
try:
    elaborate_abstraction(
        parse_abs("remove out;\nscope W.s2;\ndirection over;"), mctx)
    raise AssertionError("expected ScopeBoundaryFault")
except ScopeBoundaryFault:
    pass

# ---- 4. select realization (over) / edge dropping (under) -----------------
mctx, m = build(SECRET)
props = {p.name: p for p in elaborate_queries(parse_queries(SECRET_Q), mctx)}
em = unwrap(m)
under, over = specs(mctx, "remove P.secret;\n")
au, ao = abstract_model(m, under), abstract_model(m, over)
# under drops the a->b edge whose RHS depends on the removed variable
assert len(au.agents[0].edges) == 1 and au.agents[0].edges[0].target == "a"
# over turns it into a select over the secret's domain
to_b = [e for e in ao.agents[0].edges if e.target == "b"]
assert len(to_b) == 1 and any(s.var.startswith("__h") for s in to_b[0].selects)
aem_o = unwrap(ao)
h = erasure(m, over)
assert simulation_check(em, aem_o, h, "over").ok
assert simulation_check(em, unwrap(au), h, "under").ok

# A[] proves on the may model, refutes on the must model
cv = check_with_abstraction(m, (under, over), props["bounded"], engine="python")
assert cv.outcome is True, cv
# the secret-removal must model hides the violation: may side alone is
# inconclusive for refutation of an A[] property
cv = check_with_abstraction(m, (None, over), props["noval"], engine="python")
assert cv.outcome is None, cv
# a quotient must model (remove the irrelevant tick) keeps the violation
under_t, _ = specs(mctx, "remove P.tick;\n")
cv = check_with_abstraction(m, (under_t, None), props["noval"], engine="python")
assert cv.outcome is False, cv
assert oracle_verdict(em, props["noval"]) is False
# E[] proves on the must model
cv = check_with_abstraction(m, (under, over), props["quiet"], engine="python")
assert cv.outcome is True, cv
assert oracle_verdict(em, props["quiet"]) is True

# mutation: an over-built model does not under-simulate
bad = simulation_check(em, aem_o, h, "under")
assert not bad.ok and bad.witness is not None
print("select/drop ok;", bad.message)

print("all abstraction smoke checks passed")
