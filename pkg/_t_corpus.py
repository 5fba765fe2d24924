"""Scratch smoke checks for the corpus at the smallest configuration."""

import time

from masgraph import corpus
from masgraph.abstraction import (
    abstract_model,
    check_with_abstraction,
    elaborate_abstraction,
    erasure,
    simulation_check,
)
from masgraph.checking import check_property, oracle_verdict
from masgraph.kernel import unwrap
from masgraph.kernel.engine import make_engine
from masgraph.lang.parser import parse_model
from masgraph.lang.printer import print_model
from masgraph.lang.queries import elaborate_queries
from masgraph.lang.typecheck import elaborate

CFG = corpus.Config(1, 1, 1, 1)


def ctx_for(variant):
    dev = corpus.MODEL_VARIANTS[variant]
    t0 = time.time()
    mctx = elaborate(corpus.build_model(CFG, dev))
    print(f"  [{variant}] elaborated in {time.time() - t0:.2f}s")
    return mctx


def props_for(mctx):
    out = {}
    for name in corpus.PROPERTY_NAMES:
        doc = corpus.property(name, CFG)
        (prop,) = elaborate_queries(doc, mctx)
        out[name] = prop
    return out


def sim_ok(mctx, spec, bound=300_000):
    am = abstract_model(mctx.graph, spec)
    emc = unwrap(mctx.graph, state_bound=bound)
    ema = unwrap(am, state_bound=bound)
    rep = simulation_check(emc, ema, erasure(mctx.graph, spec), spec.direction)
    return rep, len(emc), len(ema)


def main():
    # -- honest model ------------------------------------------------------
    mctx = ctx_for("honest")
    em = unwrap(mctx.graph, state_bound=300_000)
    print(f"  honest states: {len(em)}")
    props = props_for(mctx)
    for name in ("bstuff", "valvote"):
        v = oracle_verdict(em, props[name])
        print(f"  honest oracle {name}: {v}")
        assert v is True, name
    print(f"  honest oracle moblock_overover: "
          f"{oracle_verdict(em, props['moblock_overover'])}")

    # -- deviations --------------------------------------------------------
    mctx = ctx_for("deviations")
    em = unwrap(mctx.graph, state_bound=500_000)
    print(f"  deviations states: {len(em)}")
    props = props_for(mctx)
    assert oracle_verdict(em, props["bstuff"]) is True
    ora = oracle_verdict(em, props["valvote"])
    print(f"  deviations oracle valvote: {ora}")
    assert ora is False
    res = check_property(make_engine(mctx.graph), props["valvote"])
    print(f"  deviations engine valvote: sat={res.satisfied} trace_len="
          f"{len(res.trace.states) if res.trace else None}")
    assert res.satisfied is False and res.trace is not None

    # -- bstuff_spec -------------------------------------------------------
    spec = elaborate_abstraction(
        corpus.abstraction_spec("bstuff_spec", CFG), mctx)
    t0 = time.time()
    rep = check_with_abstraction(mctx.graph, (None, spec), props["bstuff"])
    ev = rep.evidence[-1]
    print(f"  bstuff_spec: outcome={rep.outcome} ({time.time() - t0:.2f}s) "
          f"explored={ev.stats.states_explored} vs concrete {len(em)}")
    assert rep.outcome is True, rep
    srep, nc, na = sim_ok(mctx, spec)
    assert srep.ok, srep.message
    print(f"  bstuff_spec abstract states: {na} vs concrete {nc}")
    assert na <= nc

    # -- valvote_spec (identity at nv=1) -----------------------------------
    vspec = elaborate_abstraction(
        corpus.abstraction_spec("valvote_spec", CFG), mctx)
    rep = check_with_abstraction(mctx.graph, (None, vspec), props["valvote"])
    print(f"  valvote_spec on deviations: outcome={rep.outcome} ({rep.reason})")
    assert rep.outcome is None, rep

    hctx = ctx_for("honest-voter")
    hprops = props_for(hctx)
    hspec = elaborate_abstraction(
        corpus.abstraction_spec("valvote_spec", CFG), hctx)
    rep = check_with_abstraction(hctx.graph, (None, hspec), hprops["valvote"])
    print(f"  valvote_spec on honest-voter: outcome={rep.outcome}")
    assert rep.outcome is True, rep

    # -- moblock -----------------------------------------------------------
    mctx = ctx_for("deviations-mo")
    em = unwrap(mctx.graph, state_bound=500_000)
    print(f"  deviations-mo states: {len(em)}")
    props = props_for(mctx)
    vm = oracle_verdict(em, props["moblock_under"])
    vo = oracle_verdict(em, props["moblock_overover"])
    print(f"  deviations-mo oracle moblock_under={vm} overover={vo}")
    assert vm is False and vo is True

    sctx = ctx_for("strategy")
    em = unwrap(sctx.graph, state_bound=500_000)
    print(f"  strategy states: {len(em)}")
    sprops = props_for(sctx)
    ora = oracle_verdict(em, sprops["moblock_under"])
    print(f"  strategy oracle moblock_under: {ora}")
    assert ora is True
    mspec = elaborate_abstraction(
        corpus.abstraction_spec("moblock_spec", CFG), sctx)
    rep = check_with_abstraction(sctx.graph, (None, mspec), sprops["moblock_under"])
    print(f"  moblock_spec on strategy: outcome={rep.outcome} ({rep.reason})")
    assert rep.outcome is True, rep
    srep, nc, na = sim_ok(sctx, mspec)
    assert srep.ok, srep.message
    print(f"  moblock abstract states: {na} vs concrete {nc}")

    # -- invalid_merge -----------------------------------------------------
    mctx = ctx_for("deviations")
    ispec = elaborate_abstraction(
        corpus.abstraction_spec("invalid_merge", CFG), mctx)
    srep, nc, na = sim_ok(mctx, ispec)
    assert srep.ok, srep.message
    print(f"  invalid_merge abstract states: {na} vs {nc}")
    assert na <= nc

    # -- round trip --------------------------------------------------------
    for variant in corpus.MODEL_VARIANTS:
        src = corpus.model_source(CFG, corpus.MODEL_VARIANTS[variant])
        p1 = print_model(parse_model(src))
        p2 = print_model(parse_model(p1))
        assert p1 == p2, f"round-trip not a fixpoint for {variant}"
    print("  round-trip fixpoint ok")

    print("all corpus smoke checks passed")


if __name__ == "__main__":
    main()
