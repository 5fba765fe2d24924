"""Corpus spot-check at NV=2: real valvote erasure, growth calibration."""

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
from masgraph.lang.parser import parse_model, parse_queries
from masgraph.lang.queries import elaborate_queries
from masgraph.lang.typecheck import elaborate

CFG = corpus.Config.parse("2,1,1,1")


def ctx_for(variant):
    t0 = time.time()
    ctx = elaborate(corpus.build_model(CFG, corpus.MODEL_VARIANTS[variant]))
    print(f"  [{variant}] elaborated in {time.time() - t0:.2f}s")
    return ctx


def props_for(ctx):
    out = {}
    for name in corpus.PROPERTY_NAMES:
        doc = corpus.property(name, CFG)
        (prop,) = elaborate_queries(doc, ctx)
        out[name] = prop
    return out


def main():
    # -- sizes + concrete verdicts ----------------------------------------
    hctx = ctx_for("honest")
    t0 = time.time()
    hem = unwrap(hctx.graph)
    print(f"  honest states: {len(hem)} ({time.time() - t0:.1f}s)")
    hp = props_for(hctx)
    for name in ("bstuff", "valvote"):
        print(f"  honest oracle {name}: {oracle_verdict(hem, hp[name])}")

    dctx = ctx_for("deviations")
    t0 = time.time()
    eng = make_engine(dctx.graph)
    dp = props_for(dctx)
    v = check_property(eng, dp["valvote"])
    print(
        f"  deviations engine valvote: sat={v.satisfied} "
        f"stored={v.stats.states_stored} ({time.time() - t0:.1f}s)"
    )
    assert v.satisfied is False
    t0 = time.time()
    v2 = check_property(eng, dp["bstuff"])
    print(
        f"  deviations engine bstuff: sat={v2.satisfied} "
        f"stored={v2.stats.states_stored} ({time.time() - t0:.1f}s)"
    )
    assert v2.satisfied is True

    # -- bstuff_spec -------------------------------------------------------
    bspec = elaborate_abstraction(corpus.abstraction_spec("bstuff_spec", CFG), dctx)
    t0 = time.time()
    rep = check_with_abstraction(dctx.graph, (None, bspec), dp["bstuff"])
    print(
        f"  bstuff_spec: outcome={rep.outcome} "
        f"stored={rep.evidence[-1].stats.states_stored} ({time.time() - t0:.1f}s)"
    )
    assert rep.outcome is True, rep.reason

    # -- valvote_spec (real erasure at NV=2) -------------------------------
    vspec = elaborate_abstraction(corpus.abstraction_spec("valvote_spec", CFG), dctx)
    ag = abstract_model(dctx.graph, vspec)
    t0 = time.time()
    aem = unwrap(ag)
    print(f"  valvote_spec abstract states: {len(aem)} ({time.time() - t0:.1f}s)")
    h = erasure(dctx.graph, vspec)
    t0 = time.time()
    dem = unwrap(dctx.graph)
    srep = simulation_check(dem, aem, h, "over")
    print(f"  valvote_spec simulation: ok={srep.ok} ({time.time() - t0:.1f}s)")
    assert srep.ok, srep.message

    # honest-voter: voter 1 honest, property about voter 1 should still hold
    hvctx = ctx_for("honest-voter")
    hv = props_for(hvctx)
    hvspec = elaborate_abstraction(corpus.abstraction_spec("valvote_spec", CFG), hvctx)
    t0 = time.time()
    rep = check_with_abstraction(hvctx.graph, (None, hvspec), hv["valvote"])
    print(
        f"  valvote_spec on honest-voter: outcome={rep.outcome} "
        f"({time.time() - t0:.1f}s)"
    )
    hvem = unwrap(hvctx.graph)
    print(f"  honest-voter concrete: {len(hvem)}, oracle valvote="
          f"{oracle_verdict(hvem, hv['valvote'])}")

    print("nv=2 spot checks done")


if __name__ == "__main__":
    main()
