"""Postal-vote scenario corpus: a family of models, properties and abstractions.

The models describe a vote-by-mail pipeline.  During registration each voter
sends an intention form to their municipal office; the office prepares a
stamped election package and sends it back.  The voter marks a ballot, seals
it into a ballot envelope, fills in the declaration, and returns everything in
a return envelope -- by mail to the office (which forwards held envelopes on
election day) or by handing it to their commission in person.  Commissions
validate the returned envelopes, tally the ballots, and submit a protocol to
their supervising office; a calendar process advances the phases and closes
the election once every protocol has been accepted.

The family is parameterised by :class:`Config` (how many voters, offices,
commissions and candidates) and :class:`DeviationSet` (which departures from
the nominal procedure the model admits).  Everything here is plain text
generation: the sources returned by :func:`model_source` round-trip through
the parser and printer, and :func:`emit_corpus` writes the tree that the
test-suite, the command line and the benchmark harness consume.
"""

from __future__ import annotations

import dataclasses
import textwrap
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .errors import IndexOutOfRange, ModelTypeError, SideEffectInGuard
from .lang import ast as A
from .lang.parser import parse_abs, parse_model, parse_queries

__all__ = [
    "ABSTRACTION_NAMES",
    "Config",
    "DESK_CONFIGS",
    "DeviationSet",
    "MODEL_VARIANTS",
    "NEGATIVE_PROGRAMS",
    "PROPERTY_NAMES",
    "VOTER_DEVIATIONS",
    "abstraction_source",
    "abstraction_spec",
    "build_model",
    "emit_corpus",
    "model_source",
    "property",
    "property_source",
]


@dataclass(frozen=True, order=True)
class Config:
    """Scenario size: voters, municipal offices, commissions, candidates.

    Voters get ids ``1..nv``, offices ``-1..-nmo``, commissions
    ``-nmo-1..-nmo-nec``; id ``0`` always means "nobody".
    """

    nv: int = 1
    nmo: int = 1
    nec: int = 1
    nc: int = 1

    def __post_init__(self) -> None:
        for fname in ("nv", "nmo", "nec", "nc"):
            n = getattr(self, fname)
            if not isinstance(n, int) or n < 1:
                raise ValueError(f"{fname} must be a positive integer, got {n!r}")

    @classmethod
    def parse(cls, text: str) -> "Config":
        parts = text.split(",")
        if len(parts) != 4:
            raise ValueError(f"expected 'NV,NMO,NEC,NC', got {text!r}")
        return cls(*(int(p.strip()) for p in parts))

    def key(self) -> str:
        return f"{self.nv},{self.nmo},{self.nec},{self.nc}"

    def voters(self) -> range:
        return range(1, self.nv + 1)

    def candidates(self) -> range:
        return range(1, self.nc + 1)

    def offices(self) -> range:
        return range(-1, -self.nmo - 1, -1)

    def commissions(self) -> range:
        return range(-self.nmo - 1, -self.nmo - self.nec - 1, -1)

    def office_of(self, v: int) -> int:
        """The office voter ``v`` is registered with (round robin)."""
        return -(((v - 1) % self.nmo) + 1)

    def commission_of(self, v: int) -> int:
        return -(self.nmo + ((v - 1) % self.nec) + 1)

    def supervisor_of(self, e: int) -> int:
        """The office commission ``e`` submits its protocol to."""
        return -(((-e - self.nmo - 1) % self.nmo) + 1)


@dataclass(frozen=True)
class DeviationSet:
    """Which departures from the nominal procedure the model admits.

    The voter-side flags switch on extra edges: sending the intention form to
    the wrong office, leaving the ballot or return envelope unsealed, marking
    no cell / too many cells / the wrong cell, skipping the declaration,
    obtaining a voter's certificate after asking for a package, and handing
    the return envelope to the wrong commission.  ``mo_invalid_stamp`` lets
    any office prepare packages whose authenticating stamp is a photocopy.

    ``fixed_strategy=(j, k)`` pins office ``k`` to a deterministic rule --
    proper stamps exactly for the voters whose preference is not ``j``,
    photocopied ones for the rest -- and drops office ``k``'s remaining
    choices (its protocol decision always accepts).  Voters listed in
    ``honest_voters`` keep only their nominal edges whatever the flags say.
    """

    wrong_recipient: bool = False
    envelope_unsealed: bool = False
    mark_misplaced: bool = False
    card_unfilled: bool = False
    vote_after_certificate: bool = False
    mo_invalid_stamp: bool = False
    fixed_strategy: Optional[Tuple[int, int]] = None
    honest_voters: FrozenSet[int] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "honest_voters", frozenset(self.honest_voters))
        if self.fixed_strategy is not None and not self.mo_invalid_stamp:
            raise ValueError(
                "fixed_strategy presupposes the invalid-stamp capability; "
                "set mo_invalid_stamp=True as well"
            )

    _FLAGS = (
        "wrong_recipient",
        "envelope_unsealed",
        "mark_misplaced",
        "card_unfilled",
        "vote_after_certificate",
        "mo_invalid_stamp",
    )

    def issubset(self, other: "DeviationSet") -> bool:
        """True when every edge this set admits is admitted by ``other``.

        Flag-wise implication plus ``other.honest_voters <= honest_voters``
        (fewer honest voters means more edges).  Models with different fixed
        strategies replace edges rather than add them, so they are ordered
        only against themselves.
        """
        if self.fixed_strategy != other.fixed_strategy:
            return False
        if not other.honest_voters <= self.honest_voters:
            return False
        return all(
            getattr(other, f) or not getattr(self, f) for f in self._FLAGS
        )


#: Every voter-side deviation switched on, offices nominal.
VOTER_DEVIATIONS = DeviationSet(
    wrong_recipient=True,
    envelope_unsealed=True,
    mark_misplaced=True,
    card_unfilled=True,
    vote_after_certificate=True,
)

#: The model variants emitted for each configuration directory.
MODEL_VARIANTS: Dict[str, DeviationSet] = {
    "honest": DeviationSet(),
    "deviations": VOTER_DEVIATIONS,
    "deviations-mo": dataclasses.replace(VOTER_DEVIATIONS, mo_invalid_stamp=True),
    "strategy": dataclasses.replace(
        VOTER_DEVIATIONS, mo_invalid_stamp=True, fixed_strategy=(1, -1)
    ),
    "honest-voter": dataclasses.replace(
        VOTER_DEVIATIONS, honest_voters=frozenset({1})
    ),
}

PROPERTY_NAMES = ("bstuff", "valvote", "moblock_under", "moblock_overover")
ABSTRACTION_NAMES = ("bstuff_spec", "valvote_spec", "invalid_merge", "moblock_spec")

#: Configurations small enough to study on a desk; the last two rows are the
#: budget cases (large concrete spaces, meant to be checked via abstraction).
DESK_CONFIGS: Tuple[Config, ...] = (
    Config(1, 1, 1, 1),
    Config(1, 1, 1, 2),
    Config(1, 2, 1, 1),
    Config(1, 1, 2, 1),
    Config(2, 1, 1, 1),
    Config(2, 1, 1, 2),
    Config(2, 2, 1, 1),
    Config(2, 1, 2, 1),
    Config(2, 2, 2, 1),
    Config(2, 2, 2, 3),
    Config(3, 1, 1, 3),
)


def _check_voter(cfg: Config, i: int) -> None:
    if i not in cfg.voters():
        raise IndexOutOfRange(f"voter {i} outside 1..{cfg.nv}")


def _check_candidate(cfg: Config, j: int) -> None:
    if j not in cfg.candidates():
        raise IndexOutOfRange(f"candidate {j} outside 1..{cfg.nc}")


def _check_office(cfg: Config, k: int) -> None:
    if k not in cfg.offices():
        raise IndexOutOfRange(f"office {k} outside -1..{-cfg.nmo}")


# --------------------------------------------------------------------------
# model text


def _ep_fields(nc: int) -> List[Tuple[str, str]]:
    """(path, default) for every scalar field of an ElectionPackage."""
    out = [
        ("src", "0"),
        ("dst", "0"),
        ("renv.src", "0"),
        ("renv.dst", "0"),
        ("renv.stamp", "0"),
        ("renv.sealed", "false"),
        ("renv.dec_signature", "false"),
        ("renv.dec_pesel", "0"),
        ("renv.benv.sealed", "false"),
        ("renv.benv.pkw_stamp", "false"),
        ("renv.benv.dec_stamp", "false"),
    ]
    out += [(f"renv.benv.cell[{c}]", "0") for c in range(1, nc + 1)]
    return out


def _renv_fields(nc: int) -> List[Tuple[str, str]]:
    pre = "renv."
    return [(p[len(pre):], d) for p, d in _ep_fields(nc) if p.startswith(pre)]


def _vlist_init(cfg: Config) -> str:
    rows = [
        f"{{{cfg.office_of(v)}, {cfg.commission_of(v)}, NONE, false}}"
        for v in cfg.voters()
    ]
    return "{ " + ", ".join(rows) + " }"


def _declarations(cfg: Config) -> str:
    return f"""\
const int NV = {cfg.nv};
const int NMO = {cfg.nmo};
const int NEC = {cfg.nec};
const int NC = {cfg.nc};

// calendar phases, in order
const int PH_REG = 0;   // intention forms are being registered
const int PH_EPW = 1;   // election packages prepared and sent out
const int PH_CAST = 2;  // postal voting window
const int PH_EDAY = 3;  // election day
const int PH_END = 4;

const int PROTO_OPEN = 0;
const int PROTO_ACC = 1;
const int PROTO_REJ = 2;

const int EV_PREP_OK = 0;
const int EV_PREP_BAD = 1;

typedef int[1, NC] c_t;
typedef int[0, NC] c_tx;
typedef int[1, NV] v_t;
typedef int[0, NV] v_tx;
typedef int[-NMO, -1] mo_t;
typedef int[-NMO, 0] mo_tx;
typedef int[-NMO - NEC, -NMO - 1] ec_t;
typedef int[-NMO - NEC, 0] ec_tx;
typedef int[-NMO - NEC, NV] addr_t;  // any participant, 0 = nobody
typedef int[0, 1] prep_ev_t;

typedef enum {{ NONE, CERT_ISSUED, INTENT_RECEIVED, EP_PREPARED,
               EP_SENT, EP_COLLECTED, VOTE_RECEIVED }} cmt_t;

typedef struct {{
    addr_t src;
    addr_t dst;
    addr_t addr;       // where the package should be delivered
    bool inperson;     // collect at the office rather than by post
    v_tx pesel_of;     // whose register entry the form refers to
}} IntentionForm;

// ballot envelope
typedef struct {{
    bool sealed;
    bool pkw_stamp;    // authenticating stamp of the election authority
    bool dec_stamp;    // office stamp on the enclosed declaration
    int[0, 2] cell[c_t];  // 0 empty, 1 marked, 2 scribbled over
}} Benv;

// return envelope
typedef struct {{
    addr_t src;
    addr_t dst;
    mo_tx stamp;           // which office stamped it, 0 = none
    bool sealed;
    bool dec_signature;    // declaration signed
    v_tx dec_pesel;        // id number filled in on the declaration
    Benv benv;
}} Renv;

typedef struct {{
    addr_t src;
    addr_t dst;
    Renv renv;
}} ElectionPackage;

typedef struct {{
    mo_t mo_addr;      // office the voter is registered with
    ec_t ec_addr;      // commission the voter is assigned to
    cmt_t comment;     // progress annotation in the register
    bool changed;
}} v_record;

chan intent[mo_t];        // intention form handed to an office
chan ep_del[v_t];         // election package delivered to a voter
chan renv_mo[mo_t];       // return envelope mailed to an office
chan renv_ec[ec_t];       // return envelope handed to a commission
chan pass_renv[ec_t];     // office forwards a held envelope on election day
chan proto_submit[mo_t];  // commission submits its protocol

v_record vlist[v_t] = {_vlist_init(cfg)};
c_tx vpref[v_t];                // declared preference, fixed up front
c_tx recorded_link[v_t];        // how each voter's ballot was tallied, 0 = not
int[0, NV] b_recv;              // ballots accepted into ballot boxes
int[0, NV] ep_sent;             // election packages sent out
IntentionForm intent_buf;       // form in flight during a handshake
ElectionPackage ep_store[v_t];  // packages prepared but not yet delivered
Renv renv_store[v_t];           // return envelopes mailed or pending
addr_t renv_holder[v_t];        // who currently holds the return envelope
bool boxed[v_t];                // envelope accepted into a ballot box
int[0, 4] phase;
int[0, 2] proto_status[ec_t];
ec_tx proto_from;               // whose protocol is on the office's desk"""


def _functions(cfg: Config) -> str:
    clear = "\n".join(
        f"    renv_store[v].{path} = {dflt};" for path, dflt in _renv_fields(cfg.nc)
    )
    return f"""\
mo_t mo_of(ec_t e) {{
    // supervising office of a commission, round robin
    return -(((-e - NMO - 1) % NMO) + 1);
}}

bool ballot_complete(v_t v) {{
    return renv_store[v].sealed && renv_store[v].dec_signature
        && renv_store[v].dec_pesel == v
        && renv_store[v].stamp == vlist[v].mo_addr;
}}

void recv_intent(mo_t k) {{
    // Acceptance is the office's decision, taken against the register: the
    // form must come from a voter assigned here who has not asked before.
    if (intent_buf.pesel_of >= 1
            && vlist[intent_buf.pesel_of].mo_addr == k
            && vlist[intent_buf.pesel_of].comment == NONE) {{
        vlist[intent_buf.pesel_of].comment = INTENT_RECEIVED;
        ep_store[intent_buf.pesel_of].dst = intent_buf.addr;
    }}
    intent_buf.src = 0;
    intent_buf.dst = 0;
    intent_buf.addr = 0;
    intent_buf.inperson = false;
    intent_buf.pesel_of = 0;
}}

void prep_ep(v_t v, mo_t k, prep_ev_t ev) {{
    ep_store[v].src = k;
    ep_store[v].renv.stamp = k;
    ep_store[v].renv.benv.dec_stamp = true;
    switch (ev) {{
    case EV_PREP_OK:
        ep_store[v].renv.benv.pkw_stamp = true;
    case EV_PREP_BAD:
        ep_store[v].renv.benv.pkw_stamp = false;  // photocopied stamp
    }}
    vlist[v].comment = EP_PREPARED;
}}

void clear_renv(v_t v) {{
{clear}
}}"""


def _edge(
    src: str,
    dst: str,
    select: Optional[str] = None,
    guard: Optional[str] = None,
    sync: Optional[str] = None,
    update: Optional[str] = None,
) -> str:
    bits = []
    if select:
        bits.append(f"select {select};")
    if guard:
        bits.append(f"guard {guard};")
    if sync:
        bits.append(f"sync {sync};")
    if update:
        bits.append(f"update {update};")
    if not bits:
        return f"    edge {src} -> {dst} {{ }}"
    flat = " ".join(bits)
    if len(flat) + len(src) + len(dst) <= 64 and "\n" not in flat:
        return f"    edge {src} -> {dst} {{ {flat} }}"
    inner = "\n        ".join(b.replace("\n", "\n        ") for b in bits)
    return f"    edge {src} -> {dst} {{\n        {inner}\n    }}"


def _conj(*conds: Optional[str]) -> Optional[str]:
    cs = [c for c in conds if c]
    return " && ".join(cs) if cs else None


def _wrap_updates(items: Sequence[str], per_line: int = 2) -> str:
    lines = [
        ", ".join(items[i : i + per_line]) for i in range(0, len(items), per_line)
    ]
    return ",\n    ".join(lines)


def _voter_template(cfg: Config, dev: DeviationSet) -> str:
    # Deviating edges of voters in honest_voters are switched off by a guard
    # conjunct rather than by specialising the template, so every variant of
    # a configuration shares one slot table.
    gate = _conj(*(f"id != {h}" for h in sorted(dev.honest_voters))) or None

    ep_fields = _ep_fields(cfg.nc)
    renv_fields = _renv_fields(cfg.nc)
    recv = _wrap_updates(
        [f"ep.{p} = ep_store[id].{p}" for p, _ in ep_fields]
        + [f"ep_store[id].{p} = {d}" for p, d in ep_fields]
    )
    send = _wrap_updates(
        [f"renv_store[id].{p} = ep.renv.{p}" for p, _ in renv_fields]
    )

    def intent_update(dst: str) -> str:
        return _wrap_updates(
            [
                "form.src = id",
                f"form.dst = {dst}",
                "form.addr = id",
                "form.inperson = false",
                "form.pesel_of = id",
                "intent_buf.src = id",
                f"intent_buf.dst = {dst}",
                "intent_buf.addr = id",
                "intent_buf.inperson = false",
                "intent_buf.pesel_of = id",
            ]
        )

    E: List[str] = []
    E.append("    // the preference is fixed up front and is public")
    E.append(
        _edge("pick", "idle", select="c : c_t",
              update="vpref[id] = c, pref_cand = c")
    )
    E.append("")
    E.append("    // ask the assigned office for an election package")
    E.append(
        _edge("idle", "wait_ep",
              guard="phase == PH_REG",
              sync="intent[vlist[id].mo_addr]!",
              update=intent_update("vlist[id].mo_addr"))
    )
    if dev.wrong_recipient:
        E.append("    // deviation: send the form to some other office")
        E.append(
            _edge("idle", "wait_ep",
                  select="m : mo_t",
                  guard=_conj("phase == PH_REG", "m != vlist[id].mo_addr", gate),
                  sync="intent[m]!",
                  update=intent_update("m"))
        )
    if dev.vote_after_certificate:
        E.append("    // deviation: obtain a voter's certificate anyway")
        for loc in ("idle", "wait_ep", "got_ep"):
            E.append(
                _edge(loc, loc,
                      guard=_conj("vlist[id].comment != CERT_ISSUED", gate),
                      update="vlist[id].comment = CERT_ISSUED")
            )
    E.append("")
    E.append("    // take delivery of the package (and keep it)")
    E.append(_edge("wait_ep", "got_ep", sync="ep_del[id]?", update=recv))
    E.append("")
    E.append("    // mark the ballot")
    E.append(_edge("got_ep", "marked", update="ep.renv.benv.cell[pref_cand] = 1"))
    if dev.mark_misplaced:
        E.append("    // deviations: no mark, a scribble, two cells, the wrong cell")
        E.append(_edge("got_ep", "marked", guard=gate))
        E.append(
            _edge("got_ep", "marked", guard=gate,
                  update="ep.renv.benv.cell[pref_cand] = 2")
        )
        E.append(
            _edge("got_ep", "marked",
                  select="c2 : c_t",
                  guard=_conj("c2 != pref_cand", gate),
                  update="ep.renv.benv.cell[pref_cand] = 1, ep.renv.benv.cell[c2] = 1")
        )
        E.append(
            _edge("got_ep", "marked",
                  select="c2 : c_t",
                  guard=_conj("c2 != pref_cand", gate),
                  update="ep.renv.benv.cell[c2] = 1")
        )
    E.append("")
    E.append("    // seal the ballot envelope")
    E.append(_edge("marked", "enveloped", update="ep.renv.benv.sealed = true"))
    if dev.envelope_unsealed:
        E.append(_edge("marked", "enveloped", guard=gate))
    E.append("")
    E.append("    // sign the declaration")
    E.append(
        _edge("enveloped", "signed",
              update="ep.renv.dec_signature = true, ep.renv.dec_pesel = id")
    )
    if dev.card_unfilled:
        E.append(_edge("enveloped", "signed", guard=gate))
    E.append("")
    E.append("    // close up the return envelope")
    E.append(
        _edge("signed", "ready",
              update="ep.renv.sealed = true, ep.renv.src = id, "
                     "ep.renv.dst = vlist[id].mo_addr")
    )
    if dev.envelope_unsealed:
        E.append(
            _edge("signed", "ready", guard=gate,
                  update="ep.renv.src = id, ep.renv.dst = vlist[id].mo_addr")
        )
    E.append("")
    E.append("    // mail the return envelope to the office, any time before")
    E.append("    // election day")
    E.append(
        _edge("ready", "sent_renv",
              guard="phase <= PH_CAST",
              sync="renv_mo[vlist[id].mo_addr]!",
              update=send + ",\n    renv_holder[id] = vlist[id].mo_addr")
    )
    E.append("")
    E.append("    // or hand it to the assigned commission on election day")
    E.append(
        _edge("ready", "passed_renv",
              guard="phase == PH_EDAY",
              sync="renv_ec[vlist[id].ec_addr]!",
              update=send + ",\n    renv_holder[id] = vlist[id].ec_addr")
    )
    if dev.wrong_recipient:
        E.append("    // deviation: hand it to some other commission")
        E.append(
            _edge("ready", "passed_renv",
                  select="e : ec_t",
                  guard=_conj("phase == PH_EDAY", "e != vlist[id].ec_addr", gate),
                  sync="renv_ec[e]!",
                  update=send + ",\n    renv_holder[id] = e")
        )

    body = "\n".join(E)
    return f"""\
template Voter(const v_t id) {{
    c_tx pref_cand;
    IntentionForm form;
    ElectionPackage ep;  // the voter keeps the package after sending

    init location pick;
    location idle, wait_ep, got_ep, marked, enveloped, signed, ready;
    location sent_renv, passed_renv;

{body}
}}"""


def _mo_template(cfg: Config, dev: DeviationSet) -> str:
    prep = (
        "vlist[v].comment == INTENT_RECEIVED && vlist[v].mo_addr == id"
        " && phase <= PH_EPW"
    )
    E: List[str] = []
    E.append("    // register an incoming intention form")
    E.append(_edge("office", "office", sync="intent[id]?", update="recv_intent(id)"))
    E.append("")
    if dev.fixed_strategy is None:
        E.append("    // prepare an election package for a registered voter")
        E.append(
            _edge("office", "office", select="v : v_t", guard=prep,
                  update="prep_ep(v, id, EV_PREP_OK)")
        )
        if dev.mo_invalid_stamp:
            E.append("    // deviation: prepare it with a photocopied stamp")
            E.append(
                _edge("office", "office", select="v : v_t", guard=prep,
                      update="prep_ep(v, id, EV_PREP_BAD)")
            )
    else:
        j, k = dev.fixed_strategy
        E.append(f"    // office {k} follows a fixed rule: proper stamps only for")
        E.append(f"    // voters whose preference is not candidate {j}")
        E.append(
            _edge("office", "office", select="v : v_t",
                  guard=f"{prep} && (id != {k} || vpref[v] != {j})",
                  update="prep_ep(v, id, EV_PREP_OK)")
        )
        E.append(
            _edge("office", "office", select="v : v_t",
                  guard=f"{prep} && id == {k} && vpref[v] == {j}",
                  update="prep_ep(v, id, EV_PREP_BAD)")
        )
    E.append("")
    E.append("    // send a prepared package out")
    E.append(
        _edge("office", "office", select="v : v_t",
              guard="vlist[v].comment == EP_PREPARED && vlist[v].mo_addr == id"
                    " && phase <= PH_EPW",
              sync="ep_del[v]!",
              update="vlist[v].comment = EP_SENT, ep_sent = ep_sent + 1")
    )
    E.append("")
    E.append("    // accept return envelopes arriving by mail")
    E.append(_edge("office", "office", sync="renv_mo[id]?"))
    E.append("")
    E.append("    // on election day, forward each held envelope to its commission")
    E.append(
        _edge("office", "office", select="v : v_t",
              guard="phase == PH_EDAY && renv_holder[v] == id",
              sync="pass_renv[vlist[v].ec_addr]!",
              update="renv_holder[v] = vlist[v].ec_addr")
    )
    E.append("")
    E.append("    // decide on a submitted protocol")
    E.append(
        _edge("office", "office", sync="proto_submit[id]?",
              update="proto_status[proto_from] = PROTO_ACC, proto_from = 0")
    )
    rej_guard = None
    if dev.fixed_strategy is not None:
        rej_guard = f"id != {dev.fixed_strategy[1]}"
    E.append(
        _edge("office", "office", guard=rej_guard, sync="proto_submit[id]?",
              update="proto_status[proto_from] = PROTO_REJ, proto_from = 0")
    )
    body = "\n".join(E)
    return f"""\
template MO(const mo_t id) {{
    init location office;

{body}
}}"""


def _ec_template(cfg: Config) -> str:
    complete = (
        "vlist[v].ec_addr == id"
        " && (vlist[v].comment == EP_SENT || vlist[v].comment == EP_COLLECTED)"
        " && ballot_complete(v)"
    )
    one_mark = (
        "exists(c : c_t) (renv_store[v].benv.cell[c] == 1"
        " && forall(c2 : c_t) (c2 == c || renv_store[v].benv.cell[c2] == 0))"
    )
    return f"""\
template EC(const ec_t id) {{
    init location idle;
    location ready, tallying, wait_proto, done;

    // print the register and open
    edge idle -> ready {{ guard phase == PH_CAST || phase == PH_EDAY; }}

    // take in envelopes handed over or forwarded by an office
    edge ready -> ready {{ sync renv_ec[id]?; }}
    edge ready -> ready {{ sync pass_renv[id]?; }}

    // validate a pending envelope against the register
    edge ready -> ready {{
        select v : v_t;
        guard phase == PH_EDAY && renv_holder[v] == id && {complete};
        update boxed[v] = true, b_recv = b_recv + 1,
    vlist[v].comment = VOTE_RECEIVED, renv_holder[v] = 0;
    }}
    // reject it: wrong commission, ineligible sender, incomplete envelope
    edge ready -> ready {{
        select v : v_t;
        guard phase == PH_EDAY && renv_holder[v] == id
            && !({complete});
        update renv_holder[v] = 0, clear_renv(v);
    }}

    // close the box: nothing pending here, nothing still held for us
    edge ready -> tallying {{
        guard phase == PH_EDAY && forall(v : v_t) (renv_holder[v] != id
            && (vlist[v].ec_addr != id
                || !(renv_holder[v] <= -1 && renv_holder[v] >= -NMO)));
    }}

    // count a valid ballot for candidate c
    edge tallying -> tallying {{
        select v : v_t, c : c_t;
        guard boxed[v] && vlist[v].ec_addr == id
            && renv_store[v].benv.sealed && renv_store[v].benv.pkw_stamp
            && renv_store[v].benv.dec_stamp && renv_store[v].benv.cell[c] == 1
            && forall(c2 : c_t) (c2 == c || renv_store[v].benv.cell[c2] == 0);
        update recorded_link[v] = c, boxed[v] = false, clear_renv(v);
    }}
    // discard an invalid one
    edge tallying -> tallying {{
        select v : v_t;
        guard boxed[v] && vlist[v].ec_addr == id
            && !(renv_store[v].benv.sealed && renv_store[v].benv.pkw_stamp
                 && renv_store[v].benv.dec_stamp && {one_mark});
        update recorded_link[v] = 0, boxed[v] = false, clear_renv(v);
    }}

    // submit the protocol once the box is empty
    edge tallying -> wait_proto {{
        guard forall(v : v_t) (vlist[v].ec_addr != id || !boxed[v]);
        sync proto_submit[mo_of(id)]!;
        update proto_from = id;
    }}
    edge wait_proto -> done {{ guard proto_status[id] == PROTO_ACC; }}
    edge wait_proto -> tallying {{
        guard proto_status[id] == PROTO_REJ;
        update proto_status[id] = PROTO_OPEN;
    }}
}}"""


def _time_template(cfg: Config) -> str:
    return """\
template Time() {
    init location reg;
    location epw, cast, eday, end;

    edge reg -> epw { update phase = PH_EPW; }
    edge epw -> cast { update phase = PH_CAST; }
    edge cast -> eday { update phase = PH_EDAY; }
    edge eday -> end {
        guard forall(e : ec_t) (proto_status[e] == PROTO_ACC);
        update phase = PH_END;
    }
}"""


def model_source(cfg: Config, dev: DeviationSet = DeviationSet()) -> str:
    """The model text for a configuration and deviation set."""
    for h in sorted(dev.honest_voters):
        _check_voter(cfg, h)
    if dev.fixed_strategy is not None:
        j, k = dev.fixed_strategy
        _check_candidate(cfg, j)
        _check_office(cfg, k)
    parts = [
        f"// postal vote, {cfg.nv} voter(s), {cfg.nmo} office(s), "
        f"{cfg.nec} commission(s), {cfg.nc} candidate(s)",
        _declarations(cfg),
        _functions(cfg),
        _voter_template(cfg, dev),
        _mo_template(cfg, dev),
        _ec_template(cfg),
        _time_template(cfg),
        "system Voter, MO, EC, Time;",
    ]
    return "\n\n".join(parts) + "\n"


def build_model(cfg: Config, dev: DeviationSet = DeviationSet()) -> A.ModelDocument:
    """Parse the generated source into a model document."""
    return parse_model(model_source(cfg, dev), name=f"postal-{cfg.key()}")


# --------------------------------------------------------------------------
# properties


def property_source(
    name: str, cfg: Config, *, voter: int = 1, cand: int = 1, office: int = -1
) -> str:
    """The query text for one of the named requirements.

    ``bstuff``: no commission ever counts more ballots than packages went
    out.  ``valvote``: a voter who returned their envelope ends up tallied
    for their preference.  ``moblock_under`` / ``moblock_overover``: on
    every / on some run reaching the end, no voter registered with
    ``office`` and preferring ``cand`` is tallied for ``cand``.
    """
    if name == "bstuff":
        return "bstuff: A[] (b_recv<=ep_sent);"
    if name == "valvote":
        _check_voter(cfg, voter)
        i = voter
        return (
            f"valvote: A[] (Time.end and (Voter({i}).sent_renv or "
            f"Voter({i}).passed_renv) imply "
            f"recorded_link[{i}]==Voter({i}).pref_cand);"
        )
    if name in ("moblock_under", "moblock_overover"):
        _check_office(cfg, office)
        _check_candidate(cfg, cand)
        op = "A[]" if name == "moblock_under" else "E[]"
        return (
            f"{name}: {op} forall(i:v_t)(Time.end and vlist[i].mo_addr=={office} "
            f"and vpref[i]=={cand} imply recorded_link[i]!={cand});"
        )
    raise KeyError(f"unknown property {name!r}")


def property(
    name: str, cfg: Config, *, voter: int = 1, cand: int = 1, office: int = -1
) -> A.QueryDocument:
    return parse_queries(
        property_source(name, cfg, voter=voter, cand=cand, office=office),
        name=name,
    )


# --------------------------------------------------------------------------
# abstraction specs


def _bstuff_spec(cfg: Config) -> str:
    # Drops the counters (folded into one difference), candidate identity,
    # package payload and routing state.  What carries the requirement is the
    # per-voter register comment: EP_SENT appears only when a package goes
    # out and is consumed exactly once when an envelope is accepted, so the
    # difference never goes negative even with everything else havocked.
    return """\
remove b_recv, ep_sent;
remove vpref, recorded_link;
remove intent_buf, ep_store, renv_store;
remove renv_holder, boxed, proto_status, proto_from;
remove Voter.form, Voter.ep, Voter.pref_cand;
merge ballot_diff : int[-NV, NV] = ep_sent - b_recv;
rewrite bstuff : A[] (ballot_diff>=0);
direction over;
"""


def _valvote_spec(cfg: Config, voter: int) -> str:
    # Keeps the named voter's pipeline concrete; the other voters lose their
    # candidate identity and in-flight envelope content globally, and their
    # retained package (the "memory") once they have sent.  At nv=1 there is
    # nothing to remove and the spec is the identity.
    lines: List[str] = []
    for v in cfg.voters():
        if v == voter:
            continue
        lines.append(f"remove Voter({v}).pref_cand, Voter({v}).ep;")
        lines.append(f"remove vpref[{v}], recorded_link[{v}], renv_store[{v}];")
        lines.append(f"scope Voter({v}).sent_renv, Voter({v}).passed_renv;")
    lines.append("direction over;")
    return "\n".join(lines) + "\n"


def _moblock_spec(cfg: Config) -> str:
    # Strips the envelope payload but keeps the stamp pair concrete along its
    # whole path (office store -> voter's package -> return envelope), since
    # the blocking argument rests on the stamps alone.  Matching fields are
    # removed across all three roots together so no copy edge is left reading
    # a removed slot into a kept one.
    lines: List[str] = []
    for v in cfg.voters():
        eps = [f"ep_store[{v}]", f"Voter({v}).ep"]
        renvs = [f"{e}.renv" for e in eps] + [f"renv_store[{v}]"]
        for r in renvs:
            lines.append(
                f"remove {r}.src, {r}.dst, {r}.stamp, {r}.sealed, "
                f"{r}.dec_signature, {r}.dec_pesel;"
            )
            lines.append(f"remove {r}.benv.sealed, {r}.benv.cell;")
        for e in eps:
            lines.append(f"remove {e}.src, {e}.dst;")
    lines.append("direction over;")
    return "\n".join(lines) + "\n"


def _invalid_merge_spec(cfg: Config) -> str:
    # Folds each envelope occurrence to its summary shape: a ballot envelope
    # becomes (invalid, cell) where cell is the uniquely marked candidate or
    # 0, a return envelope keeps dst plus an invalid bit, a package keeps a
    # sent bit and its return envelope.
    lines: List[str] = []
    for v in cfg.voters():
        eps = [f"ep_store[{v}]", f"Voter({v}).ep"]
        renvs = [f"{e}.renv" for e in eps] + [f"renv_store[{v}]"]
        benvs = [f"{r}.benv" for r in renvs]
        for b in benvs:
            lines.append(f"remove {b}.sealed, {b}.pkw_stamp, {b}.dec_stamp, {b}.cell;")
            marks = []
            for c in cfg.candidates():
                conj = " && ".join(
                    [f"{b}.cell[{c}]==1"]
                    + [
                        f"{b}.cell[{c2}]==0"
                        for c2 in cfg.candidates()
                        if c2 != c
                    ]
                )
                marks.append(f"({conj})")
            one_of = " || ".join(marks)
            lines.append(
                f"merge {b}.invalid : bool = !({b}.sealed && {b}.pkw_stamp"
                f" && {b}.dec_stamp && ({one_of}));"
            )
            folded = "0"
            for c in reversed(list(cfg.candidates())):
                folded = f"{marks[c - 1]} ? {c} : {folded}"
            lines.append(f"merge {b}.cell : c_tx = {folded};")
        for r in renvs:
            lines.append(
                f"remove {r}.src, {r}.stamp, {r}.sealed, "
                f"{r}.dec_signature, {r}.dec_pesel;"
            )
            lines.append(
                f"merge {r}.invalid : bool = !({r}.sealed && {r}.dec_signature);"
            )
        for e in eps:
            lines.append(f"remove {e}.src, {e}.dst;")
            lines.append(f"merge {e}.sent : bool = {e}.src != 0;")
    lines.append("direction over;")
    return "\n".join(lines) + "\n"


def abstraction_source(
    name: str, cfg: Config, *, voter: int = 1, cand: int = 1, office: int = -1
) -> str:
    """The ``.abs`` text for one of the named abstraction recipes."""
    if name == "bstuff_spec":
        return _bstuff_spec(cfg)
    if name == "valvote_spec":
        _check_voter(cfg, voter)
        _check_candidate(cfg, cand)
        return _valvote_spec(cfg, voter)
    if name == "moblock_spec":
        return _moblock_spec(cfg)
    if name == "invalid_merge":
        return _invalid_merge_spec(cfg)
    raise KeyError(f"unknown abstraction {name!r}")


def abstraction_spec(
    name: str, cfg: Config, *, voter: int = 1, cand: int = 1, office: int = -1
) -> A.AbsDocument:
    return parse_abs(
        abstraction_source(name, cfg, voter=voter, cand=cand, office=office),
        name=name,
    )


# --------------------------------------------------------------------------
# ill-formed programs (each a (source, expected error) pair)

NEGATIVE_PROGRAMS: Dict[str, Tuple[str, type]] = {
    "guard-side-effect": (
        textwrap.dedent(
            """\
            typedef int[0, 3] level_t;
            level_t level;

            bool bump() {
                level = level + 1;
                return true;
            }

            template P() {
                init location a;
                location b;
                edge a -> b { guard bump(); }
            }

            system P;
            """
        ),
        SideEffectInGuard,
    ),
    "duplicate-typedef": (
        textwrap.dedent(
            """\
            typedef int[0, 2] amount_t;
            typedef int[1, 4] amount_t;
            amount_t pot;

            template P() {
                init location a;
                edge a -> a { guard pot < 2; update pot = pot + 1; }
            }

            system P;
            """
        ),
        ModelTypeError,
    ),
    "range-mismatch": (
        textwrap.dedent(
            """\
            const int NC = 2;
            typedef int[1, NC] c_t;
            typedef int[0, NC] c_tx;
            c_tx chosen;

            template P(const c_t who) {
                init location a;
                edge a -> a { update chosen = who; }
            }

            system P(0);
            """
        ),
        ModelTypeError,
    ),
}


# --------------------------------------------------------------------------
# emission


def emit_corpus(
    root: Path, configs: Iterable[Config] = DESK_CONFIGS
) -> List[Path]:
    """Write the corpus tree under ``root`` and return the files written.

    One directory per configuration (named ``NV,NMO,NEC,NC``) holding the
    model variants, a ``props.q`` with all four requirements at default
    indices, and the four abstraction recipes; plus ``negative/`` with the
    ill-formed programs.
    """
    root = Path(root)
    written: List[Path] = []

    def put(path: Path, text: str) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        written.append(path)

    for cfg in configs:
        d = root / cfg.key()
        for variant, dv in MODEL_VARIANTS.items():
            put(d / f"{variant}.masg", model_source(cfg, dv))
        props = "\n".join(property_source(n, cfg) for n in PROPERTY_NAMES) + "\n"
        put(d / "props.q", props)
        for spec in ABSTRACTION_NAMES:
            put(d / f"{spec}.abs", abstraction_source(spec, cfg))
    for nm, (src, _err) in NEGATIVE_PROGRAMS.items():
        put(root / "negative" / f"{nm}.masg", src)
    return written
