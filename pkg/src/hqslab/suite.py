"""Randomised property suites over small generated systems.

Every run is seeded from ``(seed, suite, index)`` so a suite repeated with
the same seed produces the same traces. Liveness properties are only judged
on runs that reached quiescence (or, for consensus, a completed round led by
a well-behaved process after GST).
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field, replace
from itertools import combinations
from random import Random
from typing import Callable

from .brb import BCAST, ECHO, READY, brb_factory, fv_factory, lock_status
from .consensus import (
    ABORT,
    COMMIT,
    Ballot,
    ConsensusParams,
    ConsensusState,
    below_incompatible,
    consensus_factory,
    timeout,
)
from .core import (
    Partition,
    QuorumSystem,
    has_quorum_intersection,
    minimize,
    strongly_available_set,
    weakly_available_set,
)
from .discovery import EXCHANGE, EXTEND, PROPAGATE, PROPAGATEF, DiscoveryElection, qset_key, record_claims
from .graph import (
    build_graph,
    has_quorum_sharing,
    individually_minimal_everywhere,
    sink_component,
    system_minimal_quorums,
)
from .sim import AdversaryScript, Delay, Inject, Msg, NetConfig, Selector, Silence, Simulation, Trace

VALUES = ("m1", "m2")


# ---------------------------------------------------------------- instances

@dataclass(frozen=True)
class Instance:
    qs: QuorumSystem
    part: Partition

    def describe(self) -> dict:
        d = self.qs.to_json()
        d["byzantine"] = sorted(self.part.byzantine)
        return d


def _random_quorums(rng: Random, p: int, uni: list[int], lo: int) -> frozenset:
    out = set()
    for _ in range(rng.randint(1, 3)):
        size = rng.randint(lo, len(uni))
        others = [x for x in uni if x != p]
        if rng.random() < 0.85:
            q = {p} | set(rng.sample(others, min(size - 1, len(others))))
        else:
            q = set(rng.sample(uni, size))
        out.add(frozenset(q))
    return frozenset(out)


def random_system(rng: Random, n_max: int = 6, max_byz: int = 2, min_byz: int = 0) -> Instance:
    n = rng.randint(max(3, min_byz + 2), n_max)
    uni = list(range(1, n + 1))
    k = rng.randint(min_byz, min(max_byz, n - 2))
    byz = rng.sample(uni, k)
    lo = n // 2 + 1
    qs = minimize(QuorumSystem(frozenset(uni), {p: _random_quorums(rng, p, uni, lo) for p in uni}))
    return Instance(qs, Partition(qs.universe, frozenset(byz)))


def brb_instance(rng: Random, n_max: int = 6, min_byz: int = 0) -> Instance:
    """Random system with quorum intersection and a non-empty strongly available set."""
    while True:
        inst = random_system(rng, n_max, min_byz=min_byz)
        if has_quorum_intersection(inst.qs, inst.part).holds and strongly_available_set(inst.qs, inst.part):
            return inst


def sharing_instance(rng: Random, n_max: int = 6, max_byz: int = 2) -> Instance:
    """Random system with quorum intersection and quorum sharing.

    Byzantine processes declare nothing and sit outside every declared quorum
    (any quorum holding an undeclared member fails subsumption).
    """
    while True:
        n = rng.randint(3, n_max)
        uni = list(range(1, n + 1))
        byz = set(rng.sample(uni, rng.randint(0, min(max_byz, n - 2))))
        wb = [p for p in uni if p not in byz]
        core = sorted(rng.sample(wb, rng.randint(1, len(wb))))
        fam = set()
        for _ in range(rng.randint(1, 4)):
            k = rng.randint(max(1, len(core) // 2 + 1), len(core))
            fam.add(frozenset(rng.sample(core, k)))
        for p in core:
            if not any(p in q for q in fam):
                fam.add(frozenset(rng.sample(core, rng.randint(1, len(core))) + [p]))
        quorums = {p: {q for q in fam if p in q} for p in core}
        for p in wb:
            if p in quorums:
                continue
            quorums[p] = set()
            for q in rng.sample(sorted(fam, key=sorted), rng.randint(1, min(2, len(fam)))):
                quorums[p].add(q | {p} if rng.random() < 0.8 else q)
        qs = minimize(QuorumSystem(frozenset(uni), {p: frozenset(v) for p, v in quorums.items()}))
        part = Partition(qs.universe, frozenset(byz))
        if has_quorum_intersection(qs, part).holds and has_quorum_sharing(qs, part).holds:
            return Instance(qs, part)


# ---------------------------------------------------------------- reporting

@dataclass
class Violation:
    index: int
    prop: str
    detail: str
    instance: dict
    trace: str


@dataclass
class SuiteReport:
    name: str
    seed: int
    runs: int = 0
    checked: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    elapsed: float = 0.0
    digest: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def violated(self) -> dict:
        out: dict = {}
        for v in self.violations:
            out[v.prop] = out.get(v.prop, 0) + 1
        return out

    def lines(self) -> list[str]:
        out = [f"{self.name}: {self.runs} runs, seed {self.seed}, {self.elapsed:.1f}s, digest {self.digest[:16]}"]
        bad = self.violated()
        for prop in sorted(self.checked):
            out.append(f"  {prop}: checked {self.checked[prop]}, violations {bad.get(prop, 0)}")
        for k, v in sorted(self.extra.items()):
            out.append(f"  {k}: {v}")
        return out


class _Runner:
    def __init__(self, name: str, seed: int, keep_traces: Callable[[int, str], None] | None = None):
        self.rep = SuiteReport(name, seed)
        self.h = hashlib.sha256()
        self.keep = keep_traces
        self.t0 = time.perf_counter()

    def rng(self, i: int) -> Random:
        return Random(f"{self.rep.seed}:{self.rep.name}:{i}")

    def record(self, i: int, inst: Instance, trace: Trace, results: dict):
        text = trace.to_jsonl()
        self.h.update(f"run {i}\n".encode())
        self.h.update(text.encode())
        if self.keep is not None:
            self.keep(i, text)
        self.rep.runs += 1
        for prop, res in results.items():
            if res is None:
                continue
            self.rep.checked[prop] = self.rep.checked.get(prop, 0) + 1
            ok, detail = res
            if not ok:
                self.rep.violations.append(Violation(i, prop, detail, inst.describe(), text))

    def finish(self) -> SuiteReport:
        self.rep.elapsed = time.perf_counter() - self.t0
        self.rep.digest = self.h.hexdigest()
        return self.rep


# ---------------------------------------------------------------- schedules

def _net(rng: Random, max_steps: int, max_time: int | None = None) -> NetConfig:
    bound = rng.randint(1, 3)
    return NetConfig(
        gst=rng.randint(0, 30),
        post_gst_bound=bound,
        seed=rng.randrange(2**31),
        max_steps=max_steps,
        max_time=max_time,
        random_delays=True,
        pre_gst_max_delay=rng.randint(1, 12),
        slack=rng.randint(0, 5),
    )


def _wb_delays(rng: Random, inst: Instance, cfg: NetConfig) -> list:
    wb = sorted(inst.part.well_behaved)
    out = []
    for _ in range(rng.randint(0, 3)):
        a, b = rng.choice(wb), rng.choice(wb)
        s = rng.randint(0, cfg.gst + 5)
        out.append(Delay(Selector(frm=frozenset([a]), to=frozenset([b]), sent_max=s), cfg.deadline(s)))
    return out


def _noise(rng: Random, b: int, uni: list[int], horizon: int, msgs: Callable[[], Msg]) -> list:
    out = []
    for _ in range(rng.randint(1, 8)):
        for r in rng.sample(uni, rng.randint(1, len(uni))):
            out.append(Inject(b, r, (msgs(),), rng.randint(0, horizon)))
    return out


def _byz_modes(rng: Random, inst: Instance, honest_ok: bool = True) -> dict[int, str]:
    modes = ["silent", "noise", "noise"] + (["honest", "late-silence"] if honest_ok else [])
    return {b: rng.choice(modes) for b in sorted(inst.part.byzantine)}


def _delivered(trace: Trace, inst_key: str = "") -> dict[int, list]:
    out: dict[int, list] = {}
    for e in trace.responses("deliver"):
        if len(e.note) < 3 or e.note[2] == inst_key:
            out.setdefault(e.frm, []).append(e.note[1])
    return out


def _broadcast_check(inst: Instance, trace: Trace, quiescent: bool, *, key: str, wb_values: set, sender_wb: bool,
                     introduced: set, single: object) -> dict:
    wb = inst.part.well_behaved
    strong = strongly_available_set(inst.qs, inst.part)
    weak = weakly_available_set(inst.qs, inst.part)
    dl = {p: vs for p, vs in _delivered(trace, key).items() if p in wb}
    res: dict = {}
    dup = [p for p, vs in dl.items() if len(vs) > 1]
    res["no-duplication"] = (not dup, f"processes delivering twice: {dup}")
    vals = {v for vs in dl.values() for v in vs}
    res["consistency"] = (len(vals) <= 1, f"delivered values {sorted(vals)}")
    if sender_wb:
        res["integrity"] = (vals <= wb_values, f"delivered {sorted(vals)}, broadcast {sorted(wb_values)}")
    else:
        res["integrity"] = (vals <= introduced, f"delivered {sorted(vals)} never sent")
    res["validity"] = None
    res["totality-weak"] = None
    res["totality-strong"] = None
    if quiescent:
        if single is not None:
            missing = sorted(p for p in strong if single not in dl.get(p, []))
            res["validity"] = (not missing, f"strongly available {missing} did not deliver {single}")
        if dl:
            missing = sorted(p for p in weak if p not in dl)
            res["totality-weak"] = (not missing, f"weakly available {missing} delivered nothing")
            missing = sorted(p for p in strong if p not in dl)
            res["totality-strong"] = (not missing, f"strongly available {missing} delivered nothing")
    return res


def brb_case(rng: Random, inst: Instance, fv: bool) -> tuple[Trace, dict]:
    uni = sorted(inst.qs.universe)
    wb = sorted(inst.part.well_behaved)
    cfg = _net(rng, max_steps=20_000)
    directives = _wb_delays(rng, inst, cfg)
    modes = _byz_modes(rng, inst)
    horizon = cfg.gst + 10
    key = "v" if fv else ""
    requests = []
    inputs: dict[int, str] = {}
    if fv:
        senders = rng.sample(wb, rng.randint(1, len(wb)))
        same = rng.random() < 0.5
        for p in senders:
            inputs[p] = VALUES[0] if same else rng.choice(VALUES)
        sender = None
    else:
        sender = rng.choice(uni)
        if sender in inst.part.well_behaved:
            inputs[sender] = rng.choice(VALUES)
    for b, mode in modes.items():
        if mode == "noise":
            kinds = (BCAST, ECHO, READY) if (fv or b == sender) else (ECHO, READY)
            directives += _noise(rng, b, uni, horizon, lambda: Msg(rng.choice(kinds), rng.choice(VALUES), key))
        elif mode == "late-silence":
            directives.append(Silence(b, rng.randint(0, horizon)))
        if mode in ("honest", "late-silence") and (fv or b == sender) and rng.random() < 0.8:
            inputs[b] = rng.choice(VALUES)
    honest = [b for b, m in modes.items() if m in ("honest", "late-silence")]
    if fv:
        factory = fv_factory
    else:
        factory = brb_factory(sender)
    sim = Simulation(cfg, inst.qs, inst.part, factory, AdversaryScript(directives), honest_byzantine=honest)
    for p, v in sorted(inputs.items()):
        if not fv and p != sender:
            continue
        t = rng.randint(0, 5)
        sim.request(t, p, "broadcast", (key, v) if fv else v)
        requests.append((p, v))
    trace = sim.run_until_quiescent()
    introduced = set()
    for e in trace.of_kind("send"):
        if e.note and e.note[0] != "rejected":
            introduced |= {m.val for m in e.msgs}
    bcasts = {m.val for e in trace.of_kind("send") if e.note and e.note[0] != "rejected" for m in e.msgs if m.kind == BCAST}
    wb_values = {v for p, v in requests if p in inst.part.well_behaved}
    if fv:
        single = next(iter(bcasts)) if len(bcasts) == 1 and wb_values else None
        sender_wb = False
    else:
        sender_wb = sender in inst.part.well_behaved
        single = inputs.get(sender) if sender_wb else None
    res = _broadcast_check(inst, trace, not trace.truncated, key=key, wb_values=wb_values, sender_wb=sender_wb,
                           introduced=introduced, single=single)
    return trace, res


def brb_suite(seed: int = 0, count: int = 500, *, keep_traces=None) -> SuiteReport:
    """Half reliable broadcast runs, half federated voting runs."""
    run = _Runner("brb-fv", seed, keep_traces)
    for i in range(count):
        rng = run.rng(i)
        inst = brb_instance(rng, min_byz=int(i % 4 >= 2))
        trace, res = brb_case(rng, inst, fv=bool(i % 2))
        run.record(i, inst, trace, res)
    return run.finish()


# ---------------------------------------------------------------- consensus

def _ballot_noise(rng: Random, params: ConsensusParams) -> Msg:
    r = rng.randint(0, 4)
    b = Ballot(0, None) if r == 0 else Ballot(r, rng.choice(params.values))
    return Msg(rng.choice((BCAST, ECHO, READY)), rng.choice((ABORT, COMMIT)), b.key)


def _round_starts(trace: Trace, wb) -> dict[int, dict[int, int]]:
    starts: dict[int, dict[int, int]] = {p: {} for p in wb}
    for e in trace.entries:
        if e.kind == "request" and e.note[0] == "propose" and e.to in starts:
            starts[e.to].setdefault(1, e.t)
        elif e.kind == "response" and e.note[0] == "new-leader" and e.frm in starts:
            starts[e.frm].setdefault(int(e.note[2]), e.t)
    return starts


def good_round(sim: Simulation, trace: Trace, params: ConsensusParams) -> int | None:
    """First round led by a well-behaved process that every well-behaved process
    started after GST and then either finished or left by deciding."""
    wb = sorted(sim.wb)
    starts = _round_starts(trace, wb)
    end = sim.now
    any_state: ConsensusState = sim.procs[wb[0]]
    rounds = sorted({r for s in starts.values() for r in s})
    for r in rounds:
        if any_state.leader_of(r) not in sim.wb:
            continue
        if not all(r in starts[p] and starts[p][r] >= sim.cfg.gst for p in wb):
            continue
        if all(starts[p][r] + params.delta + timeout(r, params.timeout_base) <= end for p in wb):
            return r
    return None


def abort_lock(sim: Simulation, params: ConsensusParams) -> str | None:
    """Name a ballot below some candidate whose abort can no longer be delivered
    by well-behaved processes alone, and whether anyone ever prepared it."""
    wb = sorted(sim.wb)
    for p in wb:
        st: ConsensusState = sim.procs[p]
        if st.decided is not None:
            continue
        for b in below_incompatible(st.candidate, params.values):
            if all(sim.procs[q]._aborted(b.round, b.value) for q in wb):
                continue
            states = {q: sim.procs[q].instance(b.key) for q in wb}
            status = lock_status(sim.system, sim.partition, states, ABORT)
            if status != "free":
                prepared = any(b in sim.procs[q].prepared_log for q in wb)
                return f"{b.key} {status} for abort, {'prepared' if prepared else 'never prepared'}"
    return None


def consensus_case(rng: Random, inst: Instance) -> tuple[Trace, dict]:
    uni = sorted(inst.qs.universe)
    wb = sorted(inst.part.well_behaved)
    cfg0 = _net(rng, max_steps=60_000)
    cfg = replace(cfg0, max_time=2100)
    params = ConsensusParams(values=tuple(range(1, rng.randint(2, 3) + 1)), delta=cfg.post_gst_bound + 1)
    directives = _wb_delays(rng, inst, cfg)
    modes = _byz_modes(rng, inst)
    for b, mode in modes.items():
        if mode == "noise":
            directives += _noise(rng, b, uni, cfg.gst + 40, lambda: _ballot_noise(rng, params))
        elif mode == "late-silence":
            directives.append(Silence(b, rng.randint(0, cfg.gst + 60)))
    honest = [b for b, m in modes.items() if m in ("honest", "late-silence")]
    sim = Simulation(cfg, inst.qs, inst.part, consensus_factory(params), AdversaryScript(directives),
                     honest_byzantine=honest)
    proposals = {}
    for p in wb + honest:
        v = rng.choice(params.values)
        proposals[p] = v
        sim.request(rng.randint(0, 3), p, "propose", v)

    def all_decided(s: Simulation) -> bool:
        return all(s.procs[p].decided is not None for p in wb)

    trace = sim.run_until_quiescent(all_decided)
    decided = {p: sim.procs[p].decided for p in wb if sim.procs[p].decided is not None}
    res: dict = {}
    vals = set(decided.values())
    res["agreement"] = (len(vals) <= 1, f"decisions {decided}")
    mono = []
    for p in wb:
        log = sim.procs[p].prepared_log
        if any(not (a < b) for a, b in zip(log, log[1:])):
            mono.append(p)
    res["prepared-monotone"] = (not mono, f"prepared decreased at {mono}")
    res["validity"] = None
    if not inst.part.byzantine:
        proposed = {e.note[1] for e in trace.entries if e.kind == "request" and e.note[0] == "propose"}
        res["validity"] = (vals <= proposed, f"decided {sorted(vals)}, proposed {sorted(proposed)}")
    res["termination"] = None
    strong = strongly_available_set(inst.qs, inst.part)
    res["_all"] = all_decided(sim)
    r = good_round(sim, trace, params) if not res["_all"] else 0
    if r is not None:
        missing = sorted(p for p in strong if p not in decided)
        why = abort_lock(sim, params) if missing else None
        res["termination"] = (not missing, f"strongly available {missing} undecided after good round {r}; "
                                           f"Byzantine modes {modes}; blocking ballot {why}")
    return trace, res


def consensus_suite(seed: int = 0, count: int = 150, *, keep_traces=None) -> SuiteReport:
    run = _Runner("consensus", seed, keep_traces)
    for i in range(count):
        rng = run.rng(i)
        inst = brb_instance(rng, min_byz=int(i % 3 != 0))
        trace, res = consensus_case(rng, inst)
        for k, ok in (("adversarial runs", bool(inst.part.byzantine)), ("runs where all decided", res["_all"])):
            run.rep.extra[k] = run.rep.extra.get(k, 0) + ok
        del res["_all"]
        run.record(i, inst, trace, res)
    return run.finish()


# ---------------------------------------------------------------- discovery and election

def _lies(rng: Random, inst: Instance, b: int, horizon: int) -> list:
    uni = sorted(inst.qs.universe)
    wb = sorted(inst.part.well_behaved)
    genuine = {p: qset_key(inst.qs.of_process(p)) for p in wb}

    def fake_quorum():
        return tuple(sorted(rng.sample(uni, rng.randint(1, len(uni)))))

    def fake_bundle(q):
        # claims for well-behaved members repeat what they really send; the rest is invented
        recs = []
        for m in q:
            qset = genuine[m] if m in genuine else qset_key([q] + [fake_quorum()])
            if m in genuine and rng.random() < 0.3:
                qset = qset_key([q])  # forged, the network refuses to carry it
            recs.append((m, EXCHANGE, qset))
        return tuple(recs)

    def msg():
        k = rng.random()
        if k < 0.35:
            return Msg(EXCHANGE, qset_key([fake_quorum() for _ in range(rng.randint(1, 3))]))
        q = rng.choice([fake_quorum()] + [tuple(sorted(x)) for p in wb for x in inst.qs.of_process(p)])
        if k < 0.65:
            return Msg(EXTEND, (q, fake_bundle(q)))
        if k < 0.85:
            return Msg(PROPAGATE, (rng.choice(uni), rng.choice((1, 2)), q, fake_bundle(q)))
        return Msg(PROPAGATEF, (rng.choice(uni), qset_key([q])))

    return _noise(rng, b, uni, horizon, msg)


def discovery_case(rng: Random, inst: Instance) -> tuple[Trace, dict, dict]:
    wb = sorted(inst.part.well_behaved)
    cfg = _net(rng, max_steps=60_000)
    directives = _wb_delays(rng, inst, cfg)
    lying = bool(inst.part.byzantine) and rng.random() < 0.7
    for b in sorted(inst.part.byzantine):
        if lying:
            directives += _lies(rng, inst, b, cfg.gst + 60)
    sim = Simulation(cfg, inst.qs, inst.part, lambda p, qs, part: DiscoveryElection(p, qs, elect=True),
                     AdversaryScript(directives), record_claims=record_claims)
    for p in wb:
        sim.request(rng.randint(0, 5), p, "discover")
    trace = sim.run_until_quiescent()
    sink = sink_component(build_graph(inst.qs)).members
    proto = {p for p in wb if sim.procs[p].disc.in_sink}
    res: dict = {}
    res["accuracy"] = (proto <= sink, f"in-sink {sorted(proto)} outside sink {sorted(sink)}")
    admitted = {m for p in wb for m in sim.procs[p].el.sink}
    res["election-accuracy"] = (admitted <= sink, f"admitted {sorted(admitted - sink)} outside sink")
    res["completeness"] = None
    res["leader"] = None
    honest = not inst.part.byzantine
    quiet = not trace.truncated
    if honest and quiet:
        want = sink & inst.part.well_behaved
        res["completeness"] = (proto == want, f"in-sink {sorted(proto)}, sink {sorted(want)}")
        leader = min(want)
        got = {p: sim.procs[p].elected for p in wb if sim.procs[p].elected is not None}
        bad = {p: v for p, v in got.items() if v != leader}
        res["leader"] = (not bad, f"expected {leader}, got {bad}")
    meta = {"honest": honest, "lying": lying,
            "electing": sum(1 for p in wb if sim.procs[p].elected is not None), "wb": len(wb)}
    return trace, res, meta


def discovery_suite(seed: int = 0, count: int = 200, *, keep_traces=None) -> SuiteReport:
    run = _Runner("discovery-election", seed, keep_traces)
    honest = lying = electing = total = 0
    for i in range(count):
        rng = run.rng(i)
        if i % 2 == 0:
            inst = sharing_instance(rng, max_byz=0)
        else:
            inst = sharing_instance(rng)
        trace, res, meta = discovery_case(rng, inst)
        honest += meta["honest"]
        lying += meta["lying"]
        electing += meta["electing"]
        total += meta["wb"]
        run.record(i, inst, trace, res)
    run.rep.extra = {"honest runs": honest, "lying runs": lying, "electing processes": f"{electing}/{total}"}
    return run.finish()


# ---------------------------------------------------------------- minimal-quorum oracle

def brute_minimal_quorums(qs: QuorumSystem) -> frozenset:
    """System-minimal quorums by enumerating every subset of the universe."""
    uni = sorted(qs.universe)
    declared = {q for quorums in qs.quorums.values() for q in quorums}
    out = set()
    for k in range(1, len(uni) + 1):
        for c in combinations(uni, k):
            s = frozenset(c)
            if s not in declared:
                continue
            smaller = any(frozenset(d) in declared for j in range(1, k) for d in combinations(c, j))
            if not smaller:
                out.add(s)
    return frozenset(out)


def brute_individual_minimal(qs: QuorumSystem, part: Partition) -> frozenset:
    """Subsets that are an inclusion-minimal quorum of each of their well-behaved members."""
    uni = sorted(qs.universe)
    out = set()
    for k in range(1, len(uni) + 1):
        for c in combinations(uni, k):
            s = frozenset(c)
            members = [p for p in c if p in part.well_behaved]
            if not members:
                continue
            ok = True
            for p in members:
                own = qs.quorums.get(p, frozenset())
                if s not in own or any(o < s for o in own):
                    ok = False
                    break
            if ok:
                out.add(s)
    return frozenset(out)


def minimal_quorum_suite(seed: int = 0, count: int = 200) -> SuiteReport:
    rep = SuiteReport("minimal-quorums", seed)
    t0 = time.perf_counter()
    h = hashlib.sha256()
    for i in range(count):
        rng = Random(f"{seed}:discovery-election:{i}")
        inst = sharing_instance(rng, max_byz=0) if i % 2 == 0 else sharing_instance(rng)
        mq = system_minimal_quorums(inst.qs)
        oracle_mq = brute_minimal_quorums(inst.qs)
        oracle_im = brute_individual_minimal(inst.qs, inst.part)
        h.update(repr(sorted(sorted(q) for q in mq)).encode())
        rep.runs += 1
        checks = {
            "oracle-minimal": (mq == oracle_mq, f"{sorted(map(sorted, mq))} vs {sorted(map(sorted, oracle_mq))}"),
            "minimal-implies-individual": (mq <= oracle_im, f"{sorted(map(sorted, mq - oracle_im))}"),
            "individual-implies-minimal": (oracle_im <= mq, f"{sorted(map(sorted, oracle_im - mq))}"),
            "library-agrees": (individually_minimal_everywhere(inst.qs, inst.part) == oracle_im, ""),
        }
        for prop, (ok, detail) in checks.items():
            rep.checked[prop] = rep.checked.get(prop, 0) + 1
            if not ok:
                rep.violations.append(Violation(i, prop, detail, inst.describe(), ""))
    rep.elapsed = time.perf_counter() - t0
    rep.digest = h.hexdigest()
    return rep


SUITES = {
    "brb": brb_suite,
    "consensus": consensus_suite,
    "discovery": discovery_suite,
    "minimal-quorums": minimal_quorum_suite,
}
