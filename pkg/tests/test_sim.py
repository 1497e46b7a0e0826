from random import Random

import pytest

from hqslab.brb import brb_factory
from hqslab.core import Partition, QuorumSystem
from hqslab.sim import (
    AdversaryScript,
    Deliver,
    Inject,
    Msg,
    NetConfig,
    Request,
    ScriptError,
    Send,
    SimulationFault,
    StartTimer,
    Trace,
    new_sim,
    replay_from,
    run_until_quiescent,
    step,
    view_of,
    view_normal_form,
)

from conftest import canned

TRI = QuorumSystem.of({1: [[1, 3]], 2: [[1, 2]], 3: [[2, 3]]})


class Noop:
    def on(self, event):
        return []


class Gossip:
    """Forwards the first HELLO it sees to everyone; used to exercise the network."""

    def __init__(self, p, qs):
        self.p, self.uni, self.seen = p, sorted(qs.universe), False
        self.batches = []

    def on(self, event):
        if isinstance(event, Request):
            return [Send(q, Msg("HELLO", self.p)) for q in self.uni] + [Send(q, Msg("AGAIN", self.p)) for q in self.uni]
        if isinstance(event, Deliver):
            self.batches.append(event.msgs)
            if not self.seen:
                self.seen = True
                return [Send(q, Msg("HELLO", event.sender)) for q in self.uni] + [StartTimer(3, "t")]
        return []


def gossip(p, qs, part):
    return Gossip(p, qs)


def test_new_sim_examples(running):
    sim = new_sim(NetConfig(), TRI, Partition.of(TRI, []), lambda p, qs, part: Noop())
    assert sorted(sim.procs) == [1, 2, 3] and len(sim.trace) == 0 and sim.now == 0
    qs, part = running
    sim = new_sim(NetConfig(), qs, part, brb_factory(1))
    assert sorted(sim.procs) == [1, 3, 4, 5]
    sim = new_sim(NetConfig(max_steps=0), TRI, Partition.of(TRI, []), gossip)
    sim.request(0, 1, "go")
    tr = run_until_quiescent(sim)
    assert len(tr) == 0 and tr.truncated


def test_factory_failure_is_a_fault():
    def bad(p, qs, part):
        raise RuntimeError("boom")

    with pytest.raises(SimulationFault):
        new_sim(NetConfig(), TRI, Partition.of(TRI, []), bad)


def test_handler_failure_carries_trace():
    class Crash:
        def on(self, event):
            raise ValueError("bad")

    sim = new_sim(NetConfig(), TRI, Partition.of(TRI, []), lambda p, qs, part: Crash())
    sim.request(0, 1, "go")
    with pytest.raises(SimulationFault) as ei:
        sim.run_until_quiescent()
    assert ei.value.trace is not None


def test_single_batch_and_tie_break():
    sim = new_sim(NetConfig(), TRI, Partition.of(TRI, []), gossip)
    sim.request(0, 2, "go")
    e = step(sim)
    assert e.kind == "request"
    sends = [x for x in sim.trace.entries if x.kind == "send"]
    # one batch per receiver holding both messages of the event
    assert [x.to for x in sends] == [1, 2, 3]
    assert all([m.kind for m in x.msgs] == ["HELLO", "AGAIN"] for x in sends)
    nxt = [step(sim) for _ in range(3)]
    assert [x.to for x in nxt] == [1, 2, 3]


def test_batches_delivered_whole():
    sim = new_sim(NetConfig(random_delays=True, seed=3), TRI, Partition.of(TRI, []), gossip)
    sim.request(0, 1, "go")
    sim.run_until_quiescent()
    for p, proc in sim.procs.items():
        want = [e.msgs for e in sim.trace.entries if e.kind == "deliver" and e.to == p]
        assert proc.batches == want


def test_delay_validation():
    part = Partition.of(TRI, [])
    far = AdversaryScript.parse([{"op": "delay", "match": {"from": 1, "to": 2}, "until": 10**6}])
    with pytest.raises(ScriptError):
        new_sim(NetConfig(gst=10), TRI, part, gossip, far)
    ok = AdversaryScript.parse([{"op": "delay", "match": {"from": 1, "to": 2}, "until": 12}])
    new_sim(NetConfig(gst=10), TRI, part, gossip, ok)
    with pytest.raises(ScriptError):
        new_sim(NetConfig(), TRI, part, gossip, AdversaryScript([Inject(1, 2, (Msg("X"),), 0)]))
    with pytest.raises(ScriptError):
        AdversaryScript.parse([{"op": "teleport"}])


def test_netconfig_invariants():
    with pytest.raises(ScriptError):
        NetConfig(gst=-1)
    with pytest.raises(ScriptError):
        NetConfig(post_gst_bound=0)
    cfg = NetConfig(gst=10, post_gst_bound=2, slack=1)
    assert cfg.deadline(12) == 14 and cfg.deadline(3) == 13


@pytest.mark.parametrize("seed", range(30))
def test_partial_synchrony_and_link_integrity(seed):
    rng = Random(seed)
    cfg = NetConfig(gst=rng.randint(0, 20), post_gst_bound=rng.randint(1, 3), seed=seed,
                    random_delays=True, pre_gst_max_delay=rng.randint(1, 15), slack=rng.randint(0, 4))
    sim = new_sim(cfg, TRI, Partition.of(TRI, []), gossip)
    for p in (1, 2, 3):
        sim.request(rng.randint(0, 25), p, "go")
    tr = sim.run_until_quiescent()
    assert not tr.truncated
    sends = [e for e in tr.entries if e.kind == "send"]
    delivers = [e for e in tr.entries if e.kind == "deliver"]
    assert len(sends) == len(delivers)
    for s in sends:
        at = s.note[-1]
        assert at <= cfg.deadline(s.t)
        if s.t >= cfg.gst:
            assert at <= s.t + cfg.post_gst_bound
    pending = [(s.frm, s.to, s.msgs) for s in sends]
    for d in delivers:
        pending.remove((d.frm, d.to, d.msgs))


def test_determinism_and_jsonl_roundtrip():
    def once():
        cfg = NetConfig(gst=7, random_delays=True, seed=11, pre_gst_max_delay=9)
        sim = new_sim(cfg, TRI, Partition.of(TRI, []), gossip)
        sim.request(0, 1, "go")
        sim.request(2, 3, "go")
        return sim.run_until_quiescent().to_jsonl()

    a, b = once(), once()
    assert a == b
    back = Trace.from_jsonl(a)
    assert back.to_jsonl() == a
    first = a.splitlines()[0]
    assert first.startswith('{"t":0,"kind":"request","from":null,"to":1,"msgs":[],"note":')


def test_view_of():
    assert view_of(Trace(), 1) == []
    sim = new_sim(NetConfig(), TRI, Partition.of(TRI, []), gossip)
    sim.request(0, 1, "go")
    tr = sim.run_until_quiescent()
    v = view_of(tr, 2)
    assert v == [(e.frm, e.msgs) for e in tr.entries if e.kind == "deliver" and e.to == 2]
    assert view_of(tr, 2, up_to=1) == v[:1]
    assert view_normal_form(v) == view_normal_form(list(v))


def test_replay_from_reinjects_source_batches():
    sim = new_sim(NetConfig(), TRI, Partition.of(TRI, []), gossip)
    sim.request(0, 1, "go")
    tr = sim.run_until_quiescent()
    script = replay_from(tr, 1, receivers=[2])
    sent = [e for e in tr.entries if e.kind == "send" and e.frm == 1 and e.to == 2]
    assert [(d.receiver, d.msgs, d.at) for d in script.directives] == [(2, e.msgs, e.t) for e in sent]
    with pytest.raises(ScriptError):
        replay_from(Trace(), 1)
    # as a Byzantine 1 the replay reproduces what 2 saw from 1
    part = Partition.of(TRI, [1])
    sim2 = new_sim(NetConfig(), TRI, part, gossip, script)
    tr2 = sim2.run_until_quiescent()
    assert [m for s, m in view_of(tr2, 2) if s == 1] == [m for s, m in view_of(tr, 2) if s == 1]


def test_silence_and_drop(running):
    qs, part = running
    script = AdversaryScript.parse([
        {"op": "inject", "from": 2, "to": [1, 3], "at": 0, "msgs": [{"kind": "BCAST", "val": "x"}]},
        {"op": "inject", "from": 2, "to": [4], "at": 5, "msgs": [{"kind": "BCAST", "val": "x"}]},
        {"op": "silence", "process": 2, "from_time": 3},
        {"op": "drop", "match": {"to": [2]}},
    ])
    tr = new_sim(NetConfig(), qs, part, brb_factory(2), script).run_until_quiescent()
    injected = [e for e in tr.entries if e.kind == "send" and e.frm == 2]
    assert [e.note[0] for e in injected] == ["injected", "injected", "dropped"]
    assert all(e.note == ("dropped",) for e in tr.entries if e.kind == "send" and e.to == 2)
    with pytest.raises(ScriptError):
        new_sim(NetConfig(), qs, part, brb_factory(2), AdversaryScript.parse([{"op": "drop", "match": {"from": 1}}]))
