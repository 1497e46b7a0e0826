"""Sink discovery and eventual leader election.

Discovery: each process sends its quorums to the members of its quorums.
A process finds itself in the sink when every member of one of its quorums
reports that same quorum (first phase), or when it hears an extension for a
validated quorum from every member of that quorum's overlap with one of its
own quorums (second phase).

Election: sink members spread signed-by-origin proofs of sink membership,
wait until their view of the sink stops changing for a doubled period,
elect the smallest identity and tell their followers, who adopt a leader
once a whole validated quorum agrees on it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Iterable

from .core import Partition, QuorumSystem
from .sim import Deliver, Msg, Request, Respond, Send, StartTimer, TimerFire, canon

log = logging.getLogger(__name__)

EXCHANGE, EXTEND, PROPAGATE, PROPAGATEF = "EXCHANGE", "EXTEND", "PROPAGATE", "PROPAGATEF"
ELECT_BASE = 8
MAX_ELECT_EPOCH = 8


def qkey(q: Iterable[int]) -> tuple[int, ...]:
    return tuple(sorted(q))


def qset_key(qs: Iterable[Iterable[int]]) -> tuple[tuple[int, ...], ...]:
    return tuple(sorted({qkey(q) for q in qs}, key=lambda t: (len(t), t)))


def _parse_quorum(x) -> tuple[int, ...] | None:
    if not isinstance(x, tuple) or not x or not all(isinstance(m, int) for m in x):
        return None
    return qkey(x)


def _parse_qset(x) -> tuple[tuple[int, ...], ...] | None:
    if not isinstance(x, tuple) or not x:
        return None
    out = []
    for q in x:
        pq = _parse_quorum(q)
        if pq is None:
            return None
        out.append(pq)
    return qset_key(out)


# A record is (origin, kind, payload) for a message the origin really sent.
# Exchange record payload: the origin's quorum set.
# Extend record payload: (quorum, bundle of Exchange records).


def validq(bundle: Iterable[tuple], q: Iterable[int]) -> bool:
    qk = qkey(q)
    ok = set()
    for rec in bundle:
        if not isinstance(rec, tuple) or len(rec) != 3:
            continue
        origin, kind, payload = rec
        if kind != EXCHANGE or origin not in qk:
            continue
        qs = _parse_qset(payload)
        if qs is not None and qk in qs:
            ok.add(origin)
    return ok == set(qk)


def record_claims(m: Msg) -> list[tuple]:
    """Every (origin, kind, payload) a message asserts was sent by someone else."""
    out: list[tuple] = []

    def bundle(b):
        for rec in b if isinstance(b, tuple) else ():
            if isinstance(rec, tuple) and len(rec) == 3:
                out.append(rec)
                if rec[1] == EXTEND and isinstance(rec[2], tuple) and len(rec[2]) == 2:
                    bundle(rec[2][1])

    try:
        if m.kind == EXTEND:
            bundle(m.val[1])
        elif m.kind == PROPAGATE:
            bundle(m.val[3])
    except (TypeError, IndexError):
        pass
    return out


@dataclass
class DiscoveryState:
    self_id: int
    Q: tuple[tuple[int, ...], ...]
    qmap: dict = field(default_factory=dict)
    in_sink: bool = False
    phase: int | None = None
    F: set = field(default_factory=set)
    proof: dict = field(default_factory=dict)  # quorum -> (phase, records)
    extends: dict = field(default_factory=dict)  # quorum -> {sender: bundle}
    extended: set = field(default_factory=set)
    started: bool = False

    @property
    def neighbours(self) -> tuple[int, ...]:
        return tuple(sorted({m for q in self.Q for m in q}))

    def discover(self) -> list:
        self.started = True
        m = Msg(EXCHANGE, self.Q)
        return [Send(p, m) for p in self.neighbours]

    def _phase1(self) -> list:
        out = []
        for q in self.Q:
            if q in self.extended:
                continue
            if all(m in self.qmap and q in self.qmap[m] for m in q):
                recs = tuple((m, EXCHANGE, self.qmap[m]) for m in q)
                self.extended.add(q)
                if not self.in_sink:
                    self.in_sink, self.phase = True, 1
                self.proof.setdefault(q, (1, recs))
                msg = Msg(EXTEND, (q, recs))
                out += [Send(p, msg) for p in self.neighbours]
        return out

    def _phase2(self) -> bool:
        if self.in_sink:
            return False
        for q in sorted(self.extends, key=lambda t: (len(t), t)):
            got = self.extends[q]
            for own in self.Q:
                overlap = set(q) & set(own)
                if not overlap or not overlap <= set(got):
                    continue
                good = [m for m in sorted(overlap) if validq(got[m], q)]
                if good:
                    recs = tuple((m, EXTEND, (q, got[m])) for m in sorted(overlap))
                    self.in_sink, self.phase = True, 2
                    self.proof[q] = (2, recs)
                    return True
        return False

    def on_exchange(self, frm: int, val) -> list:
        qs = _parse_qset(val)
        if qs is None:
            log.info("process %s ignored malformed quorum set from %s", self.self_id, frm)
            return []
        self.F.add(frm)
        self.qmap[frm] = qs
        return self._phase1()

    def on_extend(self, frm: int, val) -> bool:
        try:
            q = _parse_quorum(val[0])
            b = val[1]
        except (TypeError, IndexError):
            q = None
        if q is None or not isinstance(b, tuple):
            log.info("process %s ignored malformed extension from %s", self.self_id, frm)
            return False
        if frm not in q:
            return False
        self.extends.setdefault(q, {})[frm] = b
        return self._phase2()


@dataclass
class ElectionState:
    self_id: int
    Q: tuple[tuple[int, ...], ...]
    sink: set = field(default_factory=set)
    phase1_members: set = field(default_factory=set)
    elected: int | None = None
    epoch: int = 0
    seen: set = field(default_factory=set)
    pending: list = field(default_factory=list)
    outbox: list = field(default_factory=list)  # messages every follower must get
    pf: dict = field(default_factory=dict)  # leader -> {sender: quorum set}

    def intersects_all(self, q) -> bool:
        return all(set(q) & set(own) for own in self.Q)

    def check_proof(self, origin: int, phase: int, q, recs) -> bool:
        if not self.intersects_all(q):
            return False
        if phase == 1:
            return origin in q and validq(recs, q)
        if phase == 2:
            senders = set()
            for rec in recs:
                if not (isinstance(rec, tuple) and len(rec) == 3 and rec[1] == EXTEND):
                    return False
                m, _, payload = rec
                if not (isinstance(payload, tuple) and len(payload) == 2 and _parse_quorum(payload[0]) == q):
                    return False
                if m not in q or not validq(payload[1], q):
                    return False
                senders.add(m)
            return bool(senders) and bool(senders & self.phase1_members)
        return False


class DiscoveryElection:
    """Per-process discovery plus election (election can be switched off)."""

    def __init__(self, p: int, qs: QuorumSystem, *, elect: bool = True, base: int = ELECT_BASE):
        Q = qset_key(qs.of_process(p))
        self.p = p
        self.disc = DiscoveryState(p, Q)
        self.elect_on = elect
        self.base = base
        self.el = ElectionState(p, Q)
        self._known_f: set = set()
        self._announced = False

    @property
    def elected(self):
        return self.el.elected

    # -- helpers

    def _to_f(self, msg: Msg) -> list:
        self.el.outbox.append(msg)
        return [Send(f, msg) for f in sorted(self.disc.F)]

    def _new_followers(self) -> list:
        new = self.disc.F - self._known_f
        self._known_f |= new
        if not new or not self.elect_on:
            return []
        return [Send(f, m) for f in sorted(new) for m in self.el.outbox]

    def _restart_timer(self) -> list:
        if not self.disc.in_sink:
            return []
        self.el.epoch += 1
        delay = self.base * 2 ** min(self.el.epoch, MAX_ELECT_EPOCH)
        return [StartTimer(delay, ("elect", self.el.epoch))]

    def _admit(self, origin: int, phase: int, q, recs) -> list:
        key = (origin, q)
        if key in self.el.seen:
            return []
        if not self.el.check_proof(origin, phase, q, recs):
            if phase == 2:
                self.el.pending.append((origin, phase, q, recs))
            return []
        self.el.seen.add(key)
        out = []
        grew = origin not in self.el.sink
        self.el.sink.add(origin)
        if phase == 1 and origin not in self.el.phase1_members:
            self.el.phase1_members.add(origin)
            retry, self.el.pending = self.el.pending, []
            for item in retry:
                out += self._admit(*item)
        out += self._to_f(Msg(PROPAGATE, (origin, phase, q, recs)))
        if grew:
            out += self._restart_timer()
        return out

    def _sink_joined(self) -> list:
        out = [Respond("in-sink", self.disc.phase)]
        if not self.elect_on or self._announced:
            return out
        self._announced = True
        for q, (phase, recs) in sorted(self.disc.proof.items()):
            out += self._admit(self.p, phase, q, recs)
            break
        return out

    def _maybe_follow(self, leader: int) -> list:
        if self.disc.in_sink:
            return []
        votes = self.el.pf.get(leader, {})
        cands = {q for qs in votes.values() for q in qs}
        for q in sorted(cands, key=lambda t: (len(t), t)):
            if not set(q) <= set(votes):
                continue
            if not all(q in votes[m] for m in q):
                continue
            if not any(set(q) <= set(own) for own in self.el.Q):
                continue
            if self.el.elected != leader:
                self.el.elected = leader
                return [Respond("elect", leader)]
            return []
        return []

    # -- events

    def on(self, event) -> list:
        if isinstance(event, Request):
            if event.op in ("discover", "start"):
                return self.disc.discover()
            return []
        if isinstance(event, TimerFire):
            return self.on_timer(event.tag)
        if isinstance(event, Deliver):
            return self.on_batch(event.sender, event.msgs)
        return []

    def on_timer(self, tag) -> list:
        if tag[0] != "elect" or tag[1] != self.el.epoch or not self.disc.in_sink:
            return []
        leader = min(self.el.sink)
        if leader == self.el.elected:
            return []
        self.el.elected = leader
        return [Respond("elect", leader)] + self._to_f(Msg(PROPAGATEF, (leader, self.disc.Q)))

    def on_batch(self, frm: int, msgs) -> list:
        out: list = []
        was_in = self.disc.in_sink
        for m in msgs:
            try:
                if m.kind == EXCHANGE:
                    out += self.disc.on_exchange(frm, m.val)
                elif m.kind == EXTEND:
                    self.disc.on_extend(frm, m.val)
                elif m.kind == PROPAGATE and self.elect_on:
                    origin, phase, q, recs = m.val
                    pq = _parse_quorum(q)
                    if pq is not None and isinstance(origin, int) and isinstance(recs, tuple):
                        out += self._collect(lambda: self._admit(origin, phase, pq, recs))
                elif m.kind == PROPAGATEF and self.elect_on:
                    leader, qs = m.val
                    pqs = _parse_qset(qs)
                    if pqs is not None and isinstance(leader, int):
                        self.el.pf.setdefault(leader, {})[frm] = pqs
                        out += self._maybe_follow(leader)
            except (TypeError, ValueError) as exc:
                log.info("process %s ignored malformed %s from %s: %s", self.p, m.kind, frm, exc)
        if self.disc.in_sink and not was_in:
            out += self._sink_joined()
        out += self._new_followers()
        return out

    def _collect(self, fn) -> list:
        # sink proofs only matter to processes that are themselves in the sink or follow it
        return fn()


def discovery_factory(elect: bool = False):
    def make(p: int, qs: QuorumSystem, part: Partition):
        return DiscoveryElection(p, qs, elect=elect)

    return make
