"""Byzantine reliable broadcast over heterogeneous quorums, and federated voting.

Echo and Ready go to followers only. A process readies a value once it holds
echoes from one of its quorums, or Ready messages from a set that blocks it;
it delivers once Ready messages cover one of its quorums. Federated voting is
the same machine without a designated sender.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from typing import Any, Iterable

from .core import Partition, QuorumSystem, followers
from .sim import Deliver, Msg, Request, Respond, Send

log = logging.getLogger(__name__)

BCAST, ECHO, READY = "BCAST", "ECHO", "READY"


class BroadcastError(RuntimeError):
    pass


@dataclass
class BrbState:
    self_id: int
    quorums: frozenset
    followers: frozenset
    universe: frozenset
    inst: str = ""
    sender: int | None = None  # None: federated voting, anyone may originate
    echoed: bool = False
    readied: bool = False
    delivered: bool = False
    echo_val: Any = None
    ready_val: Any = None
    delivered_val: Any = None
    broadcast_done: bool = False
    E: dict = field(default_factory=dict)
    R: dict = field(default_factory=dict)
    origins: dict = field(default_factory=dict)

    @property
    def is_fv(self) -> bool:
        return self.sender is None

    def _has_quorum(self, s: set) -> bool:
        return any(q <= s for q in self.quorums)

    def _blocked_by(self, s: set) -> bool:
        return all(q & s for q in self.quorums)

    def _to_followers(self, kind: str, v) -> list:
        m = Msg(kind, v, self.inst)
        return [Send(f, m) for f in sorted(self.followers)]

    def broadcast(self, v) -> list:
        if not self.is_fv and self.self_id != self.sender:
            raise BroadcastError(f"process {self.self_id} is not the sender of instance {self.inst!r}")
        if self.broadcast_done:
            raise BroadcastError(f"process {self.self_id} already broadcast in instance {self.inst!r}")
        self.broadcast_done = True
        m = Msg(BCAST, v, self.inst)
        return [Send(p, m) for p in sorted(self.universe)]

    def on_msg(self, frm: int, m: Msg) -> list:
        out: list = []
        v = m.val
        if m.kind == BCAST:
            if not self.is_fv and frm != self.sender:
                return out
            self.origins.setdefault(v, set()).add(frm)
            if not self.echoed:
                self.echoed = True
                self.echo_val = v
                out += self._to_followers(ECHO, v)
        elif m.kind == ECHO:
            e = self.E.setdefault(v, set())
            e.add(frm)
            if not self.readied and self._has_quorum(e):
                out += self._ready(v)
        elif m.kind == READY:
            r = self.R.setdefault(v, set())
            r.add(frm)
            if not self.readied and self._blocked_by(r):
                out += self._ready(v)
            if not self.delivered and self._has_quorum(r):
                self.delivered = True
                self.delivered_val = v
                out.append(Respond("deliver", v, self.inst))
        else:
            log.info("process %s ignored unknown message kind %r", self.self_id, m.kind)
        return out

    def _ready(self, v) -> list:
        self.readied = True
        self.ready_val = v
        return self._to_followers(READY, v)


def new_state(qs: QuorumSystem, p: int, *, inst: str = "", sender: int | None = None, fol=None) -> BrbState:
    return BrbState(
        self_id=p,
        quorums=qs.of_process(p),
        followers=followers(qs, p) if fol is None else fol,
        universe=qs.universe,
        inst=inst,
        sender=sender,
    )


def _step(state: BrbState, event) -> list:
    if isinstance(event, Request):
        if event.op != "broadcast":
            raise BroadcastError(f"unknown request {event.op!r}")
        return state.broadcast(event.arg)
    if isinstance(event, Deliver):
        out = []
        for m in event.msgs:
            if m.inst == state.inst:
                out += state.on_msg(event.sender, m)
        return out
    return []


def group_sends(effects: Iterable) -> dict[int, tuple[Msg, ...]]:
    out: dict[int, list] = {}
    for e in effects:
        if isinstance(e, Send):
            out.setdefault(e.to, []).append(e.msg)
    return {r: tuple(ms) for r, ms in sorted(out.items())}


def brb_broadcast(state: BrbState, v) -> tuple[BrbState, list]:
    s = copy.deepcopy(state)
    return s, s.broadcast(v)


def brb_handle(state: BrbState, event) -> tuple[BrbState, list]:
    s = copy.deepcopy(state)
    return s, _step(s, event)


def fv_handle(state: BrbState, event) -> tuple[BrbState, list]:
    if not state.is_fv:
        raise BroadcastError("fv_handle needs an instance without a designated sender")
    return brb_handle(state, event)


class BroadcastProcess:
    """Simulator-facing process running one or more broadcast instances."""

    def __init__(self, p: int, qs: QuorumSystem, *, sender: int | None = None, fv: bool = False):
        self.p = p
        self.qs = qs
        self.fv = fv
        self.sender = None if fv else sender
        self.fol = followers(qs, p)
        self.instances: dict[str, BrbState] = {}

    def instance(self, inst: str) -> BrbState:
        st = self.instances.get(inst)
        if st is None:
            st = new_state(self.qs, self.p, inst=inst, sender=self.sender, fol=self.fol)
            self.instances[inst] = st
        return st

    def on(self, event) -> list:
        if isinstance(event, Request):
            if event.op != "broadcast":
                raise BroadcastError(f"unknown request {event.op!r}")
            arg = event.arg
            inst, v = (arg[0], arg[1]) if isinstance(arg, tuple) and len(arg) == 2 and self.fv else ("", arg)
            return self.instance(inst).broadcast(v)
        if isinstance(event, Deliver):
            out = []
            for m in event.msgs:
                out += self.instance(m.inst).on_msg(event.sender, m)
            return out
        return []


def brb_factory(sender: int):
    def make(p: int, qs: QuorumSystem, part: Partition):
        return BroadcastProcess(p, qs, sender=sender)

    return make


def fv_factory(p: int, qs: QuorumSystem, part: Partition):
    return BroadcastProcess(p, qs, fv=True)


# ---------------------------------------------------------------- lock analysis

def can_deliver(
    qs: QuorumSystem,
    part: Partition,
    states: dict[int, BrbState],
    v,
    *,
    byzantine_help: bool,
) -> frozenset[int]:
    """Well-behaved processes that could still deliver ``v`` from the current states.

    Optimistic closure: every process that has not committed to another echo
    or ready value is assumed to follow along. Byzantine processes join only
    when ``byzantine_help`` is set.
    """
    wb = part.well_behaved
    helpers = set(part.byzantine) if byzantine_help else set()
    can_echo = set(helpers)
    for p in wb:
        st = states[p]
        if not st.echoed or st.echo_val == v:
            can_echo.add(p)
    ready = set(helpers)
    for p in wb:
        st = states[p]
        if st.readied and st.ready_val == v:
            ready.add(p)
    changed = True
    while changed:
        changed = False
        for p in sorted(wb - ready):
            st = states[p]
            if st.readied:
                continue
            # members of p's own quorums always reach p, so no follower filter is needed
            if any(q <= can_echo for q in st.quorums) or all(q & ready for q in st.quorums):
                ready.add(p)
                changed = True
    out = set()
    for p in wb:
        st = states[p]
        if st.delivered:
            if st.delivered_val == v:
                out.add(p)
            continue
        if any(q <= ready for q in st.quorums):
            out.add(p)
    return frozenset(out)


def lock_status(qs: QuorumSystem, part: Partition, states: dict[int, BrbState], v) -> str:
    """'free', 'soft-locked' or 'hard-locked' with respect to delivering ``v``."""
    if can_deliver(qs, part, states, v, byzantine_help=False):
        return "free"
    if can_deliver(qs, part, states, v, byzantine_help=True):
        return "soft-locked"
    return "hard-locked"
