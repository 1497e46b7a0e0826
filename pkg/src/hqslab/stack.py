"""Consensus driven by the elected leader instead of a fixed rotation."""

from __future__ import annotations

from .consensus import ConsensusParams, ConsensusState, new_consensus
from .core import Partition, QuorumSystem
from .discovery import DiscoveryElection
from .sim import Deliver, Request, TimerFire


class StackProcess:
    def __init__(self, p: int, qs: QuorumSystem, params: ConsensusParams | None = None):
        self.p = p
        self.de = DiscoveryElection(p, qs, elect=True)
        self.cons: ConsensusState = new_consensus(qs, p, params)
        # before any election the consensus layer falls back to its rotation
        self.cons.leader_source = lambda r: self.de.elected

    def on(self, event) -> list:
        if isinstance(event, Request):
            if event.op == "propose":
                return self.cons.on(event)
            return self.de.on(event)
        if isinstance(event, TimerFire):
            if isinstance(event.tag, tuple) and event.tag and event.tag[0] == "elect":
                return self.de.on(event)
            return self.cons.on(event)
        if isinstance(event, Deliver):
            ours = tuple(m for m in event.msgs if m.inst)
            theirs = tuple(m for m in event.msgs if not m.inst)
            out = []
            if theirs:
                out += self.de.on(Deliver(event.sender, theirs))
            if ours:
                out += self.cons.on(Deliver(event.sender, ours))
            return out
        return []


def stack_factory(params: ConsensusParams | None = None):
    def make(p: int, qs: QuorumSystem, part: Partition):
        return StackProcess(p, qs, params)

    return make
