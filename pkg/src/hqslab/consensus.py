"""Ballot-based consensus on top of per-ballot federated voting.

Each ballot gets its own voting instance whose two verdicts are abort and
commit. A process prepares a ballot once every ballot below it with a
different value has been aborted; the leader commits its candidate once it
is prepared, and a process decides on a delivered commit for its prepared
ballot that came from the current leader.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import total_ordering
from typing import Any, Callable, Iterable, Sequence

from .brb import BrbState, new_state
from .core import Partition, QuorumSystem, followers
from .sim import Deliver, Msg, Request, Respond, Send, StartTimer, TimerFire

log = logging.getLogger(__name__)

ABORT, COMMIT = "A", "C"
BOT_KEY = "bot"
TIMEOUT_BASE = 8


@total_ordering
@dataclass(frozen=True)
class Ballot:
    round: int
    value: Any = None  # None is the bottom value

    def _key(self):
        return (self.round, self.value is not None, self.value if self.value is not None else 0)

    def __lt__(self, other: "Ballot") -> bool:
        return self._key() < other._key()

    def compatible(self, other: "Ballot") -> bool:
        return self.value == other.value

    def below_incompatible(self, other: "Ballot") -> bool:
        return self < other and not self.compatible(other)

    @property
    def key(self) -> str:
        return f"{self.round}:{BOT_KEY if self.value is None else self.value}"

    @classmethod
    def parse(cls, key: str) -> "Ballot":
        r, v = key.split(":", 1)
        return cls(int(r), None if v == BOT_KEY else int(v))

    def __str__(self):
        return f"<{self.round},{'⊥' if self.value is None else self.value}>"


BOTTOM = Ballot(0, None)


def below_incompatible(b: Ballot, values: Iterable[int]) -> list[Ballot]:
    vs = sorted(values)
    out = [BOTTOM] if b.value is not None else []
    for r in range(1, b.round + 1):
        for v in vs:
            c = Ballot(r, v)
            if c.below_incompatible(b):
                out.append(c)
    return out


def timeout(r: int, base: int = TIMEOUT_BASE) -> int:
    return base * 2**r


@dataclass(frozen=True)
class ConsensusParams:
    values: tuple[int, ...] = tuple(range(1, 9))
    timeout_base: int = TIMEOUT_BASE
    delta: int = 3
    leader_order: tuple[int, ...] | None = None


@dataclass
class ConsensusState:
    self_id: int
    quorums: frozenset
    followers: frozenset
    universe: frozenset
    params: ConsensusParams
    round: int = 1
    candidate: Ballot = BOTTOM
    prepared: Ballot = BOTTOM
    leader: int = -1
    decided: Any = None
    decided_ballot: Ballot | None = None
    proposed: bool = False
    round_started: bool = False
    fv: dict = field(default_factory=dict)
    aborted: dict = field(default_factory=dict)  # round -> values with delivered abort
    commits_sent: set = field(default_factory=set)
    prepared_log: list = field(default_factory=list)
    candidate_log: list = field(default_factory=list)
    leader_source: Callable[[int], int | None] | None = None

    # -- leaders and timers

    @property
    def timeout(self) -> int:
        return timeout(self.round, self.params.timeout_base)

    @property
    def delta(self) -> int:
        return self.params.delta

    def leader_of(self, r: int) -> int:
        if self.leader_source is not None:
            p = self.leader_source(r)
            if p is not None:
                return p
        order = self.params.leader_order or tuple(sorted(self.universe))
        return order[(r - 1) % len(order)]

    def is_leader(self) -> bool:
        return self.leader == self.self_id

    # -- federated voting plumbing

    def instance(self, key: str) -> BrbState:
        st = self.fv.get(key)
        if st is None:
            st = BrbState(self.self_id, self.quorums, self.followers, self.universe, inst=key)
            self.fv[key] = st
        return st

    def _fv_broadcast(self, b: Ballot, verdict: str) -> list:
        st = self.instance(b.key)
        if st.broadcast_done:
            return []
        return st.broadcast(verdict)

    def _abort_below(self) -> list:
        out = []
        for b in below_incompatible(self.candidate, self.params.values):
            out += self._fv_broadcast(b, ABORT)
        return out

    # -- transitions

    def propose(self, v) -> list:
        if self.proposed:
            raise RuntimeError(f"process {self.self_id} proposed twice")
        if v is None or v not in self.params.values:
            raise ValueError(f"proposal {v!r} is outside the value domain")
        self.proposed = True
        self.round = 1
        self.leader = self.leader_of(1)
        self.candidate = Ballot(1, v)
        self.candidate_log.append(self.candidate)
        self.round_started = True
        out: list = [StartTimer(self.timeout, ("round", 1))]
        if self.is_leader():
            out += self._abort_below()
        return out + self._after_change()

    def new_leader(self, p: int) -> list:
        self.leader = p
        self.round += 1
        self.round_started = False
        out: list = [Respond("new-leader", p, self.round)]
        if self.is_leader() and self.delta > 0:
            return out + [StartTimer(self.delta, ("delta", self.round))]
        return out + self._begin_round()

    def _begin_round(self) -> list:
        self.round_started = True
        out: list = [StartTimer(self.timeout, ("round", self.round))]
        v = self.candidate.value if self.prepared == BOTTOM else self.prepared.value
        self.candidate = Ballot(self.round, v)
        self.candidate_log.append(self.candidate)
        if self.is_leader():
            out += self._abort_below()
        return out + self._after_change()

    def on_timer(self, tag) -> list:
        kind, r = tag[0], tag[1]
        if r != self.round:
            return []
        if kind == "round":
            if self.decided is not None:
                return []
            # complain; the local leader source answers immediately
            return self.new_leader(self.leader_of(self.round + 1))
        if kind == "delta" and not self.round_started:
            return self._begin_round()
        return []

    def on_batch(self, frm: int, msgs: Sequence[Msg]) -> list:
        out = []
        for m in msgs:
            if not m.inst:
                continue
            try:
                b = Ballot.parse(m.inst)
            except (ValueError, TypeError):
                log.info("process %s ignored message for instance %r", self.self_id, m.inst)
                continue
            st = self.instance(b.key)
            for e in st.on_msg(frm, m):
                if isinstance(e, Respond):
                    if e.val == ABORT:
                        self.aborted.setdefault(b.round, set()).add(b.value)
                    out.append(Respond("fv-deliver", e.val, b.key))
                else:
                    out.append(e)
        return out + self._after_change()

    def _aborted(self, r: int, v) -> bool:
        return v in self.aborted.get(r, ())

    def preparable(self, b: Ballot) -> bool:
        """Every ballot below ``b`` with another value has a delivered abort."""
        if b.value is None or not self._aborted(0, None):
            return False
        vs = self.params.values
        for r in range(1, b.round):
            got = self.aborted.get(r, ())
            if any(v != b.value and v not in got for v in vs):
                return False
        got = self.aborted.get(b.round, ())
        return all(v in got for v in vs if v < b.value)

    def _after_change(self) -> list:
        out = []
        best = self.prepared
        # the highest ballot whose lower incompatible ballots are all aborted
        top = max([self.round] + [Ballot.parse(k).round for k in self.fv])
        cands = [Ballot(r, v) for r in range(1, top + 1) for v in self.params.values]
        for b in sorted(cands, reverse=True):
            if b <= best:
                break
            if self.preparable(b):
                best = b
                break
        if best != self.prepared:
            self.prepared = best
            self.prepared_log.append(best)
            out.append(Respond("prepared", best.key))
        if self.is_leader() and self.round_started and self.prepared == self.candidate:
            if self.candidate not in self.commits_sent:
                self.commits_sent.add(self.candidate)
                out += self._fv_broadcast(self.candidate, COMMIT)
        if self.decided is None and self.prepared != BOTTOM:
            st = self.fv.get(self.prepared.key)
            if st is not None and st.delivered and st.delivered_val == COMMIT:
                if self.leader in st.origins.get(COMMIT, ()):
                    self.decided = self.prepared.value
                    self.decided_ballot = self.prepared
                    out.append(Respond("decide", self.decided, self.prepared.key))
        return out

    def on(self, event) -> list:
        if isinstance(event, Request):
            if event.op == "propose":
                return self.propose(event.arg)
            raise ValueError(f"unknown request {event.op!r}")
        if isinstance(event, Deliver):
            return self.on_batch(event.sender, event.msgs)
        if isinstance(event, TimerFire):
            return self.on_timer(event.tag)
        return []


def new_consensus(qs: QuorumSystem, p: int, params: ConsensusParams | None = None) -> ConsensusState:
    return ConsensusState(p, qs.of_process(p), followers(qs, p), qs.universe, params or ConsensusParams())


def _pure(state: ConsensusState, fn) -> tuple[ConsensusState, list]:
    import copy

    s = copy.deepcopy(state)
    return s, fn(s)


def cons_propose(state: ConsensusState, v) -> tuple[ConsensusState, list]:
    return _pure(state, lambda s: s.propose(v))


def cons_handle(state: ConsensusState, event) -> tuple[ConsensusState, list]:
    return _pure(state, lambda s: s.on(event))


def consensus_factory(params: ConsensusParams | None = None):
    def make(p: int, qs: QuorumSystem, part: Partition):
        return new_consensus(qs, p, params)

    return make
