"""Deterministic discrete-event network with a scriptable adversary.

Time is a logical integer. Every handler invocation's sends to one receiver
form a single batch, delivered atomically. Well-behaved to well-behaved
batches can be held back by the adversary, but never past
``max(sent_at, gst) + post_gst_bound`` (plus ``slack`` for pre-GST sends).
Only Byzantine links may be dropped, and only Byzantine identities may
inject or replay.
"""

from __future__ import annotations

import heapq
import json
import logging
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Protocol

from .core import Partition, QuorumSystem

log = logging.getLogger(__name__)


class ScriptError(ValueError):
    pass


class SimulationFault(RuntimeError):
    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace


# ---------------------------------------------------------------- messages

def canon(x: Any) -> Any:
    """Immutable canonical form: lists become tuples, sets become sorted tuples."""
    if isinstance(x, (list, tuple)):
        return tuple(canon(y) for y in x)
    if isinstance(x, (set, frozenset)):
        return tuple(sorted((canon(y) for y in x), key=_sort_key))
    return x


def _sort_key(x):
    return json.dumps(to_json(x))


def to_json(x: Any) -> Any:
    if isinstance(x, tuple):
        return [to_json(y) for y in x]
    return x


@dataclass(frozen=True)
class Msg:
    kind: str
    val: Any = None
    inst: str = ""

    def wire(self) -> dict:
        return {"inst": self.inst, "kind": self.kind, "val": to_json(self.val)}

    @classmethod
    def from_wire(cls, d: dict) -> "Msg":
        return cls(d["kind"], canon(d.get("val")), d.get("inst", ""))


@dataclass(frozen=True)
class Batch:
    sender: int
    receiver: int
    messages: tuple[Msg, ...]
    sent_at: int


# ---------------------------------------------------------------- events and effects

@dataclass(frozen=True)
class Request:
    op: str
    arg: Any = None


@dataclass(frozen=True)
class Deliver:
    sender: int
    msgs: tuple[Msg, ...]


@dataclass(frozen=True)
class TimerFire:
    tag: Any


@dataclass(frozen=True)
class Send:
    to: int
    msg: Msg


@dataclass(frozen=True)
class Respond:
    op: str
    val: Any = None
    info: Any = None


@dataclass(frozen=True)
class StartTimer:
    delay: int
    tag: Any


class ProcessLike(Protocol):
    def on(self, event) -> list: ...


Factory = Callable[[int, QuorumSystem, Partition], ProcessLike]


# ---------------------------------------------------------------- adversary

def _as_set(x) -> frozenset | None:
    if x is None:
        return None
    if isinstance(x, (list, tuple, set, frozenset)):
        return frozenset(x)
    return frozenset([x])


@dataclass(frozen=True)
class Selector:
    frm: frozenset | None = None
    to: frozenset | None = None
    kinds: frozenset | None = None
    insts: frozenset | None = None
    val: Any = None
    has_val: bool = False
    sent_min: int | None = None
    sent_max: int | None = None

    @classmethod
    def parse(cls, d: dict) -> "Selector":
        return cls(
            frm=_as_set(d.get("from")),
            to=_as_set(d.get("to")),
            kinds=_as_set(d.get("kind")),
            insts=_as_set(d.get("inst")),
            val=canon(d.get("val")),
            has_val="val" in d,
            sent_min=d.get("sent_min"),
            sent_max=d.get("sent_max"),
        )

    def msg_ok(self, m: Msg) -> bool:
        if self.kinds is not None and m.kind not in self.kinds:
            return False
        if self.insts is not None and m.inst not in self.insts:
            return False
        if self.has_val and m.val != self.val:
            return False
        return True

    def match(self, sender: int, receiver: int, msgs: Iterable[Msg], t: int) -> bool:
        if self.frm is not None and sender not in self.frm:
            return False
        if self.to is not None and receiver not in self.to:
            return False
        if self.sent_min is not None and t < self.sent_min:
            return False
        if self.sent_max is not None and t > self.sent_max:
            return False
        if self.kinds is None and self.insts is None and not self.has_val:
            return True
        return any(self.msg_ok(m) for m in msgs)

    def may_touch(self, procs: frozenset, side: str) -> bool:
        s = self.frm if side == "from" else self.to
        return s is None or bool(s & procs)


@dataclass
class Delay:
    sel: Selector
    until: int
    limit: int | None = None
    used: int = 0


@dataclass
class Drop:
    sel: Selector
    limit: int | None = None
    used: int = 0


@dataclass(frozen=True)
class Inject:
    sender: int
    receiver: int
    msgs: tuple[Msg, ...]
    at: int
    deliver_at: int | None = None


@dataclass(frozen=True)
class Silence:
    process: int
    from_time: int


@dataclass
class AdversaryScript:
    directives: list = field(default_factory=list)

    def __add__(self, other: "AdversaryScript") -> "AdversaryScript":
        return AdversaryScript(list(self.directives) + list(other.directives))

    @classmethod
    def parse(cls, items: list[dict]) -> "AdversaryScript":
        out = []
        for d in items:
            op = d.get("op")
            if op == "delay":
                out.append(Delay(Selector.parse(d.get("match", {})), int(d["until"]), d.get("limit")))
            elif op == "drop":
                out.append(Drop(Selector.parse(d.get("match", {})), d.get("limit")))
            elif op == "inject":
                msgs = tuple(Msg.from_wire(m) for m in d["msgs"])
                tos = d["to"] if isinstance(d["to"], list) else [d["to"]]
                for r in tos:
                    out.append(Inject(int(d["from"]), int(r), msgs, int(d["at"]), d.get("deliver_at")))
            elif op == "silence":
                out.append(Silence(int(d["process"]), int(d.get("from_time", 0))))
            elif op == "replay":
                # resolved by the scenario loader, which owns the referenced traces
                out.append(d)
            else:
                raise ScriptError(f"unknown adversary directive {op!r}")
        return cls(out)


# ---------------------------------------------------------------- trace

@dataclass(frozen=True)
class TraceEntry:
    t: int
    kind: str
    frm: int | None
    to: int | None
    msgs: tuple[Msg, ...] = ()
    note: Any = None

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "kind": self.kind,
            "from": self.frm,
            "to": self.to,
            "msgs": [m.wire() for m in self.msgs],
            "note": to_json(self.note),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TraceEntry":
        return cls(d["t"], d["kind"], d["from"], d["to"], tuple(Msg.from_wire(m) for m in d["msgs"]), canon(d["note"]))


@dataclass
class Trace:
    entries: list[TraceEntry] = field(default_factory=list)
    truncated: bool = False
    steps: int = 0

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def of_kind(self, kind: str) -> list[TraceEntry]:
        return [e for e in self.entries if e.kind == kind]

    def responses(self, op: str | None = None, process: int | None = None) -> list[TraceEntry]:
        return [
            e
            for e in self.entries
            if e.kind == "response" and (op is None or e.note[0] == op) and (process is None or e.frm == process)
        ]

    def to_jsonl(self) -> str:
        lines = [json.dumps(e.as_dict(), ensure_ascii=False, separators=(",", ":")) for e in self.entries]
        end = {"t": self.entries[-1].t if self.entries else 0, "kind": "end", "from": None, "to": None,
               "msgs": [], "note": {"steps": self.steps, "truncated": self.truncated}}
        lines.append(json.dumps(end, separators=(",", ":")))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "Trace":
        tr = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            if d["kind"] == "end":
                tr.truncated = bool(d["note"]["truncated"])
                tr.steps = int(d["note"]["steps"])
                continue
            tr.entries.append(TraceEntry.from_dict(d))
        return tr


def view_of(trace: Trace, p: int, up_to: int | None = None) -> list[tuple[int, tuple[Msg, ...]]]:
    return [
        (e.frm, e.msgs)
        for e in trace.entries
        if e.kind == "deliver" and e.to == p and (up_to is None or e.t <= up_to)
    ]


def view_normal_form(view) -> str:
    return "\n".join(json.dumps([s, [m.wire() for m in msgs]], separators=(",", ":")) for s, msgs in view)


def replay_from(
    trace: Trace,
    source: int,
    *,
    receivers: Iterable[int] | None = None,
    shift: int = 0,
    since: int | None = None,
    until: int | None = None,
    keep_delivery: bool = True,
) -> AdversaryScript:
    """Re-send ``source``'s recorded batches; the caller makes ``source`` Byzantine."""
    rs = None if receivers is None else set(receivers)
    sends = {}
    out = []
    for i, e in enumerate(trace.entries):
        if e.kind == "send" and e.frm == source and (rs is None or e.to in rs):
            if e.note and e.note[0] == "dropped":
                continue
            if since is not None and e.t < since:
                continue
            if until is not None and e.t > until:
                continue
            sends[i] = e
    if not sends and not any(e.kind == "send" and e.frm == source for e in trace.entries):
        raise ScriptError(f"trace has no sends from process {source}")
    for e in sends.values():
        at = e.t + shift
        deliver = e.note[-1] + shift if keep_delivery and e.note and e.note[0] in ("arrive", "injected") else None
        out.append(Inject(source, e.to, e.msgs, at, deliver))
    return AdversaryScript(out)


# ---------------------------------------------------------------- configuration

@dataclass(frozen=True)
class NetConfig:
    gst: int = 0
    post_gst_bound: int = 2
    seed: int = 0
    max_steps: int = 100_000
    max_time: int | None = None
    default_delay: int = 1
    random_delays: bool = False
    pre_gst_max_delay: int = 6
    slack: int = 0

    def __post_init__(self):
        if self.gst < 0:
            raise ScriptError("gst must be non-negative")
        if self.post_gst_bound < 1:
            raise ScriptError("post_gst_bound must be at least 1")
        if self.default_delay < 1 or self.default_delay > self.post_gst_bound:
            raise ScriptError("default_delay must lie in [1, post_gst_bound]")

    @property
    def horizon(self) -> int:
        return self.gst + self.post_gst_bound + self.slack

    def deadline(self, t: int) -> int:
        return t + self.post_gst_bound if t >= self.gst else max(t + 1, self.horizon)


# ---------------------------------------------------------------- simulation

_REQ = -1
_INJ = -2


class Simulation:
    def __init__(
        self,
        cfg: NetConfig,
        system: QuorumSystem,
        partition: Partition,
        factory: Factory,
        script: AdversaryScript | None = None,
        *,
        honest_byzantine: Iterable[int] = (),
        record_claims: Callable[[Msg], Iterable[tuple]] | None = None,
    ):
        self.cfg = cfg
        self.system = system
        self.partition = partition
        self.wb = partition.well_behaved
        self.byz = partition.byzantine
        self.rng = random.Random(cfg.seed)
        self.now = 0
        self.trace = Trace()
        self._queue: list = []
        self._seq = 0
        self.steps = 0
        self.record_claims = record_claims
        self._sent_records: set = set()
        self.responses: dict[int, list[Respond]] = {}
        self.procs: dict[int, ProcessLike] = {}
        active = set(self.wb) | (set(honest_byzantine) & set(self.byz))
        for p in sorted(active):
            try:
                self.procs[p] = factory(p, system, partition)
            except Exception as exc:
                raise SimulationFault(f"factory failed for process {p}: {exc}") from exc
        self.delays: list[Delay] = []
        self.drops: list[Drop] = []
        self.silenced: dict[int, int] = {}
        if script is not None:
            self._load(script)

    # -- script

    def _load(self, script: AdversaryScript):
        for d in script.directives:
            if isinstance(d, Delay):
                if d.sel.may_touch(self.wb, "from") and d.sel.may_touch(self.wb, "to"):
                    # the latest send the selector admits bounds how long it may hold a batch
                    last = d.sel.sent_max if d.sel.sent_max is not None else (d.sel.sent_min or 0)
                    if d.until > self.cfg.deadline(last):
                        raise ScriptError(
                            f"delay until {d.until} may hold a well-behaved batch sent at {last} "
                            f"past its deadline {self.cfg.deadline(last)}"
                        )
                self.delays.append(d)
            elif isinstance(d, Drop):
                if not ((d.sel.frm is not None and d.sel.frm <= self.byz) or (d.sel.to is not None and d.sel.to <= self.byz)):
                    raise ScriptError("drop directives must be restricted to Byzantine senders or receivers")
                self.drops.append(d)
            elif isinstance(d, Inject):
                if d.sender not in self.byz:
                    raise ScriptError(f"cannot inject as well-behaved process {d.sender}")
                if d.receiver not in self.system.universe:
                    raise ScriptError(f"unknown receiver {d.receiver}")
                self._push(d.at, d.sender, _INJ, ("inject", d))
            elif isinstance(d, Silence):
                if d.process not in self.byz:
                    raise ScriptError(f"cannot silence well-behaved process {d.process}")
                self.silenced[d.process] = min(d.from_time, self.silenced.get(d.process, d.from_time))
            else:
                raise ScriptError(f"unresolved directive {d!r}")

    def _push(self, t: int, receiver: int, sender_key: int, item):
        self._seq += 1
        heapq.heappush(self._queue, (t, receiver, sender_key, self._seq, item))

    # -- public scheduling

    def request(self, t: int, p: int, op: str, arg: Any = None):
        self._push(t, p, _REQ, ("request", Request(op, canon(arg))))

    # -- delivery timing

    def _natural_delay(self, sender: int, receiver: int, t: int) -> int:
        if not self.cfg.random_delays:
            return self.cfg.default_delay
        if t >= self.cfg.gst:
            return self.rng.randint(1, self.cfg.post_gst_bound)
        return self.rng.randint(1, self.cfg.pre_gst_max_delay)

    def _arrival(self, sender: int, receiver: int, msgs, t: int) -> int | None:
        """Delivery time, or None when the batch is dropped."""
        if sender in self.byz and sender in self.silenced and t >= self.silenced[sender]:
            return None
        for d in self.drops:
            if (d.limit is None or d.used < d.limit) and d.sel.match(sender, receiver, msgs, t):
                d.used += 1
                return None
        at = t + self._natural_delay(sender, receiver, t)
        for d in self.delays:
            if (d.limit is None or d.used < d.limit) and d.sel.match(sender, receiver, msgs, t):
                d.used += 1
                at = max(at, d.until)
        if sender in self.wb and receiver in self.wb:
            at = min(at, self.cfg.deadline(t))
        return max(at, t)

    def _send_batch(self, sender: int, receiver: int, msgs: tuple[Msg, ...], at_override: int | None = None, note=None):
        t = self.now
        if at_override is not None:
            at = max(t, at_override)
        else:
            at = self._arrival(sender, receiver, msgs, t)
        if at is None:
            self.trace.entries.append(TraceEntry(t, "send", sender, receiver, msgs, ("dropped",)))
            return
        self.trace.entries.append(TraceEntry(t, "send", sender, receiver, msgs, ("arrive", at) if note is None else note + (at,)))
        if self.record_claims is not None:
            for m in msgs:
                self._sent_records.add((sender, m.kind, m.val))
        self._push(at, receiver, sender, ("deliver", Batch(sender, receiver, msgs, t)))

    def _forged(self, sender: int, msgs) -> bool:
        if self.record_claims is None:
            return False
        for m in msgs:
            for origin, kind, val in self.record_claims(m):
                if origin in self.wb and (origin, kind, val) not in self._sent_records:
                    return True
        return False

    def _apply_effects(self, p: int, effects: list):
        outgoing: dict[int, list[Msg]] = {}
        for eff in effects:
            if isinstance(eff, Send):
                outgoing.setdefault(eff.to, []).append(eff.msg)
            elif isinstance(eff, Respond):
                self.responses.setdefault(p, []).append(eff)
                note = (eff.op, eff.val) if eff.info is None else (eff.op, eff.val, eff.info)
                self.trace.entries.append(TraceEntry(self.now, "response", p, None, (), canon(note)))
            elif isinstance(eff, StartTimer):
                self._push(self.now + max(0, eff.delay), p, _REQ, ("timer", TimerFire(canon(eff.tag))))
            else:
                raise SimulationFault(f"unknown effect {eff!r}", self.trace)
        for r in sorted(outgoing):
            if r not in self.system.universe:
                log.warning("process %s sent to unknown process %s", p, r)
                continue
            self._send_batch(p, r, tuple(outgoing[r]))

    # -- stepping

    def pending(self) -> int:
        return len(self._queue)

    def next_time(self) -> int | None:
        return self._queue[0][0] if self._queue else None

    def run_until(self, t: int) -> None:
        """Process every event scheduled at or before ``t``."""
        while self._queue and self._queue[0][0] <= t:
            if self.step() is None:
                break

    def step(self) -> TraceEntry | None:
        if not self._queue or self.steps >= self.cfg.max_steps:
            return None
        t, receiver, _, _, item = self._queue[0]
        if self.cfg.max_time is not None and t > self.cfg.max_time:
            return None
        heapq.heappop(self._queue)
        self.now = t
        self.steps += 1
        kind = item[0]
        if kind == "inject":
            d: Inject = item[1]
            if self._forged(d.sender, d.msgs):
                entry = TraceEntry(t, "send", d.sender, d.receiver, d.msgs, ("rejected",))
                self.trace.entries.append(entry)
                return entry
            before = len(self.trace.entries)
            self._send_batch(d.sender, d.receiver, d.msgs, d.deliver_at, ("injected",))
            return self.trace.entries[before] if len(self.trace.entries) > before else None
        if kind == "deliver":
            b: Batch = item[1]
            entry = TraceEntry(t, "deliver", b.sender, b.receiver, b.messages)
            event = Deliver(b.sender, b.messages)
        elif kind == "timer":
            event = item[1]
            entry = TraceEntry(t, "timer", receiver, receiver, (), event.tag)
        else:
            event = item[1]
            entry = TraceEntry(t, "request", None, receiver, (), (event.op, event.arg))
        self.trace.entries.append(entry)
        proc = self.procs.get(receiver)
        if proc is None:
            return entry
        try:
            effects = proc.on(event)
        except Exception as exc:
            raise SimulationFault(f"handler of process {receiver} failed at t={t}: {exc!r}", self.trace) from exc
        self._apply_effects(receiver, effects or [])
        return entry

    def run_until_quiescent(self, stop: Callable[["Simulation"], bool] | None = None) -> Trace:
        while True:
            if stop is not None and stop(self):
                break
            if self.step() is None:
                break
        self.trace.steps = self.steps
        self.trace.truncated = bool(self._queue) and (stop is None or not stop(self))
        return self.trace


def new_sim(cfg: NetConfig, system: QuorumSystem, partition: Partition, factory: Factory, script=None, **kw) -> Simulation:
    return Simulation(cfg, system, partition, factory, script, **kw)


def step(sim: Simulation) -> TraceEntry | None:
    return sim.step()


def run_until_quiescent(sim: Simulation, stop=None) -> Trace:
    return sim.run_until_quiescent(stop)


class TraceReplay(Simulation):
    """Re-run the processes against a recorded trace.

    Arrival times (and drops) of well-behaved sends come from the record;
    sends by processes that are not simulated become injections. The replay
    therefore needs no adversary script and no random source.
    """

    def __init__(self, cfg: NetConfig, system: QuorumSystem, partition: Partition, factory: Factory,
                 trace: Trace, **kw):
        super().__init__(cfg, system, partition, factory, None, **kw)
        self._arrivals: dict[tuple, list] = {}
        injects = []
        for e in trace.entries:
            if e.kind == "send":
                if e.frm in self.procs:
                    at = None if e.note and e.note[0] == "dropped" else e.note[-1]
                    self._arrivals.setdefault((e.t, e.frm, e.to, e.msgs), []).append(at)
                else:
                    at = e.note[-1] if e.note and e.note[0] == "injected" else None
                    injects.append(Inject(e.frm, e.to, e.msgs, e.t, at))
            elif e.kind == "request":
                self.request(e.t, e.to, e.note[0], e.note[1])
        self._load(AdversaryScript(injects))

    def _arrival(self, sender, receiver, msgs, t):
        try:
            return self._arrivals[(t, sender, receiver, tuple(msgs))].pop(0)
        except (KeyError, IndexError):
            raise SimulationFault(f"replay diverged: unrecorded send {sender}->{receiver} at t={t}", self.trace)
