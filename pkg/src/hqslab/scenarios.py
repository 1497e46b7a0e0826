"""System and scenario files, the canned scenarios, and expectation checking."""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any

from .brb import BrbState, brb_factory, fv_factory, lock_status
from .consensus import BOTTOM, ConsensusParams, ConsensusState, consensus_factory
from .core import InvalidSystem, Partition, QuorumSystem, strongly_available_set, weakly_available_set
from .discovery import DiscoveryElection, discovery_factory, record_claims
from .graph import build_graph, sink_component
from .sim import (
    AdversaryScript,
    NetConfig,
    ScriptError,
    Simulation,
    Trace,
    TraceReplay,
    canon,
    replay_from,
    view_normal_form,
    view_of,
)
from .slices import SliceViews, derive_system
from .stack import StackProcess, stack_factory

FORMAT = 1
PROTOCOLS = ("brb", "fv", "consensus", "discovery", "election", "stack")


class InputError(ValueError):
    """Bad system or scenario input; the message carries a file position when known."""


# ---------------------------------------------------------------- files

def data_dir() -> Path:
    return Path(str(resources.files("hqslab") / "data"))


def canned_names() -> list[str]:
    return sorted(p.stem for p in (data_dir() / "scenarios").glob("*.json"))


def _where(text: str, needle: str) -> str:
    idx = text.find(needle)
    if idx < 0:
        return ""
    line = text.count("\n", 0, idx) + 1
    col = idx - (text.rfind("\n", 0, idx) + 1) + 1
    return f"line {line}, column {col}"


def _read_json(path: Path) -> tuple[Any, str]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot read: {exc.strerror}") from exc
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _fail(src: str, text: str, needle: str, msg: str):
    pos = _where(text, needle) if text else ""
    raise InputError(f"{src}: {pos + ': ' if pos else ''}{msg}")


@dataclass
class LoadedSystem:
    qs: QuorumSystem
    part: Partition
    views: SliceViews | None = None
    values: tuple | None = None
    name: str = ""


def parse_system(d: dict, *, src: str = "<system>", text: str = "") -> LoadedSystem:
    if not isinstance(d, dict):
        raise InputError(f"{src}: a system must be a JSON object")
    if d.get("format", FORMAT) != FORMAT:
        _fail(src, text, '"format"', f"unsupported format {d.get('format')!r}")
    try:
        procs = [int(p) for p in d["processes"]]
    except (KeyError, TypeError, ValueError):
        _fail(src, text, '"processes"', "'processes' must be a list of integers")
    byz = [int(p) for p in d.get("byzantine", [])]
    if not set(byz) <= set(procs):
        _fail(src, text, '"byzantine"', "Byzantine processes must be listed in 'processes'")
    views = None
    try:
        if "slices" in d:
            honest = {int(k): v for k, v in d["slices"].items()}
            presented = {int(k): {int(o): ss for o, ss in per.items()} for k, per in d.get("presented", {}).items()}
            views = SliceViews.build(procs, honest, presented)
            part = Partition(frozenset(procs), frozenset(byz))
            qs = derive_system(views, part)
        else:
            raw = d.get("quorums")
            if not isinstance(raw, dict):
                _fail(src, text, '"quorums"', "'quorums' must map process ids to lists of quorums")
            for k, v in raw.items():
                if not v:
                    _fail(src, text, f'"{k}"', f"process {k} declares an empty quorum list")
            qs = QuorumSystem.of({int(k): v for k, v in raw.items()}, universe=procs)
        part = Partition.of(qs, byz)
    except InvalidSystem as exc:
        m = re.search(r"process (\d+)", str(exc))
        _fail(src, text, f'"{m.group(1)}"' if m else '"quorums"', str(exc))
    values = tuple(d["values"]) if "values" in d else None
    return LoadedSystem(qs, part, views, values, d.get("name", ""))


def _resolve(ref: str, base: Path | None, sub: str) -> Path:
    cands = []
    if base is not None:
        cands.append(base / ref)
    cands.append(Path(ref))
    stem = ref[:-5] if ref.endswith(".json") else ref
    cands.append(data_dir() / sub / f"{stem}.json")
    for c in cands:
        if c.is_file():
            return c
    raise InputError(f"cannot find {sub[:-1]} {ref!r}")


def load_system(path: str | Path) -> tuple[QuorumSystem, Partition, SliceViews | None]:
    ls = load_system_file(path)
    return ls.qs, ls.part, ls.views


def load_system_file(path: str | Path, base: Path | None = None) -> LoadedSystem:
    p = _resolve(str(path), base, "systems")
    d, text = _read_json(p)
    return parse_system(d, src=str(p), text=text)


# ---------------------------------------------------------------- scenarios

@dataclass
class Scenario:
    name: str
    system: LoadedSystem
    protocol: str
    net: NetConfig
    raw: dict
    base: Path | None = None
    sender: int | None = None
    params: ConsensusParams | None = None
    inputs: list = field(default_factory=list)
    adversary: list = field(default_factory=list)
    expect: dict = field(default_factory=dict)
    honest_byzantine: tuple = ()
    variants: list = field(default_factory=list)
    description: str = ""


def _params(d: dict, values) -> ConsensusParams:
    kw = {}
    if "values" in d or values is not None:
        kw["values"] = tuple(d.get("values", values))
    for k in ("timeout_base", "delta"):
        if k in d:
            kw[k] = int(d[k])
    if d.get("leader_order"):
        kw["leader_order"] = tuple(int(x) for x in d["leader_order"])
    return ConsensusParams(**kw)


def parse_scenario(d: dict, *, src: str = "<scenario>", text: str = "", base: Path | None = None) -> Scenario:
    if not isinstance(d, dict):
        raise InputError(f"{src}: a scenario must be a JSON object")
    if d.get("format", FORMAT) != FORMAT:
        _fail(src, text, '"format"', f"unsupported format {d.get('format')!r}")
    sysref = d.get("system")
    if isinstance(sysref, str):
        system = load_system_file(sysref, base)
    elif isinstance(sysref, dict):
        system = parse_system(sysref, src=src, text=text)
    else:
        _fail(src, text, '"system"', "'system' must be a file reference or an inline system")
    if "byzantine" in d:
        try:
            system = replace(system, part=Partition.of(system.qs, [int(x) for x in d["byzantine"]]))
        except InvalidSystem as exc:
            _fail(src, text, '"byzantine"', str(exc))
    proto = d.get("protocol")
    if proto not in PROTOCOLS:
        _fail(src, text, '"protocol"', f"protocol must be one of {', '.join(PROTOCOLS)}")
    try:
        net = NetConfig(**d.get("net", {}))
    except TypeError as exc:
        _fail(src, text, '"net"', f"bad net config: {exc}")
    except ScriptError as exc:
        _fail(src, text, '"net"', str(exc))
    sender = d.get("sender")
    if proto == "brb" and sender is None:
        _fail(src, text, '"protocol"', "brb scenarios need a 'sender'")
    params = None
    if proto in ("consensus", "stack"):
        params = _params(d.get("consensus", {}), system.values)
    return Scenario(
        name=d.get("name", Path(src).stem),
        system=system,
        protocol=proto,
        net=net,
        raw=d,
        base=base,
        sender=sender,
        params=params,
        inputs=list(d.get("inputs", [])),
        adversary=list(d.get("adversary", [])),
        expect=dict(d.get("expect", {})),
        honest_byzantine=tuple(d.get("honest_byzantine", ())),
        variants=list(d.get("variants", [])),
        description=d.get("description", ""),
    )


def load_scenario(ref: str | Path) -> Scenario:
    p = _resolve(str(ref), None, "scenarios")
    d, text = _read_json(p)
    return parse_scenario(d, src=str(p), text=text, base=p.parent)


def variant(sc: Scenario, v: dict) -> Scenario:
    """Apply a variant's overrides (net, consensus, adversary, inputs)."""
    raw = copy.deepcopy(sc.raw)
    for k in ("net", "consensus"):
        if k in v:
            raw[k] = {**raw.get(k, {}), **v[k]}
    for k in ("adversary", "inputs", "expect"):
        if k in v:
            raw[k] = v[k]
    raw["name"] = f"{sc.name}:{v['name']}"
    raw.pop("variants", None)
    out = parse_scenario(raw, src=raw["name"], base=sc.base)
    out.system = sc.system
    return out


# ---------------------------------------------------------------- running

def _factory(sc: Scenario):
    if sc.protocol == "brb":
        return brb_factory(int(sc.sender))
    if sc.protocol == "fv":
        return fv_factory
    if sc.protocol == "consensus":
        return consensus_factory(sc.params)
    if sc.protocol == "discovery":
        return discovery_factory(elect=False)
    if sc.protocol == "election":
        return discovery_factory(elect=True)
    return stack_factory(sc.params)


_trace_cache: dict = {}


def _referenced_trace(ref: str, base: Path | None) -> Trace:
    p = _resolve(ref, base, "scenarios")
    key = str(p.resolve())
    if key not in _trace_cache:
        _trace_cache[key] = run(load_scenario(p)).trace
    return _trace_cache[key]


def build_script(sc: Scenario) -> AdversaryScript:
    plain = [d for d in sc.adversary if d.get("op") != "replay"]
    script = AdversaryScript.parse(plain)
    for d in sc.adversary:
        if d.get("op") != "replay":
            continue
        if "scenario" in d:
            tr = _referenced_trace(d["scenario"], sc.base)
        elif "trace" in d:
            tp = Path(d["trace"]) if sc.base is None else sc.base / d["trace"]
            tr = Trace.from_jsonl(tp.read_text(encoding="utf-8"))
        else:
            raise ScriptError("replay directive needs 'scenario' or 'trace'")
        script = script + replay_from(
            tr,
            int(d["source"]),
            receivers=d.get("to"),
            shift=int(d.get("shift", 0)),
            since=d.get("since"),
            until=d.get("until"),
            keep_delivery=bool(d.get("keep_delivery", True)),
        )
    return script


def _inputs(sc: Scenario) -> list[dict]:
    if sc.inputs or sc.protocol not in ("discovery", "election", "stack"):
        return sc.inputs
    return [{"at": 0, "process": p, "op": "discover"} for p in sorted(sc.system.part.well_behaved)]


def build_sim(sc: Scenario, *, seed: int | None = None, max_steps: int | None = None) -> Simulation:
    net = sc.net
    if seed is not None:
        net = replace(net, seed=seed)
    if max_steps is not None:
        net = replace(net, max_steps=max_steps)
    claims = record_claims if sc.protocol in ("discovery", "election", "stack") else None
    sim = Simulation(
        net,
        sc.system.qs,
        sc.system.part,
        _factory(sc),
        build_script(sc),
        honest_byzantine=sc.honest_byzantine,
        record_claims=claims,
    )
    for i in sorted(_inputs(sc), key=lambda x: x.get("at", 0)):
        sim.request(int(i.get("at", 0)), int(i["process"]), i["op"], i.get("arg"))
    return sim


def replay_trace(sc: Scenario, trace: Trace) -> Simulation:
    """Simulation of ``sc`` whose network follows ``trace`` instead of the adversary."""
    claims = record_claims if sc.protocol in ("discovery", "election", "stack") else None
    return TraceReplay(sc.net, sc.system.qs, sc.system.part, _factory(sc), trace,
                       honest_byzantine=sc.honest_byzantine, record_claims=claims)


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""


@dataclass
class RunResult:
    scenario: Scenario
    sim: Simulation
    trace: Trace
    checks: list[Check] = field(default_factory=list)
    variants: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks) and all(v.ok for v in self.variants.values())


def run(sc: Scenario, *, seed: int | None = None, max_steps: int | None = None) -> RunResult:
    sim = build_sim(sc, seed=seed, max_steps=max_steps)
    checks: list[Check] = []
    for cp in sorted(sc.expect.get("checkpoints", []), key=lambda c: c["at"]):
        sim.run_until(int(cp["at"]))
        checks += evaluate(sim, {k: v for k, v in cp.items() if k != "at"}, sc, label=f"@{cp['at']} ")
    trace = sim.run_until_quiescent()
    checks += evaluate(sim, {k: v for k, v in sc.expect.items() if k not in ("checkpoints", "compare")}, sc)
    res = RunResult(sc, sim, trace, checks)
    if sc.variants:
        for v in sc.variants:
            res.variants[v["name"]] = run(variant(sc, v), seed=seed, max_steps=max_steps)
        res.checks += compare(res, sc.expect.get("compare", {}))
    return res


# ---------------------------------------------------------------- expectations

def _key(p) -> int:
    return int(p)


def _cons(sim: Simulation, p: int) -> ConsensusState | None:
    proc = sim.procs.get(p)
    if isinstance(proc, ConsensusState):
        return proc
    if isinstance(proc, StackProcess):
        return proc.cons
    return None


def _disc(sim: Simulation, p: int) -> DiscoveryElection | None:
    proc = sim.procs.get(p)
    if isinstance(proc, DiscoveryElection):
        return proc
    if isinstance(proc, StackProcess):
        return proc.de
    return None


def delivered(sim: Simulation, p: int, inst: str = "") -> Any:
    for r in sim.responses.get(p, []):
        if r.op == "deliver" and (r.info or "") == inst:
            return r.val
    return None


def first_emissions(trace: Trace, until: int | None = None) -> dict[tuple, int]:
    """First time each (process, kind, value) was sent or delivered."""
    out: dict[tuple, int] = {}
    for e in trace.entries:
        if until is not None and e.t > until:
            break
        if e.kind == "send" and e.note and e.note[0] != "rejected":
            for m in e.msgs:
                out.setdefault((e.frm, m.kind, m.val), e.t)
        elif e.kind == "response" and e.note[0] == "deliver":
            out.setdefault((e.frm, "DELIVER", e.note[1]), e.t)
    return out


def _check_sequence(trace: Trace, spec: dict) -> Check:
    rows = [[(int(a), k, canon(v)) for a, k, v in row] for row in spec["rows"]]
    firsts = first_emissions(trace, spec.get("until"))
    last = -1
    for i, row in enumerate(rows):
        ts = []
        for ev in row:
            if ev not in firsts:
                return Check("sequence", False, f"row {i + 1}: {ev} never happened")
            ts.append(firsts[ev])
        if min(ts) < last:
            return Check("sequence", False, f"row {i + 1} starts at t={min(ts)} before the previous row (t={last})")
        last = max(ts)
    if spec.get("exact"):
        listed = {ev for row in rows for ev in row}
        extra = sorted((k for k in firsts if k not in listed), key=str)
        if extra:
            return Check("sequence", False, f"unlisted events: {extra}")
    return Check("sequence", True, f"{len(rows)} rows in order")


def evaluate(sim: Simulation, exp: dict, sc: Scenario, label: str = "") -> list[Check]:
    out: list[Check] = []
    wb = sc.system.part.well_behaved

    def add(name, ok, detail=""):
        out.append(Check(label + name, bool(ok), detail))

    for p, v in exp.get("delivered", {}).items():
        got = delivered(sim, _key(p))
        add(f"delivered[{p}]", got == canon(v), f"got {got!r}")
    for p in exp.get("not_delivered", []):
        got = delivered(sim, _key(p))
        add(f"not_delivered[{p}]", got is None, f"got {got!r}")
    if "ready" in exp:
        for p, v in exp["ready"].items():
            st = sim.procs[_key(p)].instance("")
            add(f"ready[{p}]", st.readied and st.ready_val == canon(v), f"got {st.ready_val!r}")
    if "sequence" in exp:
        c = _check_sequence(sim.trace, exp["sequence"])
        out.append(Check(label + c.name, c.ok, c.detail))
    for p, v in exp.get("decided", {}).items():
        st = _cons(sim, _key(p))
        add(f"decided[{p}]", st is not None and st.decided == v, f"got {None if st is None else st.decided!r}")
    for p in exp.get("undecided", []):
        st = _cons(sim, _key(p))
        add(f"undecided[{p}]", st is not None and st.decided is None, f"got {None if st is None else st.decided!r}")
    for p, b in exp.get("decided_ballot", {}).items():
        st = _cons(sim, _key(p))
        got = None if st is None or st.decided_ballot is None else st.decided_ballot.key
        add(f"decided_ballot[{p}]", got == b, f"got {got}")
    for p, traj in exp.get("prepared_trajectory", {}).items():
        st = _cons(sim, _key(p))
        got = [BOTTOM.key] + [b.key for b in st.prepared_log] if st else None
        add(f"prepared_trajectory[{p}]", got == traj, f"got {got}")
    for p, traj in exp.get("candidates", {}).items():
        st = _cons(sim, _key(p))
        got = [b.key for b in st.candidate_log] if st else None
        add(f"candidates[{p}]", got == traj, f"got {got}")
    if exp.get("agreement"):
        ds = {p: _cons(sim, p).decided for p in wb if _cons(sim, p) and _cons(sim, p).decided is not None}
        add("agreement", len(set(ds.values())) <= 1, f"decisions {ds}")
    if exp.get("strong_all_decide"):
        strong = strongly_available_set(sc.system.qs, sc.system.part)
        missing = sorted(p for p in strong if _cons(sim, p) is None or _cons(sim, p).decided is None)
        add("strong_all_decide", not missing, f"undecided strongly available: {missing}")
    if "in_sink" in exp:
        got = sorted(p for p in wb if _disc(sim, p) and _disc(sim, p).disc.in_sink)
        add("in_sink", got == sorted(exp["in_sink"]), f"got {got}")
    if "sink_phase" in exp:
        for p, ph in exp["sink_phase"].items():
            d = _disc(sim, _key(p))
            add(f"sink_phase[{p}]", d is not None and d.disc.phase == ph, f"got {None if d is None else d.disc.phase}")
    if exp.get("in_sink_matches_graph"):
        sink = sink_component(build_graph(sc.system.qs)).members
        got = {p for p in wb if _disc(sim, p) and _disc(sim, p).disc.in_sink}
        add("in_sink_matches_graph", got == set(sink) & set(wb), f"protocol {sorted(got)} graph {sorted(sink)}")
    for p, leader in exp.get("elected", {}).items():
        d = _disc(sim, _key(p))
        add(f"elected[{p}]", d is not None and d.elected == leader, f"got {None if d is None else d.elected}")
    if "lock" in exp:
        for spec in exp["lock"] if isinstance(exp["lock"], list) else [exp["lock"]]:
            states = {}
            for p in wb:
                st = _cons(sim, p)
                states[p] = st.instance(spec["inst"]) if st else sim.procs[p].instance(spec["inst"])
            got = lock_status(sc.system.qs, sc.system.part, states, spec["value"])
            add(f"lock[{spec['inst']}={spec['value']}]", got == spec["status"], f"got {got}")
    if "view_equal" in exp:
        ve = exp["view_equal"]
        other = _referenced_trace(ve["scenario"], sc.base)
        p, t = int(ve["process"]), ve.get("up_to")
        mine, theirs = view_normal_form(view_of(sim.trace, p, t)), view_normal_form(view_of(other, p, t))
        add("view_equal", mine == theirs and bool(mine), f"{len(mine)} vs {len(theirs)} bytes")
    if "no_truncation" in exp:
        add("no_truncation", not sim.trace.truncated or not exp["no_truncation"])
    return out


def decision_round(res: RunResult) -> int | None:
    """Largest round at which a strongly available process decided, None if one never did."""
    strong = strongly_available_set(res.scenario.system.qs, res.scenario.system.part)
    rounds = []
    for p in strong:
        st = _cons(res.sim, p)
        if st is None or st.decided_ballot is None:
            return None
        rounds.append(st.decided_ballot.round)
    return max(rounds) if rounds else None


def compare(res: RunResult, spec: dict) -> list[Check]:
    out = []
    if "round_gap" in spec:
        g = spec["round_gap"]
        slow, fast = res.variants[g["slow"]], res.variants[g["fast"]]
        rs, rf = decision_round(slow), decision_round(fast)
        ok = rf is not None and (rs is None or rs - rf >= int(g["min"]))
        out.append(Check("round_gap", ok, f"{g['slow']} decides in round {rs}, {g['fast']} in round {rf}"))
    return out


def run_named(ref: str, **kw) -> RunResult:
    return run(load_scenario(ref), **kw)


def weak_and_strong(ls: LoadedSystem) -> tuple[frozenset, frozenset]:
    return weakly_available_set(ls.qs, ls.part), strongly_available_set(ls.qs, ls.part)
